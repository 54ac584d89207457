#pragma once

#include <string>

#include "ipost/layers.hpp"
#include "ipost/recognizers.hpp"

namespace ipost {

// Network checkpoint, plain text: a header line, the input shape, one line
// per layer (kind plus hyperparameters), then one "shape: ..." line per
// parameter tensor in layer order (weights before bias). Values are printed
// with nine significant digits, so save -> load -> save is byte-identical.
std::string serialize_checkpoint(const NetworkGraph& net);
void save_checkpoint(const NetworkGraph& net, const std::string& path);
NetworkGraph load_checkpoint(const std::string& path);
NetworkGraph parse_checkpoint(const std::string& text, const std::string& context);

// Enrollment gallery, same conventions: header with identity count and the
// accept threshold, then per identity a name line followed by one embedding
// line per enrolled image.
std::string serialize_gallery(const EmbeddingGallery& gallery);
void save_gallery(const EmbeddingGallery& gallery, const std::string& path);
EmbeddingGallery load_gallery(const std::string& path);
EmbeddingGallery parse_gallery(const std::string& text, const std::string& context);

// Nine significant digits: enough to reproduce any finite float exactly.
std::string format_float(float value);

}  // namespace ipost
