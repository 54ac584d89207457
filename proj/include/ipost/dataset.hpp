#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ipost/rng.hpp"
#include "ipost/tensor.hpp"
#include "ipost/training.hpp"

namespace ipost {

// Geometric pattern kinds used as synthetic item classes and face identities.
enum class GlyphKind { cross, disc, bar, ring, square, triangle, checker, diag };

constexpr int kGlyphKindCount = 8;

const char* glyph_name(GlyphKind kind);
std::optional<GlyphKind> glyph_from_name(const std::string& name);
GlyphKind glyph_by_index(int index);  // wraps modulo kGlyphKindCount

// 8-bit image, planar (channel, row, column) to mirror the tensor layout.
struct ByteImage {
    int channels = 1;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;
};

// P5 (1 channel) / P6 (3 channels), binary, maxval 255.
void write_pixmap(const ByteImage& image, const std::string& path);
ByteImage read_pixmap(const std::string& path);

Tensor image_to_tensor(const ByteImage& image);  // values scaled to [0,1]

struct SyntheticDatasetSpec {
    enum class Task { items, faces };

    Task task = Task::items;
    std::vector<std::string> class_names;  // item classes or face identities
    std::vector<GlyphKind> glyphs;         // parallel to class_names
    int image_size = 32;
    int channels = 1;
    int samples_per_class = 50;
    float noise = 0.3f;  // amplitude in [0,1)
    std::uint32_t seed = 0;
};

// Items: each named glyph kind becomes one class.
SyntheticDatasetSpec make_items_spec(const std::vector<std::string>& glyph_names);

// Faces: identities get distinct glyph kinds by position.
SyntheticDatasetSpec make_faces_spec(const std::vector<std::string>& identities);

void validate_spec(const SyntheticDatasetSpec& spec);

// One jittered, noisy sample of a glyph: translation up to 2 px plus
// uniform pixel noise, quantized to bytes.
ByteImage render_sample(GlyphKind kind, int size, int channels, float noise, Rng& rng);

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    std::string label;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Writes one pixmap per sample plus manifest.tsv; returns the entries.
std::vector<ManifestEntry> generate_dataset(const SyntheticDatasetSpec& spec,
                                            const std::string& output_dir);

// Generates the same samples as generate_dataset without touching disk.
LabeledDataset generate_dataset_in_memory(const SyntheticDatasetSpec& spec);

// Loads images listed in a manifest; label indices follow the lexicographic
// order of the distinct label names.
LabeledDataset load_labeled_dataset(const std::string& manifest_path);

}  // namespace ipost
