#include "ipost/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ipost {

namespace {

constexpr const char* kNetMagic = "ipost-net";
constexpr const char* kGalleryMagic = "ipost-gallery";

void append_tensor_line(std::string& out, const Tensor& tensor) {
    out += "shape:";
    for (const int e : tensor.shape().extents()) {
        out += ' ';
        out += std::to_string(e);
    }
    for (std::size_t i = 0; i < tensor.size(); ++i) {
        out += ' ';
        out += format_float(tensor[i]);
    }
    out += '\n';
}

// Sequential line access with errors that name the source.
class LineReader {
public:
    LineReader(const std::string& text, std::string context) : context_(std::move(context)) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) lines_.push_back(line);
    }

    const std::string& next(const std::string& what) {
        if (index_ >= lines_.size()) {
            throw std::runtime_error(context_ + ": unexpected end of file, expected " + what);
        }
        return lines_[index_++];
    }

    bool exhausted() const { return index_ >= lines_.size(); }
    const std::string& context() const { return context_; }

private:
    std::string context_;
    std::vector<std::string> lines_;
    std::size_t index_ = 0;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (in >> field) fields.push_back(field);
    return fields;
}

int parse_int_field(const std::string& field, const std::string& context) {
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(field, &used);
    } catch (const std::exception&) {
        throw std::runtime_error(context + ": expected integer, got '" + field + "'");
    }
    if (used != field.size()) {
        throw std::runtime_error(context + ": expected integer, got '" + field + "'");
    }
    return value;
}

float parse_float_field(const std::string& field, const std::string& context) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const float value = std::strtof(begin, &end);
    if (end != begin + field.size() || field.empty()) {
        throw std::runtime_error(context + ": expected real number, got '" + field + "'");
    }
    return value;
}

Tensor parse_tensor_line(const std::string& line, const Shape& expected,
                         const std::string& context) {
    const char* p = line.c_str();
    if (line.rfind("shape:", 0) != 0) {
        throw std::runtime_error(context + ": expected a 'shape:' line");
    }
    p += 6;
    std::vector<int> extents;
    for (int i = 0; i < expected.rank(); ++i) {
        char* end = nullptr;
        const long e = std::strtol(p, &end, 10);
        if (end == p) throw std::runtime_error(context + ": truncated shape header");
        extents.push_back(static_cast<int>(e));
        p = end;
    }
    const Shape declared(extents);
    if (declared != expected) {
        throw std::runtime_error(context + ": shape mismatch, expected " + expected.to_string() +
                                 " but file declares " + declared.to_string());
    }
    std::vector<float> values;
    values.reserve(expected.element_count());
    while (true) {
        char* end = nullptr;
        const float v = std::strtof(p, &end);
        if (end == p) break;
        values.push_back(v);
        p = end;
    }
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p != '\0') {
        throw std::runtime_error(context + ": trailing junk after tensor values");
    }
    if (values.size() != expected.element_count()) {
        throw std::runtime_error(context + ": value count mismatch, shape " + expected.to_string() +
                                 " needs " + std::to_string(expected.element_count()) +
                                 " values but line has " + std::to_string(values.size()));
    }
    return Tensor(expected, std::move(values));
}

std::string layer_line(const LayerSpec& spec) {
    std::string line = kind_name(spec.kind);
    switch (spec.kind) {
        case LayerKind::conv:
            line += ' ' + std::to_string(spec.conv.in_channels);
            line += ' ' + std::to_string(spec.conv.out_channels);
            line += ' ' + std::to_string(spec.conv.kernel_h);
            line += ' ' + std::to_string(spec.conv.kernel_w);
            line += ' ' + std::to_string(spec.conv.stride);
            break;
        case LayerKind::maxpool:
            line += ' ' + std::to_string(spec.pool_window);
            line += ' ' + std::to_string(spec.pool_stride);
            break;
        case LayerKind::dense:
            line += ' ' + std::to_string(spec.dense_in);
            line += ' ' + std::to_string(spec.dense_out);
            break;
        case LayerKind::dropout:
            line += ' ' + format_float(spec.dropout_rate);
            break;
        default:
            break;
    }
    return line;
}

LayerSpec parse_layer_line(const std::string& line, int layer_index) {
    const std::string context = "checkpoint: layer " + std::to_string(layer_index);
    const auto fields = split_fields(line);
    if (fields.empty()) throw std::runtime_error(context + ": empty layer line");
    const auto kind = kind_from_name(fields[0]);
    if (!kind) throw std::runtime_error(context + ": unknown layer kind '" + fields[0] + "'");
    const auto want = [&](std::size_t n) {
        if (fields.size() != n + 1) {
            throw std::runtime_error(context + " (" + fields[0] + "): expected " +
                                     std::to_string(n) + " hyperparameters, got " +
                                     std::to_string(fields.size() - 1));
        }
    };
    switch (*kind) {
        case LayerKind::conv: {
            want(5);
            return conv_layer(parse_int_field(fields[1], context), parse_int_field(fields[2], context),
                              parse_int_field(fields[3], context), parse_int_field(fields[4], context),
                              parse_int_field(fields[5], context));
        }
        case LayerKind::maxpool:
            want(2);
            return maxpool_layer(parse_int_field(fields[1], context),
                                 parse_int_field(fields[2], context));
        case LayerKind::dense:
            want(2);
            return dense_layer(parse_int_field(fields[1], context),
                               parse_int_field(fields[2], context));
        case LayerKind::dropout:
            want(1);
            return dropout_layer(parse_float_field(fields[1], context));
        case LayerKind::relu:
            want(0);
            return relu_layer();
        case LayerKind::flatten:
            want(0);
            return flatten_layer();
        case LayerKind::softmax:
            want(0);
            return softmax_layer();
        case LayerKind::l2norm:
            want(0);
            return l2norm_layer();
    }
    throw std::runtime_error(context + ": unknown layer kind");
}

}  // namespace

std::string format_float(float value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.8e", static_cast<double>(value));
    return buf;
}

std::string serialize_checkpoint(const NetworkGraph& net) {
    std::string out;
    out += kNetMagic;
    out += ' ';
    out += std::to_string(net.layers.size());
    out += '\n';
    out += "input";
    for (const int e : net.input_shape.extents()) {
        out += ' ';
        out += std::to_string(e);
    }
    out += '\n';
    for (const auto& spec : net.layers) {
        out += layer_line(spec);
        out += '\n';
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.params[i].weights.empty()) continue;
        append_tensor_line(out, net.params[i].weights);
        append_tensor_line(out, net.params[i].bias);
    }
    return out;
}

void save_checkpoint(const NetworkGraph& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const std::string text = serialize_checkpoint(net);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

NetworkGraph parse_checkpoint(const std::string& text, const std::string& context) {
    LineReader reader(text, context);
    const auto header = split_fields(reader.next("header"));
    if (header.size() != 2 || header[0] != kNetMagic) {
        throw std::runtime_error(context + ": malformed header, expected '" +
                                 std::string(kNetMagic) + " <layer count>'");
    }
    const int layer_count = parse_int_field(header[1], context + ": header");
    if (layer_count < 1) throw std::runtime_error(context + ": layer count must be >= 1");

    const auto input_fields = split_fields(reader.next("input shape"));
    if (input_fields.size() < 2 || input_fields[0] != "input") {
        throw std::runtime_error(context + ": expected 'input <extents...>' line");
    }
    std::vector<int> extents;
    for (std::size_t i = 1; i < input_fields.size(); ++i) {
        extents.push_back(parse_int_field(input_fields[i], context + ": input shape"));
    }

    std::vector<LayerSpec> specs;
    specs.reserve(static_cast<std::size_t>(layer_count));
    for (int i = 0; i < layer_count; ++i) {
        specs.push_back(parse_layer_line(reader.next("layer " + std::to_string(i)), i));
    }

    NetworkGraph net = assemble_network(std::move(specs), Shape(extents));
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.params[i].weights.empty()) continue;
        const std::string layer_context = context + ": layer " + std::to_string(i) + " (" +
                                          kind_name(net.layers[i].kind) + ")";
        const Shape weight_shape = net.params[i].weights.shape();
        const Shape bias_shape = net.params[i].bias.shape();
        net.params[i].weights =
            parse_tensor_line(reader.next("weights for layer " + std::to_string(i)), weight_shape,
                              layer_context + " weights");
        net.params[i].bias = parse_tensor_line(reader.next("bias for layer " + std::to_string(i)),
                                               bias_shape, layer_context + " bias");
    }
    if (!reader.exhausted()) {
        throw std::runtime_error(context + ": trailing lines after last parameter tensor");
    }
    net.mode = Mode::eval;
    return net;
}

NetworkGraph load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_checkpoint(buffer.str(), "load_checkpoint: " + path);
}

std::string serialize_gallery(const EmbeddingGallery& gallery) {
    std::string out;
    out += kGalleryMagic;
    out += ' ';
    out += std::to_string(gallery.entries.size());
    out += ' ';
    out += format_float(gallery.accept_threshold);
    out += '\n';
    for (const auto& [identity, embeddings] : gallery.entries) {
        out += "identity ";
        out += identity;
        out += ' ';
        out += std::to_string(embeddings.size());
        out += '\n';
        for (const auto& embedding : embeddings) {
            append_tensor_line(out, embedding);
        }
    }
    return out;
}

void save_gallery(const EmbeddingGallery& gallery, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_gallery: cannot open " + path);
    const std::string text = serialize_gallery(gallery);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("save_gallery: write failed for " + path);
}

EmbeddingGallery parse_gallery(const std::string& text, const std::string& context) {
    LineReader reader(text, context);
    const auto header = split_fields(reader.next("header"));
    if (header.size() != 3 || header[0] != kGalleryMagic) {
        throw std::runtime_error(context + ": malformed header, expected '" +
                                 std::string(kGalleryMagic) + " <identity count> <threshold>'");
    }
    const int identity_count = parse_int_field(header[1], context + ": header");
    if (identity_count < 0) throw std::runtime_error(context + ": negative identity count");
    EmbeddingGallery gallery;
    gallery.accept_threshold = parse_float_field(header[2], context + ": header");

    int dim = 0;
    for (int k = 0; k < identity_count; ++k) {
        const auto fields = split_fields(reader.next("identity block " + std::to_string(k)));
        if (fields.size() != 3 || fields[0] != "identity") {
            throw std::runtime_error(context + ": expected 'identity <name> <count>' line");
        }
        const std::string& name = fields[1];
        const int count = parse_int_field(fields[2], context + ": identity " + name);
        if (count < 1) {
            throw std::runtime_error(context + ": identity " + name + " has no embeddings");
        }
        if (gallery.entries.count(name) != 0) {
            throw std::runtime_error(context + ": duplicate identity " + name);
        }
        std::vector<Tensor> embeddings;
        for (int j = 0; j < count; ++j) {
            const std::string& line = reader.next("embedding for " + name);
            if (dim == 0) {
                // first embedding fixes the dimension for the whole file
                const auto probe = split_fields(line);
                if (probe.size() < 2 || probe[0] != "shape:") {
                    throw std::runtime_error(context + ": expected a 'shape:' line for " + name);
                }
                dim = parse_int_field(probe[1], context + ": embedding dim");
                if (dim < 1) throw std::runtime_error(context + ": embedding dim must be >= 1");
            }
            embeddings.push_back(parse_tensor_line(line, Shape({dim}),
                                                   context + ": identity " + name + " embedding " +
                                                       std::to_string(j)));
        }
        gallery.entries.emplace(name, std::move(embeddings));
    }
    if (!reader.exhausted()) {
        throw std::runtime_error(context + ": trailing lines after last identity block");
    }
    return gallery;
}

EmbeddingGallery load_gallery(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_gallery: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_gallery(buffer.str(), "load_gallery: " + path);
}

}  // namespace ipost
