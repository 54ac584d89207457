#include "ipost/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ipost {

namespace {

constexpr float kBackground = 0.15f;
constexpr float kForeground = 0.85f;

const char* const kGlyphNames[kGlyphKindCount] = {
    "cross", "disc", "bar", "ring", "square", "triangle", "checker", "diag",
};

bool inside_glyph(GlyphKind kind, float x, float y, int size) {
    const float s = static_cast<float>(size);
    const float cx = (s - 1.0f) / 2.0f;
    const float cy = (s - 1.0f) / 2.0f;
    const float dx = x - cx;
    const float dy = y - cy;
    switch (kind) {
        case GlyphKind::cross: {
            const float t = std::max(1.0f, 0.08f * s);
            const float arm = 0.38f * s;
            return (std::fabs(dx) <= t && std::fabs(dy) <= arm) ||
                   (std::fabs(dy) <= t && std::fabs(dx) <= arm);
        }
        case GlyphKind::disc:
            return dx * dx + dy * dy <= (0.32f * s) * (0.32f * s);
        case GlyphKind::bar:
            return std::fabs(dy) <= 0.12f * s && std::fabs(dx) <= 0.42f * s;
        case GlyphKind::ring: {
            const float r2 = dx * dx + dy * dy;
            const float outer = 0.34f * s;
            const float inner = 0.18f * s;
            return r2 <= outer * outer && r2 >= inner * inner;
        }
        case GlyphKind::square:
            return std::fabs(dx) <= 0.28f * s && std::fabs(dy) <= 0.28f * s;
        case GlyphKind::triangle: {
            const float top = 0.20f * s;
            const float bottom = 0.78f * s;
            if (y < top || y > bottom) return false;
            const float half = (y - top) / (bottom - top) * 0.36f * s;
            return std::fabs(dx) <= half;
        }
        case GlyphKind::checker: {
            if (std::fabs(dx) > 0.42f * s || std::fabs(dy) > 0.42f * s) return false;
            const int tile = std::max(2, size / 8);
            const int ix = static_cast<int>(x) / tile;
            const int iy = static_cast<int>(y) / tile;
            return (ix + iy) % 2 == 0;
        }
        case GlyphKind::diag: {
            const float t = std::max(1.0f, 0.10f * s);
            return std::fabs(dx - dy) <= t;
        }
    }
    return false;
}

std::string sample_filename(const std::string& label, int index, int channels) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_%04d.", index);
    return label + buf + (channels == 3 ? "ppm" : "pgm");
}

}  // namespace

const char* glyph_name(GlyphKind kind) { return kGlyphNames[static_cast<int>(kind)]; }

std::optional<GlyphKind> glyph_from_name(const std::string& name) {
    for (int i = 0; i < kGlyphKindCount; ++i) {
        if (name == kGlyphNames[i]) return static_cast<GlyphKind>(i);
    }
    return std::nullopt;
}

GlyphKind glyph_by_index(int index) {
    if (index < 0) throw std::invalid_argument("glyph_by_index: negative index");
    return static_cast<GlyphKind>(index % kGlyphKindCount);
}

void write_pixmap(const ByteImage& image, const std::string& path) {
    if (image.channels != 1 && image.channels != 3) {
        throw std::invalid_argument("write_pixmap: channels must be 1 or 3");
    }
    if (image.height <= 0 || image.width <= 0) {
        throw std::invalid_argument("write_pixmap: empty image");
    }
    const std::size_t expected = static_cast<std::size_t>(image.channels) * image.height * image.width;
    if (image.pixels.size() != expected) {
        throw std::invalid_argument("write_pixmap: pixel count does not match dimensions");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pixmap: cannot open " + path);
    out << (image.channels == 3 ? "P6" : "P5") << "\n"
        << image.width << " " << image.height << "\n255\n";
    if (image.channels == 1) {
        out.write(reinterpret_cast<const char*>(image.pixels.data()),
                  static_cast<std::streamsize>(image.pixels.size()));
    } else {
        // planar storage, interleaved file order
        const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
        std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3);
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
                row[static_cast<std::size_t>(x) * 3 + 0] = image.pixels[p];
                row[static_cast<std::size_t>(x) * 3 + 1] = image.pixels[plane + p];
                row[static_cast<std::size_t>(x) * 3 + 2] = image.pixels[2 * plane + p];
            }
            out.write(reinterpret_cast<const char*>(row.data()),
                      static_cast<std::streamsize>(row.size()));
        }
    }
    if (!out) throw std::runtime_error("write_pixmap: write failed for " + path);
}

namespace {

int next_pixmap_int(std::istream& in, const std::string& path) {
    // skips whitespace and '#' comment lines between header fields
    while (true) {
        const int c = in.peek();
        if (c == EOF) throw std::runtime_error("read_pixmap: truncated header in " + path);
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value)) throw std::runtime_error("read_pixmap: bad header field in " + path);
    return value;
}

}  // namespace

ByteImage read_pixmap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pixmap: cannot open " + path);
    char m0 = 0;
    char m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6')) {
        throw std::runtime_error("read_pixmap: not a P5/P6 file: " + path);
    }
    ByteImage image;
    image.channels = (m1 == '6') ? 3 : 1;
    image.width = next_pixmap_int(in, path);
    image.height = next_pixmap_int(in, path);
    const int maxval = next_pixmap_int(in, path);
    if (image.width <= 0 || image.height <= 0) {
        throw std::runtime_error("read_pixmap: bad dimensions in " + path);
    }
    if (maxval != 255) throw std::runtime_error("read_pixmap: maxval must be 255 in " + path);
    in.get();  // single whitespace byte before raster
    const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
    std::vector<std::uint8_t> raw(plane * image.channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw std::runtime_error("read_pixmap: truncated pixel data in " + path);
    }
    if (image.channels == 1) {
        image.pixels = std::move(raw);
    } else {
        image.pixels.resize(raw.size());
        for (std::size_t p = 0; p < plane; ++p) {
            image.pixels[p] = raw[p * 3 + 0];
            image.pixels[plane + p] = raw[p * 3 + 1];
            image.pixels[2 * plane + p] = raw[p * 3 + 2];
        }
    }
    return image;
}

Tensor image_to_tensor(const ByteImage& image) {
    Tensor t = Tensor::zeros(Shape({image.channels, image.height, image.width}));
    for (std::size_t i = 0; i < image.pixels.size(); ++i) {
        t[i] = static_cast<float>(image.pixels[i]) / 255.0f;
    }
    return t;
}

SyntheticDatasetSpec make_items_spec(const std::vector<std::string>& glyph_names) {
    SyntheticDatasetSpec spec;
    spec.task = SyntheticDatasetSpec::Task::items;
    for (const auto& name : glyph_names) {
        const auto kind = glyph_from_name(name);
        if (!kind) throw std::invalid_argument("make_items_spec: unknown glyph name: " + name);
        spec.class_names.push_back(name);
        spec.glyphs.push_back(*kind);
    }
    validate_spec(spec);
    return spec;
}

SyntheticDatasetSpec make_faces_spec(const std::vector<std::string>& identities) {
    if (identities.size() > static_cast<std::size_t>(kGlyphKindCount)) {
        throw std::invalid_argument("make_faces_spec: at most 8 distinct identities supported");
    }
    SyntheticDatasetSpec spec;
    spec.task = SyntheticDatasetSpec::Task::faces;
    spec.class_names = identities;
    for (std::size_t i = 0; i < identities.size(); ++i) {
        spec.glyphs.push_back(glyph_by_index(static_cast<int>(i)));
    }
    validate_spec(spec);
    return spec;
}

void validate_spec(const SyntheticDatasetSpec& spec) {
    if (spec.class_names.size() < 2) {
        throw std::invalid_argument("dataset spec: need at least 2 classes");
    }
    if (spec.class_names.size() != spec.glyphs.size()) {
        throw std::invalid_argument("dataset spec: class_names and glyphs must be parallel");
    }
    std::set<std::string> seen;
    for (const auto& name : spec.class_names) {
        if (name.empty()) throw std::invalid_argument("dataset spec: empty class name");
        for (const char c : name) {
            if (std::isspace(static_cast<unsigned char>(c)) || c == '/') {
                throw std::invalid_argument("dataset spec: class name has whitespace or '/': " + name);
            }
        }
        if (!seen.insert(name).second) {
            throw std::invalid_argument("dataset spec: duplicate class name: " + name);
        }
    }
    if (spec.image_size < 8) throw std::invalid_argument("dataset spec: image_size must be >= 8");
    if (spec.channels != 1 && spec.channels != 3) {
        throw std::invalid_argument("dataset spec: channels must be 1 or 3");
    }
    if (spec.samples_per_class < 1) {
        throw std::invalid_argument("dataset spec: samples_per_class must be >= 1");
    }
    if (!(spec.noise >= 0.0f && spec.noise < 1.0f)) {
        throw std::invalid_argument("dataset spec: noise must be in [0,1)");
    }
}

ByteImage render_sample(GlyphKind kind, int size, int channels, float noise, Rng& rng) {
    if (size < 8) throw std::invalid_argument("render_sample: size must be >= 8");
    if (channels != 1 && channels != 3) {
        throw std::invalid_argument("render_sample: channels must be 1 or 3");
    }
    const int jitter = 2;
    const int dx = static_cast<int>(rng.uniform_int(2 * jitter + 1)) - jitter;
    const int dy = static_cast<int>(rng.uniform_int(2 * jitter + 1)) - jitter;
    ByteImage image;
    image.channels = channels;
    image.height = size;
    image.width = size;
    image.pixels.resize(static_cast<std::size_t>(channels) * size * size);
    std::size_t i = 0;
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const bool hit = inside_glyph(kind, static_cast<float>(x - dx),
                                              static_cast<float>(y - dy), size);
                float v = hit ? kForeground : kBackground;
                v += noise * (rng.uniform() - 0.5f);
                v = std::min(1.0f, std::max(0.0f, v));
                image.pixels[i++] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
        }
    }
    return image;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    for (const auto& entry : entries) {
        out << entry.path << "\t" << entry.label << "\n";
    }
    if (!out) throw std::runtime_error("write_manifest: write failed for " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
            line.find('\t', tab + 1) != std::string::npos) {
            throw std::runtime_error("read_manifest: line " + std::to_string(line_no) +
                                     " is not '<path>\\t<label>' in " + path);
        }
        entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return entries;
}

std::vector<ManifestEntry> generate_dataset(const SyntheticDatasetSpec& spec,
                                            const std::string& output_dir) {
    validate_spec(spec);
    std::filesystem::create_directories(output_dir);
    Rng rng(spec.seed);
    std::vector<ManifestEntry> entries;
    for (std::size_t k = 0; k < spec.class_names.size(); ++k) {
        for (int j = 0; j < spec.samples_per_class; ++j) {
            const ByteImage image =
                render_sample(spec.glyphs[k], spec.image_size, spec.channels, spec.noise, rng);
            const std::string name = sample_filename(spec.class_names[k], j, spec.channels);
            write_pixmap(image, (std::filesystem::path(output_dir) / name).string());
            entries.push_back({name, spec.class_names[k]});
        }
    }
    write_manifest(entries, (std::filesystem::path(output_dir) / "manifest.tsv").string());
    return entries;
}

LabeledDataset generate_dataset_in_memory(const SyntheticDatasetSpec& spec) {
    validate_spec(spec);
    // label indices follow lexicographic label order, matching load_labeled_dataset
    std::vector<std::string> sorted_names = spec.class_names;
    std::sort(sorted_names.begin(), sorted_names.end());
    std::map<std::string, int> index_of;
    for (std::size_t i = 0; i < sorted_names.size(); ++i) {
        index_of[sorted_names[i]] = static_cast<int>(i);
    }
    Rng rng(spec.seed);
    LabeledDataset data;
    data.label_names = sorted_names;
    for (std::size_t k = 0; k < spec.class_names.size(); ++k) {
        for (int j = 0; j < spec.samples_per_class; ++j) {
            const ByteImage image =
                render_sample(spec.glyphs[k], spec.image_size, spec.channels, spec.noise, rng);
            data.images.push_back(image_to_tensor(image));
            data.labels.push_back(index_of[spec.class_names[k]]);
        }
    }
    return data;
}

LabeledDataset load_labeled_dataset(const std::string& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    if (entries.empty()) throw std::runtime_error("load_labeled_dataset: empty manifest " + manifest_path);
    const std::filesystem::path dir = std::filesystem::path(manifest_path).parent_path();
    std::set<std::string> distinct;
    for (const auto& entry : entries) distinct.insert(entry.label);
    std::map<std::string, int> index_of;
    LabeledDataset data;
    for (const auto& label : distinct) {
        index_of[label] = static_cast<int>(data.label_names.size());
        data.label_names.push_back(label);
    }
    for (const auto& entry : entries) {
        const ByteImage image = read_pixmap((dir / entry.path).string());
        data.images.push_back(image_to_tensor(image));
        data.labels.push_back(index_of[entry.label]);
    }
    return data;
}

}  // namespace ipost
