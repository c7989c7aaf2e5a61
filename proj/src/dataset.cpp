#include "advsel/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "advsel/errors.hpp"
#include "advsel/rng.hpp"

namespace advsel {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr char kCacheMagic[8] = {'A', 'D', 'V', 'S', 'E', 'L', 'D', '1'};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw idx_error(idx_error::kind::truncated, path + ": truncated header");
    }
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw io_error(std::string("dataset cache: truncated ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_le(std::ostream& out, double d) {
    auto v = std::bit_cast<std::uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64_le(std::istream& in, const char* what) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw io_error(std::string("dataset cache: truncated ") + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

} // namespace

void Dataset::validate() const {
    if (labels.size() != features.rows) {
        throw dimension_error("dataset: " + std::to_string(labels.size()) + " labels for " +
                              std::to_string(features.rows) + " rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
            throw value_error("dataset: label out of range at row " + std::to_string(i));
        }
    }
    for (double v : features.data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw value_error("dataset: feature outside [0,1]");
        }
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.class_count = class_count;
    out.label_names = label_names;
    out.features = Matrix(indices.size(), features.cols);
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::size_t src = indices[i];
        if (src >= features.rows) throw value_error("subset: index out of range");
        std::copy(features.row(src), features.row(src) + features.cols, out.features.row(i));
        out.labels[i] = labels[src];
    }
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::vector<unsigned char> img = read_file(images_path);
    std::vector<unsigned char> lab = read_file(labels_path);

    std::uint32_t img_magic = read_be32(img, 0, images_path);
    if (img_magic != kIdxImageMagic) {
        throw idx_error(idx_error::kind::wrong_magic,
                        images_path + ": expected image magic 0x00000803");
    }
    std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
    if (lab_magic != kIdxLabelMagic) {
        throw idx_error(idx_error::kind::wrong_magic,
                        labels_path + ": expected label magic 0x00000801");
    }

    std::uint32_t image_count = read_be32(img, 4, images_path);
    std::uint32_t rows = read_be32(img, 8, images_path);
    std::uint32_t cols = read_be32(img, 12, images_path);
    std::uint32_t label_count = read_be32(lab, 4, labels_path);

    if (image_count != label_count) {
        throw idx_error(idx_error::kind::count_mismatch,
                        std::to_string(image_count) + " images vs " +
                            std::to_string(label_count) + " labels");
    }

    std::size_t pixels = static_cast<std::size_t>(image_count) * rows * cols;
    if (img.size() < 16 + pixels) {
        throw idx_error(idx_error::kind::truncated, images_path + ": payload shorter than header promises");
    }
    if (lab.size() < 8 + label_count) {
        throw idx_error(idx_error::kind::truncated, labels_path + ": payload shorter than header promises");
    }

    Dataset out;
    out.features = Matrix(image_count, static_cast<std::size_t>(rows) * cols);
    out.labels.resize(label_count);
    for (std::size_t i = 0; i < pixels; ++i) {
        out.features.data[i] = static_cast<double>(img[16 + i]) / 255.0;
    }
    int max_label = 0;
    for (std::size_t i = 0; i < label_count; ++i) {
        out.labels[i] = static_cast<int>(lab[8 + i]);
        max_label = std::max(max_label, out.labels[i]);
    }
    out.class_count = static_cast<std::size_t>(max_label) + 1;
    return out;
}

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": empty file");
    std::vector<std::string> header = split_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        throw value_error(path + ": no column named '" + label_column + "'");
    }

    std::vector<std::vector<double>> raw_rows;
    std::vector<std::string> raw_labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw value_error(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, got " +
                              std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(header.size() - 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) continue;
            double v = 0.0;
            const char* begin = cells[i].data();
            const char* end = begin + cells[i].size();
            auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end) {
                throw value_error(path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                                  cells[i] + "' in column " + header[i]);
            }
            row.push_back(v);
        }
        raw_rows.push_back(std::move(row));
        raw_labels.push_back(cells[label_idx]);
    }
    if (raw_rows.empty()) throw value_error(path + ": no data rows");

    Dataset out;
    // Dense label ids in first-appearance order.
    for (const std::string& name : raw_labels) {
        auto it = std::find(out.label_names.begin(), out.label_names.end(), name);
        int id;
        if (it == out.label_names.end()) {
            id = static_cast<int>(out.label_names.size());
            out.label_names.push_back(name);
        } else {
            id = static_cast<int>(it - out.label_names.begin());
        }
        out.labels.push_back(id);
    }
    out.class_count = out.label_names.size();

    std::size_t dims = raw_rows.front().size();
    std::vector<double> col_min(dims, std::numeric_limits<double>::infinity());
    std::vector<double> col_max(dims, -std::numeric_limits<double>::infinity());
    for (const auto& row : raw_rows) {
        for (std::size_t j = 0; j < dims; ++j) {
            col_min[j] = std::min(col_min[j], row[j]);
            col_max[j] = std::max(col_max[j], row[j]);
        }
    }
    out.features = Matrix(raw_rows.size(), dims);
    for (std::size_t i = 0; i < raw_rows.size(); ++i) {
        for (std::size_t j = 0; j < dims; ++j) {
            double range = col_max[j] - col_min[j];
            out.features.at(i, j) = range > 0.0 ? (raw_rows[i][j] - col_min[j]) / range : 0.0;
        }
    }
    out.validate();
    return out;
}

Dataset synth_gaussians(std::uint64_t seed, std::size_t samples_per_class, std::size_t dims,
                        const std::vector<std::vector<double>>& class_means, double sigma) {
    if (class_means.empty()) throw value_error("synth_gaussians: no class means");
    if (samples_per_class == 0) throw value_error("synth_gaussians: zero samples per class");
    if (sigma < 0.0) throw value_error("synth_gaussians: negative sigma");
    for (const auto& mean : class_means) {
        if (mean.size() != dims) {
            throw dimension_error("synth_gaussians: mean dim " + std::to_string(mean.size()) +
                                  " vs dims " + std::to_string(dims));
        }
    }
    Rng rng(seed);
    Dataset out;
    out.class_count = class_means.size();
    out.features = Matrix(class_means.size() * samples_per_class, dims);
    out.labels.resize(out.features.rows);
    std::size_t row = 0;
    for (std::size_t c = 0; c < class_means.size(); ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
            double* dst = out.features.row(row);
            for (std::size_t d = 0; d < dims; ++d) {
                double v = class_means[c][d] + sigma * rng.normal();
                dst[d] = std::clamp(v, 0.0, 1.0);
            }
            out.labels[row] = static_cast<int>(c);
        }
    }
    out.validate();
    return out;
}

SplitResult split(const Dataset& dataset, const SplitFractions& fractions, std::uint64_t seed) {
    dataset.validate();
    std::array<double, 3> f = {fractions.train, fractions.validation, fractions.test};
    double total = f[0] + f[1] + f[2];
    for (double v : f) {
        if (v < 0.0) throw value_error("split: negative fraction");
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw value_error("split: fractions sum to " + std::to_string(total) + ", expected 1");
    }

    std::vector<std::vector<std::size_t>> by_class(dataset.class_count);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        by_class[static_cast<std::size_t>(dataset.labels[i])].push_back(i);
    }

    Rng rng(seed);
    std::array<std::vector<std::size_t>, 3> parts;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        std::vector<std::size_t>& idx = by_class[c];
        rng.shuffle(idx);
        std::size_t n = idx.size();
        // Largest-remainder allocation keeps each split within one sample of
        // the proportional count.
        std::array<std::size_t, 3> take{};
        std::array<double, 3> remainder{};
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            double want = f[s] * static_cast<double>(n);
            take[s] = static_cast<std::size_t>(std::floor(want));
            remainder[s] = want - std::floor(want);
            assigned += take[s];
        }
        while (assigned < n) {
            std::size_t best = 0;
            for (std::size_t s = 1; s < 3; ++s) {
                if (remainder[s] > remainder[best]) best = s;
            }
            take[best] += 1;
            remainder[best] = -1.0;
            ++assigned;
        }
        std::size_t cursor = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t k = 0; k < take[s]; ++k) {
                parts[s].push_back(idx[cursor++]);
            }
        }
    }
    for (auto& part : parts) std::sort(part.begin(), part.end());

    SplitResult out{dataset.subset(parts[0]), dataset.subset(parts[1]), dataset.subset(parts[2])};
    if (!out.train.labels.empty()) {
        std::vector<bool> seen(dataset.class_count, false);
        std::size_t distinct = 0;
        for (int y : out.train.labels) {
            if (!seen[static_cast<std::size_t>(y)]) {
                seen[static_cast<std::size_t>(y)] = true;
                ++distinct;
            }
        }
        if (distinct < 2 && dataset.class_count >= 2) {
            throw value_error("split: training split holds fewer than 2 classes");
        }
    }
    return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    dataset.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out.write(kCacheMagic, sizeof(kCacheMagic));
    write_u32_le(out, static_cast<std::uint32_t>(dataset.size()));
    write_u32_le(out, static_cast<std::uint32_t>(dataset.feature_dim()));
    write_u32_le(out, static_cast<std::uint32_t>(dataset.class_count));
    write_u32_le(out, static_cast<std::uint32_t>(dataset.label_names.size()));
    for (int y : dataset.labels) write_u32_le(out, static_cast<std::uint32_t>(y));
    for (double v : dataset.features.data) write_f64_le(out, v);
    for (const std::string& name : dataset.label_names) {
        write_u32_le(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    if (!out) throw io_error("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kCacheMagic, 8) != 0) {
        throw io_error(path + ": not a dataset cache file");
    }
    Dataset out;
    std::uint32_t m = read_u32_le(in, "row count");
    std::uint32_t n = read_u32_le(in, "feature dim");
    out.class_count = read_u32_le(in, "class count");
    std::uint32_t name_count = read_u32_le(in, "label name count");
    out.labels.resize(m);
    for (auto& y : out.labels) y = static_cast<int>(read_u32_le(in, "labels"));
    out.features = Matrix(m, n);
    for (double& v : out.features.data) v = read_f64_le(in, "features");
    for (std::uint32_t i = 0; i < name_count; ++i) {
        std::uint32_t len = read_u32_le(in, "label name length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (in.gcount() != static_cast<std::streamsize>(len)) {
            throw io_error(path + ": truncated label name");
        }
        out.label_names.push_back(std::move(name));
    }
    out.validate();
    return out;
}

} // namespace advsel
