#include "emnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "emnn/numfmt.hpp"

namespace emnn::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& field,
                        const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) throw IdxError(path.string() + ": truncated before field '" + field + "'");
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

std::string hex32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Bilinear sample with out-of-frame neighbors contributing zero.
double sample_zero_padded(const Image& img, double y, double x) {
    const double fy = std::floor(y), fx = std::floor(x);
    const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
    const double wy = y - fy, wx = x - fx;
    auto px = [&](int r, int c) { return (r < 0 || r >= img.rows || c < 0 || c >= img.cols) ? 0.0 : img.at(r, c); };
    return (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x0 + 1)) +
           wy * ((1 - wx) * px(y0 + 1, x0) + wx * px(y0 + 1, x0 + 1));
}

}  // namespace

std::vector<LabeledImage> load_idx(const std::filesystem::path& images_path,
                                   const std::filesystem::path& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    const std::uint32_t img_magic = read_be32(img, 0, "magic", images_path);
    if (img_magic != kImageMagic) {
        throw IdxError(images_path.string() + ": bad image magic " + hex32(img_magic) +
                       " (field 'magic', expected 0x00000803)");
    }
    const std::uint32_t count = read_be32(img, 4, "count", images_path);
    const std::uint32_t rows = read_be32(img, 8, "rows", images_path);
    const std::uint32_t cols = read_be32(img, 12, "cols", images_path);
    const std::size_t pixels = std::size_t(rows) * cols;
    if (img.size() < 16 + std::size_t(count) * pixels) {
        throw IdxError(images_path.string() + ": truncated pixel data (field 'pixels')");
    }

    const std::uint32_t lab_magic = read_be32(lab, 0, "magic", labels_path);
    if (lab_magic != kLabelMagic) {
        throw IdxError(labels_path.string() + ": bad label magic " + hex32(lab_magic) +
                       " (field 'magic', expected 0x00000801)");
    }
    const std::uint32_t label_count = read_be32(lab, 4, "count", labels_path);
    if (label_count != count) {
        throw IdxError("field 'count' mismatch: " + std::to_string(count) + " images vs " +
                       std::to_string(label_count) + " labels");
    }
    if (lab.size() < 8 + std::size_t(count)) throw IdxError(labels_path.string() + ": truncated label data (field 'labels')");

    std::vector<LabeledImage> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        Image im(static_cast<int>(rows), static_cast<int>(cols));
        const unsigned char* src = img.data() + 16 + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p) im.pixels[p] = src[p] / 255.0;
        out[i] = {std::move(im), lab[8 + i]};
    }
    return out;
}

Image resize(const Image& image, int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("resize: target dimensions must be positive");
    if (image.rows < 1 || image.cols < 1) throw std::invalid_argument("resize: empty source image");
    if (rows == image.rows && cols == image.cols) return image;
    Image out(rows, cols);
    const double sy = static_cast<double>(image.rows) / rows;
    const double sx = static_cast<double>(image.cols) / cols;
    for (int r = 0; r < rows; ++r) {
        const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, double(image.rows - 1));
        const int y0 = static_cast<int>(y);
        const int y1 = std::min(y0 + 1, image.rows - 1);
        const double wy = y - y0;
        for (int c = 0; c < cols; ++c) {
            const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, double(image.cols - 1));
            const int x0 = static_cast<int>(x);
            const int x1 = std::min(x0 + 1, image.cols - 1);
            const double wx = x - x0;
            const double v = (1 - wy) * ((1 - wx) * image.at(y0, x0) + wx * image.at(y0, x1)) +
                             wy * ((1 - wx) * image.at(y1, x0) + wx * image.at(y1, x1));
            out.at(r, c) = clamp01(v);
        }
    }
    return out;
}

Image rotate(const Image& image, double degrees) {
    if (!std::isfinite(degrees)) throw std::invalid_argument("rotate: angle must be finite");
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = 0.5 * (image.rows - 1), cx = 0.5 * (image.cols - 1);
    Image out(image.rows, image.cols);
    for (int r = 0; r < image.rows; ++r) {
        for (int c = 0; c < image.cols; ++c) {
            const double dx = c - cx, dy = r - cy;
            const double x = cx + cs * dx - sn * dy;
            const double y = cy + sn * dx + cs * dy;
            out.at(r, c) = clamp01(sample_zero_padded(image, y, x));
        }
    }
    return out;
}

ViewSet make_views(const LabeledImage& sample, std::span<const double> angles, const wavegeom::SimGeometry& geom) {
    if (angles.empty()) throw std::invalid_argument("make_views: need at least one angle");
    ViewSet out;
    out.label = sample.label;
    out.views.reserve(angles.size());
    for (double a : angles) out.views.push_back(resize(rotate(sample.image, a), geom.n_row, geom.n_col));
    return out;
}

std::vector<double> default_angles(int num_views) {
    if (num_views < 1) throw std::invalid_argument("default_angles: need at least one view");
    if (num_views == 1) return {0.0};
    std::vector<double> out(num_views);
    for (int k = 0; k < num_views; ++k) out[k] = -30.0 + 60.0 * k / (num_views - 1);
    return out;
}

std::vector<double> parse_angles(std::string_view list) {
    std::vector<double> out;
    while (!list.empty()) {
        const auto comma = list.find(',');
        std::string_view item = list.substr(0, comma);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        out.push_back(parse_double(item));
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
        if (list.empty()) throw std::invalid_argument("parse_angles: trailing comma");
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng) {
    if (batch_size < 1) throw std::invalid_argument("make_batches: batch size must be >= 1");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

}  // namespace emnn::data
