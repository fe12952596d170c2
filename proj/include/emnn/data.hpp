#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "emnn/image.hpp"
#include "emnn/random.hpp"
#include "emnn/wavegeom.hpp"

namespace emnn::data {

struct LabeledImage {
    Image image;
    int label = 0;
};

// K views of one sample, all n_row x n_col, sharing the label.
struct ViewSet {
    std::vector<Image> views;
    int label = 0;
};

struct IdxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reads a big-endian IDX image file (magic 0x00000803, count, rows, cols,
/// then one unsigned byte per pixel) and its label file (magic 0x00000801,
/// count, bytes). Pixels are scaled by 1/255. Throws IdxError naming the
/// offending field on bad magic, truncation or a count mismatch.
std::vector<LabeledImage> load_idx(const std::filesystem::path& images_path,
                                   const std::filesystem::path& labels_path);

// Bilinear resampling with pixel-center alignment and edge clamping; output
// clamped to [0, 1].
Image resize(const Image& image, int rows, int cols);

// Counter-clockwise rotation about the image center, bilinear sampling,
// zero outside the frame, output clamped to [0, 1].
Image rotate(const Image& image, double degrees);

// view k = resize(rotate(image, angles[k]), n_row, n_col).
ViewSet make_views(const LabeledImage& sample, std::span<const double> angles, const wavegeom::SimGeometry& geom);

// K evenly spaced angles in [-30, 30] degrees; K = 1 gives {0}.
std::vector<double> default_angles(int num_views);

// Comma-separated degrees, e.g. "-30,-10,10,30".
std::vector<double> parse_angles(std::string_view list);

// One epoch's batches: a seeded Fisher-Yates shuffle of 0..n-1 cut into
// chunks of batch_size, the last one possibly shorter.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, Rng& rng);

}  // namespace emnn::data
