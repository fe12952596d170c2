#pragma once

#include <cassert>
#include <vector>

namespace emnn {

// Row-major grayscale image, pixels nominally in [0, 1].
struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int r, int c, double fill = 0.0) : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, fill) {}

    double& at(int r, int c) {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return pixels[static_cast<std::size_t>(r) * cols + c];
    }
    double at(int r, int c) const {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return pixels[static_cast<std::size_t>(r) * cols + c];
    }
    std::size_t size() const { return pixels.size(); }
};

}  // namespace emnn
