#pragma once

#include <vector>

#include "unigs/core.hpp"

namespace unigs {

// Linear RGB image, row-major, three doubles per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, const Rgb& fill = Rgb::Zero());

  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, const Rgb& c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    data[i] = c.x();
    data[i + 1] = c.y();
    data[i + 2] = c.z();
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

struct ImageDiff {
  double mean_abs_error = 0.0;           // over all channels
  Rgb mean_abs_error_channel = Rgb::Zero();
  double max_abs_error = 0.0;
  Rgb max_abs_error_channel = Rgb::Zero();
  double mse = 0.0;
  double psnr = 0.0;  // +inf for identical images, peak value 1
};

// Throws InputError on size mismatch.
ImageDiff diff_images(const Image& a, const Image& b);

}  // namespace unigs
