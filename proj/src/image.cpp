#include "unigs/image.hpp"

#include <cmath>
#include <limits>

#include "unigs/error.hpp"

namespace unigs {

Image::Image(int w, int h, const Rgb& fill) : width(w), height(h) {
  data.resize(3 * static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    data[3 * i] = fill.x();
    data[3 * i + 1] = fill.y();
    data[3 * i + 2] = fill.z();
  }
}

ImageDiff diff_images(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InputError("image size mismatch: " + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height));
  }
  ImageDiff d;
  const std::size_t n = a.pixel_count();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double e = std::abs(a.data[3 * i + c] - b.data[3 * i + c]);
      d.mean_abs_error_channel[c] += e;
      d.max_abs_error_channel[c] = std::max(d.max_abs_error_channel[c], e);
      sq += e * e;
    }
  }
  if (n > 0) {
    d.mean_abs_error_channel /= static_cast<double>(n);
    d.mean_abs_error = d.mean_abs_error_channel.mean();
    d.mse = sq / (3.0 * static_cast<double>(n));
  }
  d.max_abs_error = d.max_abs_error_channel.maxCoeff();
  d.psnr = d.mse > 0.0 ? -10.0 * std::log10(d.mse) : std::numeric_limits<double>::infinity();
  return d;
}

}  // namespace unigs
