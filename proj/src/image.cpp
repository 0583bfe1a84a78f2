#include "lensforge/image.hpp"

namespace lensforge {

Image::Image(int channel_count, int rows, int cols, double fill) {
  for (int c = 0; c < channel_count; ++c) channels.push_back(Plane::Constant(rows, cols, fill));
}

bool Image::same_shape(const Image& other) const {
  return channel_count() == other.channel_count() && rows() == other.rows() &&
         cols() == other.cols();
}

double Image::mean() const {
  double s = 0.0;
  for (const auto& p : channels) s += p.mean();
  return channels.empty() ? 0.0 : s / channel_count();
}

}  // namespace lensforge
