// Multi-channel floating-point images.
#pragma once

#include <vector>

#include <Eigen/Core>

namespace lensforge {

using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Multi-channel image. Values are nominally in [0, 1].
struct Image {
  std::vector<Plane> channels;
  double depth = 0.0;

  Image() = default;
  Image(int channel_count, int rows, int cols, double fill = 0.0);
  int rows() const { return channels.empty() ? 0 : static_cast<int>(channels[0].rows()); }
  int cols() const { return channels.empty() ? 0 : static_cast<int>(channels[0].cols()); }
  int channel_count() const { return static_cast<int>(channels.size()); }
  bool same_shape(const Image& other) const;
  double mean() const;
};

}  // namespace lensforge
