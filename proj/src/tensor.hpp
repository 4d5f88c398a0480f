#pragma once

#include <cstddef>
#include <vector>

#include "error.hpp"

namespace boneage {

/// Dense row-major numeric array with an explicit shape. The network uses
/// rank-3 activations (height, width, channels) and rank-4 conv kernels
/// (ky, kx, in_channels, out_channels); at3/at4 index those layouts.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int e : shape) {
      if (e < 1) {
        fail(ErrorKind::Shape, "tensor extents must be >= 1");
      }
      n *= static_cast<std::size_t>(e);
    }
    data.assign(n, fill);
  }

  std::size_t numel() const { return data.size(); }

  double& at3(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
  }
  double at3(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
  }

  double& at4(int ky, int kx, int ic, int oc) {
    return data[((static_cast<std::size_t>(ky) * shape[1] + kx) * shape[2] +
                 ic) *
                    shape[3] +
                oc];
  }
  double at4(int ky, int kx, int ic, int oc) const {
    return data[((static_cast<std::size_t>(ky) * shape[1] + kx) * shape[2] +
                 ic) *
                    shape[3] +
                oc];
  }

  bool operator==(const Tensor&) const = default;
};

}  // namespace boneage
