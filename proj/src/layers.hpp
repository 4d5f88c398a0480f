#pragma once

#include <vector>

#include "rng.hpp"
#include "tensor.hpp"

namespace boneage {

/// 2-D convolution over an HWC input with kernels shaped (3, 3, in, out).
/// Output extent per spatial axis is floor((in + 2*padding - 3)/stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels,
              const std::vector<double>& bias, int stride, int padding);

/// Gradients of a scalar loss through conv2d. grad_input/grad_kernels/
/// grad_bias are fully overwritten; shapes follow the forward arguments.
void conv2d_backward(const Tensor& input, const Tensor& kernels, int stride,
                     int padding, const Tensor& upstream, Tensor& grad_input,
                     Tensor& grad_kernels, std::vector<double>& grad_bias);

/// Elementwise max(0, x).
Tensor relu(const Tensor& x);

/// upstream routed through entries where the pre-activation was > 0.
Tensor relu_backward(const Tensor& preact, const Tensor& upstream);

/// 2x2 max pooling with stride 2; spatial extents must be even. argmax
/// records the flat input index feeding each output (ties resolve to the
/// first maximal element in row-major window order), which the backward
/// pass scatters into.
Tensor maxpool2(const Tensor& input, std::vector<int>& argmax);
Tensor maxpool2_backward(const Tensor& upstream,
                         const std::vector<int>& argmax,
                         const std::vector<int>& input_shape);

/// Per-channel spatial mean, and its uniform-redistribution backward.
std::vector<double> gap(const Tensor& input);
Tensor gap_backward(const std::vector<double>& upstream,
                    const std::vector<int>& input_shape);

/// W x + b with W shaped (out, in).
std::vector<double> dense(const std::vector<double>& x, const Tensor& w,
                          const std::vector<double>& b);
void dense_backward(const std::vector<double>& x, const Tensor& w,
                    const std::vector<double>& upstream,
                    std::vector<double>& grad_x, Tensor& grad_w,
                    std::vector<double>& grad_b);

/// Inverted dropout. Train mode zeroes each unit with probability rate and
/// scales survivors by 1/(1-rate); infer mode is the identity. mask receives
/// the per-unit multiplier actually applied (all ones in infer mode), which
/// is also the backward multiplier. rate outside [0,1) is a ConfigError.
enum class DropoutMode { Train, Infer };
std::vector<double> dropout(const std::vector<double>& x, double rate,
                            DropoutMode mode, Rng& rng,
                            std::vector<double>& mask);

/// Mean squared error and its gradient 2(pred - target)/n.
double mse_loss(const std::vector<double>& pred,
                const std::vector<double>& target);
std::vector<double> mse_gradient(const std::vector<double>& pred,
                                 const std::vector<double>& target);

}  // namespace boneage
