#include "layers.hpp"

#include <algorithm>

#include "error.hpp"

namespace boneage {

namespace {

void check_conv_args(const Tensor& input, const Tensor& kernels,
                     const std::vector<double>& bias, int stride,
                     int padding) {
  if (input.shape.size() != 3) {
    fail(ErrorKind::Shape, "conv2d input must be rank-3 HWC");
  }
  if (kernels.shape.size() != 4 || kernels.shape[0] != 3 ||
      kernels.shape[1] != 3) {
    fail(ErrorKind::Shape, "conv2d kernels must be shaped (3,3,in,out)");
  }
  if (kernels.shape[2] != input.shape[2]) {
    fail(ErrorKind::Shape, "conv2d kernel input channels do not match input");
  }
  if (bias.size() != static_cast<std::size_t>(kernels.shape[3])) {
    fail(ErrorKind::Shape, "conv2d bias length does not match out channels");
  }
  if (stride < 1 || padding < 0) {
    fail(ErrorKind::Config, "conv2d stride must be >= 1 and padding >= 0");
  }
}

int conv_extent(int in, int stride, int padding) {
  const int span = in + 2 * padding - 3;
  if (span < 0) {
    fail(ErrorKind::Shape, "conv2d input smaller than kernel");
  }
  return span / stride + 1;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels,
              const std::vector<double>& bias, int stride, int padding) {
  check_conv_args(input, kernels, bias, stride, padding);
  const int in_h = input.shape[0], in_w = input.shape[1], cin = input.shape[2];
  const int cout = kernels.shape[3];
  const int out_h = conv_extent(in_h, stride, padding);
  const int out_w = conv_extent(in_w, stride, padding);
  Tensor out({out_h, out_w, cout});
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (int oc = 0; oc < cout; ++oc) {
        double acc = bias[oc];
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= in_w) continue;
            for (int ic = 0; ic < cin; ++ic) {
              acc += input.at3(iy, ix, ic) * kernels.at4(ky, kx, ic, oc);
            }
          }
        }
        out.at3(oy, ox, oc) = acc;
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernels, int stride,
                     int padding, const Tensor& upstream, Tensor& grad_input,
                     Tensor& grad_kernels, std::vector<double>& grad_bias) {
  const int in_h = input.shape[0], in_w = input.shape[1], cin = input.shape[2];
  const int cout = kernels.shape[3];
  const int out_h = upstream.shape[0], out_w = upstream.shape[1];
  grad_input = Tensor(input.shape);
  grad_kernels = Tensor(kernels.shape);
  grad_bias.assign(cout, 0.0);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (int oc = 0; oc < cout; ++oc) {
        const double g = upstream.at3(oy, ox, oc);
        grad_bias[oc] += g;
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= in_w) continue;
            for (int ic = 0; ic < cin; ++ic) {
              grad_kernels.at4(ky, kx, ic, oc) += input.at3(iy, ix, ic) * g;
              grad_input.at3(iy, ix, ic) += kernels.at4(ky, kx, ic, oc) * g;
            }
          }
        }
      }
    }
  }
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) {
    v = std::max(0.0, v);
  }
  return out;
}

Tensor relu_backward(const Tensor& preact, const Tensor& upstream) {
  if (preact.shape != upstream.shape) {
    fail(ErrorKind::Shape, "relu backward shape mismatch");
  }
  Tensor out = upstream;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (preact.data[i] <= 0.0) {
      out.data[i] = 0.0;
    }
  }
  return out;
}

Tensor maxpool2(const Tensor& input, std::vector<int>& argmax) {
  if (input.shape.size() != 3) {
    fail(ErrorKind::Shape, "maxpool2 input must be rank-3 HWC");
  }
  const int in_h = input.shape[0], in_w = input.shape[1], c = input.shape[2];
  if (in_h % 2 != 0 || in_w % 2 != 0) {
    fail(ErrorKind::Shape, "maxpool2 requires even spatial extents");
  }
  Tensor out({in_h / 2, in_w / 2, c});
  argmax.assign(out.numel(), 0);
  std::size_t o = 0;
  for (int oy = 0; oy < in_h / 2; ++oy) {
    for (int ox = 0; ox < in_w / 2; ++ox) {
      for (int ch = 0; ch < c; ++ch, ++o) {
        double best = input.at3(2 * oy, 2 * ox, ch);
        int best_idx = (2 * oy * in_w + 2 * ox) * c + ch;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int iy = 2 * oy + dy, ix = 2 * ox + dx;
            const double v = input.at3(iy, ix, ch);
            if (v > best) {
              best = v;
              best_idx = (iy * in_w + ix) * c + ch;
            }
          }
        }
        out.data[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
  return out;
}

Tensor maxpool2_backward(const Tensor& upstream, const std::vector<int>& argmax,
                         const std::vector<int>& input_shape) {
  if (argmax.size() != upstream.numel()) {
    fail(ErrorKind::Shape, "maxpool2 backward argmax length mismatch");
  }
  Tensor grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    grad.data[argmax[o]] += upstream.data[o];
  }
  return grad;
}

std::vector<double> gap(const Tensor& input) {
  if (input.shape.size() != 3) {
    fail(ErrorKind::Shape, "gap input must be rank-3 HWC");
  }
  const int h = input.shape[0], w = input.shape[1], c = input.shape[2];
  std::vector<double> out(c, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        out[ch] += input.at3(y, x, ch);
      }
    }
  }
  const double scale = 1.0 / (static_cast<double>(h) * w);
  for (double& v : out) {
    v *= scale;
  }
  return out;
}

Tensor gap_backward(const std::vector<double>& upstream,
                    const std::vector<int>& input_shape) {
  const int h = input_shape[0], w = input_shape[1], c = input_shape[2];
  if (upstream.size() != static_cast<std::size_t>(c)) {
    fail(ErrorKind::Shape, "gap backward channel mismatch");
  }
  Tensor grad(input_shape);
  const double scale = 1.0 / (static_cast<double>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        grad.at3(y, x, ch) = upstream[ch] * scale;
      }
    }
  }
  return grad;
}

std::vector<double> dense(const std::vector<double>& x, const Tensor& w,
                          const std::vector<double>& b) {
  if (w.shape.size() != 2 ||
      w.shape[1] != static_cast<int>(x.size()) ||
      w.shape[0] != static_cast<int>(b.size())) {
    fail(ErrorKind::Shape, "dense dimensions do not match");
  }
  const int rows = w.shape[0], cols = w.shape[1];
  std::vector<double> out(rows);
  for (int r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w.data.data() + static_cast<std::size_t>(r) * cols;
    for (int ccol = 0; ccol < cols; ++ccol) {
      acc += row[ccol] * x[ccol];
    }
    out[r] = acc;
  }
  return out;
}

void dense_backward(const std::vector<double>& x, const Tensor& w,
                    const std::vector<double>& upstream,
                    std::vector<double>& grad_x, Tensor& grad_w,
                    std::vector<double>& grad_b) {
  const int rows = w.shape[0], cols = w.shape[1];
  if (upstream.size() != static_cast<std::size_t>(rows)) {
    fail(ErrorKind::Shape, "dense backward upstream length mismatch");
  }
  grad_x.assign(cols, 0.0);
  grad_w = Tensor(w.shape);
  grad_b = upstream;
  for (int r = 0; r < rows; ++r) {
    const double g = upstream[r];
    const double* row = w.data.data() + static_cast<std::size_t>(r) * cols;
    double* grow = grad_w.data.data() + static_cast<std::size_t>(r) * cols;
    for (int ccol = 0; ccol < cols; ++ccol) {
      grow[ccol] = g * x[ccol];
      grad_x[ccol] += row[ccol] * g;
    }
  }
}

std::vector<double> dropout(const std::vector<double>& x, double rate,
                            DropoutMode mode, Rng& rng,
                            std::vector<double>& mask) {
  if (rate < 0.0 || rate >= 1.0) {
    fail(ErrorKind::Config, "dropout rate must lie in [0,1)");
  }
  mask.assign(x.size(), 1.0);
  std::vector<double> out = x;
  if (mode == DropoutMode::Infer || rate == 0.0) {
    return out;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (rng.uniform() < rate) {
      mask[i] = 0.0;
      out[i] = 0.0;
    } else {
      mask[i] = keep_scale;
      out[i] = x[i] * keep_scale;
    }
  }
  return out;
}

double mse_loss(const std::vector<double>& pred,
                const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    fail(ErrorKind::Shape, "mse_loss requires equal nonempty lengths");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

std::vector<double> mse_gradient(const std::vector<double>& pred,
                                 const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) {
    fail(ErrorKind::Shape, "mse_gradient requires equal nonempty lengths");
  }
  std::vector<double> grad(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    grad[i] = scale * (pred[i] - target[i]);
  }
  return grad;
}

}  // namespace boneage
