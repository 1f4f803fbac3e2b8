#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/rng.hpp"

namespace toponav {
namespace nn {

// Minimal float64 layers with explicit reverse-mode passes. Shapes are
// plain vectors; convolution planes are stored channel-major, row-major
// within a plane.

inline void tanh_forward(std::vector<double>& v) {
  for (double& x : v) x = std::tanh(x);
}

// dx = dy * (1 - y^2), with y the stored post-activation output.
inline void tanh_backward(const std::vector<double>& y,
                          std::vector<double>& dy) {
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] *= 1.0 - y[i] * y[i];
}

struct Dense {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // [out][in]
  std::vector<double> b;  // [out]
  std::vector<double> gw, gb;

  void init(int in_n, int out_n, Rng& rng) {
    in = in_n;
    out = out_n;
    double a = std::sqrt(6.0 / (in + out));
    w.resize(static_cast<std::size_t>(in) * out);
    for (double& x : w) x = rng.uniform(-a, a);
    b.assign(static_cast<std::size_t>(out), 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
  }

  std::vector<double> forward(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      double acc = b[static_cast<std::size_t>(o)];
      for (int i = 0; i < in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = acc;
    }
    return y;
  }

  // Accumulates into gw/gb; returns gradient w.r.t. the input.
  std::vector<double> backward(const std::vector<double>& x,
                               const std::vector<double>& dy) {
    std::vector<double> dx(static_cast<std::size_t>(in), 0.0);
    for (int o = 0; o < out; ++o) {
      double g = dy[static_cast<std::size_t>(o)];
      gb[static_cast<std::size_t>(o)] += g;
      double* grow = gw.data() + static_cast<std::size_t>(o) * in;
      const double* row = w.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) {
        grow[i] += g * x[static_cast<std::size_t>(i)];
        dx[static_cast<std::size_t>(i)] += g * row[i];
      }
    }
    return dx;
  }
};

// Non-padded convolution; output side = (in_side - k) / stride + 1.
struct Conv {
  int in_c = 0, in_s = 0;
  int out_c = 0, out_s = 0;
  int k = 0, stride = 0;
  std::vector<double> w;  // [out_c][in_c][k][k]
  std::vector<double> b;  // [out_c]
  std::vector<double> gw, gb;

  void init(int in_channels, int in_side, int out_channels, int kernel,
            int step, Rng& rng) {
    in_c = in_channels;
    in_s = in_side;
    out_c = out_channels;
    k = kernel;
    stride = step;
    if ((in_s - k) % stride != 0 || in_s < k)
      throw ConfigError("conv geometry: side " + std::to_string(in_s) +
                        ", kernel " + std::to_string(k) + ", stride " +
                        std::to_string(stride));
    out_s = (in_s - k) / stride + 1;
    double fan_in = static_cast<double>(in_c) * k * k;
    double fan_out = static_cast<double>(out_c) * k * k;
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    w.resize(static_cast<std::size_t>(out_c) * in_c * k * k);
    for (double& x : w) x = rng.uniform(-a, a);
    b.assign(static_cast<std::size_t>(out_c), 0.0);
    gw.assign(w.size(), 0.0);
    gb.assign(b.size(), 0.0);
  }

  std::size_t in_size() const {
    return static_cast<std::size_t>(in_c) * in_s * in_s;
  }
  std::size_t out_size() const {
    return static_cast<std::size_t>(out_c) * out_s * out_s;
  }

  std::vector<double> forward(const std::vector<double>& x) const {
    std::vector<double> y(out_size());
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < out_s; ++oy)
        for (int ox = 0; ox < out_s; ++ox) {
          double acc = b[static_cast<std::size_t>(oc)];
          for (int ic = 0; ic < in_c; ++ic) {
            const double* plane =
                x.data() + static_cast<std::size_t>(ic) * in_s * in_s;
            const double* ker = w.data() +
                                ((static_cast<std::size_t>(oc) * in_c + ic) *
                                 k * k);
            for (int ky = 0; ky < k; ++ky) {
              const double* row = plane +
                                  static_cast<std::size_t>(oy * stride + ky) *
                                      in_s +
                                  ox * stride;
              const double* krow = ker + static_cast<std::size_t>(ky) * k;
              for (int kx = 0; kx < k; ++kx) acc += krow[kx] * row[kx];
            }
          }
          y[(static_cast<std::size_t>(oc) * out_s + oy) * out_s + ox] = acc;
        }
    return y;
  }

  std::vector<double> backward(const std::vector<double>& x,
                               const std::vector<double>& dy) {
    std::vector<double> dx(in_size(), 0.0);
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < out_s; ++oy)
        for (int ox = 0; ox < out_s; ++ox) {
          double g =
              dy[(static_cast<std::size_t>(oc) * out_s + oy) * out_s + ox];
          gb[static_cast<std::size_t>(oc)] += g;
          for (int ic = 0; ic < in_c; ++ic) {
            const double* plane =
                x.data() + static_cast<std::size_t>(ic) * in_s * in_s;
            double* dplane =
                dx.data() + static_cast<std::size_t>(ic) * in_s * in_s;
            std::size_t kbase =
                (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              std::size_t row_off =
                  static_cast<std::size_t>(oy * stride + ky) * in_s +
                  ox * stride;
              for (int kx = 0; kx < k; ++kx) {
                std::size_t ki = kbase + static_cast<std::size_t>(ky) * k + kx;
                gw[ki] += g * plane[row_off + kx];
                dplane[row_off + kx] += g * w[ki];
              }
            }
          }
        }
    return dx;
  }
};

}  // namespace nn
}  // namespace toponav
