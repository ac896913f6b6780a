#pragma once

// Independent test oracles: deliberately naive implementations used to check
// the production code, kept free of any shared code paths with it.

#include <cmath>
#include <functional>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/field.hpp"
#include "patrec/tensor.hpp"

namespace oracles {

// Direct nested-loop 2D cross-correlation with zero padding, matching the
// layer semantics of conv_forward.
inline patrec::Tensor naive_conv2d(const patrec::Tensor& input, const patrec::ConvLayer& layer) {
  const long h = long(input.dims[0]), w = long(input.dims[1]);
  const long k = long(layer.kernel_size), m = k / 2;
  patrec::Tensor out(layer.out_channels, input.dims);
  for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        double acc = layer.biases[oc];
        for (std::size_t ic = 0; ic < layer.in_channels; ++ic) {
          for (long ky = 0; ky < k; ++ky) {
            for (long kx = 0; kx < k; ++kx) {
              long sy = y + ky - m, sx = x + kx - m;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              double wv = layer.weights[((oc * layer.in_channels + ic) * k + ky) * k + kx];
              acc += wv * input.channel(ic)[sy * w + sx];
            }
          }
        }
        out.channel(oc)[y * w + x] = acc;
      }
    }
  }
  return out;
}

// Dense matrix of the forward operator, one column per grid voxel.
inline std::vector<std::vector<double>> dense_forward_matrix(const patrec::AcousticOperator& op) {
  const auto& g = op.geometry();
  const std::size_t n = patrec::element_count(g.dims);
  const std::size_t rows = g.active_count() * g.num_time_samples;
  std::vector<std::vector<double>> a(rows, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    patrec::ScalarField e(g.dims, g.spacing);
    e.data[j] = 1.0;
    patrec::SensorData col = op.forward(e);
    for (std::size_t r = 0; r < rows; ++r) a[r][j] = col.data[r];
  }
  return a;
}

// Central finite difference of a scalar function along one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x0, double h) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// Connected components of image > threshold under 4/6-connectivity.
inline int component_count(const patrec::ScalarField& f, double threshold) {
  const std::size_t n = f.size();
  std::vector<char> visited(n, 0);
  std::vector<std::size_t> strides(f.ndim(), 1);
  for (std::size_t d = f.ndim() - 1; d-- > 0;) strides[d] = strides[d + 1] * f.dims[d + 1];

  auto coords_of = [&](std::size_t flat) {
    std::vector<std::size_t> c(f.ndim());
    for (std::size_t d = 0; d < f.ndim(); ++d) {
      c[d] = flat / strides[d];
      flat %= strides[d];
    }
    return c;
  };

  int components = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (visited[s] || f.data[s] <= threshold) continue;
    ++components;
    stack.push_back(s);
    visited[s] = 1;
    while (!stack.empty()) {
      std::size_t cur = stack.back();
      stack.pop_back();
      auto c = coords_of(cur);
      for (std::size_t d = 0; d < f.ndim(); ++d) {
        if (c[d] > 0) {
          std::size_t nb = cur - strides[d];
          if (!visited[nb] && f.data[nb] > threshold) { visited[nb] = 1; stack.push_back(nb); }
        }
        if (c[d] + 1 < f.dims[d]) {
          std::size_t nb = cur + strides[d];
          if (!visited[nb] && f.data[nb] > threshold) { visited[nb] = 1; stack.push_back(nb); }
        }
      }
    }
  }
  return components;
}

}  // namespace oracles
