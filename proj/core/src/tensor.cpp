#include "patrec/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace patrec {

Tensor tensor_from_field(const ScalarField& f) {
  Tensor t(1, f.dims);
  t.data = f.data;
  return t;
}

ScalarField field_from_tensor(const Tensor& t, const std::vector<double>& spacing,
                              std::size_t channel) {
  if (channel >= t.channels) throw std::invalid_argument("field_from_tensor: channel out of range");
  ScalarField f(t.dims, spacing);
  const double* src = t.channel(channel);
  std::copy(src, src + f.size(), f.data.begin());
  return f;
}

std::size_t ConvLayer::kernel_volume() const {
  std::size_t v = 1;
  for (std::size_t d = 0; d < rank; ++d) v *= kernel_size;
  return v;
}

ConvLayer make_conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t rank) {
  if (kernel % 2 == 0) throw std::invalid_argument("make_conv_layer: kernel extent must be odd");
  if (rank < 1 || rank > 3) throw std::invalid_argument("make_conv_layer: rank must be 1..3");
  ConvLayer layer;
  layer.in_channels = in_ch;
  layer.out_channels = out_ch;
  layer.kernel_size = kernel;
  layer.rank = rank;
  layer.weights.assign(out_ch * in_ch * layer.kernel_volume(), 0.0);
  layer.biases.assign(out_ch, 0.0);
  return layer;
}

namespace {

struct ConvPlan {
  std::size_t rank, kernel, margin;
  std::vector<std::size_t> dims, padded_dims;
  std::size_t spatial, padded_spatial;
  std::size_t width;            // extent of the last (contiguous) axis
  std::size_t padded_width;
  std::size_t rows;             // product of all but the last axis
  std::size_t kernel_rows;      // kernel^(rank-1)
  // For output row r and kernel row kr, the matching padded row starts at
  // row_base[r] + kernel_row_offset[kr].
  std::vector<std::size_t> row_base;
  std::vector<std::size_t> kernel_row_offset;

  ConvPlan(const std::vector<std::size_t>& d, std::size_t k) {
    rank = d.size();
    kernel = k;
    margin = k / 2;
    dims = d;
    padded_dims = d;
    for (auto& v : padded_dims) v += 2 * margin;
    spatial = element_count(dims);
    padded_spatial = element_count(padded_dims);
    width = dims[rank - 1];
    padded_width = padded_dims[rank - 1];
    rows = spatial / width;
    kernel_rows = 1;
    for (std::size_t i = 0; i + 1 < rank; ++i) kernel_rows *= kernel;

    // padded strides
    std::vector<std::size_t> pstride(rank, 1);
    for (std::size_t i = rank - 1; i-- > 0;) pstride[i] = pstride[i + 1] * padded_dims[i + 1];

    row_base.resize(rows);
    std::vector<std::size_t> idx(rank > 1 ? rank - 1 : 0, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t off = 0;
      for (std::size_t i = 0; i + 1 < rank; ++i) off += idx[i] * pstride[i];
      row_base[r] = off;
      for (std::size_t i = idx.size(); i-- > 0;) {
        if (++idx[i] < dims[i]) break;
        idx[i] = 0;
      }
    }
    kernel_row_offset.resize(kernel_rows);
    std::vector<std::size_t> kidx(rank > 1 ? rank - 1 : 0, 0);
    for (std::size_t kr = 0; kr < kernel_rows; ++kr) {
      std::size_t off = 0;
      for (std::size_t i = 0; i + 1 < rank; ++i) off += kidx[i] * pstride[i];
      kernel_row_offset[kr] = off;
      for (std::size_t i = kidx.size(); i-- > 0;) {
        if (++kidx[i] < kernel) break;
        kidx[i] = 0;
      }
    }
  }
};

// Copies each channel into a zero-padded buffer with `margin` voxels per side.
void pad_channels(const Tensor& t, const ConvPlan& plan, std::vector<double>& padded) {
  padded.assign(t.channels * plan.padded_spatial, 0.0);
  const std::size_t m = plan.margin;
  std::vector<std::size_t> pstride(plan.rank, 1);
  for (std::size_t i = plan.rank - 1; i-- > 0;) pstride[i] = pstride[i + 1] * plan.padded_dims[i + 1];
  for (std::size_t c = 0; c < t.channels; ++c) {
    const double* src = t.channel(c);
    double* dst = padded.data() + c * plan.padded_spatial;
    std::vector<std::size_t> idx(plan.rank > 1 ? plan.rank - 1 : 0, 0);
    for (std::size_t r = 0; r < plan.rows; ++r) {
      std::size_t off = m * pstride[plan.rank - 1];  // margin along the last axis
      for (std::size_t i = 0; i + 1 < plan.rank; ++i) off += (idx[i] + m) * pstride[i];
      std::memcpy(dst + off, src + r * plan.width, plan.width * sizeof(double));
      for (std::size_t i = idx.size(); i-- > 0;) {
        if (++idx[i] < plan.dims[i]) break;
        idx[i] = 0;
      }
    }
  }
}

// out[oc] = bias[oc] + sum_ic weights[oc][ic] (*) padded_in[ic].
// Weight layout [oc][ic][kvol]; biases may be null.
void conv_core(const std::vector<double>& padded, std::size_t in_channels,
               const ConvPlan& plan, const double* weights, const double* biases,
               std::size_t out_channels, double* out) {
  const std::size_t kvol = plan.kernel_rows * plan.kernel;
  const std::size_t width = plan.width;
  for (std::size_t oc = 0; oc < out_channels; ++oc) {
    double* out_ch = out + oc * plan.spatial;
    const double bias = biases ? biases[oc] : 0.0;
    for (std::size_t r = 0; r < plan.rows; ++r) {
      double* __restrict orow = out_ch + r * width;
      for (std::size_t x = 0; x < width; ++x) orow[x] = bias;
      for (std::size_t ic = 0; ic < in_channels; ++ic) {
        const double* pch = padded.data() + ic * plan.padded_spatial;
        const double* wbase = weights + (oc * in_channels + ic) * kvol;
        for (std::size_t kr = 0; kr < plan.kernel_rows; ++kr) {
          const double* __restrict prow = pch + plan.row_base[r] + plan.kernel_row_offset[kr];
          const double* wrow = wbase + kr * plan.kernel;
          for (std::size_t kx = 0; kx < plan.kernel; ++kx) {
            const double wv = wrow[kx];
            const double* __restrict shifted = prow + kx;
            for (std::size_t x = 0; x < width; ++x) orow[x] += wv * shifted[x];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv_forward(const Tensor& input, const ConvLayer& layer) {
  if (input.channels != layer.in_channels)
    throw std::invalid_argument("conv_forward: channel count mismatch");
  if (input.dims.size() != layer.rank)
    throw std::invalid_argument("conv_forward: spatial rank mismatch");
  ConvPlan plan(input.dims, layer.kernel_size);
  std::vector<double> padded;
  pad_channels(input, plan, padded);
  Tensor out(layer.out_channels, input.dims);
  conv_core(padded, layer.in_channels, plan, layer.weights.data(), layer.biases.data(),
            layer.out_channels, out.data.data());
  return out;
}

ConvGrads conv_backward(const Tensor& input, const ConvLayer& layer, const Tensor& upstream) {
  if (input.channels != layer.in_channels || upstream.channels != layer.out_channels ||
      input.dims != upstream.dims)
    throw std::invalid_argument("conv_backward: shape mismatch");
  ConvPlan plan(input.dims, layer.kernel_size);
  const std::size_t kvol = layer.kernel_volume();
  const std::size_t width = plan.width;

  ConvGrads grads;
  grads.weights.assign(layer.weights.size(), 0.0);
  grads.biases.assign(layer.out_channels, 0.0);

  // Bias gradient: plain sums over the upstream channels.
  for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
    const double* up = upstream.channel(oc);
    double s = 0.0;
    for (std::size_t i = 0; i < plan.spatial; ++i) s += up[i];
    grads.biases[oc] = s;
  }

  // Weight gradient: correlation of the padded input with the upstream.
  std::vector<double> padded_in;
  pad_channels(input, plan, padded_in);
  for (std::size_t oc = 0; oc < layer.out_channels; ++oc) {
    const double* up_ch = upstream.channel(oc);
    for (std::size_t ic = 0; ic < layer.in_channels; ++ic) {
      const double* pch = padded_in.data() + ic * plan.padded_spatial;
      double* wg = grads.weights.data() + (oc * layer.in_channels + ic) * kvol;
      for (std::size_t r = 0; r < plan.rows; ++r) {
        const double* __restrict urow = up_ch + r * width;
        for (std::size_t kr = 0; kr < plan.kernel_rows; ++kr) {
          const double* __restrict prow = pch + plan.row_base[r] + plan.kernel_row_offset[kr];
          for (std::size_t kx = 0; kx < plan.kernel; ++kx) {
            const double* __restrict shifted = prow + kx;
            double s = 0.0;
            for (std::size_t x = 0; x < width; ++x) s += urow[x] * shifted[x];
            wg[kr * plan.kernel + kx] += s;
          }
        }
      }
    }
  }

  // Input gradient: convolution of the padded upstream with channel-swapped,
  // fully flipped kernels (reversing the flattened cube flips every axis).
  std::vector<double> wt(layer.weights.size());
  for (std::size_t oc = 0; oc < layer.out_channels; ++oc)
    for (std::size_t ic = 0; ic < layer.in_channels; ++ic)
      for (std::size_t j = 0; j < kvol; ++j)
        wt[(ic * layer.out_channels + oc) * kvol + j] =
            layer.weights[(oc * layer.in_channels + ic) * kvol + (kvol - 1 - j)];
  std::vector<double> padded_up;
  pad_channels(upstream, plan, padded_up);
  grads.input = Tensor(layer.in_channels, input.dims);
  conv_core(padded_up, layer.out_channels, plan, wt.data(), nullptr, layer.in_channels,
            grads.input.data.data());
  return grads;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& pre_activation, const Tensor& upstream) {
  if (pre_activation.data.size() != upstream.data.size())
    throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor out = upstream;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (!(pre_activation.data[i] > 0.0)) out.data[i] = 0.0;
  return out;
}

}  // namespace patrec
