#pragma once

#include <cstddef>
#include <vector>

#include "patrec/field.hpp"

namespace patrec {

/// Multichannel grid: data laid out [channel][spatial row-major].
struct Tensor {
  std::size_t channels = 0;
  std::vector<std::size_t> dims;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t ch, std::vector<std::size_t> d)
      : channels(ch), dims(std::move(d)), data(ch * element_count(dims), 0.0) {}

  std::size_t spatial_size() const { return element_count(dims); }
  double* channel(std::size_t c) { return data.data() + c * spatial_size(); }
  const double* channel(std::size_t c) const { return data.data() + c * spatial_size(); }
};

Tensor tensor_from_field(const ScalarField& f);
ScalarField field_from_tensor(const Tensor& t, const std::vector<double>& spacing,
                              std::size_t channel = 0);

/// Same-size convolution layer with zero padding; kernel extent must be odd.
struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;  // per axis
  std::size_t rank = 0;         // spatial dimension
  std::vector<double> weights;  // [oc][ic][kernel^rank]
  std::vector<double> biases;   // [oc]

  std::size_t kernel_volume() const;
};

ConvLayer make_conv_layer(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t rank);

Tensor conv_forward(const Tensor& input, const ConvLayer& layer);

struct ConvGrads {
  std::vector<double> weights;
  std::vector<double> biases;
  Tensor input;  // gradient with respect to the layer input
};

ConvGrads conv_backward(const Tensor& input, const ConvLayer& layer, const Tensor& upstream);

/// Elementwise max(x, 0).
Tensor relu(const Tensor& t);

/// upstream masked by pre_activation > 0 (derivative at 0 is 0).
Tensor relu_backward(const Tensor& pre_activation, const Tensor& upstream);

}  // namespace patrec
