#include "patrec/unet.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "patrec/parallel.hpp"

namespace patrec {

namespace {

// 2x2 max pooling, stride 2; argmax stores the flat input index per output.
Tensor maxpool2(const Tensor& in, std::vector<std::size_t>& argmax) {
  const std::size_t h = in.dims[0], w = in.dims[1];
  Tensor out(in.channels, {h / 2, w / 2});
  argmax.resize(out.data.size());
  const std::size_t oh = h / 2, ow = w / 2;
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        double best_val = src[best];
        const std::size_t cand[3] = {(2 * y) * w + 2 * x + 1, (2 * y + 1) * w + 2 * x,
                                     (2 * y + 1) * w + 2 * x + 1};
        for (std::size_t idx : cand)
          if (src[idx] > best_val) { best = idx; best_val = src[idx]; }
        dst[y * ow + x] = best_val;
        argmax[c * oh * ow + y * ow + x] = c * h * w + best;
      }
    }
  }
  return out;
}

Tensor maxpool2_backward(const Tensor& pooled_upstream, const std::vector<std::size_t>& argmax,
                         std::size_t channels, const std::vector<std::size_t>& in_dims) {
  Tensor out(channels, in_dims);
  for (std::size_t i = 0; i < pooled_upstream.data.size(); ++i)
    out.data[argmax[i]] += pooled_upstream.data[i];
  return out;
}

// Nearest-neighbor 2x upsampling.
Tensor upsample2(const Tensor& in) {
  const std::size_t h = in.dims[0], w = in.dims[1];
  Tensor out(in.channels, {2 * h, 2 * w});
  for (std::size_t c = 0; c < in.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t x = 0; x < 2 * w; ++x)
        dst[y * 2 * w + x] = src[(y / 2) * w + x / 2];
  }
  return out;
}

Tensor upsample2_backward(const Tensor& upstream) {
  const std::size_t h = upstream.dims[0] / 2, w = upstream.dims[1] / 2;
  Tensor out(upstream.channels, {h, w});
  for (std::size_t c = 0; c < upstream.channels; ++c) {
    const double* src = upstream.channel(c);
    double* dst = out.channel(c);
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t x = 0; x < 2 * w; ++x)
        dst[(y / 2) * w + x / 2] += src[y * 2 * w + x];
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.channels + b.channels, a.dims);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

void split(const Tensor& cat, Tensor& a, Tensor& b) {
  std::copy(cat.data.begin(), cat.data.begin() + a.data.size(), a.data.begin());
  std::copy(cat.data.begin() + a.data.size(), cat.data.end(), b.data.begin());
}

}  // namespace

struct UnetCache {
  Tensor a_e1, e1, p1;
  Tensor a_e2, e2, p2;
  Tensor a_e3, e3;
  Tensor u2, a_v2, v2, cat2, a_d2, d2;
  Tensor u1, a_v1, v1, cat1, a_d1, d1;
  Tensor r;  // linear output conv
  std::vector<double> pre_residual;
  std::vector<std::size_t> argmax1, argmax2;
};

UnetWeights init_unet_weights(SeededRng& rng) {
  UnetWeights w;
  w.enc1 = make_conv_layer(1, 8, 3, 2);
  w.enc2 = make_conv_layer(8, 16, 3, 2);
  w.enc3 = make_conv_layer(16, 32, 3, 2);
  w.up2 = make_conv_layer(32, 16, 3, 2);
  w.dec2 = make_conv_layer(32, 16, 3, 2);
  w.up1 = make_conv_layer(16, 8, 3, 2);
  w.dec1 = make_conv_layer(16, 8, 3, 2);
  w.out = make_conv_layer(8, 1, 3, 2);
  for (ConvLayer* layer : {&w.enc1, &w.enc2, &w.enc3, &w.up2, &w.dec2, &w.up1, &w.dec1, &w.out})
    he_init(*layer, rng);
  w.out_scale = 0.01;
  return w;
}

namespace {

void run_unet(const ScalarField& x0, const UnetWeights& w, UnetCache& c,
              ScalarField& out) {
  if (x0.ndim() != 2) throw std::invalid_argument("unet_forward: expects a 2D field");
  if (x0.dims[0] % 4 != 0 || x0.dims[1] % 4 != 0)
    throw std::invalid_argument("unet_forward: dims must be divisible by 4");

  Tensor xt = tensor_from_field(x0);
  c.a_e1 = conv_forward(xt, w.enc1);
  c.e1 = relu(c.a_e1);
  c.p1 = maxpool2(c.e1, c.argmax1);
  c.a_e2 = conv_forward(c.p1, w.enc2);
  c.e2 = relu(c.a_e2);
  c.p2 = maxpool2(c.e2, c.argmax2);
  c.a_e3 = conv_forward(c.p2, w.enc3);
  c.e3 = relu(c.a_e3);

  c.u2 = upsample2(c.e3);
  c.a_v2 = conv_forward(c.u2, w.up2);
  c.v2 = relu(c.a_v2);
  c.cat2 = concat(c.v2, c.e2);
  c.a_d2 = conv_forward(c.cat2, w.dec2);
  c.d2 = relu(c.a_d2);

  c.u1 = upsample2(c.d2);
  c.a_v1 = conv_forward(c.u1, w.up1);
  c.v1 = relu(c.a_v1);
  c.cat1 = concat(c.v1, c.e1);
  c.a_d1 = conv_forward(c.cat1, w.dec1);
  c.d1 = relu(c.a_d1);

  c.r = conv_forward(c.d1, w.out);

  out = x0;
  c.pre_residual.resize(x0.size());
  const double* r = c.r.channel(0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double pre = x0.data[i] + w.out_scale * r[i];
    c.pre_residual[i] = pre;
    out.data[i] = pre > 0.0 ? pre : 0.0;
  }
}

}  // namespace

ScalarField unet_forward(const ScalarField& x0, const UnetWeights& w) {
  UnetCache cache;
  ScalarField out;
  run_unet(x0, w, cache, out);
  return out;
}

UnetForwardResult unet_forward_cached(const ScalarField& x0, const UnetWeights& w) {
  UnetForwardResult res;
  res.cache = std::make_shared<UnetCache>();
  run_unet(x0, w, *res.cache, res.x_post);
  return res;
}

UnetGrads unet_backward(const ScalarField& x0, const UnetWeights& w, const UnetCache& c,
                        const ScalarField& upstream) {
  if (!x0.same_shape(upstream)) throw std::invalid_argument("unet_backward: shape mismatch");
  const std::size_t n = x0.size();
  UnetGrads grads;
  grads.theta = w;  // clone the shapes, then zero
  for (ConvLayer* layer : {&grads.theta.enc1, &grads.theta.enc2, &grads.theta.enc3,
                           &grads.theta.up2, &grads.theta.dec2, &grads.theta.up1,
                           &grads.theta.dec1, &grads.theta.out}) {
    std::fill(layer->weights.begin(), layer->weights.end(), 0.0);
    std::fill(layer->biases.begin(), layer->biases.end(), 0.0);
  }

  std::vector<double> d_pre(n);
  for (std::size_t i = 0; i < n; ++i)
    d_pre[i] = c.pre_residual[i] > 0.0 ? upstream.data[i] : 0.0;

  const double* r = c.r.channel(0);
  double d_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) d_scale += d_pre[i] * r[i];
  grads.theta.out_scale = d_scale;

  Tensor d_r(1, x0.dims);
  for (std::size_t i = 0; i < n; ++i) d_r.data[i] = w.out_scale * d_pre[i];

  ConvGrads outg = conv_backward(c.d1, w.out, d_r);
  grads.theta.out.weights = std::move(outg.weights);
  grads.theta.out.biases = std::move(outg.biases);

  Tensor d_a_d1 = relu_backward(c.a_d1, outg.input);
  ConvGrads dec1g = conv_backward(c.cat1, w.dec1, d_a_d1);
  grads.theta.dec1.weights = std::move(dec1g.weights);
  grads.theta.dec1.biases = std::move(dec1g.biases);

  Tensor d_v1(c.v1.channels, c.v1.dims), d_e1_skip(c.e1.channels, c.e1.dims);
  split(dec1g.input, d_v1, d_e1_skip);

  Tensor d_a_v1 = relu_backward(c.a_v1, d_v1);
  ConvGrads up1g = conv_backward(c.u1, w.up1, d_a_v1);
  grads.theta.up1.weights = std::move(up1g.weights);
  grads.theta.up1.biases = std::move(up1g.biases);

  Tensor d_d2 = upsample2_backward(up1g.input);
  Tensor d_a_d2 = relu_backward(c.a_d2, d_d2);
  ConvGrads dec2g = conv_backward(c.cat2, w.dec2, d_a_d2);
  grads.theta.dec2.weights = std::move(dec2g.weights);
  grads.theta.dec2.biases = std::move(dec2g.biases);

  Tensor d_v2(c.v2.channels, c.v2.dims), d_e2_skip(c.e2.channels, c.e2.dims);
  split(dec2g.input, d_v2, d_e2_skip);

  Tensor d_a_v2 = relu_backward(c.a_v2, d_v2);
  ConvGrads up2g = conv_backward(c.u2, w.up2, d_a_v2);
  grads.theta.up2.weights = std::move(up2g.weights);
  grads.theta.up2.biases = std::move(up2g.biases);

  Tensor d_e3 = upsample2_backward(up2g.input);
  Tensor d_a_e3 = relu_backward(c.a_e3, d_e3);
  ConvGrads enc3g = conv_backward(c.p2, w.enc3, d_a_e3);
  grads.theta.enc3.weights = std::move(enc3g.weights);
  grads.theta.enc3.biases = std::move(enc3g.biases);

  Tensor d_e2 = maxpool2_backward(enc3g.input, c.argmax2, c.e2.channels, c.e2.dims);
  for (std::size_t i = 0; i < d_e2.data.size(); ++i) d_e2.data[i] += d_e2_skip.data[i];
  Tensor d_a_e2 = relu_backward(c.a_e2, d_e2);
  ConvGrads enc2g = conv_backward(c.p1, w.enc2, d_a_e2);
  grads.theta.enc2.weights = std::move(enc2g.weights);
  grads.theta.enc2.biases = std::move(enc2g.biases);

  Tensor d_e1 = maxpool2_backward(enc2g.input, c.argmax1, c.e1.channels, c.e1.dims);
  for (std::size_t i = 0; i < d_e1.data.size(); ++i) d_e1.data[i] += d_e1_skip.data[i];
  Tensor d_a_e1 = relu_backward(c.a_e1, d_e1);
  Tensor xt = tensor_from_field(x0);
  ConvGrads enc1g = conv_backward(xt, w.enc1, d_a_e1);
  grads.theta.enc1.weights = std::move(enc1g.weights);
  grads.theta.enc1.biases = std::move(enc1g.biases);

  grads.x0 = ScalarField(x0.dims, x0.spacing);
  const double* dx_net = enc1g.input.channel(0);
  for (std::size_t i = 0; i < n; ++i) grads.x0.data[i] = d_pre[i] + dx_net[i];
  return grads;
}

std::vector<ParamView> param_views(UnetWeights& w) {
  std::vector<ParamView> views;
  for (ConvLayer* layer : {&w.enc1, &w.enc2, &w.enc3, &w.up2, &w.dec2, &w.up1, &w.dec1, &w.out}) {
    views.push_back({layer->weights.data(), layer->weights.size()});
    views.push_back({layer->biases.data(), layer->biases.size()});
  }
  views.push_back({&w.out_scale, 1});
  return views;
}

namespace {

void run_unet_training(UnetWeights& weights, const std::vector<UnetPair>& pairs,
                       int epochs, int batch_size, double lr, const LossSpec& loss_spec,
                       std::uint64_t seed, std::vector<double>* loss_curve) {
  if (pairs.empty()) throw std::invalid_argument("unet training: no pairs");
  if (epochs < 0 || batch_size < 1) throw std::invalid_argument("unet training: bad parameters");
  const std::size_t n = pairs.size();
  const std::size_t batch = std::min<std::size_t>(batch_size, n);
  const int steps = epochs * int((n + batch - 1) / batch);

  SeededRng rng(seed);
  auto views = param_views(weights);
  AdamState adam = make_adam_state(total_size(views), lr);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;

  std::vector<UnetGrads> grads(batch);
  std::vector<double> losses(batch, 0.0);

  for (int step = 0; step < steps; ++step) {
    std::vector<std::size_t> picked(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor >= n) {
        for (std::size_t i = n; i > 1; --i)
          std::swap(order[i - 1], order[rng.uniform_index(i)]);
        cursor = 0;
      }
      picked[b] = order[cursor++];
    }

    parallel_for(batch, [&](std::size_t b) {
      const UnetPair& p = pairs[picked[b]];
      UnetForwardResult fwd = unet_forward_cached(*p.x0, weights);
      LossResult loss = loss_and_grad(fwd.x_post, *p.x_true, loss_spec);
      losses[b] = loss.value;
      grads[b] = unet_backward(*p.x0, weights, *fwd.cache, loss.grad);
    });

    UnetWeights total = weights;
    auto total_views = param_views(total);
    for (const auto& v : total_views) std::fill(v.data, v.data + v.size, 0.0);
    double mean_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      auto gv = param_views(grads[b].theta);
      for (std::size_t t = 0; t < gv.size(); ++t)
        for (std::size_t i = 0; i < gv[t].size; ++i)
          total_views[t].data[i] += gv[t].data[i] / double(batch);
      mean_loss += losses[b] / double(batch);
    }
    adam_step(views, total_views, adam);
    if (loss_curve) loss_curve->push_back(mean_loss);
  }
}

}  // namespace

UnetTrainResult train_unet(const std::vector<UnetPair>& pairs, const UnetHyper& hyper) {
  UnetTrainResult res;
  SeededRng init_rng(hyper.seed);
  res.weights = init_unet_weights(init_rng);

  LossSpec loss_spec;
  loss_spec.small_norm_penalty = true;
  loss_spec.alpha = hyper.loss_add_alpha;
  loss_spec.beta = hyper.loss_add_beta_scale * std::sqrt(double(pairs[0].x0->size()));

  run_unet_training(res.weights, pairs, hyper.epochs, hyper.batch, hyper.lr, loss_spec,
                    hyper.seed ^ 0x5bd1e995u, &res.loss_curve);
  return res;
}

void transfer_update_unet(UnetWeights& w, const std::vector<UnetPair>& pairs, double lr,
                          int epochs, std::uint64_t seed, int batch) {
  LossSpec plain;  // warm start; no zero-map risk
  run_unet_training(w, pairs, epochs, batch, lr, plain, seed, nullptr);
}

void save_unet_weights(const std::string& path, const UnetWeights& w) {
  std::vector<NamedTensor> tensors;
  auto push_conv = [&tensors](const std::string& name, const ConvLayer& layer) {
    NamedTensor wt;
    wt.name = name + ".weight";
    wt.dims = {std::uint32_t(layer.out_channels), std::uint32_t(layer.in_channels),
               std::uint32_t(layer.kernel_size), std::uint32_t(layer.kernel_size)};
    wt.values.assign(layer.weights.begin(), layer.weights.end());
    tensors.push_back(std::move(wt));
    NamedTensor bt;
    bt.name = name + ".bias";
    bt.dims = {std::uint32_t(layer.out_channels)};
    bt.values.assign(layer.biases.begin(), layer.biases.end());
    tensors.push_back(std::move(bt));
  };
  push_conv("enc1", w.enc1);
  push_conv("enc2", w.enc2);
  push_conv("enc3", w.enc3);
  push_conv("up2", w.up2);
  push_conv("dec2", w.dec2);
  push_conv("up1", w.up1);
  push_conv("dec1", w.dec1);
  push_conv("out", w.out);
  NamedTensor scale;
  scale.name = "scale";
  scale.values = {float(w.out_scale)};
  tensors.push_back(std::move(scale));
  write_weights_container(path, "UNTW", {tensors});
}

UnetWeights load_unet_weights(const std::string& path) {
  auto stages = read_weights_container(path, "UNTW", 17);
  if (stages.size() != 1) throw std::runtime_error(path + ": expected a single stage");
  const auto& t = stages[0];
  const char* names[] = {"enc1", "enc2", "enc3", "up2", "dec2", "up1", "dec1", "out"};
  UnetWeights w;
  ConvLayer* layers[] = {&w.enc1, &w.enc2, &w.enc3, &w.up2, &w.dec2, &w.up1, &w.dec1, &w.out};
  for (int l = 0; l < 8; ++l) {
    const NamedTensor& wt = t[2 * l];
    const NamedTensor& bt = t[2 * l + 1];
    if (wt.name != std::string(names[l]) + ".weight" || bt.name != std::string(names[l]) + ".bias")
      throw std::runtime_error(path + ": unexpected tensor order near " + wt.name);
    if (wt.dims.size() != 4) throw std::runtime_error(path + ": kernel rank mismatch in " + wt.name);
    *layers[l] = make_conv_layer(wt.dims[1], wt.dims[0], wt.dims[2], 2);
    if (wt.values.size() != layers[l]->weights.size() || bt.values.size() != layers[l]->biases.size())
      throw std::runtime_error(path + ": payload mismatch in " + wt.name);
    layers[l]->weights.assign(wt.values.begin(), wt.values.end());
    layers[l]->biases.assign(bt.values.begin(), bt.values.end());
  }
  if (t[16].name != "scale" || !t[16].dims.empty() || t[16].values.size() != 1)
    throw std::runtime_error(path + ": missing scalar 'scale' tensor");
  w.out_scale = t[16].values[0];
  return w;
}

}  // namespace patrec
