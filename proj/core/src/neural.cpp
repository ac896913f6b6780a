#include "patrec/neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace patrec {

void he_init(ConvLayer& layer, SeededRng& rng) {
  const double fan_in = double(layer.in_channels) * double(layer.kernel_volume());
  const double stddev = std::sqrt(2.0 / fan_in);
  for (double& w : layer.weights) w = stddev * rng.gaussian();
  std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
}

StageWeights init_stage_weights(SeededRng& rng, std::size_t rank, std::size_t kernel_size) {
  StageWeights w;
  w.x1 = make_conv_layer(1, 16, kernel_size, rank);
  w.x2 = make_conv_layer(16, 32, kernel_size, rank);
  w.g1 = make_conv_layer(1, 16, kernel_size, rank);
  w.g2 = make_conv_layer(16, 32, kernel_size, rank);
  w.m1 = make_conv_layer(32, 16, kernel_size, rank);
  w.m2 = make_conv_layer(16, 1, kernel_size, rank);
  he_init(w.x1, rng);
  he_init(w.x2, rng);
  he_init(w.g1, rng);
  he_init(w.g2, rng);
  he_init(w.m1, rng);
  he_init(w.m2, rng);
  w.lambda_net = 0.01;
  return w;
}

StageWeights zero_like(const StageWeights& w) {
  StageWeights z = w;
  for (ConvLayer* layer : {&z.x1, &z.x2, &z.g1, &z.g2, &z.m1, &z.m2}) {
    std::fill(layer->weights.begin(), layer->weights.end(), 0.0);
    std::fill(layer->biases.begin(), layer->biases.end(), 0.0);
  }
  z.lambda_net = 0.0;
  return z;
}

ScalarField dgd_block_forward(const ScalarField& x, const ScalarField& g,
                              const StageWeights& w, DgdBlockCache* cache) {
  if (!x.same_shape(g)) throw std::invalid_argument("dgd_block_forward: x/g shape mismatch");
  DgdBlockCache local;
  DgdBlockCache& c = cache ? *cache : local;
  c.valid = false;

  Tensor xt = tensor_from_field(x);
  Tensor gt = tensor_from_field(g);
  c.a1 = conv_forward(xt, w.x1);
  c.r1 = relu(c.a1);
  c.a2 = conv_forward(c.r1, w.x2);
  c.b1 = conv_forward(gt, w.g1);
  c.s1 = relu(c.b1);
  c.b2 = conv_forward(c.s1, w.g2);

  c.u = relu(c.a2);
  {
    Tensor s2 = relu(c.b2);
    for (std::size_t i = 0; i < c.u.data.size(); ++i) c.u.data[i] += s2.data[i];
  }
  c.c1 = conv_forward(c.u, w.m1);
  c.t1 = relu(c.c1);
  c.c2 = conv_forward(c.t1, w.m2);

  c.pre_residual.resize(x.size());
  ScalarField out = x;
  const double* update = c.c2.channel(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pre = x.data[i] + w.lambda_net * update[i];
    c.pre_residual[i] = pre;
    out.data[i] = pre > 0.0 ? pre : 0.0;
  }
  c.valid = true;
  return out;
}

DgdBlockGrads dgd_block_backward(const ScalarField& x, const ScalarField& g,
                                 const StageWeights& w, const DgdBlockCache& cache,
                                 const ScalarField& upstream) {
  if (!cache.valid) throw std::invalid_argument("dgd_block_backward: forward cache missing");
  if (!x.same_shape(g) || !x.same_shape(upstream))
    throw std::invalid_argument("dgd_block_backward: shape mismatch");

  const std::size_t n = x.size();
  DgdBlockGrads grads;
  grads.theta = zero_like(w);

  // Final ReLU and residual split.
  std::vector<double> d_pre(n);
  for (std::size_t i = 0; i < n; ++i)
    d_pre[i] = cache.pre_residual[i] > 0.0 ? upstream.data[i] : 0.0;

  const double* c2 = cache.c2.channel(0);
  double d_lambda = 0.0;
  for (std::size_t i = 0; i < n; ++i) d_lambda += d_pre[i] * c2[i];
  grads.theta.lambda_net = d_lambda;

  Tensor d_c2(1, x.dims);
  for (std::size_t i = 0; i < n; ++i) d_c2.data[i] = w.lambda_net * d_pre[i];

  ConvGrads m2g = conv_backward(cache.t1, w.m2, d_c2);
  grads.theta.m2.weights = std::move(m2g.weights);
  grads.theta.m2.biases = std::move(m2g.biases);

  Tensor d_c1 = relu_backward(cache.c1, m2g.input);
  ConvGrads m1g = conv_backward(cache.u, w.m1, d_c1);
  grads.theta.m1.weights = std::move(m1g.weights);
  grads.theta.m1.biases = std::move(m1g.biases);

  // u = relu(a2) + relu(b2); the sum routes the same upstream to both pipes.
  Tensor d_a2 = relu_backward(cache.a2, m1g.input);
  ConvGrads x2g = conv_backward(cache.r1, w.x2, d_a2);
  grads.theta.x2.weights = std::move(x2g.weights);
  grads.theta.x2.biases = std::move(x2g.biases);

  Tensor d_a1 = relu_backward(cache.a1, x2g.input);
  Tensor xt = tensor_from_field(x);
  ConvGrads x1g = conv_backward(xt, w.x1, d_a1);
  grads.theta.x1.weights = std::move(x1g.weights);
  grads.theta.x1.biases = std::move(x1g.biases);

  Tensor d_b2 = relu_backward(cache.b2, m1g.input);
  ConvGrads g2g = conv_backward(cache.s1, w.g2, d_b2);
  grads.theta.g2.weights = std::move(g2g.weights);
  grads.theta.g2.biases = std::move(g2g.biases);

  Tensor d_b1 = relu_backward(cache.b1, g2g.input);
  Tensor gt = tensor_from_field(g);
  ConvGrads g1g = conv_backward(gt, w.g1, d_b1);
  grads.theta.g1.weights = std::move(g1g.weights);
  grads.theta.g1.biases = std::move(g1g.biases);

  grads.x = ScalarField(x.dims, x.spacing);
  const double* dx_net = x1g.input.channel(0);
  for (std::size_t i = 0; i < n; ++i) grads.x.data[i] = d_pre[i] + dx_net[i];

  grads.g = ScalarField(g.dims, g.spacing);
  const double* dg_net = g1g.input.channel(0);
  for (std::size_t i = 0; i < n; ++i) grads.g.data[i] = dg_net[i];
  return grads;
}

std::vector<ParamView> param_views(StageWeights& w) {
  std::vector<ParamView> views;
  for (ConvLayer* layer : {&w.x1, &w.x2, &w.g1, &w.g2, &w.m1, &w.m2}) {
    views.push_back({layer->weights.data(), layer->weights.size()});
    views.push_back({layer->biases.data(), layer->biases.size()});
  }
  views.push_back({&w.lambda_net, 1});
  return views;
}

std::size_t total_size(const std::vector<ParamView>& views) {
  std::size_t n = 0;
  for (const auto& v : views) n += v.size;
  return n;
}

AdamState make_adam_state(std::size_t param_count, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.assign(param_count, 0.0);
  s.v.assign(param_count, 0.0);
  return s;
}

void adam_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
               AdamState& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: view count mismatch");
  const std::size_t total = total_size(params);
  if (total != total_size(grads) || total != state.m.size())
    throw std::invalid_argument("adam_step: parameter/state size mismatch");

  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step_count));

  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size != grads[k].size)
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    double* p = params[k].data;
    const double* gr = grads[k].data;
    for (std::size_t i = 0; i < params[k].size; ++i) {
      const double gi = gr[i];
      if (!std::isfinite(gi)) throw std::invalid_argument("adam_step: non-finite gradient");
      double& m = state.m[offset + i];
      double& v = state.v[offset + i];
      m = state.beta1 * m + (1.0 - state.beta1) * gi;
      v = state.beta2 * v + (1.0 - state.beta2) * gi * gi;
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    offset += params[k].size;
  }
}

LossResult loss_and_grad(const ScalarField& x_out, const ScalarField& x_true,
                         const LossSpec& spec) {
  if (!x_out.same_shape(x_true)) throw std::invalid_argument("loss_and_grad: shape mismatch");
  LossResult res;
  res.grad = ScalarField(x_out.dims, x_out.spacing);
  double sq = 0.0;
  for (std::size_t i = 0; i < x_out.size(); ++i) {
    const double d = x_out.data[i] - x_true.data[i];
    sq += d * d;
    res.grad.data[i] = 2.0 * d;
  }
  res.value = sq;
  if (spec.small_norm_penalty) {
    const double norm = l2_norm(x_out);
    if (norm < spec.beta) {
      res.value += spec.alpha * (spec.beta - norm);
      if (norm > 0.0) {
        const double scale = spec.alpha / norm;
        for (std::size_t i = 0; i < x_out.size(); ++i)
          res.grad.data[i] -= scale * x_out.data[i];
      }
      // at ||x|| == 0 the norm has no gradient; use 0
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Weights container
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  char bytes[4];
  std::memcpy(bytes, &v, 4);
  buf.append(bytes, 4);
}

struct Reader {
  const std::string& buf;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error(path + ": truncated weights file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void write_weights_container(const std::string& path, const char magic[4],
                             const std::vector<std::vector<NamedTensor>>& stages) {
  std::string buf;
  buf.append(magic, 4);
  put_u32(buf, 1);  // version
  put_u32(buf, std::uint32_t(stages.size()));
  for (const auto& stage : stages) {
    for (const auto& t : stage) {
      put_u32(buf, std::uint32_t(t.name.size()));
      buf.append(t.name);
      put_u32(buf, std::uint32_t(t.dims.size()));
      std::size_t count = 1;
      for (std::uint32_t d : t.dims) {
        put_u32(buf, d);
        count *= d;
      }
      if (t.values.size() != count)
        throw std::invalid_argument("write_weights_container: tensor " + t.name +
                                    " payload does not match dims");
      buf.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw std::runtime_error("short write on " + path);
}

std::vector<std::vector<NamedTensor>> read_weights_container(const std::string& path,
                                                             const char expected_magic[4],
                                                             std::size_t tensors_per_stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf, path};

  std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), expected_magic, 4) != 0)
    throw std::runtime_error(path + ": bad magic '" + magic + "' (expected '" +
                             std::string(expected_magic, 4) + "')");
  std::uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
  std::uint32_t stage_count = r.u32();
  if (stage_count == 0 || stage_count > 4096)
    throw std::runtime_error(path + ": implausible stage count " + std::to_string(stage_count));

  std::vector<std::vector<NamedTensor>> stages(stage_count);
  for (auto& stage : stages) {
    stage.resize(tensors_per_stage);
    for (auto& t : stage) {
      std::uint32_t name_len = r.u32();
      if (name_len > 4096) throw std::runtime_error(path + ": implausible tensor name length");
      t.name = r.bytes(name_len);
      std::uint32_t rank = r.u32();
      if (rank > 8) throw std::runtime_error(path + ": implausible tensor rank");
      std::size_t count = 1;
      t.dims.resize(rank);
      for (auto& d : t.dims) {
        d = r.u32();
        if (d == 0) throw std::runtime_error(path + ": zero tensor extent");
        count *= d;
      }
      r.need(count * sizeof(float));
      t.values.resize(count);
      std::memcpy(t.values.data(), buf.data() + r.pos, count * sizeof(float));
      r.pos += count * sizeof(float);
    }
  }
  if (r.pos != buf.size())
    throw std::runtime_error(path + ": trailing bytes after the last tensor");
  return stages;
}

namespace {

NamedTensor conv_weight_tensor(const std::string& name, const ConvLayer& layer) {
  NamedTensor t;
  t.name = name;
  t.dims = {std::uint32_t(layer.out_channels), std::uint32_t(layer.in_channels)};
  for (std::size_t d = 0; d < layer.rank; ++d) t.dims.push_back(std::uint32_t(layer.kernel_size));
  t.values.assign(layer.weights.begin(), layer.weights.end());
  return t;
}

NamedTensor conv_bias_tensor(const std::string& name, const ConvLayer& layer) {
  NamedTensor t;
  t.name = name;
  t.dims = {std::uint32_t(layer.out_channels)};
  t.values.assign(layer.biases.begin(), layer.biases.end());
  return t;
}

ConvLayer conv_from_tensors(const NamedTensor& weight, const NamedTensor& bias) {
  if (weight.dims.size() < 3)
    throw std::runtime_error("weights file: tensor " + weight.name + " is not a kernel");
  const std::size_t rank = weight.dims.size() - 2;
  ConvLayer layer = make_conv_layer(weight.dims[1], weight.dims[0], weight.dims[2], rank);
  for (std::size_t d = 3; d < weight.dims.size(); ++d)
    if (weight.dims[d] != weight.dims[2])
      throw std::runtime_error("weights file: anisotropic kernel in " + weight.name);
  if (weight.values.size() != layer.weights.size())
    throw std::runtime_error("weights file: payload mismatch in " + weight.name);
  if (bias.dims.size() != 1 || bias.dims[0] != layer.out_channels)
    throw std::runtime_error("weights file: bias shape mismatch in " + bias.name);
  layer.weights.assign(weight.values.begin(), weight.values.end());
  layer.biases.assign(bias.values.begin(), bias.values.end());
  return layer;
}

}  // namespace

std::vector<NamedTensor> stage_to_named_tensors(const StageWeights& w) {
  std::vector<NamedTensor> out;
  out.push_back(conv_weight_tensor("x1.weight", w.x1));
  out.push_back(conv_bias_tensor("x1.bias", w.x1));
  out.push_back(conv_weight_tensor("x2.weight", w.x2));
  out.push_back(conv_bias_tensor("x2.bias", w.x2));
  out.push_back(conv_weight_tensor("g1.weight", w.g1));
  out.push_back(conv_bias_tensor("g1.bias", w.g1));
  out.push_back(conv_weight_tensor("g2.weight", w.g2));
  out.push_back(conv_bias_tensor("g2.bias", w.g2));
  out.push_back(conv_weight_tensor("m1.weight", w.m1));
  out.push_back(conv_bias_tensor("m1.bias", w.m1));
  out.push_back(conv_weight_tensor("m2.weight", w.m2));
  out.push_back(conv_bias_tensor("m2.bias", w.m2));
  NamedTensor lambda;
  lambda.name = "lambda";
  lambda.values = {float(w.lambda_net)};
  out.push_back(std::move(lambda));
  return out;
}

StageWeights stage_from_named_tensors(const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != kStageTensorCount)
    throw std::runtime_error("weights file: stage tensor count mismatch");
  const char* expected[] = {"x1.weight", "x1.bias", "x2.weight", "x2.bias",
                            "g1.weight", "g1.bias", "g2.weight", "g2.bias",
                            "m1.weight", "m1.bias", "m2.weight", "m2.bias",
                            "lambda"};
  for (std::size_t i = 0; i < kStageTensorCount; ++i)
    if (tensors[i].name != expected[i])
      throw std::runtime_error("weights file: expected tensor '" + std::string(expected[i]) +
                               "', found '" + tensors[i].name + "'");
  StageWeights w;
  w.x1 = conv_from_tensors(tensors[0], tensors[1]);
  w.x2 = conv_from_tensors(tensors[2], tensors[3]);
  w.g1 = conv_from_tensors(tensors[4], tensors[5]);
  w.g2 = conv_from_tensors(tensors[6], tensors[7]);
  w.m1 = conv_from_tensors(tensors[8], tensors[9]);
  w.m2 = conv_from_tensors(tensors[10], tensors[11]);
  if (!tensors[12].dims.empty() || tensors[12].values.size() != 1)
    throw std::runtime_error("weights file: lambda must be a scalar tensor");
  w.lambda_net = tensors[12].values[0];
  return w;
}

}  // namespace patrec
