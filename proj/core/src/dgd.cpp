#include "patrec/dgd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "patrec/io.hpp"
#include "patrec/metrics.hpp"
#include "patrec/parallel.hpp"

namespace patrec {

namespace {

void add_scaled(StageWeights& acc, const StageWeights& g, double scale) {
  ConvLayer* dst[] = {&acc.x1, &acc.x2, &acc.g1, &acc.g2, &acc.m1, &acc.m2};
  const ConvLayer* src[] = {&g.x1, &g.x2, &g.g1, &g.g2, &g.m1, &g.m2};
  for (int l = 0; l < 6; ++l) {
    for (std::size_t i = 0; i < dst[l]->weights.size(); ++i)
      dst[l]->weights[i] += scale * src[l]->weights[i];
    for (std::size_t i = 0; i < dst[l]->biases.size(); ++i)
      dst[l]->biases[i] += scale * src[l]->biases[i];
  }
  acc.lambda_net += scale * g.lambda_net;
}

double mean_sq_loss(const std::vector<ScalarField>& x, const std::vector<DatasetSample>& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x[i].size(); ++j) {
      double d = x[i].data[j] - ds[i].x_true.data[j];
      sq += d * d;
    }
    total += sq;
  }
  return total / double(x.size());
}

double mean_err(const std::vector<ScalarField>& x, const std::vector<DatasetSample>& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    total += unbiased_rel_error(x[i], ds[i].x_true).err;
  return total / double(x.size());
}

std::uint64_t stage_cache_key(const AcousticGeometry& geom,
                              const std::vector<DatasetSample>& dataset,
                              const std::vector<ScalarField>& x_cur, int stage) {
  std::uint64_t h = fnv1a(&stage, sizeof(stage));
  h = fnv1a(geom.dims.data(), geom.dims.size() * sizeof(std::size_t), h);
  h = fnv1a(geom.sensors.data(), geom.sensors.size() * sizeof(std::size_t), h);
  h = fnv1a(geom.mask.data(), geom.mask.size(), h);
  h = fnv1a(&geom.sound_speed, sizeof(double), h);
  h = fnv1a(&geom.dt, sizeof(double), h);
  for (const auto& s : dataset)
    h = fnv1a(s.y.data.data(), s.y.data.size() * sizeof(double), h);
  for (const auto& x : x_cur)
    h = fnv1a(x.data.data(), x.data.size() * sizeof(double), h);
  return h;
}

std::string sample_base(const std::string& cache_dir, int stage, std::size_t i,
                        const char* what) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "/stage%d_sample%04zu_%s", stage, i, what);
  return cache_dir + buf;
}

}  // namespace

StageTrainResult train_stage(int stage_index, const std::vector<StageSample>& samples,
                             const DgdHyper& hyper, const StageWeights* warm_start) {
  if (samples.empty()) throw std::invalid_argument("train_stage: empty sample list");
  if (stage_index < 0) throw std::invalid_argument("train_stage: negative stage index");
  if (hyper.batch < 1 || hyper.steps_per_stage < 0)
    throw std::invalid_argument("train_stage: bad hyperparameters");
  const auto& dims = samples[0].x->dims;
  for (const auto& s : samples)
    if (s.x->dims != dims || s.g->dims != dims || s.x_true->dims != dims)
      throw std::invalid_argument("train_stage: samples must share dims");

  SeededRng rng(hyper.seed ^ (0x9e3779b97f4a7c15ull * std::uint64_t(stage_index + 1)));
  StageTrainResult res;
  res.weights = warm_start ? *warm_start
                           : init_stage_weights(rng, dims.size(), hyper.kernel_size);

  auto views = param_views(res.weights);
  AdamState adam = make_adam_state(total_size(views), hyper.lr);

  LossSpec loss_spec;
  loss_spec.small_norm_penalty = hyper.small_norm_penalty_stage0 && stage_index == 0;
  loss_spec.alpha = hyper.loss_add_alpha;
  loss_spec.beta = hyper.loss_add_beta_scale * std::sqrt(double(element_count(dims)));

  const std::size_t n = samples.size();
  const std::size_t batch = std::min<std::size_t>(hyper.batch, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;  // forces a reshuffle on the first step

  std::vector<StageWeights> grads(batch, zero_like(res.weights));
  std::vector<double> losses(batch, 0.0);
  res.loss_curve.reserve(hyper.steps_per_stage);

  for (int step = 0; step < hyper.steps_per_stage; ++step) {
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
      const StageSample& s = samples[picked[b]];
      DgdBlockCache cache;
      ScalarField out = dgd_block_forward(*s.x, *s.g, res.weights, &cache);
      LossResult loss = loss_and_grad(out, *s.x_true, loss_spec);
      losses[b] = loss.value;
      DgdBlockGrads bg = dgd_block_backward(*s.x, *s.g, res.weights, cache, loss.grad);
      grads[b] = std::move(bg.theta);
    });

    StageWeights total = zero_like(res.weights);
    double mean_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {  // fixed accumulation order
      add_scaled(total, grads[b], 1.0 / double(batch));
      mean_loss += losses[b] / double(batch);
    }
    auto grad_views = param_views(total);
    adam_step(views, grad_views, adam);
    res.loss_curve.push_back(mean_loss);
  }
  return res;
}

DgdModel run_training_cycle(const std::vector<DatasetSample>& dataset,
                            const AcousticOperator& op, int k_max, const DgdHyper& hyper,
                            const std::string& cache_dir) {
  if (k_max < 1) throw std::invalid_argument("run_training_cycle: k_max must be at least 1");
  if (dataset.empty()) throw std::invalid_argument("run_training_cycle: empty dataset");
  const std::size_t n = dataset.size();

  std::vector<ScalarField> x_cur(n);
  for (std::size_t i = 0; i < n; ++i) x_cur[i] = dataset[i].x0;

  DgdModel model;
  if (!cache_dir.empty()) ensure_directory(cache_dir);

  for (int k = 0; k < k_max; ++k) {
    model.identity_loss.push_back(mean_sq_loss(x_cur, dataset));

    // Gradient precompute, reused from disk when the cached inputs match.
    std::vector<ScalarField> grads(n);
    const std::uint64_t key = cache_dir.empty()
                                  ? 0
                                  : stage_cache_key(op.geometry(), dataset, x_cur, k);
    const std::string key_path =
        cache_dir.empty() ? "" : cache_dir + "/stage" + std::to_string(k) + ".key";
    bool cache_hit = false;
    if (!cache_dir.empty() && file_exists(key_path)) {
      std::ifstream in(key_path);
      std::string stored;
      in >> stored;
      cache_hit = stored == to_hex(key);
    }
    if (cache_hit) {
      for (std::size_t i = 0; i < n; ++i)
        grads[i] = load_field(sample_base(cache_dir, k, i, "g"));
    } else {
      parallel_for(n, [&](std::size_t i) {
        grads[i] = op.data_fit_gradient(x_cur[i], dataset[i].y);
      });
      if (!cache_dir.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
          save_field(sample_base(cache_dir, k, i, "x"), x_cur[i]);
          save_field(sample_base(cache_dir, k, i, "g"), grads[i]);
        }
        std::ofstream out(key_path, std::ios::binary);
        out << to_hex(key) << "\n";
      }
    }

    std::vector<StageSample> stage_samples(n);
    for (std::size_t i = 0; i < n; ++i)
      stage_samples[i] = {&x_cur[i], &grads[i], &dataset[i].x_true};
    StageTrainResult trained = train_stage(k, stage_samples, hyper);
    model.stages.push_back(trained.weights);
    model.loss_curves.push_back(std::move(trained.loss_curve));

    parallel_for(n, [&](std::size_t i) {
      x_cur[i] = dgd_block_forward(x_cur[i], grads[i], model.stages.back());
    });
    model.trained_loss.push_back(mean_sq_loss(x_cur, dataset));
    model.staged_err.push_back(mean_err(x_cur, dataset));
  }
  return model;
}

DgdModel run_joint_training(const std::vector<DatasetSample>&, const AcousticOperator&,
                            int, const DgdHyper&) {
  throw std::runtime_error(
      "joint end-to-end training is not supported: every optimizer step would "
      "need 2*k_max wave-operator applications inside the training loop; use "
      "run_training_cycle, which decouples gradient computation from training");
}

DgdReconstruction reconstruct_dgd(const SensorData& y, const AcousticOperator& op,
                                  const DgdModel& model) {
  if (model.stages.empty()) throw std::invalid_argument("reconstruct_dgd: model has no stages");
  DgdReconstruction rec;
  rec.x = op.adjoint(y);
  rec.iterates.push_back(rec.x);
  for (const StageWeights& theta : model.stages) {
    ScalarField g = op.data_fit_gradient(rec.x, y);
    rec.x = dgd_block_forward(rec.x, g, theta);
    rec.iterates.push_back(rec.x);
  }
  return rec;
}

void transfer_update(DgdModel& model, const std::vector<TransferPair>& pairs,
                     const AcousticOperator& op, double lr, int epochs,
                     std::uint64_t seed, int batch) {
  if (pairs.empty()) throw std::invalid_argument("transfer_update: no pairs");
  if (epochs < 0 || lr < 0.0) throw std::invalid_argument("transfer_update: bad parameters");
  const std::size_t n = pairs.size();

  std::vector<ScalarField> x_cur(n);
  parallel_for(n, [&](std::size_t i) { x_cur[i] = op.adjoint(*pairs[i].y); });

  const int steps = epochs * int((n + std::size_t(batch) - 1) / std::size_t(batch));
  for (std::size_t k = 0; k < model.stages.size(); ++k) {
    std::vector<ScalarField> grads(n);
    parallel_for(n, [&](std::size_t i) {
      grads[i] = op.data_fit_gradient(x_cur[i], *pairs[i].y);
    });

    std::vector<StageSample> samples(n);
    for (std::size_t i = 0; i < n; ++i) samples[i] = {&x_cur[i], &grads[i], pairs[i].x_ref};

    DgdHyper hyper;
    hyper.steps_per_stage = steps;
    hyper.batch = batch;
    hyper.lr = lr;
    hyper.small_norm_penalty_stage0 = false;  // warm start, no zero-map risk
    hyper.seed = seed;
    StageTrainResult tuned = train_stage(int(k), samples, hyper, &model.stages[k]);
    model.stages[k] = tuned.weights;

    parallel_for(n, [&](std::size_t i) {
      x_cur[i] = dgd_block_forward(x_cur[i], grads[i], model.stages[k]);
    });
  }
}

void save_dgd_model(const std::string& dir, const DgdModel& model,
                    const std::vector<std::pair<std::string, std::string>>& metadata) {
  ensure_directory(dir);
  std::vector<std::vector<NamedTensor>> stages;
  stages.reserve(model.stages.size());
  for (const auto& w : model.stages) stages.push_back(stage_to_named_tensors(w));
  write_weights_container(dir + "/weights.dgdw", "DGDW", stages);

  {
    std::ofstream meta(dir + "/metadata.txt", std::ios::binary);
    if (!meta) throw std::runtime_error("cannot write " + dir + "/metadata.txt");
    meta << "stages = " << model.stages.size() << "\n";
    for (const auto& [k, v] : metadata) meta << k << " = " << v << "\n";
    auto write_list = [&meta](const char* name, const std::vector<double>& v) {
      meta << name << " =";
      for (double x : v) meta << ' ' << format_double(x);
      meta << "\n";
    };
    write_list("identity_loss", model.identity_loss);
    write_list("trained_loss", model.trained_loss);
    write_list("staged_err", model.staged_err);
  }

  std::ofstream curves(dir + "/loss_curves.csv", std::ios::binary);
  if (!curves) throw std::runtime_error("cannot write " + dir + "/loss_curves.csv");
  curves << "stage,step,loss\n";
  for (std::size_t k = 0; k < model.loss_curves.size(); ++k)
    for (std::size_t s = 0; s < model.loss_curves[k].size(); ++s)
      curves << k << ',' << s << ',' << format_double(model.loss_curves[k][s]) << "\n";
}

DgdModel load_dgd_model(const std::string& dir) {
  auto stages = read_weights_container(dir + "/weights.dgdw", "DGDW", kStageTensorCount);
  DgdModel model;
  model.stages.reserve(stages.size());
  for (const auto& tensors : stages) model.stages.push_back(stage_from_named_tensors(tensors));
  return model;
}

}  // namespace patrec
