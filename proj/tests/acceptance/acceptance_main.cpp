// Acceptance suite: one pass/fail line per criterion, shared artifacts for
// the training-dependent checks. Exit code = number of failed criteria.
//
// Criteria 1-5 are self-contained and fast. Criterion 6 performs the full
// desk-scale greedy training run (the long pole); 7-10 reuse its model.
// Criterion 11 replays the whole CLI pipeline twice at reduced scale and
// compares artifacts byte for byte.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "patrec/config.hpp"
#include "patrec/harness.hpp"
#include "patrec/io.hpp"
#include "patrec/parallel.hpp"

namespace fs = std::filesystem;
using namespace patrec;

#ifndef PATREC_CLI_PATH
#define PATREC_CLI_PATH ""
#endif

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Shared artifacts across the training-dependent criteria.
struct Context {
  fs::path work;
  ExperimentConfig config;  // desk defaults
  std::optional<AcousticOperator> op;
  std::optional<AcousticOperator> op_full;
  std::vector<DatasetSample> train_set;
  std::vector<DatasetSample> test_set;
  std::optional<DgdModel> dgd;
  std::optional<UnetWeights> unet;
  VariationalSettings vs;
  bool vs_ready = false;

  void ensure_operators() {
    if (!op) {
      op.emplace(geometry_from_config(config));
      op_full.emplace(full_view_geometry_from_config(config));
    }
  }
  void ensure_data() {
    ensure_operators();
    if (train_set.empty()) {
      PhantomSpec spec = phantom_spec_from_config(config, 0);
      DatasetOptions opt = dataset_options_from_config(config);
      train_set = build_dataset(config.data.n_train, spec, *op, opt, config.data.data_seed);
      test_set = build_dataset(config.data.n_test, spec, *op, opt,
                               config.data.data_seed + 100000);
    }
  }
  void ensure_variational() {
    ensure_data();
    if (!vs_ready) {
      SeededRng rng(config.bench.seed);
      vs.gamma = 1.0 / estimate_lipschitz(*op, 30, rng).value;
      vs.tv_inner_iters = config.tv.inner_iters;
      auto grid = log_lambda_grid(config.tv.lambda_min, config.tv.lambda_max,
                                  config.tv.lambda_count);
      vs.tv_lambda = select_tv_lambda(*op, test_set[0].y, test_set[0].x_true,
                                      test_set[0].x0, vs.gamma, 20, grid,
                                      vs.tv_inner_iters);
      vs_ready = true;
    }
  }
  void ensure_dgd() {
    ensure_data();
    if (!dgd) {
      DgdHyper hyper = dgd_hyper_from_config(config);
      dgd = run_training_cycle(train_set, *op, config.dgd.k_max, hyper,
                               (work / "cache").string());
      save_dgd_model((work / "dgd").string(), *dgd);
    }
  }
  void ensure_unet() {
    ensure_data();
    if (!unet) {
      std::vector<UnetPair> pairs(train_set.size());
      for (std::size_t i = 0; i < train_set.size(); ++i)
        pairs[i] = {&train_set[i].x0, &train_set[i].x_true};
      unet = train_unet(pairs, unet_hyper_from_config(config)).weights;
      save_unet_weights((work / "unet.untw").string(), *unet);
    }
  }
};

// --------------------------------------------------------------------------
// 1. Adjoint exactness
// --------------------------------------------------------------------------
Outcome criterion_adjoint(Context&) {
  Outcome out;
  AcousticGeometry g = make_desk_geometry({32, 32}, 1e-4, 1500.0, 48, 0.0, 2);
  SeededRng mask_rng(11);
  g = with_subsampling(std::move(g), 2, mask_rng);
  AcousticOperator op(g);
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    SeededRng rng(1000 + trial);
    ScalarField x(g.dims, g.spacing);
    x.data = rng.gaussians(x.size());
    SensorData y = op.zero_data();
    y.data = rng.gaussians(y.data.size());
    SensorData ax = op.forward(x);
    ScalarField aty = op.adjoint(y);
    double gap = std::abs(dot(ax.data, y.data) - dot(x.data, aty.data)) /
                 (l2_norm(ax.data) * l2_norm(y.data) + 1e-30);
    worst = std::max(worst, gap);
  }
  out.require(worst <= 1e-10, "dot test worst gap " + fmt(worst));

  // dense-matrix oracle: 8x8 grid, 4 sensors, 16 time steps
  AcousticGeometry g8 = make_desk_geometry({8, 8}, 1e-4, 1500.0, 16, 0.0, 2);
  AcousticOperator op8(g8);
  const std::size_t n = element_count(g8.dims);
  const std::size_t rows = g8.active_count() * g8.num_time_samples;
  std::vector<std::vector<double>> dense(rows, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    ScalarField e(g8.dims, g8.spacing);
    e.data[j] = 1.0;
    SensorData col = op8.forward(e);
    for (std::size_t r = 0; r < rows; ++r) dense[r][j] = col.data[r];
  }
  SeededRng rng(77);
  SensorData y = op8.zero_data();
  y.data = rng.gaussians(rows);
  ScalarField aty = op8.adjoint(y);
  double max_err = 0.0, scale = 1e-30;
  for (std::size_t j = 0; j < n; ++j) {
    double expected = 0.0;
    for (std::size_t r = 0; r < rows; ++r) expected += dense[r][j] * y.data[r];
    max_err = std::max(max_err, std::abs(expected - aty.data[j]));
    scale = std::max(scale, std::abs(expected));
  }
  out.require(max_err / scale <= 1e-10,
              "dense-transpose mismatch " + fmt(max_err / scale));
  return out;
}

// --------------------------------------------------------------------------
// 2. Propagator exactness
// --------------------------------------------------------------------------
Outcome criterion_propagator(Context&) {
  Outcome out;
  SeededRng rng(5);
  ScalarField x({32, 32}, 1e-4);
  x.data = rng.gaussians(x.size());
  ScalarField p0 = propagate(x, 1500.0, 0.0);
  double err0 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    err0 = std::max(err0, std::abs(p0.data[i] - x.data[i]));
  out.require(err0 <= 1e-8, "t=0 identity error " + fmt(err0));

  const std::size_t n = 32;
  const double dx = 1e-4, c0 = 1500.0;
  const double k0 = 2.0 * std::numbers::pi * 3.0 / (double(n) * dx);
  const double k1 = 2.0 * std::numbers::pi * 5.0 / (double(n) * dx);
  ScalarField mode({n, n}, dx);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      mode.data[i * n + j] = std::cos(k0 * double(i) * dx + k1 * double(j) * dx);
  const double t = 0.35 * double(n) * dx / c0;
  const double expected = std::cos(c0 * std::hypot(k0, k1) * t);
  ScalarField pt = propagate(mode, c0, t);
  double err_mode = 0.0;
  for (std::size_t i = 0; i < mode.size(); ++i)
    err_mode = std::max(err_mode, std::abs(pt.data[i] - expected * mode.data[i]));
  out.require(err_mode <= 1e-8, "eigenmode error " + fmt(err_mode));
  return out;
}

// --------------------------------------------------------------------------
// 3. Gradient correctness (block, post-processing net, loss)
// --------------------------------------------------------------------------
Outcome criterion_gradients(Context&) {
  Outcome out;
  const double h = 1e-5;

  auto check_param_grads = [&](auto& weights, auto views_of, auto objective,
                               auto analytic_views, const char* label) {
    SeededRng pick(909);
    auto views = views_of(weights);
    int checked = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 60 && checked < 20; ++trial) {
      std::size_t vi = pick.uniform_index(views.size());
      std::size_t ei = pick.uniform_index(views[vi].size);
      double* slot = views[vi].data + ei;
      double saved = *slot;
      *slot = saved + h;
      double fp = objective();
      *slot = saved - h;
      double fm = objective();
      *slot = saved;
      double fd = (fp - fm) / (2.0 * h);
      double analytic = analytic_views[vi].data[ei];
      if (std::abs(fd) < 1e-9 && std::abs(analytic) < 1e-9) continue;
      worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-9));
      ++checked;
    }
    out.require(checked >= 20, std::string(label) + ": too few active parameters");
    out.require(worst <= 1e-4, std::string(label) + " worst rel err " + fmt(worst));
  };

  {  // learned update block on 9x9 inputs
    SeededRng rng(21);
    StageWeights w = init_stage_weights(rng);
    w.lambda_net = 0.05;
    ScalarField x({9, 9}, 1.0), g({9, 9}, 1.0), t({9, 9}, 1.0);
    x.data = rng.gaussians(81);
    g.data = rng.gaussians(81);
    t.data = rng.gaussians(81);
    for (auto& v : x.data) v = std::abs(v);
    for (auto& v : t.data) v = std::abs(v);

    DgdBlockCache cache;
    ScalarField fwd = dgd_block_forward(x, g, w, &cache);
    LossResult loss = loss_and_grad(fwd, t, {});
    DgdBlockGrads grads = dgd_block_backward(x, g, w, cache, loss.grad);
    auto objective = [&] { return loss_and_grad(dgd_block_forward(x, g, w), t, {}).value; };
    check_param_grads(
        w, [](StageWeights& sw) { return param_views(sw); }, objective,
        param_views(grads.theta), "block");
  }

  {  // post-processing net on 16x16
    SeededRng rng(22);
    UnetWeights w = init_unet_weights(rng);
    w.out_scale = 0.05;
    ScalarField x({16, 16}, 1.0), t({16, 16}, 1.0);
    x.data = rng.gaussians(256);
    t.data = rng.gaussians(256);
    for (auto& v : t.data) v = std::abs(v);

    UnetForwardResult fwd = unet_forward_cached(x, w);
    LossResult loss = loss_and_grad(fwd.x_post, t, {});
    UnetGrads grads = unet_backward(x, w, *fwd.cache, loss.grad);
    auto objective = [&] { return loss_and_grad(unet_forward(x, w), t, {}).value; };
    check_param_grads(
        w, [](UnetWeights& uw) { return param_views(uw); }, objective,
        param_views(grads.theta), "unet");
  }

  {  // loss gradient, penalty active
    SeededRng rng(23);
    ScalarField x({8, 8}, 1.0), t({8, 8}, 1.0);
    for (auto& v : x.data) v = 0.01 * rng.gaussian();
    for (auto& v : t.data) v = 0.01 * rng.gaussian();
    LossSpec spec;
    spec.small_norm_penalty = true;
    spec.alpha = 0.01;
    spec.beta = 5.0;
    LossResult r = loss_and_grad(x, t, spec);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t i = rng.uniform_index(x.size());
      ScalarField xp = x, xm = x;
      xp.data[i] += h;
      xm.data[i] -= h;
      double fd =
          (loss_and_grad(xp, t, spec).value - loss_and_grad(xm, t, spec).value) / (2.0 * h);
      worst = std::max(worst, std::abs(r.grad.data[i] - fd) / std::max(std::abs(fd), 1e-9));
    }
    out.require(worst <= 1e-4, "loss worst rel err " + fmt(worst));
  }
  return out;
}

// --------------------------------------------------------------------------
// 4. Variational monotonicity at gamma = 1/L
// --------------------------------------------------------------------------
Outcome criterion_monotonicity(Context&) {
  Outcome out;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AcousticGeometry g = make_desk_geometry({32, 32}, 1e-4, 1500.0, 32, 0.0, 2);
    SeededRng mask_rng(seed);
    g = with_subsampling(std::move(g), 2, mask_rng);
    AcousticOperator op(g);
    PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, seed);
    DatasetOptions opt;
    auto ds = build_dataset(1, spec, op, opt, 4000 + seed);
    SeededRng rng(seed);
    double gamma = 1.0 / estimate_lipschitz(op, 30, rng).value;

    SolverResult nnls = proximal_gradient(op, ds[0].y, {ProxSpec::Kind::NonNegative, 0},
                                          0.0, gamma, 20, ds[0].x0);
    for (std::size_t k = 1; k < nnls.trace.objective.size(); ++k)
      out.require(nnls.trace.objective[k] <= nnls.trace.objective[k - 1] + 1e-8,
                  "nnls objective rose at seed " + std::to_string(seed) + " step " +
                      std::to_string(k));

    SolverResult tv = proximal_gradient(op, ds[0].y, {ProxSpec::Kind::IsotropicTv, 20},
                                        1e-4, gamma, 20, ds[0].x0);
    for (std::size_t k = 1; k < tv.trace.objective.size(); ++k)
      out.require(tv.trace.objective[k] <= tv.trace.objective[k - 1] + 1e-8,
                  "tv objective rose at seed " + std::to_string(seed) + " step " +
                      std::to_string(k));
  }
  return out;
}

// --------------------------------------------------------------------------
// 5. Unbiased relative error metric
// --------------------------------------------------------------------------
Outcome criterion_metric(Context&) {
  Outcome out;
  SeededRng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = rng.gaussians(32);
    std::vector<double> t = rng.gaussians(32);
    double e0 = unbiased_rel_error(x, t).err;
    std::vector<double> xa(x.size());
    double a = 0.5 + rng.uniform() * 3.0, b = rng.gaussian();
    for (std::size_t i = 0; i < x.size(); ++i) xa[i] = a * x[i] + b;
    double e1 = unbiased_rel_error(xa, t).err;
    out.require(std::abs(e0 - e1) <= 1e-10, "affine invariance gap " + fmt(std::abs(e0 - e1)));
  }

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(5), t(5);
    for (auto& v : x) v = rng.uniform();
    for (auto& v : t) v = rng.uniform();
    AffineFit fit = unbiased_rel_error(x, t);
    // 2001x2001 grid around the candidate: a sharper point nearby would
    // expose a wrong or suboptimal closed form
    double best = 1e300;
    double norm_t = l2_norm(t);
    for (int ia = 0; ia < 2001; ++ia) {
      double a = fit.a - 1.0 + 2.0 * double(ia) / 2000.0;
      for (int ib = 0; ib < 2001; ++ib) {
        double b = fit.b - 1.0 + 2.0 * double(ib) / 2000.0;
        double sq = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
          double r = a * x[i] - t[i] - b;
          sq += r * r;
        }
        best = std::min(best, std::sqrt(sq) / norm_t);
      }
    }
    out.require(std::abs(fit.err - best) <= 1e-4,
                "grid oracle gap " + fmt(std::abs(fit.err - best)));
    out.require(fit.err <= best + 1e-12, "closed form worse than grid");
  }
  return out;
}

// --------------------------------------------------------------------------
// 6. Greedy training bound (desk-scale run)
// --------------------------------------------------------------------------
Outcome criterion_training(Context& ctx) {
  Outcome out;
  ctx.ensure_dgd();
  const DgdModel& m = *ctx.dgd;
  for (std::size_t k = 0; k < m.trained_loss.size(); ++k)
    out.require(m.trained_loss[k] <= 1.05 * m.identity_loss[k],
                "stage " + std::to_string(k) + " loss " + fmt(m.trained_loss[k]) +
                    " vs identity " + fmt(m.identity_loss[k]));
  for (std::size_t k = 0; k + 1 < m.staged_err.size(); ++k)
    out.require(m.staged_err[k + 1] <= m.staged_err[k] + 1e-6,
                "staged err rose at k=" + std::to_string(k + 1));
  out.detail = "staged train err:";
  for (double e : m.staged_err) out.detail += " " + fmt(e);
  return out;
}

// --------------------------------------------------------------------------
// 7. Convergence ordering on held-out data
// --------------------------------------------------------------------------
Outcome criterion_convergence(Context& ctx) {
  Outcome out;
  ctx.ensure_dgd();
  ctx.ensure_unet();
  ctx.ensure_variational();

  auto rows = convergence_experiment(*ctx.op, ctx.test_set, *ctx.dgd, *ctx.unet, ctx.vs);
  write_convergence_csv((ctx.work / "convergence.csv").string(), rows,
                        config_hash(ctx.config));

  auto find = [&rows](const std::string& method, int iters) {
    for (const auto& r : rows)
      if (r.method == method && r.iterations == iters) return r.mean_err;
    throw std::runtime_error("missing row " + method + "/" + std::to_string(iters));
  };
  double dgd2 = find("dgd", 2), dgd5 = find("dgd", 5);
  double tv20 = find("tv", 20);
  double unet = find("unet", 1);
  double bp = find("bp", 0);

  out.require(dgd5 < dgd2, "dgd(5) " + fmt(dgd5) + " !< dgd(2) " + fmt(dgd2));
  out.require(dgd2 <= tv20, "dgd(2) " + fmt(dgd2) + " !<= tv(20) " + fmt(tv20));
  out.require(dgd5 < unet, "dgd(5) " + fmt(dgd5) + " !< unet " + fmt(unet));
  out.require(unet < bp, "unet " + fmt(unet) + " !< bp " + fmt(bp));
  out.detail = "dgd5 " + fmt(dgd5) + ", dgd2 " + fmt(dgd2) + ", tv20 " + fmt(tv20) +
               ", unet " + fmt(unet) + ", bp " + fmt(bp);
  return out;
}

// --------------------------------------------------------------------------
// 8. Timing and call accounting
// --------------------------------------------------------------------------
Outcome criterion_timing(Context& ctx) {
  Outcome out;
  ctx.ensure_dgd();
  ctx.ensure_unet();
  ctx.ensure_variational();

  auto rows = timing_experiment(*ctx.op, ctx.test_set, *ctx.dgd, *ctx.unet, ctx.vs, 5, 5);
  write_timing_csv((ctx.work / "timing.csv").string(), rows, config_hash(ctx.config));

  double dgd_secs = 0.0, unet_secs = 0.0;
  for (const auto& r : rows) {
    if (r.method == "unet") {
      out.require(r.operator_applications == 1,
                  "unet applications " + std::to_string(r.operator_applications));
      unet_secs = r.mean_seconds;
    } else {
      out.require(r.operator_applications == 11,
                  r.method + " applications " + std::to_string(r.operator_applications));
      if (r.method == "dgd") dgd_secs = r.mean_seconds;
    }
  }
  out.require(unet_secs < dgd_secs,
              "unet " + fmt(unet_secs) + "s !< dgd " + fmt(dgd_secs) + "s");
  out.detail = "dgd " + fmt(dgd_secs) + "s, unet " + fmt(unet_secs) + "s per reconstruction";
  return out;
}

// --------------------------------------------------------------------------
// 9. Robustness orderings
// --------------------------------------------------------------------------
Outcome criterion_robustness(Context& ctx) {
  Outcome out;
  ctx.ensure_dgd();
  ctx.ensure_unet();
  ctx.ensure_variational();

  auto rows = robustness_experiment(ctx.config, *ctx.dgd, *ctx.unet, ctx.vs,
                                    {"mask_reseed", "tumor_ood"});
  write_robustness_csv((ctx.work / "robustness.csv").string(), rows,
                       config_hash(ctx.config));

  auto find = [&rows](const std::string& method, const std::string& kind) {
    for (const auto& r : rows)
      if (r.method == method && r.perturbation == kind) return r;
    throw std::runtime_error("missing robustness row " + method + "/" + kind);
  };
  const auto dgd_mask = find("dgd", "mask_reseed");
  const auto unet_mask = find("unet", "mask_reseed");
  out.require(dgd_mask.deterioration_percent < unet_mask.deterioration_percent,
              "mask reseed: dgd " + fmt(dgd_mask.deterioration_percent) + "% !< unet " +
                  fmt(unet_mask.deterioration_percent) + "%");

  const auto dgd_tumor = find("dgd", "tumor_ood");
  const auto unet_tumor = find("unet", "tumor_ood");
  const auto bp_tumor = find("bp", "tumor_ood");
  out.require(dgd_tumor.perturbed_err < unet_tumor.perturbed_err,
              "tumor: dgd err " + fmt(dgd_tumor.perturbed_err) + " !< unet " +
                  fmt(unet_tumor.perturbed_err));
  out.require(dgd_tumor.perturbed_err < bp_tumor.perturbed_err,
              "tumor: dgd err " + fmt(dgd_tumor.perturbed_err) + " !< bp " +
                  fmt(bp_tumor.perturbed_err));
  out.detail = "mask reseed det: dgd " + fmt(dgd_mask.deterioration_percent) + "% vs unet " +
               fmt(unet_mask.deterioration_percent) + "%; tumor err: dgd " +
               fmt(dgd_tumor.perturbed_err) + ", unet " + fmt(unet_tumor.perturbed_err) +
               ", bp " + fmt(bp_tumor.perturbed_err);
  return out;
}

// --------------------------------------------------------------------------
// 10. Transfer training improves the shifted domain
// --------------------------------------------------------------------------
Outcome criterion_transfer(Context& ctx) {
  Outcome out;
  ctx.ensure_dgd();
  ctx.ensure_unet();

  VariationalSettings vs_full;
  SeededRng rng(ctx.config.bench.seed);
  vs_full.gamma = 1.0 / estimate_lipschitz(*ctx.op_full, 30, rng).value;
  vs_full.tv_lambda = 1e-4;
  vs_full.tv_inner_iters = ctx.config.tv.inner_iters;

  DgdModel dgd_copy = *ctx.dgd;  // transfer mutates
  UnetWeights unet_copy = *ctx.unet;
  auto rows = transfer_experiment(ctx.config, dgd_copy, unet_copy, *ctx.op, *ctx.op_full,
                                  vs_full);
  write_transfer_csv((ctx.work / "transfer.csv").string(), rows, config_hash(ctx.config));

  for (const auto& r : rows) {
    if (r.method == "dgd")
      out.require(r.err_after < r.err_before,
                  "dgd err " + fmt(r.err_before) + " -> " + fmt(r.err_after));
    out.detail += r.method + " " + fmt(r.err_before) + " -> " + fmt(r.err_after) + "  ";
  }
  return out;
}

// --------------------------------------------------------------------------
// 11. Full-pipeline determinism through the CLI
// --------------------------------------------------------------------------
std::string strip_seconds_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    auto cut = line.rfind(',');
    out << (cut == std::string::npos ? line : line.substr(0, cut)) << "\n";
  }
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome criterion_determinism(Context& ctx) {
  Outcome out;
  const std::string cli = PATREC_CLI_PATH;
  if (cli.empty()) {
    out.require(false, "CLI path not wired in");
    return out;
  }
  const fs::path root = ctx.work / "determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream cfg(root / "config.txt");
  cfg << "geometry.dims = 32 32\n"
         "geometry.num_time_samples = 32\n"
         "geometry.subsample_factor = 2\n"
         "data.n_train = 6\n"
         "data.n_test = 4\n"
         "data.n_transfer = 0\n"
         "dgd.k_max = 2\n"
         "dgd.steps_per_stage = 60\n"
         "unet.epochs = 8\n"
         "eval.variational_iterations = 4\n"
         "tv.lambda_count = 2\n";
  cfg.close();

  auto run_pipeline = [&](const std::string& tag) {
    const std::string base = (root / tag).string();
    const std::string c = " --config " + (root / "config.txt").string() + " ";
    int rc = 0;
    auto sh = [&](const std::string& args) {
      if (rc == 0)
        rc = std::system((cli + c + args + " > /dev/null 2>&1").c_str());
    };
    sh("generate-data --out " + base + "/data");
    sh("train-dgd --data " + base + "/data --out " + base + "/models");
    sh("train-unet --data " + base + "/data --out " + base + "/models");
    sh("evaluate --data " + base + "/data --models " + base + "/models --out " + base +
       "/eval");
    sh("bench --data " + base + "/data --models " + base + "/models --out " + base +
       "/bench");
    return rc;
  };

  out.require(run_pipeline("run1") == 0, "pipeline run 1 failed");
  out.require(run_pipeline("run2") == 0, "pipeline run 2 failed");
  if (!out.pass) return out;

  auto same_bytes = [&](const std::string& rel) {
    return slurp(root / "run1" / rel) == slurp(root / "run2" / rel);
  };
  out.require(same_bytes("models/dgd/weights.dgdw"), "weights.dgdw differs");
  out.require(same_bytes("models/unet.untw"), "unet.untw differs");
  out.require(same_bytes("bench/convergence.csv"), "convergence.csv differs");
  out.require(same_bytes("bench/robustness.csv"), "robustness.csv differs");
  out.require(strip_seconds_column(slurp(root / "run1/eval/eval.csv")) ==
                  strip_seconds_column(slurp(root / "run2/eval/eval.csv")),
              "eval.csv differs beyond the timing column");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::istringstream in(argv[++i]);
      std::string tok;
      while (std::getline(in, tok, ',')) only.push_back(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only 1,2,...]\n";
      return 2;
    }
  }
  fs::create_directories(work);

  Context ctx;
  ctx.work = work;

  struct Criterion {
    int number;
    const char* name;
    std::function<Outcome(Context&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "adjoint exactness (dot test + dense transpose)", criterion_adjoint},
      {2, "propagator exactness (t=0 identity + eigenmode)", criterion_propagator},
      {3, "gradient correctness (block, unet, loss)", criterion_gradients},
      {4, "variational monotonicity at gamma=1/L", criterion_monotonicity},
      {5, "unbiased relative error metric", criterion_metric},
      {6, "greedy training bound (desk-scale run)", criterion_training},
      {7, "convergence ordering on held-out data", criterion_convergence},
      {8, "timing and operator-application accounting", criterion_timing},
      {9, "robustness orderings (mask reseed, tumor)", criterion_robustness},
      {10, "transfer training improves the shifted domain", criterion_transfer},
      {11, "full-pipeline determinism", criterion_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.number) == only.end())
      continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run(ctx);
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1f s)%s%s\n", outcome.pass ? "PASS" : "FAIL",
                c.number, c.name, secs, outcome.detail.empty() ? "" : " -- ",
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
