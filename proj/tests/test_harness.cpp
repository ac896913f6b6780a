// Smoke-level checks of the experiment harness on a deliberately tiny setup;
// the full-scale orderings are covered by the acceptance suite.

#include <doctest.h>

#include <cmath>

#include "patrec/harness.hpp"

using namespace patrec;

namespace {

struct TinyBench {
  ExperimentConfig config;
  AcousticOperator op;
  std::vector<DatasetSample> test;
  DgdModel dgd;
  UnetWeights unet;
  VariationalSettings vs;

  TinyBench()
      : config(parse_config_text("geometry.dims = 32 32\n"
                                 "geometry.num_time_samples = 32\n"
                                 "geometry.subsample_factor = 2\n"
                                 "data.n_train = 4\n"
                                 "data.n_test = 3\n"
                                 "data.n_transfer = 4\n"
                                 "dgd.k_max = 2\n"
                                 "dgd.steps_per_stage = 60\n"
                                 "dgd.lr = 1e-4\n"
                                 "unet.epochs = 10\n"
                                 "unet.lr = 1e-3\n"
                                 "eval.variational_iterations = 5\n")),
        op(geometry_from_config(config)) {
    PhantomSpec spec = phantom_spec_from_config(config, 0);
    DatasetOptions opt = dataset_options_from_config(config);
    auto train = build_dataset(config.data.n_train, spec, op, opt, config.data.data_seed);
    test = build_dataset(config.data.n_test, spec, op, opt, config.data.data_seed + 100000);

    dgd = run_training_cycle(train, op, config.dgd.k_max, dgd_hyper_from_config(config));
    std::vector<UnetPair> pairs(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) pairs[i] = {&train[i].x0, &train[i].x_true};
    unet = train_unet(pairs, unet_hyper_from_config(config)).weights;

    SeededRng rng(config.bench.seed);
    vs.gamma = 1.0 / estimate_lipschitz(op, 30, rng).value;
    vs.tv_lambda = 1e-4;
    vs.tv_inner_iters = config.tv.inner_iters;
  }
};

TinyBench& shared() {
  static TinyBench bench;
  return bench;
}

}  // namespace

TEST_CASE("convergence experiment: one row per method/iteration point") {
  TinyBench& b = shared();
  auto rows = convergence_experiment(b.op, b.test, b.dgd, b.unet, b.vs);
  // bp(1) + dgd(k_max) + unet(1) + tv(points) + nnls(points)
  const std::size_t expected =
      1 + b.dgd.k_max() + 1 + 2 * variational_iteration_points().size();
  CHECK(rows.size() == expected);
  for (const auto& r : rows) {
    CHECK(r.mean_err >= 0.0);
    CHECK(std::isfinite(r.mean_err));
  }
  // NNLS mean err nonincreasing along its iteration points
  std::vector<double> nnls;
  for (const auto& r : rows)
    if (r.method == "nnls") nnls.push_back(r.mean_err);
  REQUIRE(nnls.size() == variational_iteration_points().size());
  for (std::size_t i = 1; i < nnls.size(); ++i) CHECK(nnls[i] <= nnls[i - 1] + 1e-9);
}

TEST_CASE("timing experiment: call accounting per method") {
  TinyBench& b = shared();
  auto rows = timing_experiment(b.op, b.test, b.dgd, b.unet, b.vs, 2, 2);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    if (r.method == "unet") {
      CHECK(r.operator_applications == 1);
    } else {
      CHECK(r.operator_applications == 2 * 2 + 1);
    }
    CHECK(r.mean_seconds > 0.0);
  }
  // rerun: identical counts
  auto again = timing_experiment(b.op, b.test, b.dgd, b.unet, b.vs, 2, 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    CHECK(rows[i].operator_applications == again[i].operator_applications);
}

TEST_CASE("robustness experiment: zero perturbation means zero deterioration") {
  TinyBench& b = shared();
  auto rows = robustness_experiment(b.config, b.dgd, b.unet, b.vs, {"none"});
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.perturbation == "none");
    CHECK(r.deterioration_percent == 0.0);
    CHECK(r.baseline_err == r.perturbed_err);
  }
}

TEST_CASE("robustness experiment: perturbed rows are well-formed") {
  TinyBench& b = shared();
  auto rows = robustness_experiment(b.config, b.dgd, b.unet, b.vs,
                                    {"mask_reseed", "noise_up", "tumor_ood"});
  REQUIRE(rows.size() == 9);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.perturbed_err));
    CHECK(r.perturbed_err >= 0.0);
  }
}

TEST_CASE("transfer set: sub-sampled rows match the full acquisition") {
  TinyBench& b = shared();
  AcousticOperator op_full(full_view_geometry_from_config(b.config));
  VariationalSettings vs_full = b.vs;
  SeededRng rng(b.config.bench.seed);
  vs_full.gamma = 1.0 / estimate_lipschitz(op_full, 30, rng).value;

  auto set = build_transfer_set(b.config, b.op, op_full, vs_full, 2, 12345);
  REQUIRE(set.size() == 2);
  for (const auto& s : set) {
    CHECK(s.y_sub.num_sensors == b.op.geometry().active_count());
    CHECK(max_value(s.x_true) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l2_norm(s.x_tv_ref) > 0.0);
  }
  // deterministic regeneration
  auto again = build_transfer_set(b.config, b.op, op_full, vs_full, 2, 12345);
  CHECK(set[0].y_sub.data == again[0].y_sub.data);
  CHECK(set[0].x_tv_ref.data == again[0].x_tv_ref.data);
}

TEST_CASE("evaluate_methods: full method table") {
  TinyBench& b = shared();
  EvalReport report = evaluate_methods(b.op, b.test, &b.dgd, &b.unet, b.vs, 3);
  CHECK(report.rows.size() == b.test.size() * 5);  // bp, dgd, unet, tv, nnls
  for (const auto& row : report.rows) {
    CHECK(std::isfinite(row.err));
    CHECK(row.ssim_val >= -1.0);
    CHECK(row.ssim_val <= 1.0);
  }
}
