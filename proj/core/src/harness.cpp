#include "patrec/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "patrec/io.hpp"
#include "patrec/parallel.hpp"

namespace patrec {

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

struct ThreadCapGuard {
  int saved;
  explicit ThreadCapGuard(int cap) : saved(max_threads_slot().load()) { set_max_threads(cap); }
  ~ThreadCapGuard() { set_max_threads(saved); }
};

}  // namespace

std::vector<ConvergenceRow> convergence_experiment(const AcousticOperator& op,
                                                   const std::vector<DatasetSample>& test_set,
                                                   const DgdModel& dgd,
                                                   const UnetWeights& unet,
                                                   const VariationalSettings& vs) {
  if (test_set.empty()) throw std::invalid_argument("convergence_experiment: empty test set");
  if (dgd.stages.empty()) throw std::invalid_argument("convergence_experiment: missing model");
  const std::size_t n = test_set.size();
  const int k_max = int(dgd.k_max());
  const auto& points = variational_iteration_points();
  const int max_point = points.back();

  std::vector<double> bp_err(n);
  std::vector<std::vector<double>> dgd_err(n), tv_err(n), nnls_err(n);
  std::vector<double> unet_err(n);

  parallel_for(n, [&](std::size_t i) {
    const DatasetSample& s = test_set[i];
    DgdReconstruction rec = reconstruct_dgd(s.y, op, dgd);
    bp_err[i] = unbiased_rel_error(rec.iterates[0], s.x_true).err;
    dgd_err[i].resize(k_max);
    for (int k = 1; k <= k_max; ++k)
      dgd_err[i][k - 1] = unbiased_rel_error(rec.iterates[k], s.x_true).err;

    unet_err[i] = unbiased_rel_error(unet_forward(rec.iterates[0], unet), s.x_true).err;

    ProxSpec nnls{ProxSpec::Kind::NonNegative, 0};
    SolverResult rn = proximal_gradient(op, s.y, nnls, 0.0, vs.gamma, max_point,
                                        rec.iterates[0], &s.x_true);
    nnls_err[i] = rn.trace.err;

    ProxSpec tv{ProxSpec::Kind::IsotropicTv, vs.tv_inner_iters};
    SolverResult rt = proximal_gradient(op, s.y, tv, vs.tv_lambda, vs.gamma, max_point,
                                        rec.iterates[0], &s.x_true);
    tv_err[i] = rt.trace.err;
  });

  std::vector<ConvergenceRow> rows;
  rows.push_back({"bp", 0, mean(bp_err)});
  for (int k = 1; k <= k_max; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += dgd_err[i][k - 1];
    rows.push_back({"dgd", k, s / double(n)});
  }
  rows.push_back({"unet", 1, mean(unet_err)});
  for (int p : points) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += tv_err[i][p - 1];
    rows.push_back({"tv", p, s / double(n)});
  }
  for (int p : points) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += nnls_err[i][p - 1];
    rows.push_back({"nnls", p, s / double(n)});
  }
  return rows;
}

void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows,
                           std::uint64_t hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(hash) << "\n";
  out << "method,iterations,mean_err\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.iterations << ',' << format_double(r.mean_err) << "\n";
}

std::vector<TimingRow> timing_experiment(const AcousticOperator& op,
                                         const std::vector<DatasetSample>& test_set,
                                         const DgdModel& dgd, const UnetWeights& unet,
                                         const VariationalSettings& vs, int iterations,
                                         std::size_t n) {
  if (test_set.empty()) throw std::invalid_argument("timing_experiment: empty test set");
  n = std::min(n, test_set.size());
  ThreadCapGuard sequential(1);

  DgdModel clipped = dgd;
  if (int(clipped.stages.size()) > iterations) clipped.stages.resize(iterations);

  std::vector<TimingRow> rows;
  auto run = [&](const std::string& method, auto&& reconstruct) {
    op.reset_application_count();
    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) reconstruct(test_set[i]);
    auto t1 = std::chrono::steady_clock::now();
    TimingRow row;
    row.method = method;
    row.iterations = method == "unet" ? 1 : iterations;
    row.operator_applications = op.application_count() / n;
    row.mean_seconds = std::chrono::duration<double>(t1 - t0).count() / double(n);
    rows.push_back(row);
  };

  run("dgd", [&](const DatasetSample& s) { reconstruct_dgd(s.y, op, clipped); });
  run("tv", [&](const DatasetSample& s) {
    ScalarField x0 = op.adjoint(s.y);
    ProxSpec tv{ProxSpec::Kind::IsotropicTv, vs.tv_inner_iters};
    proximal_gradient(op, s.y, tv, vs.tv_lambda, vs.gamma, iterations, x0, nullptr, false);
  });
  run("nnls", [&](const DatasetSample& s) {
    ScalarField x0 = op.adjoint(s.y);
    ProxSpec nnls{ProxSpec::Kind::NonNegative, 0};
    proximal_gradient(op, s.y, nnls, 0.0, vs.gamma, iterations, x0, nullptr, false);
  });
  run("unet", [&](const DatasetSample& s) { unet_forward(op.adjoint(s.y), unet); });
  op.reset_application_count();
  return rows;
}

void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows,
                      std::uint64_t hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(hash) << "\n";
  out << "method,iterations,operator_applications,mean_seconds\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.iterations << ',' << r.operator_applications << ','
        << format_double(r.mean_seconds) << "\n";
}

namespace {

struct MethodErrs {
  double dgd = 0.0;
  double unet = 0.0;
  double bp = 0.0;
};

MethodErrs mean_errs_on(const AcousticOperator& op, const std::vector<DatasetSample>& set,
                        const DgdModel& dgd, const UnetWeights& unet) {
  const std::size_t n = set.size();
  std::vector<double> ed(n), eu(n), eb(n);
  parallel_for(n, [&](std::size_t i) {
    DgdReconstruction rec = reconstruct_dgd(set[i].y, op, dgd);
    ed[i] = unbiased_rel_error(rec.x, set[i].x_true).err;
    eb[i] = unbiased_rel_error(rec.iterates[0], set[i].x_true).err;
    eu[i] = unbiased_rel_error(unet_forward(rec.iterates[0], unet), set[i].x_true).err;
  });
  MethodErrs out;
  out.dgd = mean(ed);
  out.unet = mean(eu);
  out.bp = mean(eb);
  return out;
}

}  // namespace

std::vector<RobustnessRow> robustness_experiment(const ExperimentConfig& config,
                                                 const DgdModel& dgd,
                                                 const UnetWeights& unet,
                                                 const VariationalSettings&,
                                                 const std::vector<std::string>& perturbations) {
  const std::uint64_t test_seed = config.data.data_seed + 100000;
  AcousticGeometry baseline_geom = geometry_from_config(config);
  AcousticOperator baseline_op(baseline_geom);
  PhantomSpec spec = phantom_spec_from_config(config, 0);
  DatasetOptions options = dataset_options_from_config(config);

  std::vector<DatasetSample> baseline_set =
      build_dataset(config.data.n_test, spec, baseline_op, options, test_seed);
  MethodErrs base = mean_errs_on(baseline_op, baseline_set, dgd, unet);

  std::vector<RobustnessRow> rows;
  auto push = [&rows](const std::string& kind, const MethodErrs& b, const MethodErrs& p) {
    auto det = [](double baseline, double perturbed) {
      return 100.0 * (perturbed - baseline) / baseline;
    };
    rows.push_back({"dgd", kind, b.dgd, p.dgd, det(b.dgd, p.dgd)});
    rows.push_back({"unet", kind, b.unet, p.unet, det(b.unet, p.unet)});
    rows.push_back({"bp", kind, b.bp, p.bp, det(b.bp, p.bp)});
  };

  for (const std::string& kind : perturbations) {
    if (kind == "none") {
      MethodErrs again = mean_errs_on(baseline_op, baseline_set, dgd, unet);
      push(kind, base, again);
    } else if (kind == "mask_reseed") {
      // Same sub-sampling rate, fresh random pattern; reconstruction sees the
      // new mask, mirroring a changed acquisition protocol.
      ExperimentConfig pert = config;
      pert.geometry.mask_seed = config.geometry.mask_seed + 1;
      AcousticOperator pop(geometry_from_config(pert));
      auto set = build_dataset(config.data.n_test, spec, pop, options, test_seed);
      push(kind, base, mean_errs_on(pop, set, dgd, unet));
    } else if (kind == "sound_speed_up" || kind == "sound_speed_down") {
      // The physics deviates; reconstruction still assumes the nominal speed.
      ExperimentConfig pert = config;
      pert.geometry.sound_speed =
          config.geometry.sound_speed * (kind == "sound_speed_up" ? 1.01 : 0.99);
      if (config.geometry.dt == 0.0) {
        // keep the nominal time sampling rather than rescaling it with c0
        AcousticGeometry g = geometry_from_config(config);
        pert.geometry.dt = g.dt;
      }
      AcousticOperator acquisition(geometry_from_config(pert));
      auto set = build_dataset(config.data.n_test, spec, acquisition, options, test_seed);
      push(kind, base, mean_errs_on(baseline_op, set, dgd, unet));
    } else if (kind == "noise_up" || kind == "noise_down") {
      DatasetOptions popt = options;
      popt.snr = kind == "noise_up" ? options.snr / 1.2 : options.snr * 1.2;
      auto set = build_dataset(config.data.n_test, spec, baseline_op, popt, test_seed);
      push(kind, base, mean_errs_on(baseline_op, set, dgd, unet));
    } else if (kind == "tumor_ood") {
      PhantomSpec tumor = default_phantom_spec(PhantomSpec::Kind::TumorLike, 0);
      auto set = build_dataset(config.data.n_test, tumor, baseline_op, options, test_seed);
      push(kind, base, mean_errs_on(baseline_op, set, dgd, unet));
    } else {
      throw std::invalid_argument("robustness_experiment: unknown perturbation " + kind);
    }
  }
  return rows;
}

void write_robustness_csv(const std::string& path, const std::vector<RobustnessRow>& rows,
                          std::uint64_t hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(hash) << "\n";
  out << "method,perturbation,baseline_err,perturbed_err,deterioration_percent\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.perturbation << ',' << format_double(r.baseline_err) << ','
        << format_double(r.perturbed_err) << ',' << format_double(r.deterioration_percent)
        << "\n";
}

std::vector<TransferSample> build_transfer_set(const ExperimentConfig& config,
                                               const AcousticOperator& op_sub,
                                               const AcousticOperator& op_full,
                                               const VariationalSettings& vs,
                                               std::size_t n, std::uint64_t base_seed) {
  const auto& full_geom = op_full.geometry();
  const auto& sub_geom = op_sub.geometry();
  if (full_geom.sensors != sub_geom.sensors)
    throw std::invalid_argument("build_transfer_set: operators must share the sensor set");
  std::vector<std::size_t> active_rows;
  for (std::size_t i = 0; i < sub_geom.mask.size(); ++i)
    if (sub_geom.mask[i] && full_geom.mask[i]) active_rows.push_back(i);
  if (active_rows.size() != sub_geom.active_count())
    throw std::invalid_argument("build_transfer_set: sub mask is not a subset of the full mask");

  PhantomSpec spec = phantom_spec_from_config(config, 0);
  std::vector<TransferSample> out(n);
  parallel_for(n, [&](std::size_t i) {
    PhantomSpec sample_spec = spec;
    sample_spec.seed = base_seed + i;
    SeededRng noise_rng((base_seed + i) ^ 0x9e3779b97f4a7c15ull);
    TransferSample s;
    s.x_true = make_phantom(sample_spec, full_geom.dims);
    ScalarField shifted =
        background_field(s.x_true, noise_rng, config.data.background_sigma);
    SensorData y_full = add_noise_snr(op_full.forward(shifted), config.data.snr, noise_rng);

    // Sub-sampled data is a row selection of the same acquisition.
    s.y_sub = SensorData(active_rows.size(), y_full.num_samples, y_full.dt);
    for (std::size_t r = 0; r < active_rows.size(); ++r)
      for (std::size_t t = 0; t < y_full.num_samples; ++t)
        s.y_sub.at(r, t) = y_full.at(active_rows[r], t);

    // Weakly regularized TV reference from the fully sampled data.
    ScalarField x0_full = op_full.adjoint(y_full);
    ProxSpec tv{ProxSpec::Kind::IsotropicTv, vs.tv_inner_iters};
    SolverResult ref = proximal_gradient(op_full, y_full, tv, vs.tv_lambda, vs.gamma,
                                         config.eval.variational_iterations, x0_full);
    s.x_tv_ref = std::move(ref.x);
    out[i] = std::move(s);
  });
  return out;
}

std::vector<TransferRow> transfer_experiment(const ExperimentConfig& config, DgdModel& dgd,
                                             UnetWeights& unet, const AcousticOperator& op_sub,
                                             const AcousticOperator& op_full,
                                             const VariationalSettings& vs) {
  const std::size_t n_train = config.data.n_transfer;
  if (n_train == 0) throw std::invalid_argument("transfer_experiment: data.n_transfer is 0");
  const std::size_t n_eval = std::max<std::size_t>(4, n_train / 2);

  auto train_set = build_transfer_set(config, op_sub, op_full, vs, n_train,
                                      config.data.data_seed + 300000);
  auto eval_set = build_transfer_set(config, op_sub, op_full, vs, n_eval,
                                     config.data.data_seed + 400000);

  auto eval_errs = [&](double& dgd_err, double& unet_err) {
    std::vector<double> ed(eval_set.size()), eu(eval_set.size());
    parallel_for(eval_set.size(), [&](std::size_t i) {
      DgdReconstruction rec = reconstruct_dgd(eval_set[i].y_sub, op_sub, dgd);
      ed[i] = unbiased_rel_error(rec.x, eval_set[i].x_tv_ref).err;
      eu[i] = unbiased_rel_error(unet_forward(rec.iterates[0], unet),
                                 eval_set[i].x_tv_ref)
                  .err;
    });
    dgd_err = mean(ed);
    unet_err = mean(eu);
  };

  double dgd_before, unet_before;
  eval_errs(dgd_before, unet_before);

  std::vector<TransferPair> pairs(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i)
    pairs[i] = {&train_set[i].y_sub, &train_set[i].x_tv_ref};
  transfer_update(dgd, pairs, op_sub, config.transfer.lr, config.transfer.epochs,
                  config.transfer.seed);

  std::vector<ScalarField> x0s(train_set.size());
  parallel_for(train_set.size(),
               [&](std::size_t i) { x0s[i] = op_sub.adjoint(train_set[i].y_sub); });
  std::vector<UnetPair> unet_pairs(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i)
    unet_pairs[i] = {&x0s[i], &train_set[i].x_tv_ref};
  transfer_update_unet(unet, unet_pairs, config.transfer.lr, config.transfer.epochs,
                       config.transfer.seed ^ 0x517cc1b727220a95ull);

  double dgd_after, unet_after;
  eval_errs(dgd_after, unet_after);

  return {{"dgd", dgd_before, dgd_after}, {"unet", unet_before, unet_after}};
}

void write_transfer_csv(const std::string& path, const std::vector<TransferRow>& rows,
                        std::uint64_t hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(hash) << "\n";
  out << "method,err_before,err_after\n";
  for (const auto& r : rows)
    out << r.method << ',' << format_double(r.err_before) << ','
        << format_double(r.err_after) << "\n";
}

EvalReport evaluate_methods(const AcousticOperator& op,
                            const std::vector<DatasetSample>& test_set, const DgdModel* dgd,
                            const UnetWeights* unet, const VariationalSettings& vs,
                            int variational_iterations) {
  EvalReport report;
  const std::size_t n = test_set.size();
  std::vector<std::vector<EvalRow>> per_sample(n);

  parallel_for(n, [&](std::size_t i) {
    const DatasetSample& s = test_set[i];
    auto add = [&](const std::string& method, const ScalarField& x, int iters, double secs) {
      EvalRow row;
      row.method = method;
      row.sample = i;
      row.err = unbiased_rel_error(x, s.x_true).err;
      row.rel_l2 = rel_l2_error(x, s.x_true);
      row.psnr_db = psnr(x, s.x_true);
      row.ssim_val = s.x_true.ndim() == 2 ? ssim(x, s.x_true) : 0.0;
      row.iters = iters;
      row.seconds = secs;
      per_sample[i].push_back(row);
    };

    auto timed = [](auto&& fn) {
      auto t0 = std::chrono::steady_clock::now();
      auto result = fn();
      auto t1 = std::chrono::steady_clock::now();
      return std::make_pair(std::move(result), std::chrono::duration<double>(t1 - t0).count());
    };

    auto [x0, bp_secs] = timed([&] { return op.adjoint(s.y); });
    add("bp", x0, 0, bp_secs);

    if (dgd) {
      auto [rec, secs] = timed([&] { return reconstruct_dgd(s.y, op, *dgd); });
      add("dgd", rec.x, int(dgd->k_max()), secs);
    }
    if (unet) {
      auto [x_post, secs] = timed([&] { return unet_forward(x0, *unet); });
      add("unet", x_post, 1, secs);
    }
    {
      ProxSpec tv{ProxSpec::Kind::IsotropicTv, vs.tv_inner_iters};
      auto [res, secs] = timed([&] {
        return proximal_gradient(op, s.y, tv, vs.tv_lambda, vs.gamma,
                                 variational_iterations, x0);
      });
      add("tv", res.x, variational_iterations, secs);
    }
    {
      ProxSpec nnls{ProxSpec::Kind::NonNegative, 0};
      auto [res, secs] = timed([&] {
        return proximal_gradient(op, s.y, nnls, 0.0, vs.gamma, variational_iterations, x0);
      });
      add("nnls", res.x, variational_iterations, secs);
    }
  });

  for (const auto& rows : per_sample)
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  return report;
}

}  // namespace patrec
