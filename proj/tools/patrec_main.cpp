// Command line front end: data synthesis, training, reconstruction,
// evaluation and the comparison experiments, all driven by one config file.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "patrec/config.hpp"
#include "patrec/harness.hpp"
#include "patrec/io.hpp"
#include "patrec/parallel.hpp"

namespace fs = std::filesystem;
using namespace patrec;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

ExperimentConfig resolve_config(const GlobalArgs& args, const std::string& data_dir = "") {
  ExperimentConfig config;
  if (!args.config_path.empty()) {
    config = load_config_file(args.config_path);
  } else if (!data_dir.empty() && file_exists(data_dir + "/config.txt")) {
    config = load_config_file(data_dir + "/config.txt");
  }
  if (args.seed) {
    // one master seed fans out to every stream
    config.data.data_seed = *args.seed;
    config.geometry.mask_seed = *args.seed + 1;
    config.dgd.train_seed = *args.seed + 2;
    config.unet.train_seed = *args.seed + 3;
    config.bench.seed = *args.seed + 4;
    config.transfer.seed = *args.seed + 5;
  }
  return config;
}

std::string sample_dir(const std::string& root, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/sample_%04zu", i);
  return root + buf;
}

void save_samples(const std::string& root, const std::vector<DatasetSample>& samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string dir = sample_dir(root, i);
    ensure_directory(dir);
    save_field(dir + "/x_true", samples[i].x_true);
    save_sensor_data(dir + "/y", samples[i].y);
    save_field(dir + "/x0", samples[i].x0);
  }
}

std::vector<DatasetSample> load_samples(const std::string& root) {
  std::vector<DatasetSample> samples;
  for (std::size_t i = 0;; ++i) {
    const std::string dir = sample_dir(root, i);
    if (!file_exists(dir + "/y.meta")) break;
    DatasetSample s;
    s.x_true = load_field(dir + "/x_true");
    s.y = load_sensor_data(dir + "/y");
    s.x0 = load_field(dir + "/x0");
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw std::runtime_error("no samples found under " + root);
  return samples;
}

VariationalSettings make_variational_settings(const ExperimentConfig& config,
                                              const AcousticOperator& op) {
  VariationalSettings vs;
  SeededRng rng(config.bench.seed);
  vs.gamma = 1.0 / estimate_lipschitz(op, 30, rng).value;
  vs.tv_inner_iters = config.tv.inner_iters;
  vs.tv_lambda = std::sqrt(config.tv.lambda_min * config.tv.lambda_max);
  return vs;
}

double sweep_tv_lambda(const ExperimentConfig& config, const AcousticOperator& op,
                       const DatasetSample& validation, const VariationalSettings& vs) {
  auto grid = log_lambda_grid(config.tv.lambda_min, config.tv.lambda_max,
                              config.tv.lambda_count);
  return select_tv_lambda(op, validation.y, validation.x_true, validation.x0, vs.gamma,
                          config.eval.variational_iterations, grid, vs.tv_inner_iters);
}

// ---------------------------------------------------------------------------

int cmd_generate_data(const GlobalArgs& args, const std::string& out) {
  ExperimentConfig config = resolve_config(args);
  ensure_directory(out);

  AcousticGeometry geom = geometry_from_config(config);
  AcousticGeometry full = full_view_geometry_from_config(config);
  AcousticOperator op(geom);
  AcousticOperator op_full(full);

  PhantomSpec spec = phantom_spec_from_config(config, 0);
  DatasetOptions options = dataset_options_from_config(config);

  std::cout << "generating " << config.data.n_train << " training and " << config.data.n_test
            << " test samples (" << geom.dims[0] << "x" << geom.dims[1] << ", "
            << geom.active_count() << "/" << geom.sensors.size() << " sensors)\n";
  auto train = build_dataset(config.data.n_train, spec, op, options, config.data.data_seed);
  save_samples(out + "/train", train);
  auto test = build_dataset(config.data.n_test, spec, op, options,
                            config.data.data_seed + 100000);
  save_samples(out + "/test", test);

  if (config.data.n_transfer > 0) {
    std::cout << "generating " << config.data.n_transfer
              << " transfer pairs (background domain, TV references)\n";
    VariationalSettings vs = make_variational_settings(config, op_full);
    auto transfer = build_transfer_set(config, op, op_full, vs, config.data.n_transfer,
                                       config.data.data_seed + 300000);
    for (std::size_t i = 0; i < transfer.size(); ++i) {
      const std::string dir = sample_dir(out + "/transfer", i);
      ensure_directory(dir);
      save_sensor_data(dir + "/y", transfer[i].y_sub);
      save_field(dir + "/x_ref", transfer[i].x_tv_ref);
      save_field(dir + "/x_true", transfer[i].x_true);
    }
  }

  save_geometry(out + "/geometry.txt", geom);
  save_geometry(out + "/geometry_full.txt", full);
  std::ofstream cfg(out + "/config.txt", std::ios::binary);
  cfg << serialize_config(config);
  write_manifest(out + "/manifest.txt", "generate-data", config_hash(config),
                 {{"data_seed", std::to_string(config.data.data_seed)},
                  {"mask_seed", std::to_string(config.geometry.mask_seed)}});
  return 0;
}

int cmd_train_dgd(const GlobalArgs& args, const std::string& data, const std::string& out) {
  ExperimentConfig config = resolve_config(args, data);
  AcousticOperator op(load_geometry(data + "/geometry.txt"));
  auto train = load_samples(data + "/train");

  DgdHyper hyper = dgd_hyper_from_config(config);
  std::cout << "training " << config.dgd.k_max << " stages, " << hyper.steps_per_stage
            << " steps each on " << train.size() << " samples\n";
  DgdModel model = run_training_cycle(train, op, config.dgd.k_max, hyper, out + "/cache");

  ensure_directory(out);
  save_dgd_model(out + "/dgd", model,
                 {{"train_seed", std::to_string(hyper.seed)},
                  {"steps_per_stage", std::to_string(hyper.steps_per_stage)},
                  {"batch", std::to_string(hyper.batch)},
                  {"lr", format_double(hyper.lr)}});
  write_manifest(out + "/manifest.txt", "train-dgd", config_hash(config),
                 {{"train_seed", std::to_string(hyper.seed)}});
  for (std::size_t k = 0; k < model.staged_err.size(); ++k)
    std::cout << "  stage " << k << ": train err " << model.staged_err[k] << " (loss "
              << model.trained_loss[k] << " / identity " << model.identity_loss[k] << ")\n";
  return 0;
}

int cmd_train_unet(const GlobalArgs& args, const std::string& data, const std::string& out) {
  ExperimentConfig config = resolve_config(args, data);
  auto train = load_samples(data + "/train");

  std::vector<UnetPair> pairs(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    pairs[i] = {&train[i].x0, &train[i].x_true};

  UnetHyper hyper = unet_hyper_from_config(config);
  std::cout << "training the post-processing net for " << hyper.epochs << " epochs on "
            << pairs.size() << " pairs\n";
  UnetTrainResult res = train_unet(pairs, hyper);

  ensure_directory(out);
  save_unet_weights(out + "/unet.untw", res.weights);
  {
    std::ofstream curve(out + "/unet_loss.csv", std::ios::binary);
    curve << "# config_hash=" << to_hex(config_hash(config)) << "\n";
    curve << "step,loss\n";
    for (std::size_t i = 0; i < res.loss_curve.size(); ++i)
      curve << i << ',' << format_double(res.loss_curve[i]) << "\n";
  }
  write_manifest(out + "/manifest.txt", "train-unet", config_hash(config),
                 {{"train_seed", std::to_string(hyper.seed)},
                  {"epochs", std::to_string(hyper.epochs)},
                  {"lr", format_double(hyper.lr)}});
  return 0;
}

int cmd_reconstruct(const GlobalArgs& args, const std::string& input,
                    const std::string& models, const std::string& method,
                    const std::string& out) {
  std::string data_root = fs::path(input).parent_path().parent_path().string();
  ExperimentConfig config = resolve_config(args, data_root);
  AcousticOperator op(load_geometry(data_root + "/geometry.txt"));
  SensorData y = load_sensor_data(input + "/y");

  ensure_directory(out);
  const bool have_truth = file_exists(input + "/x_true.meta");
  ScalarField x_true;
  if (have_truth) x_true = load_field(input + "/x_true");
  auto display_max = [&](const ScalarField& img) {
    return have_truth ? std::max(1e-12, max_value(x_true)) : std::max(1e-12, max_value(img));
  };

  auto dump = [&](const ScalarField& img, const std::string& name) {
    save_field(out + "/" + name, img);
    write_pgm16(out + "/" + name + ".pgm", img, display_max(img));
  };

  if (method == "dgd") {
    DgdModel model = load_dgd_model(models + "/dgd");
    DgdReconstruction rec = reconstruct_dgd(y, op, model);
    for (std::size_t k = 0; k < rec.iterates.size(); ++k)
      dump(rec.iterates[k], "x_" + std::to_string(k));
  } else if (method == "unet") {
    UnetWeights w = load_unet_weights(models + "/unet.untw");
    ScalarField x0 = op.adjoint(y);
    dump(x0, "x_0");
    dump(unet_forward(x0, w), "x_post");
  } else if (method == "bp") {
    dump(op.adjoint(y), "x_0");
  } else if (method == "tv" || method == "nnls") {
    VariationalSettings vs = make_variational_settings(config, op);
    ScalarField x0 = op.adjoint(y);
    dump(x0, "x_0");
    ProxSpec prox = method == "tv"
                        ? ProxSpec{ProxSpec::Kind::IsotropicTv, vs.tv_inner_iters}
                        : ProxSpec{ProxSpec::Kind::NonNegative, 0};
    double lambda = method == "tv" ? vs.tv_lambda : 0.0;
    if (method == "tv" && have_truth) {
      DatasetSample validation{x_true, y, x0};
      lambda = sweep_tv_lambda(config, op, validation, vs);
    }
    SolverResult res =
        proximal_gradient(op, y, prox, lambda, vs.gamma, config.eval.variational_iterations,
                          x0, have_truth ? &x_true : nullptr);
    dump(res.x, "x_" + std::to_string(config.eval.variational_iterations));
    write_trace_csv(out + "/trace.csv", res.trace, config_hash(config));
  } else {
    throw std::runtime_error("unknown method " + method);
  }
  write_manifest(out + "/manifest.txt", "reconstruct", config_hash(config),
                 {{"method", method}, {"input", input}});
  return 0;
}

int cmd_evaluate(const GlobalArgs& args, const std::string& data, const std::string& models,
                 const std::string& out) {
  ExperimentConfig config = resolve_config(args, data);
  AcousticOperator op(load_geometry(data + "/geometry.txt"));
  auto test = load_samples(data + "/test");

  std::optional<DgdModel> dgd;
  if (file_exists(models + "/dgd/weights.dgdw")) dgd = load_dgd_model(models + "/dgd");
  std::optional<UnetWeights> unet;
  if (file_exists(models + "/unet.untw")) unet = load_unet_weights(models + "/unet.untw");

  VariationalSettings vs = make_variational_settings(config, op);
  vs.tv_lambda = sweep_tv_lambda(config, op, test.front(), vs);
  std::cout << "evaluating " << test.size() << " samples (tv lambda " << vs.tv_lambda << ")\n";

  EvalReport report = evaluate_methods(op, test, dgd ? &*dgd : nullptr,
                                       unet ? &*unet : nullptr, vs,
                                       config.eval.variational_iterations);
  ensure_directory(out);
  write_eval_csv(out + "/eval.csv", report, config_hash(config));
  write_manifest(out + "/manifest.txt", "evaluate", config_hash(config),
                 {{"tv_lambda", format_double(vs.tv_lambda)}});
  for (const char* m : {"bp", "dgd", "unet", "tv", "nnls"}) {
    try {
      std::cout << "  " << m << ": mean err " << report.mean_err(m) << "\n";
    } catch (const std::exception&) {
    }
  }
  return 0;
}

int cmd_bench(const GlobalArgs& args, const std::string& data, const std::string& models,
              const std::string& out) {
  ExperimentConfig config = resolve_config(args, data);
  AcousticOperator op(load_geometry(data + "/geometry.txt"));
  auto test = load_samples(data + "/test");
  DgdModel dgd = load_dgd_model(models + "/dgd");
  UnetWeights unet = load_unet_weights(models + "/unet.untw");

  VariationalSettings vs = make_variational_settings(config, op);
  vs.tv_lambda = sweep_tv_lambda(config, op, test.front(), vs);

  ensure_directory(out);
  const std::uint64_t hash = config_hash(config);

  std::cout << "convergence experiment over " << test.size() << " samples\n";
  auto conv = convergence_experiment(op, test, dgd, unet, vs);
  write_convergence_csv(out + "/convergence.csv", conv, hash);

  std::cout << "timing experiment\n";
  auto timing = timing_experiment(op, test, dgd, unet, vs);
  write_timing_csv(out + "/timing.csv", timing, hash);

  std::cout << "robustness experiment\n";
  auto robust = robustness_experiment(config, dgd, unet, vs, robustness_perturbations());
  write_robustness_csv(out + "/robustness.csv", robust, hash);

  write_manifest(out + "/manifest.txt", "bench", hash,
                 {{"tv_lambda", format_double(vs.tv_lambda)}});
  return 0;
}

int cmd_transfer(const GlobalArgs& args, const std::string& data, const std::string& models,
                 const std::string& out) {
  ExperimentConfig config = resolve_config(args, data);
  AcousticOperator op(load_geometry(data + "/geometry.txt"));
  AcousticOperator op_full(load_geometry(data + "/geometry_full.txt"));
  DgdModel dgd = load_dgd_model(models + "/dgd");
  UnetWeights unet = load_unet_weights(models + "/unet.untw");

  VariationalSettings vs = make_variational_settings(config, op_full);
  std::cout << "transfer training on the background-shifted domain ("
            << config.data.n_transfer << " pairs, " << config.transfer.epochs
            << " epochs, lr " << config.transfer.lr << ")\n";
  auto rows = transfer_experiment(config, dgd, unet, op, op_full, vs);

  ensure_directory(out);
  write_transfer_csv(out + "/transfer.csv", rows, config_hash(config));
  save_dgd_model(out + "/dgd_updated", dgd,
                 {{"transfer_lr", format_double(config.transfer.lr)},
                  {"transfer_epochs", std::to_string(config.transfer.epochs)}});
  save_unet_weights(out + "/unet_updated.untw", unet);
  write_manifest(out + "/manifest.txt", "transfer", config_hash(config),
                 {{"lr", format_double(config.transfer.lr)},
                  {"epochs", std::to_string(config.transfer.epochs)}});
  for (const auto& r : rows)
    std::cout << "  " << r.method << ": err " << r.err_before << " -> " << r.err_after << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-view photoacoustic reconstruction workbench"};
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--config", global.config_path, "Config file (key = value lines)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Master seed override");
  app.add_option("--threads", global.threads, "Worker thread cap (0 = all cores)");

  std::string out, data, models, input, method = "dgd";

  auto* gen = app.add_subcommand("generate-data", "Synthesize train/test/transfer datasets");
  gen->add_option("--out", out, "Output directory")->required();

  auto* tdgd = app.add_subcommand("train-dgd", "Greedy stage-by-stage training");
  tdgd->add_option("--data", data, "Dataset directory")->required();
  tdgd->add_option("--out", out, "Model output directory")->required();

  auto* tunet = app.add_subcommand("train-unet", "Train the post-processing baseline");
  tunet->add_option("--data", data, "Dataset directory")->required();
  tunet->add_option("--out", out, "Model output directory")->required();

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct one sample directory");
  rec->add_option("--input", input, "Sample directory (holds y.meta/y.bin)")->required();
  rec->add_option("--models", models, "Model directory")->required(false);
  rec->add_option("--method", method, "dgd | unet | tv | nnls | bp");
  rec->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Per-sample metric table on the test set");
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--models", models, "Model directory")->required();
  eval->add_option("--out", out, "Output directory")->required();

  auto* bench = app.add_subcommand("bench", "Convergence, timing and robustness tables");
  bench->add_option("--data", data, "Dataset directory")->required();
  bench->add_option("--models", models, "Model directory")->required();
  bench->add_option("--out", out, "Output directory")->required();

  auto* transfer = app.add_subcommand("transfer", "Update training on the shifted domain");
  transfer->add_option("--data", data, "Dataset directory")->required();
  transfer->add_option("--models", models, "Model directory")->required();
  transfer->add_option("--out", out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) global.seed = seed_value;
  if (global.threads > 0) set_max_threads(global.threads);

  try {
    if (gen->parsed()) return cmd_generate_data(global, out);
    if (tdgd->parsed()) return cmd_train_dgd(global, data, out);
    if (tunet->parsed()) return cmd_train_unet(global, data, out);
    if (rec->parsed()) return cmd_reconstruct(global, input, models, method, out);
    if (eval->parsed()) return cmd_evaluate(global, data, models, out);
    if (bench->parsed()) return cmd_bench(global, data, models, out);
    if (transfer->parsed()) return cmd_transfer(global, data, models, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
