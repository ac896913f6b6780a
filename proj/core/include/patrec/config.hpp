#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/dgd.hpp"
#include "patrec/phantom.hpp"
#include "patrec/unet.hpp"

namespace patrec {

/// All run parameters. Defaults reproduce the standard desk experiment;
/// every value can be overridden from a "key = value" config file.
struct ExperimentConfig {
  struct Geometry {
    std::vector<std::size_t> dims{64, 64};
    double dx = 84.75e-6;
    double sound_speed = 1580.0;
    std::size_t num_time_samples = 128;
    double dt = 0.0;  // 0 = derive from the grid diagonal
    std::size_t sensor_pitch = 2;
    std::size_t subsample_factor = 4;
    std::uint64_t mask_seed = 7001;
  } geometry;

  struct Data {
    std::size_t n_train = 64;
    std::size_t n_test = 16;
    std::size_t n_transfer = 16;
    double snr = 15.0;
    bool background = false;
    std::string phantom = "vessels";  // tubes | vessels | tumor
    std::uint64_t data_seed = 1234;
    double background_sigma = 2.0;
  } data;

  struct Dgd {
    int k_max = 5;
    int steps_per_stage = 2000;
    int batch = 2;
    double lr = 5e-5;
    double loss_add_alpha = 0.01;
    double loss_add_beta_scale = 0.1;
    std::uint64_t train_seed = 4242;
  } dgd;

  struct Transfer {
    double lr = 1e-5;
    int epochs = 10;
    std::uint64_t seed = 6060;
  } transfer;

  struct Unet {
    int epochs = 30;
    int batch = 2;
    double lr = 1e-4;
    std::uint64_t train_seed = 5151;
  } unet;

  struct Tv {
    double lambda_min = 1e-5;
    double lambda_max = 1e-2;
    int lambda_count = 7;
    int inner_iters = 20;
  } tv;

  struct Eval {
    int variational_iterations = 20;
  } eval;

  struct Bench {
    std::uint64_t seed = 9090;
  } bench;

  struct Paths {
    std::string data;
    std::string models;
    std::string out;
  } paths;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses "key = value" text with '#' comments and dotted section prefixes.
/// Unknown keys, malformed values and out-of-range values raise ConfigError
/// with the offending line number.
ExperimentConfig parse_config_text(const std::string& text);

ExperimentConfig load_config_file(const std::string& path);

/// Every key in a fixed order; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& c);

std::uint64_t config_hash(const ExperimentConfig& c);

// Derived objects -----------------------------------------------------------

/// Desk geometry with the configured sub-sampling mask applied.
AcousticGeometry geometry_from_config(const ExperimentConfig& c);

/// Same geometry with the full sensor set active (factor 1).
AcousticGeometry full_view_geometry_from_config(const ExperimentConfig& c);

PhantomSpec phantom_spec_from_config(const ExperimentConfig& c, std::uint64_t seed);
DatasetOptions dataset_options_from_config(const ExperimentConfig& c);
DgdHyper dgd_hyper_from_config(const ExperimentConfig& c);
UnetHyper unet_hyper_from_config(const ExperimentConfig& c);

}  // namespace patrec
