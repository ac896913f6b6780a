#include "patrec/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "patrec/io.hpp"

namespace patrec {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    if (!std::isfinite(d)) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(line, key + ": malformed number '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return u;
  } catch (...) {
    throw ConfigError(line, key + ": malformed integer '" + v + "'");
  }
}

int parse_int(const std::string& v, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    long l = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return int(l);
  } catch (...) {
    throw ConfigError(line, key + ": malformed integer '" + v + "'");
  }
}

bool parse_bool(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(line, key + ": expected a boolean, got '" + v + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, int)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"geometry.dims",
       [](ExperimentConfig& c, const std::string& v, int line) {
         std::istringstream in(v);
         std::vector<std::size_t> dims;
         std::string tok;
         while (in >> tok) {
           auto d = parse_u64(tok, line, "geometry.dims");
           if (d < 8) throw ConfigError(line, "geometry.dims out of range (each extent >= 8)");
           dims.push_back(d);
         }
         if (dims.size() < 2 || dims.size() > 3)
           throw ConfigError(line, "geometry.dims must list 2 or 3 extents");
         c.geometry.dims = dims;
       }},
      {"geometry.dx",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.dx = parse_double(v, line, "geometry.dx");
         if (!(c.geometry.dx > 0)) throw ConfigError(line, "geometry.dx out of range (must be > 0)");
       }},
      {"geometry.sound_speed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.sound_speed = parse_double(v, line, "geometry.sound_speed");
         if (!(c.geometry.sound_speed > 0))
           throw ConfigError(line, "geometry.sound_speed out of range (must be > 0)");
       }},
      {"geometry.num_time_samples",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.num_time_samples = parse_u64(v, line, "geometry.num_time_samples");
         if (c.geometry.num_time_samples < 1)
           throw ConfigError(line, "geometry.num_time_samples out of range (must be >= 1)");
       }},
      {"geometry.dt",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.dt = parse_double(v, line, "geometry.dt");
         if (c.geometry.dt < 0) throw ConfigError(line, "geometry.dt out of range (must be >= 0)");
       }},
      {"geometry.sensor_pitch",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.sensor_pitch = parse_u64(v, line, "geometry.sensor_pitch");
         if (c.geometry.sensor_pitch < 1)
           throw ConfigError(line, "geometry.sensor_pitch out of range (must be >= 1)");
       }},
      {"geometry.subsample_factor",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.subsample_factor = parse_u64(v, line, "geometry.subsample_factor");
         if (c.geometry.subsample_factor < 1)
           throw ConfigError(line, "geometry.subsample_factor out of range (must be >= 1)");
       }},
      {"geometry.mask_seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.geometry.mask_seed = parse_u64(v, line, "geometry.mask_seed");
       }},
      {"data.n_train",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.n_train = parse_u64(v, line, "data.n_train");
         if (c.data.n_train < 1) throw ConfigError(line, "data.n_train out of range (must be >= 1)");
       }},
      {"data.n_test",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.n_test = parse_u64(v, line, "data.n_test");
         if (c.data.n_test < 1) throw ConfigError(line, "data.n_test out of range (must be >= 1)");
       }},
      {"data.n_transfer",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.n_transfer = parse_u64(v, line, "data.n_transfer");
       }},
      {"data.snr",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.snr = parse_double(v, line, "data.snr");
         if (!(c.data.snr > 0)) throw ConfigError(line, "data.snr out of range (must be > 0)");
       }},
      {"data.background",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.background = parse_bool(v, line, "data.background");
       }},
      {"data.phantom",
       [](ExperimentConfig& c, const std::string& v, int line) {
         if (v != "tubes" && v != "vessels" && v != "tumor")
           throw ConfigError(line, "data.phantom must be tubes, vessels or tumor");
         c.data.phantom = v;
       }},
      {"data.data_seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.data_seed = parse_u64(v, line, "data.data_seed");
       }},
      {"data.background_sigma",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.data.background_sigma = parse_double(v, line, "data.background_sigma");
         if (!(c.data.background_sigma > 0))
           throw ConfigError(line, "data.background_sigma out of range (must be > 0)");
       }},
      {"dgd.k_max",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.k_max = parse_int(v, line, "dgd.k_max");
         if (c.dgd.k_max < 1) throw ConfigError(line, "dgd.k_max out of range (must be >= 1)");
       }},
      {"dgd.steps_per_stage",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.steps_per_stage = parse_int(v, line, "dgd.steps_per_stage");
         if (c.dgd.steps_per_stage < 0)
           throw ConfigError(line, "dgd.steps_per_stage out of range (must be >= 0)");
       }},
      {"dgd.batch",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.batch = parse_int(v, line, "dgd.batch");
         if (c.dgd.batch < 1) throw ConfigError(line, "dgd.batch out of range (must be >= 1)");
       }},
      {"dgd.lr",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.lr = parse_double(v, line, "dgd.lr");
         if (!(c.dgd.lr >= 0)) throw ConfigError(line, "dgd.lr out of range (must be >= 0)");
       }},
      {"dgd.loss_add_alpha",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.loss_add_alpha = parse_double(v, line, "dgd.loss_add_alpha");
         if (c.dgd.loss_add_alpha < 0)
           throw ConfigError(line, "dgd.loss_add_alpha out of range (must be >= 0)");
       }},
      {"dgd.loss_add_beta_scale",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.loss_add_beta_scale = parse_double(v, line, "dgd.loss_add_beta_scale");
         if (c.dgd.loss_add_beta_scale < 0)
           throw ConfigError(line, "dgd.loss_add_beta_scale out of range (must be >= 0)");
       }},
      {"dgd.train_seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.dgd.train_seed = parse_u64(v, line, "dgd.train_seed");
       }},
      {"transfer.lr",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.transfer.lr = parse_double(v, line, "transfer.lr");
         if (c.transfer.lr < 0) throw ConfigError(line, "transfer.lr out of range (must be >= 0)");
       }},
      {"transfer.epochs",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.transfer.epochs = parse_int(v, line, "transfer.epochs");
         if (c.transfer.epochs < 0)
           throw ConfigError(line, "transfer.epochs out of range (must be >= 0)");
       }},
      {"transfer.seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.transfer.seed = parse_u64(v, line, "transfer.seed");
       }},
      {"unet.epochs",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.unet.epochs = parse_int(v, line, "unet.epochs");
         if (c.unet.epochs < 0) throw ConfigError(line, "unet.epochs out of range (must be >= 0)");
       }},
      {"unet.batch",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.unet.batch = parse_int(v, line, "unet.batch");
         if (c.unet.batch < 1) throw ConfigError(line, "unet.batch out of range (must be >= 1)");
       }},
      {"unet.lr",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.unet.lr = parse_double(v, line, "unet.lr");
         if (!(c.unet.lr >= 0)) throw ConfigError(line, "unet.lr out of range (must be >= 0)");
       }},
      {"unet.train_seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.unet.train_seed = parse_u64(v, line, "unet.train_seed");
       }},
      {"tv.lambda_min",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.tv.lambda_min = parse_double(v, line, "tv.lambda_min");
         if (!(c.tv.lambda_min > 0))
           throw ConfigError(line, "tv.lambda_min out of range (must be > 0)");
       }},
      {"tv.lambda_max",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.tv.lambda_max = parse_double(v, line, "tv.lambda_max");
         if (!(c.tv.lambda_max > 0))
           throw ConfigError(line, "tv.lambda_max out of range (must be > 0)");
       }},
      {"tv.lambda_count",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.tv.lambda_count = parse_int(v, line, "tv.lambda_count");
         if (c.tv.lambda_count < 1)
           throw ConfigError(line, "tv.lambda_count out of range (must be >= 1)");
       }},
      {"tv.inner_iters",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.tv.inner_iters = parse_int(v, line, "tv.inner_iters");
         if (c.tv.inner_iters < 1)
           throw ConfigError(line, "tv.inner_iters out of range (must be >= 1)");
       }},
      {"eval.variational_iterations",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.eval.variational_iterations = parse_int(v, line, "eval.variational_iterations");
         if (c.eval.variational_iterations < 1)
           throw ConfigError(line, "eval.variational_iterations out of range (must be >= 1)");
       }},
      {"bench.seed",
       [](ExperimentConfig& c, const std::string& v, int line) {
         c.bench.seed = parse_u64(v, line, "bench.seed");
       }},
      {"paths.data",
       [](ExperimentConfig& c, const std::string& v, int) { c.paths.data = v; }},
      {"paths.models",
       [](ExperimentConfig& c, const std::string& v, int) { c.paths.models = v; }},
      {"paths.out",
       [](ExperimentConfig& c, const std::string& v, int) { c.paths.out = v; }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(line_no, "unknown key '" + key + "'");
    it->second(config, value, line_no);
  }
  if (config.tv.lambda_max < config.tv.lambda_min)
    throw ConfigError(line_no, "tv.lambda_max must be >= tv.lambda_min");
  return config;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "geometry.dims =";
  for (auto d : c.geometry.dims) out << ' ' << d;
  out << "\n";
  out << "geometry.dx = " << format_double(c.geometry.dx) << "\n";
  out << "geometry.sound_speed = " << format_double(c.geometry.sound_speed) << "\n";
  out << "geometry.num_time_samples = " << c.geometry.num_time_samples << "\n";
  out << "geometry.dt = " << format_double(c.geometry.dt) << "\n";
  out << "geometry.sensor_pitch = " << c.geometry.sensor_pitch << "\n";
  out << "geometry.subsample_factor = " << c.geometry.subsample_factor << "\n";
  out << "geometry.mask_seed = " << c.geometry.mask_seed << "\n";
  out << "data.n_train = " << c.data.n_train << "\n";
  out << "data.n_test = " << c.data.n_test << "\n";
  out << "data.n_transfer = " << c.data.n_transfer << "\n";
  out << "data.snr = " << format_double(c.data.snr) << "\n";
  out << "data.background = " << (c.data.background ? "true" : "false") << "\n";
  out << "data.phantom = " << c.data.phantom << "\n";
  out << "data.data_seed = " << c.data.data_seed << "\n";
  out << "data.background_sigma = " << format_double(c.data.background_sigma) << "\n";
  out << "dgd.k_max = " << c.dgd.k_max << "\n";
  out << "dgd.steps_per_stage = " << c.dgd.steps_per_stage << "\n";
  out << "dgd.batch = " << c.dgd.batch << "\n";
  out << "dgd.lr = " << format_double(c.dgd.lr) << "\n";
  out << "dgd.loss_add_alpha = " << format_double(c.dgd.loss_add_alpha) << "\n";
  out << "dgd.loss_add_beta_scale = " << format_double(c.dgd.loss_add_beta_scale) << "\n";
  out << "dgd.train_seed = " << c.dgd.train_seed << "\n";
  out << "transfer.lr = " << format_double(c.transfer.lr) << "\n";
  out << "transfer.epochs = " << c.transfer.epochs << "\n";
  out << "transfer.seed = " << c.transfer.seed << "\n";
  out << "unet.epochs = " << c.unet.epochs << "\n";
  out << "unet.batch = " << c.unet.batch << "\n";
  out << "unet.lr = " << format_double(c.unet.lr) << "\n";
  out << "unet.train_seed = " << c.unet.train_seed << "\n";
  out << "tv.lambda_min = " << format_double(c.tv.lambda_min) << "\n";
  out << "tv.lambda_max = " << format_double(c.tv.lambda_max) << "\n";
  out << "tv.lambda_count = " << c.tv.lambda_count << "\n";
  out << "tv.inner_iters = " << c.tv.inner_iters << "\n";
  out << "eval.variational_iterations = " << c.eval.variational_iterations << "\n";
  out << "bench.seed = " << c.bench.seed << "\n";
  if (!c.paths.data.empty()) out << "paths.data = " << c.paths.data << "\n";
  if (!c.paths.models.empty()) out << "paths.models = " << c.paths.models << "\n";
  if (!c.paths.out.empty()) out << "paths.out = " << c.paths.out << "\n";
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& c) { return fnv1a(serialize_config(c)); }

AcousticGeometry geometry_from_config(const ExperimentConfig& c) {
  AcousticGeometry g = full_view_geometry_from_config(c);
  if (c.geometry.subsample_factor > 1) {
    SeededRng rng(c.geometry.mask_seed);
    g.mask = make_subsampling_mask(g.sensors.size(), c.geometry.subsample_factor, rng);
  }
  return g;
}

AcousticGeometry full_view_geometry_from_config(const ExperimentConfig& c) {
  return make_desk_geometry(c.geometry.dims, c.geometry.dx, c.geometry.sound_speed,
                            c.geometry.num_time_samples, c.geometry.dt,
                            c.geometry.sensor_pitch);
}

PhantomSpec phantom_spec_from_config(const ExperimentConfig& c, std::uint64_t seed) {
  PhantomSpec::Kind kind = PhantomSpec::Kind::Vessels;
  if (c.data.phantom == "tubes") kind = PhantomSpec::Kind::Tubes;
  else if (c.data.phantom == "tumor") kind = PhantomSpec::Kind::TumorLike;
  return default_phantom_spec(kind, seed);
}

DatasetOptions dataset_options_from_config(const ExperimentConfig& c) {
  DatasetOptions opt;
  opt.snr = c.data.snr;
  opt.background = c.data.background;
  opt.background_sigma = c.data.background_sigma;
  return opt;
}

DgdHyper dgd_hyper_from_config(const ExperimentConfig& c) {
  DgdHyper h;
  h.steps_per_stage = c.dgd.steps_per_stage;
  h.batch = c.dgd.batch;
  h.lr = c.dgd.lr;
  h.loss_add_alpha = c.dgd.loss_add_alpha;
  h.loss_add_beta_scale = c.dgd.loss_add_beta_scale;
  h.seed = c.dgd.train_seed;
  return h;
}

UnetHyper unet_hyper_from_config(const ExperimentConfig& c) {
  UnetHyper h;
  h.epochs = c.unet.epochs;
  h.batch = c.unet.batch;
  h.lr = c.unet.lr;
  h.loss_add_alpha = c.dgd.loss_add_alpha;
  h.loss_add_beta_scale = c.dgd.loss_add_beta_scale;
  h.seed = c.unet.train_seed;
  return h;
}

}  // namespace patrec
