#include "patrec/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace patrec {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

std::string format_double(double v) {
  char buf[40];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = std::strtod(buf, nullptr);
    if (back == v) break;
  }
  return buf;
}

std::string to_hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void save_array_f64(const std::string& path_base, const std::vector<std::size_t>& dims,
                    const std::vector<double>& data,
                    const std::vector<std::pair<std::string, std::string>>& extras) {
  if (data.size() != element_count(dims))
    throw std::invalid_argument("save_array_f64: data/dims mismatch");
  {
    std::ofstream meta(path_base + ".meta", std::ios::binary);
    if (!meta) throw std::runtime_error("cannot write " + path_base + ".meta");
    meta << "dtype = f64\n";
    meta << "order = row-major\n";
    meta << "dims =";
    for (auto d : dims) meta << ' ' << d;
    meta << "\n";
    for (const auto& [k, v] : extras) meta << k << " = " << v << "\n";
  }
  std::ofstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + path_base + ".bin");
  bin.write(reinterpret_cast<const char*>(data.data()),
            std::streamsize(data.size() * sizeof(double)));
  if (!bin) throw std::runtime_error("short write on " + path_base + ".bin");
}

std::string RawArray::extra(const std::string& key) const {
  for (const auto& [k, v] : extras)
    if (k == key) return v;
  throw std::runtime_error("raw array metadata missing key: " + key);
}

RawArray load_array_f64(const std::string& path_base) {
  std::ifstream meta(path_base + ".meta");
  if (!meta) throw std::runtime_error("cannot open " + path_base + ".meta");
  RawArray arr;
  std::string line;
  bool saw_dtype = false;
  while (std::getline(meta, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path_base + ".meta: malformed line");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "dtype") {
      if (value != "f64") throw std::runtime_error(path_base + ": unsupported dtype " + value);
      saw_dtype = true;
    } else if (key == "order") {
      if (value != "row-major") throw std::runtime_error(path_base + ": unsupported order");
    } else if (key == "dims") {
      for (const auto& tok : split_ws(value)) arr.dims.push_back(std::stoull(tok));
    } else {
      arr.extras.emplace_back(key, value);
    }
  }
  if (!saw_dtype || arr.dims.empty())
    throw std::runtime_error(path_base + ".meta: missing dtype or dims");

  const std::size_t n = element_count(arr.dims);
  std::ifstream bin(path_base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot open " + path_base + ".bin");
  arr.data.resize(n);
  bin.read(reinterpret_cast<char*>(arr.data.data()), std::streamsize(n * sizeof(double)));
  if (std::size_t(bin.gcount()) != n * sizeof(double))
    throw std::runtime_error(path_base + ".bin: truncated payload");
  return arr;
}

void save_field(const std::string& path_base, const ScalarField& f) {
  std::string sp;
  for (std::size_t d = 0; d < f.spacing.size(); ++d)
    sp += (d ? " " : "") + format_double(f.spacing[d]);
  save_array_f64(path_base, f.dims, f.data, {{"spacing", sp}});
}

ScalarField load_field(const std::string& path_base) {
  RawArray arr = load_array_f64(path_base);
  ScalarField f;
  f.dims = arr.dims;
  f.data = std::move(arr.data);
  for (const auto& tok : split_ws(arr.extra("spacing"))) f.spacing.push_back(std::stod(tok));
  validate(f, path_base.c_str());
  return f;
}

void save_sensor_data(const std::string& path_base, const SensorData& y) {
  save_array_f64(path_base, {y.num_sensors, y.num_samples}, y.data,
                 {{"dt", format_double(y.dt)}});
}

SensorData load_sensor_data(const std::string& path_base) {
  RawArray arr = load_array_f64(path_base);
  if (arr.dims.size() != 2) throw std::runtime_error(path_base + ": sensor data must be 2D");
  SensorData y(arr.dims[0], arr.dims[1], std::stod(arr.extra("dt")));
  y.data = std::move(arr.data);
  return y;
}

void save_geometry(const std::string& path, const AcousticGeometry& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "dims =";
  for (auto d : g.dims) out << ' ' << d;
  out << "\nspacing =";
  for (auto s : g.spacing) out << ' ' << format_double(s);
  out << "\nsound_speed = " << format_double(g.sound_speed);
  out << "\nnum_time_samples = " << g.num_time_samples;
  out << "\ndt = " << format_double(g.dt);
  out << "\nsensors =";
  for (auto s : g.sensors) out << ' ' << s;
  out << "\nmask =";
  for (auto m : g.mask) out << ' ' << int(m);
  out << "\n";
}

AcousticGeometry load_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  AcousticGeometry g;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error(path + ": malformed line");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto toks = split_ws(value);
    if (key == "dims") {
      for (const auto& t : toks) g.dims.push_back(std::stoull(t));
    } else if (key == "spacing") {
      for (const auto& t : toks) g.spacing.push_back(std::stod(t));
    } else if (key == "sound_speed") {
      g.sound_speed = std::stod(value);
    } else if (key == "num_time_samples") {
      g.num_time_samples = std::stoull(value);
    } else if (key == "dt") {
      g.dt = std::stod(value);
    } else if (key == "sensors") {
      for (const auto& t : toks) g.sensors.push_back(std::stoull(t));
    } else if (key == "mask") {
      for (const auto& t : toks) g.mask.push_back(std::uint8_t(std::stoi(t)));
    } else {
      throw std::runtime_error(path + ": unknown geometry key " + key);
    }
  }
  validate(g);
  return g;
}

void write_pgm16(const std::string& path, const ScalarField& image, double display_max) {
  if (image.ndim() != 2) throw std::invalid_argument("write_pgm16: expects a 2D field");
  if (!(display_max > 0.0)) throw std::invalid_argument("write_pgm16: display_max must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << image.dims[1] << ' ' << image.dims[0] << "\n65535\n";
  for (double v : image.data) {
    double scaled = std::max(0.0, std::min(1.0, v / display_max));
    auto q = static_cast<unsigned>(scaled * 65535.0 + 0.5);
    unsigned char bytes[2] = {static_cast<unsigned char>(q >> 8),
                              static_cast<unsigned char>(q & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
  }
}

void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t config_hash,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "version = patrec 0.1.0\n";
  out << "command = " << command << "\n";
  out << "config_hash = " << to_hex(config_hash) << "\n";
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

bool file_exists(const std::string& path) {
  return std::filesystem::exists(path);
}

}  // namespace patrec
