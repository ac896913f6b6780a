#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/field.hpp"

namespace patrec {

/// Shortest decimal form of v that parses back to the same double.
std::string format_double(double v);

/// 16 hex digits.
std::string to_hex(std::uint64_t v);

/// FNV-1a over a byte range / string.
std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);
std::uint64_t fnv1a(const std::string& s);

// ---------------------------------------------------------------------------
// Raw array container: <base>.meta (plain text: dtype, dims, order, extras)
// plus <base>.bin (little-endian f64 payload).
// ---------------------------------------------------------------------------

void save_array_f64(const std::string& path_base, const std::vector<std::size_t>& dims,
                    const std::vector<double>& data,
                    const std::vector<std::pair<std::string, std::string>>& extras = {});

struct RawArray {
  std::vector<std::size_t> dims;
  std::vector<double> data;
  std::vector<std::pair<std::string, std::string>> extras;

  std::string extra(const std::string& key) const;  // throws if absent
};

RawArray load_array_f64(const std::string& path_base);

void save_field(const std::string& path_base, const ScalarField& f);
ScalarField load_field(const std::string& path_base);

void save_sensor_data(const std::string& path_base, const SensorData& y);
SensorData load_sensor_data(const std::string& path_base);

/// Geometry as "key = value" text (sensors and mask as space-separated lists).
void save_geometry(const std::string& path, const AcousticGeometry& g);
AcousticGeometry load_geometry(const std::string& path);

/// 16-bit big-endian P5 image; values mapped linearly from [0, display_max]
/// and clipped. 2D fields only.
void write_pgm16(const std::string& path, const ScalarField& image, double display_max);

/// Run manifest: tool version, subcommand, config hash, seeds.
void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t config_hash,
                    const std::vector<std::pair<std::string, std::string>>& entries);

/// Creates dir (and parents). Throws on failure.
void ensure_directory(const std::string& dir);

bool file_exists(const std::string& path);

}  // namespace patrec
