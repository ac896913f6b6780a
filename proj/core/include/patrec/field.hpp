#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace patrec {

inline std::size_t element_count(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

/// n-dimensional real grid stored row-major (last axis fastest).
struct ScalarField {
  std::vector<std::size_t> dims;
  std::vector<double> spacing;  // meters per voxel, one entry per axis
  std::vector<double> data;

  ScalarField() = default;

  ScalarField(std::vector<std::size_t> d, double dx)
      : dims(std::move(d)),
        spacing(dims.size(), dx),
        data(element_count(dims), 0.0) {}

  ScalarField(std::vector<std::size_t> d, std::vector<double> sp)
      : dims(std::move(d)), spacing(std::move(sp)),
        data(element_count(dims), 0.0) {}

  std::size_t size() const { return data.size(); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  std::size_t ndim() const { return dims.size(); }

  bool same_shape(const ScalarField& o) const { return dims == o.dims; }
};

/// Throws unless dims/spacing/data are consistent and every entry is finite.
inline void validate(const ScalarField& f, const char* what = "field") {
  if (f.dims.empty()) throw std::invalid_argument(std::string(what) + ": empty dims");
  if (f.spacing.size() != f.dims.size())
    throw std::invalid_argument(std::string(what) + ": spacing/dims rank mismatch");
  for (double s : f.spacing)
    if (!(s > 0.0)) throw std::invalid_argument(std::string(what) + ": spacing must be positive");
  if (f.data.size() != element_count(f.dims))
    throw std::invalid_argument(std::string(what) + ": data length does not match dims");
  for (double v : f.data)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const ScalarField& a, const ScalarField& b) { return dot(a.data, b.data); }

inline double l2_norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }
inline double l2_norm(const ScalarField& f) { return l2_norm(f.data); }

inline double max_value(const ScalarField& f) {
  double m = f.data.empty() ? 0.0 : f.data[0];
  for (double v : f.data) m = std::max(m, v);
  return m;
}

inline double min_value(const ScalarField& f) {
  double m = f.data.empty() ? 0.0 : f.data[0];
  for (double v : f.data) m = std::min(m, v);
  return m;
}

inline double mean_value(const ScalarField& f) {
  if (f.data.empty()) return 0.0;
  return std::accumulate(f.data.begin(), f.data.end(), 0.0) / double(f.data.size());
}

}  // namespace patrec
