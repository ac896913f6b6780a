#include "patrec/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "patrec/fft.hpp"

namespace patrec {

std::size_t AcousticGeometry::active_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

std::vector<std::size_t> AcousticGeometry::active_sensors() const {
  std::vector<std::size_t> out;
  out.reserve(sensors.size());
  for (std::size_t i = 0; i < sensors.size(); ++i)
    if (i < mask.size() && mask[i]) out.push_back(sensors[i]);
  return out;
}

namespace {

std::vector<std::size_t> unflatten(std::size_t flat, const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t d = dims.size(); d-- > 0;) {
    idx[d] = flat % dims[d];
    flat /= dims[d];
  }
  return idx;
}

}  // namespace

void validate(const AcousticGeometry& g) {
  if (g.dims.empty()) throw std::invalid_argument("geometry: empty dims");
  if (g.spacing.size() != g.dims.size())
    throw std::invalid_argument("geometry: spacing/dims rank mismatch");
  for (double s : g.spacing)
    if (!(s > 0.0)) throw std::invalid_argument("geometry: spacing must be positive");
  if (!(g.dt > 0.0)) throw std::invalid_argument("geometry: dt must be positive");
  if (g.num_time_samples < 1) throw std::invalid_argument("geometry: need at least one time sample");
  if (!(g.sound_speed > 0.0)) throw std::invalid_argument("geometry: sound speed must be positive");
  if (g.sensors.empty()) throw std::invalid_argument("geometry: no sensors");
  if (g.mask.size() != g.sensors.size())
    throw std::invalid_argument("geometry: mask length does not match sensor count");
  const std::size_t total = element_count(g.dims);
  for (std::size_t s : g.sensors) {
    if (s >= total) throw std::invalid_argument("geometry: sensor index outside grid");
    // limited view: every sensor on the first-axis-zero face
    if (unflatten(s, g.dims)[0] != 0)
      throw std::invalid_argument("geometry: sensors must lie on one boundary face");
  }
}

AcousticGeometry make_desk_geometry(std::vector<std::size_t> dims, double dx,
                                    double sound_speed, std::size_t num_time_samples,
                                    double dt, std::size_t sensor_pitch) {
  if (dims.size() < 2) throw std::invalid_argument("make_desk_geometry: need at least 2D");
  if (sensor_pitch == 0) throw std::invalid_argument("make_desk_geometry: zero sensor pitch");
  AcousticGeometry g;
  g.dims = std::move(dims);
  g.spacing.assign(g.dims.size(), dx);
  g.sound_speed = sound_speed;
  g.num_time_samples = num_time_samples;
  if (dt > 0.0) {
    g.dt = dt;
  } else {
    double diag_sq = 0.0;
    for (std::size_t d = 0; d < g.dims.size(); ++d) {
      double extent = double(g.dims[d]) * g.spacing[d];
      diag_sq += extent * extent;
    }
    g.dt = 1.5 * std::sqrt(diag_sq) / (sound_speed * double(num_time_samples));
  }

  // Sensors on the axis-0 = 0 face, every sensor_pitch-th grid point of the
  // remaining axes.
  std::vector<std::size_t> face_dims(g.dims.begin() + 1, g.dims.end());
  std::vector<std::size_t> idx(face_dims.size(), 0);
  const std::size_t face_total = element_count(face_dims);
  std::size_t stride0 = face_total;  // flat stride of axis 0
  for (std::size_t flat = 0; flat < face_total; ++flat) {
    bool on_pitch = true;
    for (std::size_t v : idx)
      if (v % sensor_pitch != 0) { on_pitch = false; break; }
    if (on_pitch) {
      std::size_t f = 0;
      for (std::size_t d = 0; d < face_dims.size(); ++d) f = f * face_dims[d] + idx[d];
      g.sensors.push_back(0 * stride0 + f);
    }
    for (std::size_t d = face_dims.size(); d-- > 0;) {
      if (++idx[d] < face_dims[d]) break;
      idx[d] = 0;
    }
  }
  g.mask.assign(g.sensors.size(), 1);
  validate(g);
  return g;
}

ScalarField propagate(const ScalarField& x, double sound_speed, double t) {
  validate(x, "propagate input");
  if (!(t >= 0.0) || !std::isfinite(t))
    throw std::invalid_argument("propagate: time must be finite and nonnegative");
  Spectrum s = fft_forward(x);
  for (std::size_t i = 0; i < s.coeff.size(); ++i)
    s.coeff[i] *= std::cos(sound_speed * s.k_mag[i] * t);
  return fft_inverse(s);
}

SamplingMask make_subsampling_mask(std::size_t sensor_count, std::size_t factor,
                                   SeededRng& rng) {
  if (factor == 0) throw std::invalid_argument("make_subsampling_mask: zero factor");
  const std::size_t keep = sensor_count / factor;
  if (keep == 0)
    throw std::invalid_argument("make_subsampling_mask: factor larger than sensor count");
  // Partial Fisher-Yates over the index list.
  std::vector<std::size_t> perm(sensor_count);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + rng.uniform_index(sensor_count - i);
    std::swap(perm[i], perm[j]);
  }
  SamplingMask mask(sensor_count, 0);
  for (std::size_t i = 0; i < keep; ++i) mask[perm[i]] = 1;
  return mask;
}

AcousticGeometry with_subsampling(AcousticGeometry g, std::size_t factor, SeededRng& rng) {
  g.mask = make_subsampling_mask(g.sensors.size(), factor, rng);
  return g;
}

namespace {

// Next size whose prime factors are all in {2, 3, 5, 7}; keeps the padded
// transforms fast.
std::size_t next_fast_size(std::size_t n) {
  for (;; ++n) {
    std::size_t m = n;
    for (std::size_t p : {2, 3, 5, 7})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

}  // namespace

AcousticOperator::AcousticOperator(AcousticGeometry g) : geom_(std::move(g)) {
  validate(geom_);
  active_ = geom_.active_sensors();
  if (active_.empty()) throw std::invalid_argument("acoustic operator: empty sampling mask");

  // Pad so that within the recording window the nearest periodic image of
  // any grid point stays farther away than the waves can travel.
  const double travel = geom_.sound_speed * double(geom_.num_time_samples - 1) * geom_.dt;
  padded_dims_.resize(geom_.dims.size());
  for (std::size_t d = 0; d < geom_.dims.size(); ++d) {
    auto margin = std::size_t(std::ceil(travel / geom_.spacing[d])) + 1;
    margin = std::min(margin, 3 * geom_.dims[d]);
    padded_dims_[d] = next_fast_size(geom_.dims[d] + margin);
  }

  // Row-wise mapping between the grid and its padded embedding.
  const std::size_t rank = geom_.dims.size();
  row_width_ = geom_.dims[rank - 1];
  row_count_ = element_count(geom_.dims) / row_width_;
  std::vector<std::size_t> pstride(rank, 1);
  for (std::size_t d = rank - 1; d-- > 0;) pstride[d] = pstride[d + 1] * padded_dims_[d + 1];
  row_map_.resize(row_count_);
  std::vector<std::size_t> idx(rank > 1 ? rank - 1 : 0, 0);
  for (std::size_t r = 0; r < row_count_; ++r) {
    std::size_t off = 0;
    for (std::size_t d = 0; d + 1 < rank; ++d) off += idx[d] * pstride[d];
    row_map_[r] = off;
    for (std::size_t d = idx.size(); d-- > 0;) {
      if (++idx[d] < geom_.dims[d]) break;
      idx[d] = 0;
    }
  }
  padded_active_.resize(active_.size());
  for (std::size_t s = 0; s < active_.size(); ++s) {
    std::size_t flat = active_[s];
    padded_active_[s] = row_map_[flat / row_width_] + flat % row_width_;
  }

  std::vector<double> k_mag = wavenumber_magnitudes(padded_dims_, geom_.spacing);
  const std::size_t n = k_mag.size();
  cos_table_.resize(geom_.num_time_samples * n);
  for (std::size_t ti = 0; ti < geom_.num_time_samples; ++ti) {
    const double t = double(ti) * geom_.dt;
    double* row = cos_table_.data() + ti * n;
    for (std::size_t i = 0; i < n; ++i)
      row[i] = std::cos(geom_.sound_speed * k_mag[i] * t);
  }
}

ScalarField AcousticOperator::zero_field() const {
  return ScalarField(geom_.dims, geom_.spacing);
}

SensorData AcousticOperator::zero_data() const {
  return SensorData(active_.size(), geom_.num_time_samples, geom_.dt);
}

SensorData AcousticOperator::forward(const ScalarField& x) const {
  if (x.dims != geom_.dims)
    throw std::invalid_argument("forward: field dims do not match geometry");
  validate(x, "forward input");
  applications_.fetch_add(1);

  const std::size_t n = element_count(padded_dims_);
  std::vector<std::complex<double>> spectrum(n), mode(n), field(n);
  for (std::size_t r = 0; r < row_count_; ++r) {
    const double* src = x.data.data() + r * row_width_;
    std::complex<double>* dst = spectrum.data() + row_map_[r];
    for (std::size_t c = 0; c < row_width_; ++c) dst[c] = src[c];
  }
  detail::fft_c2c(padded_dims_, spectrum.data(), spectrum.data(), false);

  SensorData y = zero_data();
  for (std::size_t ti = 0; ti < geom_.num_time_samples; ++ti) {
    const double* cos_row = cos_table_.data() + ti * n;
    for (std::size_t i = 0; i < n; ++i) mode[i] = spectrum[i] * cos_row[i];
    detail::fft_c2c(padded_dims_, mode.data(), field.data(), true);
    for (std::size_t s = 0; s < padded_active_.size(); ++s)
      y.at(s, ti) = field[padded_active_[s]].real();
  }
  return y;
}

ScalarField AcousticOperator::adjoint(const SensorData& y) const {
  if (y.num_sensors != active_.size() || y.num_samples != geom_.num_time_samples)
    throw std::invalid_argument("adjoint: sensor data shape does not match geometry");
  applications_.fetch_add(1);

  const std::size_t n = element_count(padded_dims_);
  std::vector<std::complex<double>> scatter(n), spectrum(n), accum(n);
  for (std::size_t ti = 0; ti < geom_.num_time_samples; ++ti) {
    // only the sensor entries are ever nonzero; reset just those
    for (std::size_t s = 0; s < padded_active_.size(); ++s)
      scatter[padded_active_[s]] = y.at(s, ti);
    detail::fft_c2c(padded_dims_, scatter.data(), spectrum.data(), false);
    for (std::size_t s = 0; s < padded_active_.size(); ++s)
      scatter[padded_active_[s]] = 0.0;
    const double* cos_row = cos_table_.data() + ti * n;
    for (std::size_t i = 0; i < n; ++i) accum[i] += spectrum[i] * cos_row[i];
  }
  detail::fft_c2c(padded_dims_, accum.data(), accum.data(), true);
  ScalarField out = zero_field();
  for (std::size_t r = 0; r < row_count_; ++r) {
    const std::complex<double>* src = accum.data() + row_map_[r];
    double* dst = out.data.data() + r * row_width_;
    for (std::size_t c = 0; c < row_width_; ++c) dst[c] = src[c].real();
  }
  return out;
}

ScalarField AcousticOperator::data_fit_gradient(const ScalarField& x,
                                                const SensorData& y) const {
  SensorData residual = forward(x);
  if (residual.num_sensors != y.num_sensors || residual.num_samples != y.num_samples)
    throw std::invalid_argument("data_fit_gradient: measurement shape mismatch");
  for (std::size_t i = 0; i < residual.data.size(); ++i) residual.data[i] -= y.data[i];
  return adjoint(residual);
}

PowerIterationResult power_iteration(
    std::size_t n,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& normal_op,
    int iterations, SeededRng& rng) {
  if (iterations < 1) throw std::invalid_argument("power_iteration: need at least one iteration");
  std::vector<double> v = rng.gaussians(n), w(n);
  double nv = l2_norm(v);
  if (nv == 0.0) throw std::runtime_error("power_iteration: degenerate start vector");
  for (double& x : v) x /= nv;

  PowerIterationResult res;
  res.history.reserve(iterations);
  for (int it = 0; it < iterations; ++it) {
    normal_op(v, w);
    double rayleigh = dot(v, w);  // v is unit length
    res.history.push_back(rayleigh);
    double nw = l2_norm(w);
    if (nw == 0.0) {  // v in the null space; the estimate is 0
      res.value = 0.0;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  res.value = res.history.back();
  return res;
}

PowerIterationResult estimate_lipschitz(const AcousticOperator& op, int iterations,
                                        SeededRng& rng) {
  const auto& g = op.geometry();
  const std::size_t n = element_count(g.dims);
  auto normal = [&](const std::vector<double>& in, std::vector<double>& out) {
    ScalarField x(g.dims, g.spacing);
    x.data = in;
    ScalarField r = op.adjoint(op.forward(x));
    out = std::move(r.data);
  };
  return power_iteration(n, normal, iterations, rng);
}

}  // namespace patrec
