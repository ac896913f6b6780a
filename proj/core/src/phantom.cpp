#include "patrec/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "patrec/fft.hpp"
#include "patrec/parallel.hpp"

namespace patrec {

namespace {

void check_phantom_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2 || dims.size() > 3)
    throw std::invalid_argument("phantom: dims must be 2D or 3D");
  for (std::size_t d : dims)
    if (d < 32) throw std::invalid_argument("phantom: needs at least 32 voxels per axis");
}

// Writes max(current, intensity * coverage) in a ball around `center`;
// coverage ramps from 1 inside the radius to 0 over one voxel.
void stamp_ball(ScalarField& f, const std::vector<double>& center, double radius,
                double intensity) {
  const std::size_t rank = f.ndim();
  std::vector<long> lo(rank), hi(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    lo[d] = std::max<long>(0, long(std::floor(center[d] - radius - 1.0)));
    hi[d] = std::min<long>(long(f.dims[d]) - 1, long(std::ceil(center[d] + radius + 1.0)));
    if (lo[d] > hi[d]) return;
  }
  std::vector<long> idx(lo);
  while (true) {
    double dist_sq = 0.0;
    for (std::size_t d = 0; d < rank; ++d) {
      double dd = double(idx[d]) - center[d];
      dist_sq += dd * dd;
    }
    double coverage = std::clamp(radius + 0.5 - std::sqrt(dist_sq), 0.0, 1.0);
    if (coverage > 0.0) {
      std::size_t flat = 0;
      for (std::size_t d = 0; d < rank; ++d) flat = flat * f.dims[d] + std::size_t(idx[d]);
      f.data[flat] = std::max(f.data[flat], intensity * coverage);
    }
    std::size_t d = rank;
    while (d-- > 0) {
      if (++idx[d] <= hi[d]) break;
      idx[d] = lo[d];
      if (d == 0) return;
    }
  }
}

std::vector<double> random_unit(SeededRng& rng, std::size_t rank) {
  std::vector<double> v(rank);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) x = rng.gaussian();
    norm = l2_norm(v);
  } while (norm < 1e-12);
  for (auto& x : v) x /= norm;
  return v;
}

// Any unit vector orthogonal to dir.
std::vector<double> orthogonal_unit(SeededRng& rng, const std::vector<double>& dir) {
  if (dir.size() == 2) return {-dir[1], dir[0]};
  std::vector<double> v = random_unit(rng, dir.size());
  double proj = dot(v, dir);
  for (std::size_t d = 0; d < v.size(); ++d) v[d] -= proj * dir[d];
  double n = l2_norm(v);
  if (n < 1e-9) return orthogonal_unit(rng, dir);
  for (auto& x : v) x /= n;
  return v;
}

void normalize_to_unit_max(ScalarField& f) {
  double m = max_value(f);
  if (m <= 0.0) throw std::runtime_error("phantom: generator produced an empty image");
  for (double& v : f.data) v /= m;
}

// Tapering random walk that stamps a branch and recursively spawns children.
struct VesselGrower {
  ScalarField& field;
  SeededRng& rng;
  double intensity;
  int bifurcations_done = 0;
  int min_bifurcations = 2;

  void grow(std::vector<double> pos, std::vector<double> dir, double radius, int depth) {
    const std::size_t rank = field.ndim();
    const int steps = 20 + int(rng.uniform_index(25));
    const double step_len = 0.75;
    for (int s = 0; s < steps; ++s) {
      stamp_ball(field, pos, radius, intensity);
      // smooth wiggle
      std::vector<double> wig = orthogonal_unit(rng, dir);
      for (std::size_t d = 0; d < rank; ++d) dir[d] += 0.18 * rng.gaussian() * wig[d];
      double n = l2_norm(dir);
      for (auto& x : dir) x /= n;
      for (std::size_t d = 0; d < rank; ++d) pos[d] += step_len * dir[d];
      radius = std::max(0.55, radius * 0.995);
      for (std::size_t d = 0; d < rank; ++d)
        if (pos[d] < 2.0 || pos[d] > double(field.dims[d]) - 3.0) return;
    }
    bool must_branch = bifurcations_done < min_bifurcations;
    if (depth >= 4 || radius <= 0.6) return;
    if (must_branch || rng.uniform() < 0.7) {
      ++bifurcations_done;
      std::vector<double> side = orthogonal_unit(rng, dir);
      double spread = rng.uniform(0.35, 0.75);
      for (int child = 0; child < 2; ++child) {
        std::vector<double> cdir(dir);
        double sign = child == 0 ? 1.0 : -1.0;
        for (std::size_t d = 0; d < cdir.size(); ++d) cdir[d] += sign * spread * side[d];
        double n = l2_norm(cdir);
        for (auto& x : cdir) x /= n;
        grow(pos, cdir, radius * rng.uniform(0.65, 0.85), depth + 1);
      }
    } else {
      grow(pos, dir, radius * 0.9, depth + 1);
    }
  }
};

}  // namespace

PhantomSpec default_phantom_spec(PhantomSpec::Kind kind, std::uint64_t seed) {
  PhantomSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  switch (kind) {
    case PhantomSpec::Kind::Tubes:
      spec.count_min = 3;
      spec.count_max = 8;
      spec.radius_min = 0.8;
      spec.radius_max = 1.3;
      break;
    case PhantomSpec::Kind::Vessels:
      spec.count_min = 1;
      spec.count_max = 3;
      spec.radius_min = 1.1;
      spec.radius_max = 2.0;
      break;
    case PhantomSpec::Kind::TumorLike:
      spec.count_min = 1;
      spec.count_max = 1;
      spec.radius_min = 1.0;
      spec.radius_max = 1.4;
      break;
  }
  return spec;
}

ScalarField tube_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims) {
  check_phantom_dims(dims);
  if (spec.count_min < 1 || spec.count_max < spec.count_min ||
      !(spec.radius_min > 0.0) || spec.radius_max < spec.radius_min)
    throw std::invalid_argument("tube_phantom: bad spec ranges");
  SeededRng rng(spec.seed);
  ScalarField f(dims, 1.0);
  const std::size_t rank = dims.size();
  const int count = spec.count_min + int(rng.uniform_index(spec.count_max - spec.count_min + 1));
  double min_extent = double(*std::min_element(dims.begin(), dims.end()));

  for (int tube = 0; tube < count; ++tube) {
    const double intensity = tube == 0 ? 1.0 : rng.uniform(0.5, 0.95);
    const double radius = rng.uniform(spec.radius_min, spec.radius_max);
    std::vector<double> a(rank), b(rank);
    double sep = 0.0;
    do {
      for (std::size_t d = 0; d < rank; ++d) {
        a[d] = rng.uniform(4.0, double(dims[d]) - 5.0);
        b[d] = rng.uniform(4.0, double(dims[d]) - 5.0);
      }
      double s = 0.0;
      for (std::size_t d = 0; d < rank; ++d) s += (b[d] - a[d]) * (b[d] - a[d]);
      sep = std::sqrt(s);
    } while (sep < 0.5 * min_extent);

    std::vector<double> chord(rank);
    for (std::size_t d = 0; d < rank; ++d) chord[d] = (b[d] - a[d]) / sep;
    std::vector<double> normal = orthogonal_unit(rng, chord);
    const double amp1 = rng.uniform(-6.0, 6.0);
    const double amp2 = rng.uniform(-3.0, 3.0);

    const int samples = int(std::ceil(sep / 0.4)) + 1;
    for (int s = 0; s <= samples; ++s) {
      double t = double(s) / double(samples);
      double off = amp1 * std::sin(std::numbers::pi * t) +
                   amp2 * std::sin(2.0 * std::numbers::pi * t);
      std::vector<double> p(rank);
      for (std::size_t d = 0; d < rank; ++d)
        p[d] = a[d] + t * (b[d] - a[d]) + off * normal[d];
      stamp_ball(f, p, radius, intensity);
    }
  }
  normalize_to_unit_max(f);
  return f;
}

ScalarField vessel_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims) {
  check_phantom_dims(dims);
  if (spec.count_min < 1 || spec.count_max < spec.count_min)
    throw std::invalid_argument("vessel_phantom: bad spec ranges");
  SeededRng rng(spec.seed);
  ScalarField f(dims, 1.0);
  const std::size_t rank = dims.size();
  const int trees = spec.count_min + int(rng.uniform_index(spec.count_max - spec.count_min + 1));

  for (int tree = 0; tree < trees; ++tree) {
    const double intensity = tree == 0 ? 1.0 : rng.uniform(0.55, 0.95);
    std::vector<double> root(rank), dir(rank);
    for (std::size_t d = 0; d < rank; ++d)
      root[d] = rng.uniform(0.2 * double(dims[d]), 0.8 * double(dims[d]));
    dir = random_unit(rng, rank);
    VesselGrower grower{f, rng, intensity};
    grower.grow(root, dir, rng.uniform(spec.radius_min, spec.radius_max), 0);
  }
  normalize_to_unit_max(f);
  return f;
}

ScalarField tumor_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims) {
  check_phantom_dims(dims);
  SeededRng rng(spec.seed);
  ScalarField f(dims, 1.0);
  const std::size_t rank = dims.size();
  double min_extent = double(*std::min_element(dims.begin(), dims.end()));

  std::vector<double> center(rank);
  for (std::size_t d = 0; d < rank; ++d)
    center[d] = 0.5 * double(dims[d]) + rng.uniform(-0.05, 0.05) * double(dims[d]);

  // Filled ellipse, intensity 0.6, one-voxel soft edge.
  std::vector<double> semi(rank);
  for (std::size_t d = 0; d < rank; ++d) semi[d] = rng.uniform(0.10, 0.16) * min_extent;
  double theta = rng.uniform(0.0, std::numbers::pi);
  const double ct = std::cos(theta), st = std::sin(theta);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < f.size(); ++flat) {
    std::vector<double> rel(rank);
    for (std::size_t d = 0; d < rank; ++d) rel[d] = double(idx[d]) - center[d];
    // rotate the leading two axes
    double r0 = ct * rel[0] - st * rel[1];
    double r1 = st * rel[0] + ct * rel[1];
    rel[0] = r0;
    rel[1] = r1;
    double q = 0.0;
    for (std::size_t d = 0; d < rank; ++d) q += (rel[d] / semi[d]) * (rel[d] / semi[d]);
    // soften the boundary over roughly one voxel
    double edge = (1.0 - q) * 0.5 * min_extent * 0.13;
    double coverage = std::clamp(edge + 0.5, 0.0, 1.0);
    if (coverage > 0.0) f.data[flat] = std::max(f.data[flat], 0.6 * coverage);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < f.dims[d]) break;
      idx[d] = 0;
    }
  }

  // Bright rim around the ellipse (in the leading two axes' plane).
  double ring_radius = 1.35 * *std::max_element(semi.begin(), semi.end());
  double stroke = rng.uniform(spec.radius_min, spec.radius_max);
  const int samples = 720;
  for (int s = 0; s < samples; ++s) {
    double phi = 2.0 * std::numbers::pi * double(s) / double(samples);
    std::vector<double> p(center);
    p[0] += ring_radius * std::cos(phi);
    p[1] += ring_radius * std::sin(phi);
    stamp_ball(f, p, stroke, 1.0);
  }
  normalize_to_unit_max(f);
  return f;
}

ScalarField make_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims) {
  switch (spec.kind) {
    case PhantomSpec::Kind::Tubes:
      return tube_phantom(spec, dims);
    case PhantomSpec::Kind::Vessels:
      return vessel_phantom(spec, dims);
    case PhantomSpec::Kind::TumorLike:
      return tumor_phantom(spec, dims);
  }
  throw std::invalid_argument("make_phantom: unknown kind");
}

ScalarField background_component(const std::vector<std::size_t>& dims,
                                 const std::vector<double>& spacing, SeededRng& rng,
                                 double sigma, double peak) {
  ScalarField noise(dims, spacing);
  noise.data = rng.gaussians(noise.size());
  // Gaussian low-pass in voxel units via the spectral transfer function.
  Spectrum s = fft_forward(noise);
  std::vector<double> k_voxel = wavenumber_magnitudes(dims, std::vector<double>(dims.size(), 1.0));
  for (std::size_t i = 0; i < s.coeff.size(); ++i)
    s.coeff[i] *= std::exp(-0.5 * sigma * sigma * k_voxel[i] * k_voxel[i]);
  ScalarField smooth = fft_inverse(s);
  for (double& v : smooth.data) v = std::max(v, 0.0);
  double m = max_value(smooth);
  if (m > 0.0)
    for (double& v : smooth.data) v *= peak / m;
  return smooth;
}

ScalarField background_field(const ScalarField& x_true, SeededRng& rng, double sigma,
                             double peak, double threshold) {
  validate(x_true, "background_field input");
  ScalarField b = background_component(x_true.dims, x_true.spacing, rng, sigma, peak);
  ScalarField out = x_true;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (x_true.data[i] <= threshold) out.data[i] += b.data[i];
  return out;
}

SensorData add_noise_snr(const SensorData& y, double snr, SeededRng& rng) {
  if (!(snr > 0.0)) throw std::invalid_argument("add_noise_snr: snr must be positive");
  const double signal_norm = l2_norm(y.data);
  if (signal_norm == 0.0) throw std::invalid_argument("add_noise_snr: zero signal");
  std::vector<double> noise = rng.gaussians(y.data.size());
  const double noise_norm = l2_norm(noise);
  if (noise_norm == 0.0) throw std::runtime_error("add_noise_snr: degenerate noise draw");
  const double scale = signal_norm / (snr * noise_norm);
  SensorData out = y;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += scale * noise[i];
  return out;
}

double standard_deviation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / double(v.size()));
}

SensorData rescale_to_reference_std(const SensorData& y, double ref_std) {
  if (!(ref_std > 0.0))
    throw std::invalid_argument("rescale_to_reference_std: reference must be positive");
  const double sd = standard_deviation(y.data);
  if (sd == 0.0) throw std::invalid_argument("rescale_to_reference_std: constant data");
  SensorData out = y;
  const double scale = ref_std / sd;
  for (double& v : out.data) v *= scale;
  return out;
}

std::vector<DatasetSample> build_dataset(std::size_t n, const PhantomSpec& spec,
                                         const AcousticOperator& op,
                                         const DatasetOptions& options,
                                         std::uint64_t base_seed) {
  if (n < 1) throw std::invalid_argument("build_dataset: need at least one sample");
  std::vector<DatasetSample> samples(n);
  parallel_for(n, [&](std::size_t i) {
    PhantomSpec sample_spec = spec;
    sample_spec.seed = base_seed + i;
    // decorrelate the noise stream from the phantom stream
    SeededRng noise_rng((base_seed + i) ^ 0x9e3779b97f4a7c15ull);
    DatasetSample s;
    s.x_true = make_phantom(sample_spec, op.geometry().dims);
    const ScalarField* source = &s.x_true;
    ScalarField augmented;
    if (options.background) {
      augmented = background_field(s.x_true, noise_rng, options.background_sigma,
                                   options.background_peak);
      source = &augmented;
    }
    s.y = add_noise_snr(op.forward(*source), options.snr, noise_rng);
    s.x0 = op.adjoint(s.y);
    samples[i] = std::move(s);
  });
  return samples;
}

}  // namespace patrec
