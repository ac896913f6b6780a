#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "patrec/field.hpp"
#include "patrec/rng.hpp"

namespace patrec {

using SamplingMask = std::vector<std::uint8_t>;

/// Measurement setup: grid, sound speed, sensor locations on one boundary
/// face, time sampling, and the compressed-sensing mask over the full
/// sensor set.
struct AcousticGeometry {
  std::vector<std::size_t> dims;
  std::vector<double> spacing;      // meters per voxel
  double sound_speed = 1580.0;      // m/s
  std::vector<std::size_t> sensors; // flat grid indices, full set
  SamplingMask mask;                // one entry per sensor, nonzero = active
  std::size_t num_time_samples = 0;
  double dt = 0.0;                  // seconds

  std::size_t active_count() const;
  std::vector<std::size_t> active_sensors() const;
};

/// Throws unless the geometry is self-consistent and all sensors sit on a
/// single boundary face.
void validate(const AcousticGeometry& g);

/// Desk-scale default: square grid, sensors on every `sensor_pitch`-th pixel
/// of the first-axis-zero edge, dt sized so waves traverse 1.5x the grid
/// diagonal over the full recording.
AcousticGeometry make_desk_geometry(std::vector<std::size_t> dims = {64, 64},
                                    double dx = 84.75e-6,
                                    double sound_speed = 1580.0,
                                    std::size_t num_time_samples = 128,
                                    double dt = 0.0,
                                    std::size_t sensor_pitch = 2);

/// Pressure time series at the active sensors: one row of num_samples
/// values per sensor.
struct SensorData {
  std::size_t num_sensors = 0;
  std::size_t num_samples = 0;
  double dt = 0.0;
  std::vector<double> data;  // [sensor][time], row-major

  SensorData() = default;
  SensorData(std::size_t sensors, std::size_t samples, double dt_)
      : num_sensors(sensors), num_samples(samples), dt(dt_),
        data(sensors * samples, 0.0) {}

  double& at(std::size_t s, std::size_t t) { return data[s * num_samples + t]; }
  double at(std::size_t s, std::size_t t) const { return data[s * num_samples + t]; }
};

/// Exact free-space pressure field at time t for initial pressure x and
/// zero initial velocity: each Fourier mode oscillates as cos(c0*|k|*t).
ScalarField propagate(const ScalarField& x, double sound_speed, double t);

/// Uniformly random subset of floor(count/factor) sensors, deterministic
/// per rng seed. Throws if the selection would be empty.
SamplingMask make_subsampling_mask(std::size_t sensor_count, std::size_t factor,
                                   SeededRng& rng);

/// Copy of g with a fresh random mask at the given factor.
AcousticGeometry with_subsampling(AcousticGeometry g, std::size_t factor, SeededRng& rng);

/// The sampled wave operator A, its exact discrete adjoint A*, and the
/// data-fit gradient A*(Ax - y). Applications of A and A* are counted so
/// reconstruction cost can be audited.
///
/// Internally the grid is embedded in a zero-padded domain wide enough that
/// nothing can wrap around the periodic transform and reach a sensor within
/// the recording window, emulating free-space propagation. The padding is
/// capped at three grid extents per axis for pathologically long windows.
class AcousticOperator {
 public:
  explicit AcousticOperator(AcousticGeometry g);

  AcousticOperator(const AcousticOperator&) = delete;
  AcousticOperator& operator=(const AcousticOperator&) = delete;

  const AcousticGeometry& geometry() const { return geom_; }

  SensorData forward(const ScalarField& x) const;
  ScalarField adjoint(const SensorData& y) const;

  /// Gradient of 0.5*||Ax - y||^2 at x; costs one forward and one adjoint.
  ScalarField data_fit_gradient(const ScalarField& x, const SensorData& y) const;

  /// A zero field / zero sensor block shaped for this geometry.
  ScalarField zero_field() const;
  SensorData zero_data() const;

  std::uint64_t application_count() const { return applications_.load(); }
  void reset_application_count() const { applications_.store(0); }

 private:
  AcousticGeometry geom_;
  std::vector<std::size_t> active_;         // sensor flats in grid coordinates
  std::vector<std::size_t> padded_dims_;
  std::vector<std::size_t> padded_active_;  // sensor flats in padded coordinates
  std::vector<std::size_t> row_map_;        // padded offset of each grid row
  std::size_t row_count_ = 0;
  std::size_t row_width_ = 0;
  std::vector<double> cos_table_;  // [time][padded coefficient]
  mutable std::atomic<std::uint64_t> applications_{0};
};

struct PowerIterationResult {
  double value = 0.0;                 // final estimate
  std::vector<double> history;        // Rayleigh quotient per iteration
};

/// Power iteration on a symmetric positive semi-definite map of dimension n.
PowerIterationResult power_iteration(
    std::size_t n,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& normal_op,
    int iterations, SeededRng& rng);

/// Largest eigenvalue of A*A, i.e. the squared operator norm of A; a valid
/// Lipschitz constant for the data-fit gradient.
PowerIterationResult estimate_lipschitz(const AcousticOperator& op, int iterations,
                                        SeededRng& rng);

}  // namespace patrec
