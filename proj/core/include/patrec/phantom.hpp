#pragma once

#include <cstdint>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/field.hpp"
#include "patrec/rng.hpp"

namespace patrec {

/// Parameters of the procedural ground-truth generators. `count` bounds the
/// number of strips (tubes) or trees (vessels); radii are in voxels.
struct PhantomSpec {
  enum class Kind { Tubes, Vessels, TumorLike };
  Kind kind = Kind::Vessels;
  int count_min = 1;
  int count_max = 3;
  double radius_min = 1.0;
  double radius_max = 2.2;
  std::uint64_t seed = 1;
};

PhantomSpec default_phantom_spec(PhantomSpec::Kind kind, std::uint64_t seed);

/// 3-8 smooth constant-intensity curved strips with distinct intensities in
/// [0.5, 1]; nonnegative, maximum exactly 1.
ScalarField tube_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims);

/// Branching trees with tapering radii and smooth centerlines; at least two
/// bifurcations per tree. Same intensity contract as tube_phantom.
ScalarField vessel_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims);

/// One filled ellipse (intensity 0.6) surrounded by a bright rim; a target
/// structurally unlike the vessel training set.
ScalarField tumor_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims);

ScalarField make_phantom(const PhantomSpec& spec, const std::vector<std::size_t>& dims);

/// Smooth nonnegative random field (white noise filtered with a Gaussian of
/// width sigma voxels, negative parts clipped) scaled to the given peak.
ScalarField background_component(const std::vector<std::size_t>& dims,
                                 const std::vector<double>& spacing, SeededRng& rng,
                                 double sigma = 2.0, double peak = 0.1);

/// x_true plus a background component, added only where x_true does not
/// exceed `threshold`; the global maximum stays that of x_true.
ScalarField background_field(const ScalarField& x_true, SeededRng& rng,
                             double sigma = 2.0, double peak = 0.1,
                             double threshold = 0.1);

/// y + Gaussian noise scaled so that ||y|| / ||noise|| equals snr exactly.
SensorData add_noise_snr(const SensorData& y, double snr, SeededRng& rng);

/// Rescales so the (population) standard deviation equals ref_std.
SensorData rescale_to_reference_std(const SensorData& y, double ref_std);

double standard_deviation(const std::vector<double>& v);

struct DatasetSample {
  ScalarField x_true;  // clean target, max intensity 1
  SensorData y;        // noisy sub-sampled measurement
  ScalarField x0;      // adjoint initialization, x0 = A* y
};

struct DatasetOptions {
  double snr = 15.0;
  bool background = false;
  double background_sigma = 2.0;
  double background_peak = 0.1;
};

/// n samples, sample i generated from seed base_seed + i. With background
/// enabled, measurements come from the background-augmented image while the
/// stored target stays clean.
std::vector<DatasetSample> build_dataset(std::size_t n, const PhantomSpec& spec,
                                         const AcousticOperator& op,
                                         const DatasetOptions& options,
                                         std::uint64_t base_seed);

}  // namespace patrec
