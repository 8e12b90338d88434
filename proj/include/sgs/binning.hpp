#pragma once

#include <string>
#include <vector>

#include "sgs/similarity.hpp"
#include "sgs/tensor.hpp"

namespace sgs {

enum class Measure { kMagnitude, kAngular, kSpherical };

Measure parse_measure(const std::string& name);
std::string measure_name(Measure m);

// Scalar bin coordinate per frame (non-negative for the magnitude measure).
struct MagnitudeTrack {
  std::vector<double> delta;
  Measure measure = Measure::kMagnitude;
};

// strict:   gamma = delta_max / (2B), centers at odd multiples of gamma.
//           Supports (beta - gamma, beta + gamma) tile (0, delta_max); the
//           element at delta_max sits exactly on the outer edge, where both
//           kernels assign weight 0.
// centered: gamma = delta_max / (2B - 1), same center rule, so the last
//           center coincides with delta_max and the extreme element keeps
//           full weight.
enum class BinMode { kStrict, kCentered };

BinMode parse_bin_mode(const std::string& name);
std::string bin_mode_name(BinMode m);

struct BinGeometry {
  std::size_t bin_count = 0;
  double gamma = 0.0;
  std::vector<double> centers;  // size bin_count, spacing exactly 2 * gamma
  BinMode mode = BinMode::kStrict;
  // Set when delta_max fell below the threshold; gamma/centers are then all
  // zero and the sampler routes every frame into a single averaged bin.
  bool degenerate = false;
};

// delta[t] = L2 norm of z_t.
MagnitudeTrack magnitudes(const SimilarityVectors& z);

// Cartesian -> spherical, L >= 2. Column 0 is the radial coordinate; columns
// 1..L-2 are angles in [0, pi]; the last column is in [0, 2*pi). Zero-norm
// tails produce angle 0 rather than an error.
Tensor to_spherical(const SimilarityVectors& z);

BinGeometry make_geometry(const MagnitudeTrack& delta, std::size_t bins, BinMode mode,
                          double eps_abs = 1e-12);

// Coordinate kinds for a multi-dimensional bin grid. Angular coordinates bin
// over their fixed range instead of the observed maximum, so their geometry
// does not jump with the data.
enum class CoordKind { kRadial, kAnglePi, kAngleTwoPi };

struct MultiDimGeometry {
  std::vector<BinGeometry> per_coord;
  std::vector<CoordKind> kinds;

  std::size_t coord_count() const { return per_coord.size(); }
  std::size_t grid_size() const;
};

// Independent geometry per coordinate column of `coords` (shape T x K).
MultiDimGeometry make_multidim_geometry(const Tensor& coords,
                                        const std::vector<std::size_t>& bins_per_coord,
                                        const std::vector<CoordKind>& kinds, BinMode mode,
                                        double eps_abs = 1e-12);

// Coordinate kinds implied by a measure at embedding dimension L.
std::vector<CoordKind> coord_kinds_for(Measure measure, std::size_t embed_dim);

}  // namespace sgs
