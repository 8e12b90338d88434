#include "sgs/binning.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sgs {

Measure parse_measure(const std::string& name) {
  if (name == "magnitude") return Measure::kMagnitude;
  if (name == "angular") return Measure::kAngular;
  if (name == "spherical") return Measure::kSpherical;
  throw ConfigError("unknown measure '" + name + "'");
}

std::string measure_name(Measure m) {
  switch (m) {
    case Measure::kMagnitude: return "magnitude";
    case Measure::kAngular: return "angular";
    case Measure::kSpherical: return "spherical";
  }
  throw ConfigError("invalid measure value");
}

BinMode parse_bin_mode(const std::string& name) {
  if (name == "strict") return BinMode::kStrict;
  if (name == "centered") return BinMode::kCentered;
  throw ConfigError("unknown bin mode '" + name + "'");
}

std::string bin_mode_name(BinMode m) {
  return m == BinMode::kStrict ? "strict" : "centered";
}

MagnitudeTrack magnitudes(const SimilarityVectors& z) {
  const std::size_t t_len = z.t(), l_len = z.l();
  MagnitudeTrack track;
  track.delta.resize(t_len);
  track.measure = Measure::kMagnitude;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ts = 0; ts < static_cast<std::ptrdiff_t>(t_len); ++ts) {
    const double* row = z.z.data() + static_cast<std::size_t>(ts) * l_len;
    double acc = 0.0;
    for (std::size_t j = 0; j < l_len; ++j) acc += row[j] * row[j];
    track.delta[static_cast<std::size_t>(ts)] = std::sqrt(acc);
  }
  return track;
}

Tensor to_spherical(const SimilarityVectors& z) {
  const std::size_t t_len = z.t(), l_len = z.l();
  if (l_len < 2) throw ShapeError("spherical coordinates need embedding dimension >= 2");
  Tensor out({t_len, l_len});
  std::vector<double> tail(l_len);  // tail[k] = |(x_k .. x_{L-1})|
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* x = z.z.data() + t * l_len;
    double acc = 0.0;
    for (std::size_t k = l_len; k-- > 0;) {
      acc += x[k] * x[k];
      tail[k] = std::sqrt(acc);
    }
    double* row = out.data() + t * l_len;
    row[0] = tail[0];
    for (std::size_t k = 1; k + 1 < l_len; ++k) row[k] = std::atan2(tail[k], x[k - 1]);
    double last = std::atan2(x[l_len - 1], x[l_len - 2]);
    if (last < 0.0) last += 2.0 * std::numbers::pi;
    row[l_len - 1] = last;
  }
  return out;
}

namespace {

BinGeometry geometry_from_extent(double extent, std::size_t bins, BinMode mode, double eps_abs) {
  BinGeometry geom;
  geom.bin_count = bins;
  geom.mode = mode;
  if (!(extent > eps_abs)) {
    geom.degenerate = true;
    geom.centers.assign(bins, 0.0);
    return geom;
  }
  const double denom =
      mode == BinMode::kStrict ? 2.0 * static_cast<double>(bins) : 2.0 * static_cast<double>(bins) - 1.0;
  geom.gamma = extent / denom;
  geom.centers.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    geom.centers[b] = static_cast<double>(2 * b + 1) * geom.gamma;
  }
  return geom;
}

}  // namespace

BinGeometry make_geometry(const MagnitudeTrack& delta, std::size_t bins, BinMode mode,
                          double eps_abs) {
  if (bins == 0) throw ConfigError("bin count must be positive");
  if (delta.delta.empty()) throw ShapeError("cannot bin an empty sequence");
  double dmax = 0.0;
  for (double d : delta.delta) {
    if (!std::isfinite(d)) throw NumericError("non-finite bin coordinate");
    dmax = std::max(dmax, d);
  }
  return geometry_from_extent(dmax, bins, mode, eps_abs);
}

std::size_t MultiDimGeometry::grid_size() const {
  std::size_t n = 1;
  for (const BinGeometry& g : per_coord) n *= g.degenerate ? 1 : g.bin_count;
  return n;
}

MultiDimGeometry make_multidim_geometry(const Tensor& coords,
                                        const std::vector<std::size_t>& bins_per_coord,
                                        const std::vector<CoordKind>& kinds, BinMode mode,
                                        double eps_abs) {
  if (coords.rank() != 2) throw ShapeError("coordinates must be T x K, got " + coords.shape_str());
  const std::size_t t_len = coords.dim(0), k_len = coords.dim(1);
  if (bins_per_coord.size() != k_len || kinds.size() != k_len) {
    throw ConfigError("bins_per_coord and kinds must match the coordinate count");
  }
  MultiDimGeometry geom;
  geom.kinds = kinds;
  geom.per_coord.reserve(k_len);
  for (std::size_t k = 0; k < k_len; ++k) {
    if (bins_per_coord[k] == 0) throw ConfigError("bin count must be positive");
    double extent = 0.0;
    switch (kinds[k]) {
      case CoordKind::kRadial:
        for (std::size_t t = 0; t < t_len; ++t) {
          const double v = coords[t * k_len + k];
          if (!std::isfinite(v)) throw NumericError("non-finite bin coordinate");
          extent = std::max(extent, v);
        }
        break;
      case CoordKind::kAnglePi:
        extent = std::numbers::pi;
        break;
      case CoordKind::kAngleTwoPi:
        extent = 2.0 * std::numbers::pi;
        break;
    }
    geom.per_coord.push_back(geometry_from_extent(extent, bins_per_coord[k], mode, eps_abs));
  }
  return geom;
}

std::vector<CoordKind> coord_kinds_for(Measure measure, std::size_t embed_dim) {
  switch (measure) {
    case Measure::kMagnitude:
      return {CoordKind::kRadial};
    case Measure::kAngular: {
      if (embed_dim < 2) throw ConfigError("angular measure needs embedding dimension >= 2");
      std::vector<CoordKind> kinds(embed_dim - 1, CoordKind::kAnglePi);
      kinds.back() = CoordKind::kAngleTwoPi;
      return kinds;
    }
    case Measure::kSpherical: {
      if (embed_dim < 2) throw ConfigError("spherical measure needs embedding dimension >= 2");
      std::vector<CoordKind> kinds(embed_dim, CoordKind::kAnglePi);
      kinds.front() = CoordKind::kRadial;
      kinds.back() = CoordKind::kAngleTwoPi;
      return kinds;
    }
  }
  throw ConfigError("invalid measure value");
}

}  // namespace sgs
