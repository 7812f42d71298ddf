#pragma once

// Uniform Monte Carlo point sets. Each region draws from its own stream keyed
// by (seed, stage, region), so resizing one region leaves the others intact.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "ldgm/problem.hpp"

namespace ldgm {

struct SamplerConfig {
  int interior = 200;
  int initial = 50;
  int boundary = 50;
  std::uint64_t seed = 0;

  void validate() const {
    if (interior < 1 || initial < 1 || boundary < 1) {
      throw ConfigError("sample counts must be positive");
    }
  }
};

/// Columns are points; rows are the spatial coordinates followed by time
/// for evolution problems.
struct SampleBatch {
  Eigen::MatrixXd interior;
  Eigen::MatrixXd initial;
  Eigen::MatrixXd boundary;
  std::vector<int> boundary_axis;  // face normal axis per boundary point
  std::vector<int> boundary_side;  // 0 = lower face, 1 = upper face
};

enum class Region : std::uint32_t { kInterior = 1, kInitial = 2, kBoundary = 3, kMetric = 4 };

inline std::mt19937_64 region_stream(std::uint64_t seed, std::uint64_t stage, Region region) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(stage >> 32),
                    static_cast<std::uint32_t>(region)};
  return std::mt19937_64(seq);
}

namespace detail {

inline void fill_box(Eigen::MatrixXd& pts, const ProblemSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    for (int a = 0; a < spec.dim; ++a) {
      pts(a, c) = spec.domain.lo[static_cast<std::size_t>(a)] + spec.domain.width(a) * unit(rng);
    }
    if (spec.horizon) pts(spec.time_axis(), c) = *spec.horizon * unit(rng);
  }
}

}  // namespace detail

/// Interior points of Omega x [0, T] (or Omega for stationary problems).
inline Eigen::MatrixXd draw_interior(const ProblemSpec& spec, int n, std::uint64_t seed,
                                     std::uint64_t stage, Region region = Region::kInterior) {
  Eigen::MatrixXd pts(spec.input_dim(), n);
  auto rng = region_stream(seed, stage, region);
  detail::fill_box(pts, spec, rng);
  return pts;
}

inline SampleBatch draw_batch(const SamplerConfig& cfg, const ProblemSpec& spec, int stage) {
  cfg.validate();
  if (stage < 0) throw ConfigError("stage must be >= 0");
  const auto st = static_cast<std::uint64_t>(stage);
  SampleBatch b;
  b.interior = draw_interior(spec, cfg.interior, cfg.seed, st, Region::kInterior);

  if (spec.horizon) {
    b.initial = draw_interior(spec, cfg.initial, cfg.seed, st, Region::kInitial);
    b.initial.row(spec.time_axis()).setZero();
  }

  // Faces weighted by area, uniform on the chosen face.
  auto rng = region_stream(cfg.seed, st, Region::kBoundary);
  b.boundary.resize(spec.input_dim(), cfg.boundary);
  detail::fill_box(b.boundary, spec, rng);
  std::vector<double> areas;
  for (int a = 0; a < spec.dim; ++a) {
    areas.push_back(spec.domain.face_area(a));
    areas.push_back(spec.domain.face_area(a));
  }
  std::discrete_distribution<int> face(areas.begin(), areas.end());
  b.boundary_axis.resize(static_cast<std::size_t>(cfg.boundary));
  b.boundary_side.resize(static_cast<std::size_t>(cfg.boundary));
  for (int c = 0; c < cfg.boundary; ++c) {
    const int f = face(rng);
    const int axis = f / 2, side = f % 2;
    b.boundary(axis, c) = side ? spec.domain.hi[static_cast<std::size_t>(axis)]
                               : spec.domain.lo[static_cast<std::size_t>(axis)];
    b.boundary_axis[static_cast<std::size_t>(c)] = axis;
    b.boundary_side[static_cast<std::size_t>(c)] = side;
  }
  return b;
}

/// Boundary points moved to the opposite face of their own axis.
inline Eigen::MatrixXd mirror_boundary(const SampleBatch& b, const ProblemSpec& spec) {
  Eigen::MatrixXd m = b.boundary;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const int axis = b.boundary_axis[static_cast<std::size_t>(c)];
    const int side = b.boundary_side[static_cast<std::size_t>(c)];
    m(axis, c) = side ? spec.domain.lo[static_cast<std::size_t>(axis)]
                      : spec.domain.hi[static_cast<std::size_t>(axis)];
  }
  return m;
}

}  // namespace ldgm
