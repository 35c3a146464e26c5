#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "geosteer/random.hpp"

// Ground-truth geology for the two geosteering environments.
//
// Environment 1 is a three-layer reservoir sampled on a regular horizontal grid:
// the top boundary and the thickness are independent smoothed Gaussian random
// walks, and the upper 40 % of the sand is a high-permeability zone.
//
// Environment 2 is a constant-thickness reservoir following a known depth
// trend, offset by faults whose location (discrete uniform over candidates)
// and vertical displacement (normal) are uncertain.
namespace geosteer::geomodel {

struct ForwardFnParams1 {
  int n_points = 100;
  double dx = 10.0;                 // m between points
  double mean_top_depth = 1000.0;   // m TVD
  double boundary_step_sd = 0.4;    // m per point
  int smoothing_window = 5;         // points
  double thickness_mean = 25.0;     // m
  double thickness_sd = 0.2;        // m per point
  double thickness_min = 10.0;      // m
  double hq_fraction = 0.4;
  double perm_high = 200.0;         // mD
  double perm_low = 100.0;          // mD

  // Throws ConfigError naming the first offending field.
  void validate() const;
};

struct GeoRealization1 {
  std::vector<double> top;        // m TVD per point
  std::vector<double> thickness;  // m per point
  double dx = 10.0;
  double hq_fraction = 0.4;
  double perm_high = 200.0;
  double perm_low = 100.0;

  int size() const { return static_cast<int>(top.size()); }
  double bottom(int i) const { return top[i] + thickness[i]; }
  double hq_boundary(int i) const { return top[i] + hq_fraction * thickness[i]; }
};

GeoRealization1 sample_realization_env1(const ForwardFnParams1& params,
                                        Rng& rng);

struct FaultSpec {
  std::vector<double> candidate_locations;  // m from the first point
  double displacement_mean = 0.0;           // m, positive = boundaries deeper
  double displacement_sd = 0.0;             // m
};

struct FaultDraw {
  double location = 0.0;  // m
  int point = 0;          // first grid point carrying the offset
  double displacement = 0.0;
};

struct Env2Prior {
  int n_points = 30;
  double spacing = 30.0;           // m
  std::vector<double> base_trend;  // expected upper boundary, m TVD
  double thickness = 5.0;          // m
  std::vector<FaultSpec> faults;

  void validate() const;
  double total_length() const { return spacing * (n_points - 1); }
};

// Default prior: linear dip from `top_depth` at `dip_per_point` m per point and
// the three-fault layout. Only the first fault's numbers are published; the
// other two are placeholders.
Env2Prior default_env2_prior(double top_depth = 1000.0,
                             double dip_per_point = 0.25);

struct GeoRealization2 {
  std::vector<double> upper;  // m TVD per point
  double thickness = 5.0;
  double spacing = 30.0;
  std::vector<FaultDraw> fault_draws;  // one per FaultSpec, prior order

  int size() const { return static_cast<int>(upper.size()); }
  double lower(int j) const { return upper[j] + thickness; }
};

GeoRealization2 sample_realization_env2(const std::vector<FaultSpec>& prior,
                                        const std::vector<double>& base_trend,
                                        double thickness, double spacing,
                                        Rng& rng);
GeoRealization2 sample_realization_env2(const Env2Prior& prior, Rng& rng);

// Columnar text dumps for plotting and replay.
void write_realization(std::ostream& os, const GeoRealization1& r);
void write_realization(std::ostream& os, const GeoRealization2& r);

// Stable 64-bit fingerprint of a realization (FNV-1a over the raw doubles).
std::uint64_t realization_hash(const GeoRealization1& r);
std::uint64_t realization_hash(const GeoRealization2& r);

}  // namespace geosteer::geomodel
