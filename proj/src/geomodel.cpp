#include "geosteer/geomodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "geosteer/errors.hpp"
#include "geosteer/hash.hpp"

namespace geosteer::geomodel {
namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("geomodel." + field + ": must be " + rule);
}

std::vector<double> gaussian_walk(int n, double start, double sd, Rng& rng) {
  std::vector<double> walk(n);
  walk[0] = start;
  for (int i = 1; i < n; ++i) walk[i] = walk[i - 1] + normal(rng, 0.0, sd);
  return walk;
}

// Centered moving average; the window shrinks at the ends of the array.
std::vector<double> moving_average(const std::vector<double>& v, int window) {
  const int n = static_cast<int>(v.size());
  if (window <= 1) return v;
  const int left = window / 2;
  const int right = (window - 1) / 2;
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - left);
    const int hi = std::min(n - 1, i + right);
    double sum = 0.0;
    for (int k = lo; k <= hi; ++k) sum += v[k];
    out[i] = sum / (hi - lo + 1);
  }
  return out;
}

bool is_multiple(double value, double step) {
  const double q = value / step;
  return std::abs(q - std::round(q)) < 1e-9;
}

}  // namespace

void ForwardFnParams1::validate() const {
  require(n_points >= 2, "n_points", ">= 2");
  require(dx > 0.0, "dx", "> 0");
  require(std::isfinite(mean_top_depth), "mean_top_depth", "finite");
  require(boundary_step_sd >= 0.0, "boundary_step_sd", ">= 0");
  require(smoothing_window >= 1, "smoothing_window", ">= 1");
  require(thickness_min > 0.0, "thickness_min", "> 0");
  require(thickness_mean >= thickness_min, "thickness_mean", ">= thickness_min");
  require(thickness_sd >= 0.0, "thickness_sd", ">= 0");
  require(hq_fraction > 0.0 && hq_fraction < 1.0, "hq_fraction", "in (0, 1)");
  require(perm_low > 0.0, "perm_low", "> 0");
  require(perm_high >= perm_low, "perm_high", ">= perm_low");
}

GeoRealization1 sample_realization_env1(const ForwardFnParams1& params,
                                        Rng& rng) {
  params.validate();
  const int n = params.n_points;
  GeoRealization1 r;
  r.dx = params.dx;
  r.hq_fraction = params.hq_fraction;
  r.perm_high = params.perm_high;
  r.perm_low = params.perm_low;

  r.top = moving_average(
      gaussian_walk(n, params.mean_top_depth, params.boundary_step_sd, rng),
      params.smoothing_window);
  r.thickness = moving_average(
      gaussian_walk(n, params.thickness_mean, params.thickness_sd, rng),
      params.smoothing_window);
  for (double& h : r.thickness) h = std::max(h, params.thickness_min);
  return r;
}

void Env2Prior::validate() const {
  require(n_points >= 2, "env2.n_points", ">= 2");
  require(spacing > 0.0, "env2.spacing", "> 0");
  require(static_cast<int>(base_trend.size()) == n_points, "env2.base_trend",
          "one depth per point");
  require(thickness > 0.0, "env2.thickness", "> 0");
  for (std::size_t f = 0; f < faults.size(); ++f) {
    const auto& spec = faults[f];
    const std::string name = "fault" + std::to_string(f + 1);
    require(!spec.candidate_locations.empty(), name + ".locations", "non-empty");
    for (double loc : spec.candidate_locations) {
      require(is_multiple(loc, spacing) && loc > 0.0 && loc <= total_length(),
              name + ".locations",
              "positive multiples of the point spacing inside the section");
    }
    require(spec.displacement_sd >= 0.0, name + ".sd", ">= 0");
  }
}

Env2Prior default_env2_prior(double top_depth, double dip_per_point) {
  Env2Prior prior;
  prior.base_trend.resize(prior.n_points);
  for (int j = 0; j < prior.n_points; ++j)
    prior.base_trend[j] = top_depth + dip_per_point * j;
  prior.faults = {
      FaultSpec{{120.0, 150.0, 180.0}, 3.0, 1.0},
      FaultSpec{{360.0, 390.0, 420.0}, 2.0, 1.0},  // placeholder values
      FaultSpec{{600.0, 660.0, 720.0}, 4.0, 1.5},  // placeholder values
  };
  return prior;
}

GeoRealization2 sample_realization_env2(const std::vector<FaultSpec>& prior,
                                        const std::vector<double>& base_trend,
                                        double thickness, double spacing,
                                        Rng& rng) {
  if (!(thickness > 0.0)) throw ConfigError("geomodel.env2.thickness: must be > 0");
  if (!(spacing > 0.0)) throw ConfigError("geomodel.env2.spacing: must be > 0");
  GeoRealization2 r;
  r.upper = base_trend;
  r.thickness = thickness;
  r.spacing = spacing;
  const double length = spacing * (static_cast<double>(base_trend.size()) - 1.0);
  for (std::size_t f = 0; f < prior.size(); ++f) {
    const auto& spec = prior[f];
    const std::string name = "fault" + std::to_string(f + 1);
    require(!spec.candidate_locations.empty(), name + ".locations", "non-empty");
    for (double loc : spec.candidate_locations) {
      require(is_multiple(loc, spacing) && loc > 0.0 && loc <= length, name + ".locations",
              "positive multiples of the point spacing inside the section");
    }
    require(spec.displacement_sd >= 0.0, name + ".sd", ">= 0");
    FaultDraw draw;
    draw.location =
        spec.candidate_locations[uniform_index(rng, spec.candidate_locations.size())];
    draw.point = static_cast<int>(std::lround(draw.location / spacing));
    draw.displacement = normal(rng, spec.displacement_mean, spec.displacement_sd);
    for (int j = draw.point; j < r.size(); ++j) r.upper[j] += draw.displacement;
    r.fault_draws.push_back(draw);
  }
  return r;
}

GeoRealization2 sample_realization_env2(const Env2Prior& prior, Rng& rng) {
  prior.validate();
  return sample_realization_env2(prior.faults, prior.base_trend,
                                 prior.thickness, prior.spacing, rng);
}

void write_realization(std::ostream& os, const GeoRealization1& r) {
  os << "# index x_m top_m bottom_m hq_m\n" << std::fixed << std::setprecision(6);
  for (int i = 0; i < r.size(); ++i) {
    os << i << ' ' << i * r.dx << ' ' << r.top[i] << ' ' << r.bottom(i) << ' '
       << r.hq_boundary(i) << '\n';
  }
}

void write_realization(std::ostream& os, const GeoRealization2& r) {
  os << std::fixed << std::setprecision(6);
  for (const auto& f : r.fault_draws)
    os << "# fault location_m=" << f.location << " displacement_m=" << f.displacement
       << '\n';
  os << "# index x_m upper_m lower_m\n";
  for (int j = 0; j < r.size(); ++j)
    os << j << ' ' << j * r.spacing << ' ' << r.upper[j] << ' ' << r.lower(j) << '\n';
}

std::uint64_t realization_hash(const GeoRealization1& r) {
  Fnv1a h;
  h.add(r.top);
  h.add(r.thickness);
  h.add(r.perm_low);
  return h.value();
}

std::uint64_t realization_hash(const GeoRealization2& r) {
  Fnv1a h;
  h.add(r.upper);
  h.add(r.thickness);
  for (const auto& f : r.fault_draws) {
    h.add(f.location);
    h.add(f.displacement);
  }
  return h.value();
}

}  // namespace geosteer::geomodel
