#pragma once

// Numerical geodesic finding in a low-dimensional chart of the distribution
// space: Dijkstra over a lazily materialized lattice, hierarchical polyline
// refinement, geodesic rays from the current promise distribution, and
// stepping a fixed distance along them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "infoevo/error.hpp"
#include "infoevo/manifold.hpp"
#include "infoevo/promise.hpp"
#include "infoevo/random.hpp"

namespace infoevo {

/// Normal-coordinate chart: coordinates c map to exp_map(base, sum_j c_j u_j, 1).
struct Chart {
  LogDistribution base;
  std::vector<TangentVector> directions;  // orthonormal under <,>_base
  double radius = 1.0;
  bool degenerate = false;  // promise-ascent direction vanished; all directions random

  std::size_t dimension() const noexcept { return directions.size(); }

  TangentVector tangent_at(std::span<const double> coords) const {
    TangentVector v{std::vector<double>(base.size(), 0.0)};
    for (std::size_t j = 0; j < directions.size(); ++j)
      for (std::size_t i = 0; i < v.f.size(); ++i) v.f[i] += coords[j] * directions[j].f[i];
    return v;
  }

  LogDistribution point(std::span<const double> coords) const {
    if (std::all_of(coords.begin(), coords.end(), [](double c) { return c == 0.0; })) return base;
    return exp_map(base, tangent_at(coords), 1.0);
  }

  /// Chart coordinates of a distribution: components of log_map along the directions.
  std::vector<double> coordinates_of(const LogDistribution& target) const {
    const TangentVector v = log_map(base, target);
    std::vector<double> c(directions.size());
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = inner(base, v, directions[j]);
    return c;
  }

  /// Largest radius for which every chart point stays inside the open
  /// positive orthant, where the chart is an isometric copy of a great sphere.
  double safe_radius() const {
    double best = std::numbers::pi;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double a = std::exp(0.5 * base[i]);
      double rho2 = 0.0;
      for (const auto& u : directions) {
        const double w = a * u.f[i];
        rho2 += w * w;
      }
      if (rho2 > 0.0) best = std::min(best, 2.0 * std::atan(a / std::sqrt(rho2)));
    }
    return best;
  }
};

namespace detail {
/// Gram-Schmidt step under <,>_base. Returns false when the residual vanishes.
inline bool orthonormalize_against(const LogDistribution& base, TangentVector& v,
                                   const std::vector<TangentVector>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& u : basis) {
      const double c = inner(base, v, u);
      for (std::size_t i = 0; i < v.f.size(); ++i) v.f[i] -= c * u.f[i];
    }
  }
  const double nv = norm(base, v);
  if (!(nv > 1e-12)) return false;
  for (auto& x : v.f) x /= nv;
  return true;
}

inline TangentVector random_tangent(const LogDistribution& base, Rng& rng) {
  return project_tangent(base, gaussian_vector(rng, base.size()));
}
}  // namespace detail

/// Builds a d-dimensional chart at `base`. The first direction is the
/// normalized tangent projection of the promise vector (pointing mass toward
/// high-promise samples); the rest are seeded random directions made
/// orthonormal under <,>_base. A vanishing ascent direction sets `degenerate`.
inline Chart build_chart(const LogDistribution& base, const PromiseVector& promise, std::size_t d,
                         double radius, std::uint64_t seed) {
  if (promise.size() != base.size()) throw LengthMismatch(base.size(), promise.size());
  if (d == 0 || d > 3) throw ConfigError("chart_dim", "chart dimension must lie in [1, 3]");
  if (base.size() < d + 1) throw ConfigError("chart_dim", "chart dimension exceeds n - 1");
  if (!(radius > 0.0)) throw ConfigError("radius", "chart radius must be positive");

  Chart chart{base, {}, radius, false};
  Rng rng(seed);
  TangentVector ascent = project_tangent(base, promise.values);
  if (detail::orthonormalize_against(base, ascent, {})) {
    chart.directions.push_back(std::move(ascent));
  } else {
    chart.degenerate = true;
  }
  for (int attempts = 0; chart.directions.size() < d; ++attempts) {
    if (attempts > 64) throw Error("could not draw independent chart directions");
    TangentVector r = detail::random_tangent(base, rng);
    if (detail::orthonormalize_against(base, r, chart.directions))
      chart.directions.push_back(std::move(r));
  }
  return chart;
}

struct GeodesicPolyline {
  std::vector<LogDistribution> points;
  double length = 0.0;

  const LogDistribution& front() const { return points.front(); }
  const LogDistribution& back() const { return points.back(); }
};

/// Drops zero-length segments and computes the exact length.
inline GeodesicPolyline make_polyline(std::vector<LogDistribution> points) {
  GeodesicPolyline out;
  for (auto& p : points) {
    if (!out.points.empty() && geodesic_distance_exact(out.points.back(), p) == 0.0) continue;
    if (!out.points.empty()) out.length += geodesic_distance_exact(out.points.back(), p);
    out.points.push_back(std::move(p));
  }
  return out;
}

/// Shortest lattice path from `start` to `goal` (chart coordinates). The
/// lattice has spacing radius / resolution on the cube [-radius, radius]^d, is
/// 2/8/26-connected for d = 1/2/3, and is materialized lazily. The two end
/// points are joined to the corners of the lattice cells that contain them.
/// Edge weights are exact Fisher-Rao distances between node distributions.
inline GeodesicPolyline dijkstra_geodesic(const Chart& chart, std::span<const double> start,
                                          std::span<const double> goal, std::size_t resolution) {
  const std::size_t d = chart.dimension();
  if (start.size() != d) throw LengthMismatch(d, start.size());
  if (goal.size() != d) throw LengthMismatch(d, goal.size());
  if (resolution == 0) throw ConfigError("resolution", "must be positive");
  auto inside = [&](std::span<const double> c) {
    double r2 = 0.0;
    for (double x : c) r2 += x * x;
    return std::sqrt(r2) <= chart.radius * (1.0 + 1e-12);
  };
  if (!inside(start) || !inside(goal)) throw GoalOutsideChart();
  if (std::equal(start.begin(), start.end(), goal.begin()))
    return make_polyline({chart.point(start)});

  const double h = chart.radius / static_cast<double>(resolution);
  const int res = static_cast<int>(resolution);
  using Cell = std::array<int, 3>;
  auto pack = [&](const Cell& c) {
    std::int64_t key = 0;
    for (std::size_t j = 0; j < 3; ++j) key = key * (2 * res + 3) + (c[j] + res + 1);
    return key;
  };

  struct GridNode {
    LogDistribution point;
    Cell cell{};
    bool lattice = true;
  };
  std::vector<GridNode> nodes;
  std::unordered_map<std::int64_t, std::size_t> lookup;

  auto lattice_node = [&](const Cell& c) {
    const auto key = pack(c);
    if (auto it = lookup.find(key); it != lookup.end()) return it->second;
    std::array<double, 3> coords{};
    for (std::size_t j = 0; j < d; ++j) coords[j] = c[j] * h;
    nodes.push_back({chart.point(std::span<const double>(coords.data(), d)), c, true});
    lookup.emplace(key, nodes.size() - 1);
    return nodes.size() - 1;
  };

  // cell corners around an arbitrary point, clipped to the lattice
  auto corners = [&](std::span<const double> c) {
    std::vector<Cell> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
      Cell cell{};
      for (std::size_t j = 0; j < d; ++j) {
        const int lo = static_cast<int>(std::floor(c[j] / h));
        cell[j] = std::clamp(lo + static_cast<int>((mask >> j) & 1U), -res, res);
      }
      if (std::find(out.begin(), out.end(), cell) == out.end()) out.push_back(cell);
    }
    return out;
  };

  constexpr std::size_t kStart = 0, kGoal = 1;
  nodes.push_back({chart.point(start), {}, false});
  nodes.push_back({chart.point(goal), {}, false});
  const auto start_corners = corners(start);
  const auto goal_corners = corners(goal);
  const bool same_cell = std::any_of(start_corners.begin(), start_corners.end(), [&](const Cell& c) {
    return std::find(goal_corners.begin(), goal_corners.end(), c) != goal_corners.end();
  });

  std::vector<double> dist;
  std::vector<std::size_t> prev;
  std::vector<bool> done;
  auto grow = [&] {
    dist.resize(nodes.size(), std::numeric_limits<double>::infinity());
    prev.resize(nodes.size(), std::numeric_limits<std::size_t>::max());
    done.resize(nodes.size(), false);
  };
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  grow();
  dist[kStart] = 0.0;
  queue.push({0.0, kStart});

  auto relax = [&](std::size_t from, std::size_t to) {
    grow();
    if (done[to]) return;
    const double nd = dist[from] + geodesic_distance_exact(nodes[from].point, nodes[to].point);
    if (nd < dist[to]) {
      dist[to] = nd;
      prev[to] = from;
      queue.push({nd, to});
    }
  };

  while (!queue.empty()) {
    const auto [du, u] = queue.top();
    queue.pop();
    if (done[u] || du > dist[u]) continue;
    done[u] = true;
    if (u == kGoal) break;

    if (u == kStart) {
      for (const auto& c : start_corners) relax(u, lattice_node(c));
      if (same_cell) relax(u, kGoal);
      continue;
    }
    const Cell here = nodes[u].cell;
    if (std::find(goal_corners.begin(), goal_corners.end(), here) != goal_corners.end())
      relax(u, kGoal);
    // all offsets in {-1, 0, 1}^d except zero
    const int count = static_cast<int>(std::pow(3, d));
    for (int code = 0; code < count; ++code) {
      Cell next = here;
      int rem = code;
      bool zero = true;
      bool in_bounds = true;
      for (std::size_t j = 0; j < d; ++j) {
        const int off = rem % 3 - 1;
        rem /= 3;
        if (off != 0) zero = false;
        next[j] += off;
        if (next[j] < -res || next[j] > res) in_bounds = false;
      }
      if (zero || !in_bounds) continue;
      relax(u, lattice_node(next));
    }
  }
  if (!done[kGoal]) throw NoPath();

  std::vector<LogDistribution> path;
  for (std::size_t v = kGoal; v != std::numeric_limits<std::size_t>::max(); v = prev[v])
    path.push_back(nodes[v].point);
  std::reverse(path.begin(), path.end());
  return make_polyline(std::move(path));
}

namespace detail {
inline double polyline_length(const std::vector<LogDistribution>& pts) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += geodesic_distance_exact(pts[i], pts[i + 1]);
  return total;
}

/// Gauss-Seidel pass: each interior point moves to the geodesic midpoint of its
/// neighbors when that shortens the two adjacent segments.
inline void relax_pass(std::vector<LogDistribution>& pts) {
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const double current = geodesic_distance_exact(pts[i - 1], pts[i]) +
                           geodesic_distance_exact(pts[i], pts[i + 1]);
    LogDistribution mid = geodesic_interpolate(pts[i - 1], pts[i + 1], 0.5);
    const double moved = geodesic_distance_exact(pts[i - 1], mid) +
                         geodesic_distance_exact(mid, pts[i + 1]);
    if (moved < current) pts[i] = std::move(mid);
  }
}

/// Relaxes until a pass gains less than `tolerance` relative length or
/// `max_sweeps` passes have run.
inline void relax(std::vector<LogDistribution>& pts, std::size_t max_sweeps, double tolerance) {
  double current = polyline_length(pts);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    relax_pass(pts);
    const double next = polyline_length(pts);
    const bool stalled = current - next <= tolerance * next;
    current = next;
    if (stalled) break;
  }
}
}  // namespace detail

inline constexpr std::size_t kDefaultRelaxationSweeps = 4096;
inline constexpr double kRelaxationTolerance = 1e-7;

/// Hierarchical refinement. Each level relaxes the current polyline, inserts
/// the geodesic midpoint of every segment, and relaxes again. Relaxation
/// sweeps run until the relative gain per sweep drops below
/// kRelaxationTolerance or `max_sweeps` is reached. Length never increases.
inline GeodesicPolyline refine_polyline(const GeodesicPolyline& polyline, std::size_t levels,
                                        std::size_t max_sweeps = kDefaultRelaxationSweeps) {
  if (polyline.points.size() < 2) return polyline;
  std::vector<LogDistribution> pts = polyline.points;
  for (std::size_t level = 0; level < levels; ++level) {
    detail::relax(pts, max_sweeps, kRelaxationTolerance);
    std::vector<LogDistribution> finer;
    finer.reserve(2 * pts.size() - 1);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      finer.push_back(pts[i]);
      finer.push_back(geodesic_interpolate(pts[i], pts[i + 1], 0.5));
    }
    finer.push_back(pts.back());
    pts = std::move(finer);
    detail::relax(pts, max_sweeps, kRelaxationTolerance);
  }
  GeodesicPolyline out = make_polyline(std::move(pts));
  // subdivision can add rounding-level length; never report more than the input
  out.length = std::min(out.length, polyline.length);
  return out;
}

enum class RayMode {
  automatic,  // exact rays when n > kExactRayThreshold, grid rays otherwise
  exact,      // closed-form exp_map sampling
  grid,       // Dijkstra + refinement inside the chart
};

inline constexpr std::size_t kExactRayThreshold = 64;

struct StepParams {
  double gamma = 0.25;
  std::size_t ray_count = 5;
  std::size_t grid_resolution = 32;
  std::size_t refinement_levels = 3;
  std::size_t relaxation_sweeps = kDefaultRelaxationSweeps;
  std::size_t chart_dim = 2;
  RayMode ray_mode = RayMode::automatic;

  void validate() const {
    if (!(gamma > 0.0 && gamma < std::numbers::pi))
      throw ConfigError("gamma", "step size must lie in (0, pi)");
    if (ray_count == 0) throw ConfigError("ray_count", "must be positive");
    if (grid_resolution == 0) throw ConfigError("resolution", "must be positive");
    if (chart_dim == 0 || chart_dim > 3) throw ConfigError("chart_dim", "must lie in [1, 3]");
  }
};

struct GeodesicRay {
  LogDistribution origin;
  TangentVector initial_direction;  // unit norm under <,>_origin
  GeodesicPolyline polyline;
};

/// Point at arc length `gamma` along the ray's polyline.
inline LogDistribution step_along(const GeodesicRay& ray, double gamma) {
  const auto& pts = ray.polyline.points;
  if (gamma < 0.0) throw ConfigError("gamma", "must be nonnegative");
  if (gamma > ray.polyline.length * (1.0 + 1e-12)) throw GammaExceedsRay(gamma, ray.polyline.length);
  if (gamma == 0.0 || pts.size() < 2) return pts.front();
  double walked = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg = geodesic_distance_exact(pts[i], pts[i + 1]);
    if (walked + seg >= gamma) {
      if (i + 2 == pts.size() && gamma >= ray.polyline.length) return pts.back();
      return geodesic_interpolate(pts[i], pts[i + 1], (gamma - walked) / seg);
    }
    walked += seg;
  }
  return pts.back();
}

namespace detail {
inline GeodesicPolyline sampled_geodesic(const LogDistribution& origin, const TangentVector& unit,
                                         double length, std::size_t segments) {
  std::vector<LogDistribution> pts;
  pts.push_back(origin);
  for (std::size_t j = 1; j <= segments; ++j)
    pts.push_back(exp_map(origin, unit, length * static_cast<double>(j) / static_cast<double>(segments)));
  return make_polyline(std::move(pts));
}

/// Chart-coordinate directions: +e1, then +/-e_i, then random cones around +e1.
inline std::vector<std::vector<double>> ray_coordinates(std::size_t d, std::size_t k, Rng& rng) {
  std::vector<std::vector<double>> dirs;
  auto axis = [&](std::size_t j, double sign) {
    std::vector<double> c(d, 0.0);
    c[j] = sign;
    return c;
  };
  dirs.push_back(axis(0, 1.0));
  for (std::size_t j = 1; j < d && dirs.size() < k; ++j) {
    dirs.push_back(axis(j, 1.0));
    if (dirs.size() < k) dirs.push_back(axis(j, -1.0));
  }
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi / 4.0);
  while (dirs.size() < k) {
    std::vector<double> c(d, 0.0);
    if (d == 1) {
      c[0] = dirs.size() % 2 == 0 ? 1.0 : -1.0;
    } else {
      std::vector<double> z = gaussian_vector(rng, d);
      z[0] = 0.0;
      double zn = 0.0;
      for (double x : z) zn += x * x;
      zn = std::sqrt(zn);
      if (!(zn > 0.0)) continue;
      const double a = angle(rng);
      for (std::size_t j = 0; j < d; ++j) c[j] = std::sin(a) * z[j] / zn;
      c[0] = std::cos(a);
    }
    dirs.push_back(std::move(c));
  }
  return dirs;
}
}  // namespace detail

/// Rays from the chart base. Ray 1 follows the promise-ascent direction; later
/// rays follow the other chart axes in both senses and then random cone
/// directions within 45 degrees of the ascent direction. Grid rays aim at the
/// chart boundary (radius 2 * gamma) and are found by Dijkstra + refinement;
/// exact rays sample the closed-form geodesic to the same length.
inline std::vector<GeodesicRay> geodesic_rays(const Chart& chart, const StepParams& params,
                                              std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  const std::size_t d = chart.dimension();
  const double reach = 2.0 * params.gamma;
  const bool exact = params.ray_mode == RayMode::exact ||
                     (params.ray_mode == RayMode::automatic && chart.base.size() > kExactRayThreshold);
  const auto dirs = detail::ray_coordinates(d, params.ray_count, rng);

  std::vector<GeodesicRay> rays;
  rays.reserve(dirs.size());
  for (const auto& c : dirs) {
    TangentVector unit = chart.tangent_at(c);
    const double un = norm(chart.base, unit);
    for (auto& x : unit.f) x /= un;
    GeodesicPolyline poly;
    if (exact) {
      poly = detail::sampled_geodesic(chart.base, unit, reach, 8);
    } else {
      Chart local = chart;
      local.radius = reach;
      std::vector<double> goal(c);
      for (auto& x : goal) x *= reach;
      const std::vector<double> origin(d, 0.0);
      poly = refine_polyline(dijkstra_geodesic(local, origin, goal, params.grid_resolution),
                             params.refinement_levels, params.relaxation_sweeps);
    }
    rays.push_back({chart.base, std::move(unit), std::move(poly)});
  }
  return rays;
}

}  // namespace infoevo
