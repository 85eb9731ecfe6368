#include "linkage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <gsl/gsl_multimin.h>

#include "errors.hpp"

namespace bariflex::linkage {
namespace {

Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }
Vec2 unit(double angle) { return Vec2(std::cos(angle), std::sin(angle)); }

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

}  // namespace

void LinkageGeometry::validate() const {
  if (!(ground_length > 0 && crank_length > 0 && coupler_length > 0 && rocker_length > 0)) {
    throw InvalidArgument("link lengths must be positive");
  }
  if (!(gear_ratio > 0)) throw InvalidArgument("gear ratio must be positive");
  if (!(crank_angle_open > crank_angle_closed)) {
    throw InvalidArgument("crank_angle_open must exceed crank_angle_closed");
  }
}

double JointConfiguration::loop_residual(const LinkageGeometry& g) const {
  const Vec2 ground = rocker_pivot - crank_pivot;
  const Vec2 crank_vec = g.crank_length * unit(crank_angle);
  const Vec2 coupler_vec = g.coupler_length * unit(coupler_angle);
  const Vec2 rocker_vec = g.rocker_length * unit(rocker_angle);
  return (ground + rocker_vec - crank_vec - coupler_vec).norm();
}

Vec2 JointConfiguration::coupler_point(const Vec2& local) const { return crank_end + rotate(local, coupler_angle); }

JointConfiguration solve_loop(const LinkageGeometry& geometry, double crank_angle) {
  const double lo = geometry.crank_angle_closed - kOvertravel;
  const double hi = geometry.crank_angle_open + kOvertravel;
  if (!(crank_angle >= lo - 1e-12 && crank_angle <= hi + 1e-12)) {
    std::ostringstream msg;
    msg << "crank angle " << rad2deg(crank_angle) << " deg outside travel [" << rad2deg(lo) << ", " << rad2deg(hi)
        << "] deg";
    throw LinkageLocked(msg.str());
  }

  JointConfiguration q;
  q.crank_angle = crank_angle;
  q.crank_pivot = Vec2(geometry.palm_halfwidth, 0.0);
  q.rocker_pivot = Vec2(geometry.palm_halfwidth + geometry.ground_length, 0.0);
  q.crank_end = q.crank_pivot + geometry.crank_length * unit(crank_angle);

  // C lies on the circle |C - B| = coupler and |C - D| = rocker.
  const Vec2 bd = q.rocker_pivot - q.crank_end;
  const double d = bd.norm();
  const double k = geometry.coupler_length;
  const double r = geometry.rocker_length;
  if (d > k + r || d < std::abs(k - r) || d == 0.0) {
    throw LinkageLocked("coupler cannot reach rocker at crank angle " + std::to_string(rad2deg(crank_angle)) + " deg");
  }
  const double a = (k * k - r * r + d * d) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, k * k - a * a));
  const Vec2 ex = bd / d;
  const Vec2 mid = q.crank_end + a * ex;
  // perp(ex) gives cross(bd, C - B) > 0.
  const double side = geometry.branch == Branch::elbow_up ? 1.0 : -1.0;
  q.coupler_end = mid + side * h * perp(ex);

  const Vec2 coupler_vec = q.coupler_end - q.crank_end;
  const Vec2 rocker_vec = q.coupler_end - q.rocker_pivot;
  q.coupler_angle = std::atan2(coupler_vec.y(), coupler_vec.x());
  q.rocker_angle = std::atan2(rocker_vec.y(), rocker_vec.x());
  q.fingertip_position = q.coupler_point(geometry.fingertip_offset);
  q.fingertip_orientation = q.coupler_angle;
  return q;
}

LoopRates loop_rates(const LinkageGeometry& geometry, const JointConfiguration& q) {
  // B' + w_k perp(C - B) = w_r perp(C - D) with unit crank rate.
  const Vec2 b_rate = geometry.crank_length * perp(unit(q.crank_angle));
  const Vec2 kb = perp(q.coupler_end - q.crank_end);
  const Vec2 rd = perp(q.coupler_end - q.rocker_pivot);
  Eigen::Matrix2d m;
  m.col(0) = kb;
  m.col(1) = -rd;
  const double det = m.determinant();
  if (std::abs(det) < 1e-14) throw SingularTransmission("4-bar at a toggle position");
  const Eigen::Vector2d w = m.inverse() * (-b_rate);
  return LoopRates{w(0), w(1)};
}

Vec2 coupler_point_rate(const LinkageGeometry& geometry, const JointConfiguration& q, const Vec2& local) {
  const LoopRates w = loop_rates(geometry, q);
  const Vec2 b_rate = geometry.crank_length * perp(unit(q.crank_angle));
  return b_rate + w.coupler * perp(q.coupler_point(local) - q.crank_end);
}

double aperture(const LinkageGeometry& geometry, double crank_angle) {
  return 2.0 * solve_loop(geometry, crank_angle).fingertip_position.x();
}

TransmissionJacobian transmission_jacobian(const LinkageGeometry& geometry, double crank_angle) {
  const JointConfiguration q = solve_loop(geometry, crank_angle);
  const Vec2 tip_rate = coupler_point_rate(geometry, q, geometry.fingertip_offset);
  TransmissionJacobian j;
  j.aperture_per_crank = 2.0 * tip_rate.x();
  j.aperture_per_motor = -j.aperture_per_crank / geometry.gear_ratio;
  return j;
}

double fingertip_force(const LinkageGeometry& geometry, double crank_angle, double motor_torque) {
  const TransmissionJacobian j = transmission_jacobian(geometry, crank_angle);
  const double tip_per_crank = 0.5 * std::abs(j.aperture_per_crank);
  if (tip_per_crank < 1e-9) throw SingularTransmission("fingertip does not move with the crank");
  return motor_torque * geometry.gear_ratio / tip_per_crank;
}

double crank_from_motor(const LinkageGeometry& geometry, double motor_angle) {
  return geometry.crank_angle_open - motor_angle / geometry.gear_ratio;
}

double motor_from_crank(const LinkageGeometry& geometry, double crank_angle) {
  return (geometry.crank_angle_open - crank_angle) * geometry.gear_ratio;
}

double tip_excursion(const LinkageGeometry& geometry, int samples) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int i = 0; i < samples; ++i) {
    const double t = geometry.crank_angle_closed + geometry.range_of_motion() * i / (samples - 1);
    const double psi = solve_loop(geometry, t).coupler_angle;
    lo = std::min(lo, psi);
    hi = std::max(hi, psi);
  }
  return hi - lo;
}

// ---------------------------------------------------------------------------
// Dimensional synthesis.
//
// Shape vector: (ground/crank, coupler/ground, rocker/crank, mid-stroke crank
// angle). For a given shape the crank scale and the fingertip x-offset enter
// the open and closed aperture linearly, so both apertures are met exactly by
// a 2x2 solve and the optimiser only searches the shape.

namespace {

constexpr int kShapeDim = 4;
using Shape = std::array<double, kShapeDim>;

struct Candidate {
  LinkageGeometry geometry;
  double cost = std::numeric_limits<double>::infinity();
  bool valid = false;
};

Candidate build(const Shape& x, const SynthesisConstraints& c) {
  Candidate out;
  const double g_over_c = x[0], k_over_g = x[1], r_over_c = x[2], theta_mid = x[3];
  if (!(g_over_c > 0.05 && k_over_g > 0.2 && r_over_c > 0.2)) return out;

  LinkageGeometry geo;
  geo.crank_length = 1.0;
  geo.ground_length = g_over_c;
  geo.coupler_length = k_over_g * g_over_c;
  geo.rocker_length = r_over_c;
  geo.palm_halfwidth = 0.0;
  geo.gear_ratio = c.gear_ratio;
  geo.crank_angle_open = theta_mid + 0.5 * c.range_of_motion;
  geo.crank_angle_closed = theta_mid - 0.5 * c.range_of_motion;
  geo.branch = Branch::elbow_down;
  geo.fingertip_offset = Vec2::Zero();

  JointConfiguration q_closed, q_open;
  try {
    q_closed = solve_loop(geo, geo.crank_angle_closed);
    q_open = solve_loop(geo, geo.crank_angle_open);
  } catch (const Error&) {
    return out;
  }
  // Scale s and offset x solve:
  //   p + s Bx + cos(psi) ox - sin(psi) oy = half aperture   (closed and open)
  const double oy = -(c.inner_grasp_depth + 0.030);
  Eigen::Matrix2d m;
  Eigen::Vector2d rhs;
  m << q_closed.crank_end.x(), std::cos(q_closed.coupler_angle), q_open.crank_end.x(), std::cos(q_open.coupler_angle);
  rhs << 0.5 * c.closed_aperture - c.palm_halfwidth + std::sin(q_closed.coupler_angle) * oy,
      0.5 * c.max_aperture - c.palm_halfwidth + std::sin(q_open.coupler_angle) * oy;
  if (std::abs(m.determinant()) < 1e-12) return out;
  const Eigen::Vector2d sol = m.inverse() * rhs;
  const double s = sol(0);
  if (!(s > 0)) return out;

  geo.crank_length = s;
  geo.ground_length *= s;
  geo.coupler_length *= s;
  geo.rocker_length *= s;
  geo.palm_halfwidth = c.palm_halfwidth;
  geo.fingertip_offset = Vec2(sol(1), oy);
  out.geometry = geo;
  out.valid = true;
  return out;
}

// Soft cost used by the optimiser; hard acceptance happens in check_synthesis.
double cost_of(const Shape& x, const SynthesisConstraints& c) {
  Candidate cand = build(x, c);
  if (!cand.valid) return 1e9;
  const LinkageGeometry& geo = cand.geometry;
  double penalty = 0.0;
  double psi_lo = 1e9, psi_hi = -1e9;
  double lowest = 0.0, widest = 0.0;
  try {
    const int n = 61;
    for (int i = 0; i < n; ++i) {
      const double t = geo.crank_angle_closed - c.overtravel + (geo.range_of_motion() + 2 * c.overtravel) * i / (n - 1);
      const JointConfiguration q = solve_loop(geo, t);
      const bool in_range = t >= geo.crank_angle_closed && t <= geo.crank_angle_open;
      if (in_range) {
        psi_lo = std::min(psi_lo, q.coupler_angle);
        psi_hi = std::max(psi_hi, q.coupler_angle);
      }
      lowest = std::min({lowest, q.crank_end.y(), q.coupler_end.y(), q.fingertip_position.y()});
      widest = std::max({widest, q.crank_pivot.x(), q.rocker_pivot.x()});
    }
    for (int i = 0; i <= 20; ++i) {
      const double t = geo.crank_angle_closed + geo.range_of_motion() * i / 20.0;
      const double rate = coupler_point_rate(geo, solve_loop(geo, t), geo.fingertip_offset).x();
      penalty += 1e3 * std::pow(std::max(0.0, c.min_tip_rate - rate) / 1e-3, 2);
    }
  } catch (const Error&) {
    return 1e9;
  }
  const double excursion = psi_hi - psi_lo;
  const double tol = deg2rad(0.5);
  penalty += 1e3 * std::pow(std::max(0.0, excursion - c.max_tip_excursion) / tol, 2);
  penalty += 1e3 * std::pow(std::max(0.0, -lowest - (c.box_height - c.palm_height)) / 1e-3, 2);
  penalty += 1e3 * std::pow(std::max(0.0, widest - 0.5 * c.box_width) / 1e-3, 2);

  double force_term = 1.0;
  try {
    const double mid = 0.5 * (geo.crank_angle_open + geo.crank_angle_closed);
    const double f = fingertip_force(geo, mid, c.rated_torque);
    force_term = std::pow((f - c.continuous_force) / c.continuous_force, 2);
  } catch (const Error&) {
  }
  return force_term + 1e-3 * std::pow(excursion / tol, 2) + penalty;
}

struct NmContext {
  const SynthesisConstraints* c;
};

double nm_cost(const gsl_vector* v, void* params) {
  const auto* ctx = static_cast<const NmContext*>(params);
  Shape x{};
  for (int i = 0; i < kShapeDim; ++i) x[i] = gsl_vector_get(v, i);
  return cost_of(x, *ctx->c);
}

Shape nelder_mead(const Shape& start, const SynthesisConstraints& c) {
  NmContext ctx{&c};
  gsl_multimin_function fn{&nm_cost, kShapeDim, &ctx};
  gsl_vector* x = gsl_vector_alloc(kShapeDim);
  gsl_vector* step = gsl_vector_alloc(kShapeDim);
  const std::array<double, kShapeDim> steps{0.05, 0.05, 0.05, deg2rad(3.0)};
  for (int i = 0; i < kShapeDim; ++i) {
    gsl_vector_set(x, i, start[i]);
    gsl_vector_set(step, i, steps[i]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, kShapeDim);
  gsl_multimin_fminimizer_set(s, &fn, x, step);
  for (int iter = 0; iter < 400; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-7) == GSL_SUCCESS) break;
  }
  Shape best{};
  for (int i = 0; i < kShapeDim; ++i) best[i] = gsl_vector_get(s->x, i);
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(step);
  return best;
}

}  // namespace

std::string check_synthesis(const LinkageGeometry& geo, const SynthesisConstraints& c) {
  std::ostringstream why;
  try {
    geo.validate();
    const double open = aperture(geo, geo.crank_angle_open);
    if (std::abs(open - c.max_aperture) > 1e-3) why << "open aperture " << open << " m; ";
    const double closed = aperture(geo, geo.crank_angle_closed);
    if (closed > 0.002 || closed < 0.0) why << "closed aperture " << closed << " m; ";
    if (std::abs(geo.range_of_motion() - c.range_of_motion) > deg2rad(0.5)) why << "range of motion; ";
    if (tip_excursion(geo) > c.max_tip_excursion + 1e-9) why << "tip excursion " << rad2deg(tip_excursion(geo)) << " deg; ";
    double lowest = 0.0;
    const int n = 181;
    for (int i = 0; i < n; ++i) {
      const double t = geo.crank_angle_closed - kOvertravel + (geo.range_of_motion() + 2 * kOvertravel) * i / (n - 1);
      const JointConfiguration q = solve_loop(geo, t);
      lowest = std::min({lowest, q.crank_end.y(), q.coupler_end.y(), q.fingertip_position.y()});
    }
    double slowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double t = geo.crank_angle_closed + geo.range_of_motion() * i / (n - 1);
      slowest = std::min(slowest, 0.5 * transmission_jacobian(geo, t).aperture_per_crank);
    }
    if (slowest < c.min_tip_rate - 1e-9) why << "fingertip rate " << slowest << " m/rad below floor; ";
    if (-lowest > c.box_height - c.palm_height + 1e-9) why << "finger exceeds box height; ";
    if (geo.palm_halfwidth + geo.ground_length > 0.5 * c.box_width + 1e-9) why << "pivots exceed box width; ";
  } catch (const Error& e) {
    why << e.what() << "; ";
  }
  return why.str();
}

LinkageGeometry synthesize_geometry(const SynthesisConstraints& c, std::uint64_t seed) {
  if (!(c.max_aperture > 0 && c.range_of_motion > 0 && c.box_width > 0 && c.box_height > 0 &&
        c.max_tip_excursion >= 0 && c.closed_aperture >= 0 && c.closed_aperture < c.max_aperture)) {
    throw InvalidArgument("synthesis constraints must be positive and consistent");
  }

  // Coarse grid over the four shape parameters; the parallelogram family
  // (ratios exactly 1) is on the grid.
  const std::array<double, 4> g_over_c{0.2, 0.3, 0.4, 0.5};
  const std::array<double, 5> ratio{0.8, 0.9, 1.0, 1.1, 1.2};
  const std::array<double, 5> mids{deg2rad(-110), deg2rad(-100), deg2rad(-90), deg2rad(-80), deg2rad(-70)};

  std::vector<std::pair<double, Shape>> grid;
  for (double g : g_over_c)
    for (double k : ratio)
      for (double r : ratio)
        for (double m : mids) {
          Shape x{g, k, r, m};
          grid.emplace_back(cost_of(x, c), x);
        }
  std::stable_sort(grid.begin(), grid.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<Shape> starts;
  const std::size_t n_best = std::min<std::size_t>(6, grid.size());
  for (std::size_t i = 0; i < n_best; ++i) starts.push_back(grid[i].second);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (std::size_t i = 0; i < n_best; ++i) {
    Shape x = grid[i].second;
    x[0] *= 1.0 + 0.1 * jitter(rng);
    x[1] *= 1.0 + 0.1 * jitter(rng);
    x[2] *= 1.0 + 0.1 * jitter(rng);
    x[3] += deg2rad(5.0) * jitter(rng);
    starts.push_back(x);
  }

  Candidate best;
  auto consider = [&](const Shape& x) {
    Candidate cand = build(x, c);
    if (!cand.valid) return;
    if (!check_synthesis(cand.geometry, c).empty()) return;
    cand.cost = cost_of(x, c);
    if (cand.cost < best.cost) best = cand;
  };
  for (std::size_t i = 0; i < n_best; ++i) consider(grid[i].second);
  for (const Shape& s : starts) consider(nelder_mead(s, c));

  if (!std::isfinite(best.cost)) {
    throw SynthesisFailed("no feasible 4-bar geometry within the search budget");
  }
  return best.geometry;
}

LinkageGeometry geometry_from_config(const KeyValueFile& kv) {
  LinkageGeometry g;
  g.ground_length = kv.number("ground_length");
  g.crank_length = kv.number("crank_length");
  g.coupler_length = kv.number("coupler_length");
  g.rocker_length = kv.number("rocker_length");
  g.fingertip_offset = Vec2(kv.number("fingertip_offset_x"), kv.number("fingertip_offset_y"));
  g.palm_halfwidth = kv.number("palm_halfwidth");
  g.gear_ratio = kv.number("gear_ratio");
  g.crank_angle_open = deg2rad(kv.number("crank_open_deg"));
  g.crank_angle_closed = deg2rad(kv.number("crank_closed_deg"));
  const std::string& b = kv.text("branch");
  if (b == "elbow_up") {
    g.branch = Branch::elbow_up;
  } else if (b == "elbow_down") {
    g.branch = Branch::elbow_down;
  } else {
    throw ConfigError(kv.origin() + ": branch must be elbow_up or elbow_down, got '" + b + "'");
  }
  try {
    g.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(kv.origin() + ": " + e.what());
  }
  return g;
}

KeyValueFile geometry_to_config(const LinkageGeometry& g) {
  KeyValueFile kv;
  kv.set("ground_length", g.ground_length);
  kv.set("crank_length", g.crank_length);
  kv.set("coupler_length", g.coupler_length);
  kv.set("rocker_length", g.rocker_length);
  kv.set("fingertip_offset_x", g.fingertip_offset.x());
  kv.set("fingertip_offset_y", g.fingertip_offset.y());
  kv.set("palm_halfwidth", g.palm_halfwidth);
  kv.set("gear_ratio", g.gear_ratio);
  kv.set("crank_open_deg", rad2deg(g.crank_angle_open));
  kv.set("crank_closed_deg", rad2deg(g.crank_angle_closed));
  kv.set("branch", std::string(g.branch == Branch::elbow_up ? "elbow_up" : "elbow_down"));
  return kv;
}

LinkageGeometry default_geometry() {
  // synthesize_geometry(SynthesisConstraints{}, 0), frozen so fixtures do not
  // depend on optimizer round-off.
  LinkageGeometry g;
  g.ground_length = 0.03248487994129908;
  g.crank_length = 0.07340953736310148;
  g.coupler_length = 0.03243487782325498;
  g.rocker_length = 0.07326505164461217;
  g.fingertip_offset = Vec2(0.027009688460659292, -0.09);
  g.palm_halfwidth = 0.03;
  g.gear_ratio = 37.0 / 24.0;
  g.crank_angle_open = deg2rad(-54.530109440864386);
  g.crank_angle_closed = deg2rad(-141.0301094408644);
  g.branch = Branch::elbow_down;
  return g;
}

}  // namespace bariflex::linkage
