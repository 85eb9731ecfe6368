#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "sim.hpp"

namespace bariflex::sim {
namespace {

Vec2 rot(const Vec2& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return Vec2(c * v.x() - s * v.y(), s * v.x() + c * v.y());
}

// The rig sees three springs in series: the probe itself, the finger's
// elastic element and the back-driven actuator.
class PressChain {
 public:
  PressChain(const GripperFixture& f, double probe_stiffness) : f_(f), k_probe_(probe_stiffness) {
    const auto& g = f.geometry;
    theta0_ = g.crank_angle_open;
    const FingerPlacement pl = place_finger(f, theta0_);
    dir_ = f.probe_mode == ProbeMode::underside ? Vec2(Vec2::UnitY()) : Vec2(-pl.inward);
    if (f.finger == FingerKind::finray) {
      finger_ = elastics::build_finray(f.finray);
      rest_ = elastics::finray_rest(finger_);
      apex_ = finger_.n_front_nodes() - 1;
      base_ = pl.finray_base;
      last_ = rest_;
    }
    // The pressed point rides on the coupler.
    local_ = rot(pl.tip - pl.joints.crank_end, -pl.joints.coupler_angle);
    p0_ = pl.tip;
    const double rate = linkage::coupler_point_rate(g, pl.joints, local_).dot(dir_);
    sign_ = rate >= 0.0 ? 1.0 : -1.0;
    travel_ = sign_ > 0 ? linkage::kOvertravel : g.range_of_motion() + linkage::kOvertravel;
    // Resistance table over the admissible crank travel.
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
      const double dc = travel_ * i / n;
      table_dc_.push_back(dc);
      table_force_.push_back(actuator_force(dc));
    }
  }

  // Probe force needed to hold the crank `dc` radians back-driven.
  double actuator_force(double dc) const {
    const auto& m = f_.motor;
    const auto& g = f_.geometry;
    const auto q = linkage::solve_loop(g, theta0_ + sign_ * dc);
    const double rate = std::abs(linkage::coupler_point_rate(g, q, local_).dot(dir_));
    if (rate < 1e-9) throw SingularTransmission("probe direction is normal to the fingertip path");
    const double pd = std::min(m.kp * g.gear_ratio * dc, m.torque_limit);
    return (m.coulomb_friction + pd) * g.gear_ratio / rate;
  }

  // Crank travel the actuator yields under a probe force.
  double actuator_travel(double force) const {
    if (force <= table_force_.front()) return 0.0;
    for (std::size_t i = 1; i < table_force_.size(); ++i) {
      if (table_force_[i] >= force) {
        double lo = table_dc_[i - 1], hi = table_dc_[i];
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          (actuator_force(mid) >= force ? hi : lo) = mid;
        }
        return hi;
      }
    }
    return travel_;
  }

  double actuator_displacement(double dc) const {
    if (dc == 0.0) return 0.0;
    const auto q = linkage::solve_loop(f_.geometry, theta0_ + sign_ * dc);
    return (q.coupler_point(local_) - p0_).dot(dir_);
  }

  double elastic_displacement(double force) {
    switch (f_.finger) {
      case FingerKind::bariflex:
        if (f_.probe_mode == ProbeMode::underside) {
          const double a = force * f_.probe_lever / f_.spring.stiffness;
          if (a >= 0.5 * kPi) return std::numeric_limits<double>::infinity();
          return f_.probe_lever * std::tan(a);
        }
        return 0.0;
      case FingerKind::rigid:
        return 0.0;
      case FingerKind::finray:
        break;
    }
    return 0.0;
  }

  bool displacement_controlled() const { return f_.finger == FingerKind::finray; }

  // Rig probe driven `travel` past the rest apex, relative to the finger
  // base; returns the probe force.
  double pushed_force(double travel) {
    const Vec2 dir_local = base_.inverse_rotate(dir_);
    elastics::FinRayProblem prob;
    elastics::NodePusher pusher;
    pusher.node = apex_;
    pusher.direction = dir_local;
    pusher.anchor = rest_.deformed_node_positions[apex_] + travel * dir_local;
    pusher.stiffness = k_probe_;
    prob.pushers.push_back(pusher);
    elastics::FinRayDeflection d = elastics::finray_solve(finger_, prob, &last_);
    const double gap = (pusher.anchor - d.deformed_node_positions[apex_]).dot(dir_local);
    last_ = std::move(d);
    return k_probe_ * std::max(0.0, gap);
  }

  // Force balance residual for a trial force: positive once the trial
  // exceeds what the finger pushes back with.
  double residual(double force, double d, double* dc_out = nullptr) {
    const double dc = actuator_travel(force);
    if (dc_out) *dc_out = dc;
    return force - pushed_force(d - actuator_displacement(dc));
  }

  double total(double force, double* dc_out = nullptr) {
    const double dc = actuator_travel(force);
    if (dc_out) *dc_out = dc;
    return force / k_probe_ + elastic_displacement(force) + actuator_displacement(dc);
  }

  double motor_angle(double dc) const { return -sign_ * dc * f_.geometry.gear_ratio; }

  // Unloaded elastic state after retraction, re-solved from the loaded one.
  elastics::FinRayDeflection unloaded() {
    elastics::FinRayProblem prob;
    return elastics::finray_solve(finger_, prob, &last_);
  }

  void remember(const elastics::FinRayDeflection& d) { last_ = d; }
  const elastics::FinRayDeflection& last() const { return last_; }

 private:
  const GripperFixture& f_;
  double k_probe_;
  double theta0_ = 0.0;
  Vec2 dir_ = Vec2::UnitY();
  Vec2 local_ = Vec2::Zero();
  Vec2 p0_ = Vec2::Zero();
  double sign_ = 1.0;
  double travel_ = 0.0;
  std::vector<double> table_dc_, table_force_;
  elastics::FinRayFinger finger_;
  elastics::FinRayDeflection rest_, last_;
  int apex_ = 0;
  Pose2 base_;
};

}  // namespace

PressResult press_probe(const GripperFixture& f, const std::vector<double>& schedule, double force_cap,
                        double probe_stiffness, const GripperState* start) {
  if (!(probe_stiffness > 0.0)) throw InvalidArgument("probe stiffness must be positive");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] >= 0.0) || schedule[i] > 0.060) throw InvalidArgument("probe displacement outside [0, 60 mm]");
    if (i && schedule[i] < schedule[i - 1]) throw InvalidArgument("probe schedule must be nondecreasing");
  }
  const GripperState pristine = make_state(f, 0.0);
  const GripperState initial = start ? *start : pristine;
  PressChain chain(f, probe_stiffness);
  if (f.finger == FingerKind::finray) chain.remember(initial.finray[1]);
  PressResult out;

  double f_lo = 0.0;
  elastics::FinRayDeflection at_lo = chain.last();
  for (double d : schedule) {
    PressSample s;
    s.displacement = d;
    if (d > 0.0 && chain.displacement_controlled()) {
      chain.remember(at_lo);
      double lo = f_lo, hi = chain.pushed_force(d);
      elastics::FinRayDeflection lo_state = at_lo;
      for (int it = 0; it < 60 && hi - lo > 1e-9 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        chain.remember(lo_state);
        if (chain.residual(mid, d) < 0.0) {
          lo = mid;
          lo_state = chain.last();
        } else {
          hi = mid;
        }
      }
      double dc = 0.0;
      chain.remember(lo_state);
      chain.residual(hi, d, &dc);
      s.force = hi;
      s.motor_angle = chain.motor_angle(dc);
      f_lo = lo;
      at_lo = lo_state;
    } else if (d > 0.0) {
      // Bracket, then bisect; the chain is monotone in the force.
      double lo = f_lo, hi = std::max(2.0 * f_lo, 1.0);
      while (chain.total(hi) < d) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e7) throw NoConvergence("probe force unbounded");
      }
      for (int it = 0; it < 60 && hi - lo > 1e-9 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (chain.total(mid) < d ? lo : hi) = mid;
      }
      double dc = 0.0;
      chain.total(hi, &dc);
      s.force = hi;
      s.motor_angle = chain.motor_angle(dc);
      f_lo = lo;
    }
    out.samples.push_back(s);
    if (s.force >= force_cap) {
      out.capped = true;
      break;
    }
  }

  // Retract, then the reset command brings the motor back home.
  out.rest = initial;
  if (f.finger == FingerKind::finray) {
    chain.remember(at_lo);
    const auto d = chain.unloaded();
    out.rest.finray[1] = d;
  }
  out.rest_drift = state_distance(f, pristine, out.rest);
  return out;
}

}  // namespace bariflex::sim
