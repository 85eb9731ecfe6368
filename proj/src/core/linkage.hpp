#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "config.hpp"

namespace bariflex {

using Vec2 = Eigen::Vector2d;

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

namespace linkage {

// Solution branch of the coupler/rocker circle intersection. elbow_down puts
// the coupler end C on the side where cross(D - B, C - B) < 0.
enum class Branch { elbow_up, elbow_down };

/// Right-hand finger 4-bar, expressed in the gripper frame: x points away from
/// the centreline, y points up, the crank pivot sits at (palm_halfwidth, 0)
/// and the rocker pivot at (palm_halfwidth + ground_length, 0). The left
/// finger is the mirror image. Crank angles are measured CCW from +x.
struct LinkageGeometry {
  double ground_length = 0.0;
  double crank_length = 0.0;
  double coupler_length = 0.0;
  double rocker_length = 0.0;
  Vec2 fingertip_offset = Vec2::Zero();  // coupler frame, origin at crank end B
  double palm_halfwidth = 0.0;
  double gear_ratio = 37.0 / 24.0;
  double crank_angle_open = 0.0;
  double crank_angle_closed = 0.0;
  Branch branch = Branch::elbow_down;

  double range_of_motion() const { return crank_angle_open - crank_angle_closed; }
  void validate() const;
};

struct JointConfiguration {
  double crank_angle = 0.0;
  double rocker_angle = 0.0;
  double coupler_angle = 0.0;
  Vec2 crank_pivot = Vec2::Zero();
  Vec2 rocker_pivot = Vec2::Zero();
  Vec2 crank_end = Vec2::Zero();    // B
  Vec2 coupler_end = Vec2::Zero();  // C
  Vec2 fingertip_position = Vec2::Zero();
  double fingertip_orientation = 0.0;

  /// |ground + crank - coupler - rocker| for the solved loop.
  double loop_residual(const LinkageGeometry& g) const;
  /// World position of a point given in the coupler frame.
  Vec2 coupler_point(const Vec2& local) const;
};

/// Angular rates per unit crank rate, from the velocity loop equation.
struct LoopRates {
  double coupler = 0.0;
  double rocker = 0.0;
};

struct TransmissionJacobian {
  double aperture_per_motor = 0.0;  // d aperture / d motor angle [m/rad]
  double aperture_per_crank = 0.0;  // d aperture / d crank angle [m/rad]
};

struct SynthesisConstraints {
  double max_aperture = 0.200;
  double closed_aperture = 0.0015;
  double max_tip_excursion = deg2rad(10.0);
  double range_of_motion = deg2rad(86.5);
  double inner_grasp_depth = 0.060;
  double box_width = 0.125;
  double box_height = 0.255;
  double palm_height = 0.060;  // motor and gear stack above the pivot line
  double palm_halfwidth = 0.030;
  double gear_ratio = 37.0 / 24.0;
  double rated_torque = 0.6;
  double continuous_force = 11.0;
  double overtravel = deg2rad(5.0);
  // Lower bound on d(tip x)/d(crank) over the stroke; keeps the aperture
  // strictly monotonic and the transmission away from dead centre.
  double min_tip_rate = 0.045;
};

constexpr double kOvertravel = deg2rad(5.0);

JointConfiguration solve_loop(const LinkageGeometry& geometry, double crank_angle);
LoopRates loop_rates(const LinkageGeometry& geometry, const JointConfiguration& q);

/// Velocity of a coupler-frame point per unit crank rate.
Vec2 coupler_point_rate(const LinkageGeometry& geometry, const JointConfiguration& q, const Vec2& local);

double aperture(const LinkageGeometry& geometry, double crank_angle);
TransmissionJacobian transmission_jacobian(const LinkageGeometry& geometry, double crank_angle);
double fingertip_force(const LinkageGeometry& geometry, double crank_angle, double motor_torque);

/// Motor angle is zero at the open pose and grows while closing.
double crank_from_motor(const LinkageGeometry& geometry, double motor_angle);
double motor_from_crank(const LinkageGeometry& geometry, double crank_angle);

/// Max minus min coupler angle over [closed, open], sampled densely.
double tip_excursion(const LinkageGeometry& geometry, int samples = 721);

LinkageGeometry synthesize_geometry(const SynthesisConstraints& constraints, std::uint64_t seed);
/// Human-readable account of why a geometry violates the constraints; empty when feasible.
std::string check_synthesis(const LinkageGeometry& geometry, const SynthesisConstraints& constraints);

LinkageGeometry geometry_from_config(const KeyValueFile& kv);
KeyValueFile geometry_to_config(const LinkageGeometry& geometry);

/// The archived synthesis result for the default constraints and seed 0.
LinkageGeometry default_geometry();

}  // namespace linkage
}  // namespace bariflex
