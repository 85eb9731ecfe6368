#pragma once

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "shapes.hpp"

namespace bariflex::elastics {

enum class Material { TPU87A, TPU95A };

/// Nominal flexural modulus [Pa] before the per-fixture calibration factor.
double nominal_modulus(Material m);
std::string material_name(Material m);
Material material_from_name(const std::string& name);

/// Section and outline parameters a Fin-Ray finger is generated from.
struct FinRayDesign {
  int n_segments = 8;
  double length = 0.090;       // front beam, base to apex [m]
  double base_width = 0.030;   // front base to back base [m]
  double apex_offset = 0.010;  // apex x relative to the front base; > 0 leans toward the object
  double depth = 0.020;        // out-of-plane width [m]
  double beam_thickness = 0.005;
  double crossbeam_thickness = 0.004;
  int crossbeam_count = 7;     // ribs between matching joints; at most n_segments - 1
  bool back_beam = true;
  Material material = Material::TPU95A;
  double modulus_scale = 1.0;  // calibration factor on the nominal modulus
  double pin_slide_min = -0.020;  // pin travel either side of its rest seat
  double pin_slide_max = 0.020;
  double pin_seat_factor = 0.3;  // seat spring = factor * E * depth * beam_thickness / length
};

struct Crossbeam {
  int front_node = 0;  // index along the front beam (0 = base)
  int back_node = 0;   // index along the back beam (0 = base / pin)
  double stiffness = 0.0;       // axial [N/m]
  double rest_length = 0.0;
  double end_stiffness = 0.0;   // rib-to-wall bending at each end [N m/rad]
  double rest_front_angle = 0.0;  // rib direction minus wall direction at rest
  double rest_back_angle = 0.0;
};

/// Pseudo-rigid-body Fin-Ray. Local frame: origin at the front-beam base,
/// +y runs from base toward the apex, +x points out of the contact face. Each
/// beam has `n_segments` torsion-spring joints placed at the midpoints of equal
/// flexible elements, so the rigid pieces are [l/2, l, ..., l, l/2] and the
/// first piece is clamped. The back beam starts at the pin
/// (x = -base_width, y = pin slide) and is tied to the apex by a stiff spring.
struct FinRayFinger {
  FinRayDesign design;
  std::vector<double> front_segment_lengths;
  std::vector<double> back_segment_lengths;
  double front_rest_angle = 0.0;
  double back_rest_angle = 0.0;
  std::vector<double> front_joint_stiffness;
  std::vector<double> back_joint_stiffness;
  std::vector<Crossbeam> crossbeams;
  double apex_stiffness = 0.0;
  double pin_seat_stiffness = 0.0;  // [N/m], only with a back beam

  int n_front_nodes() const { return static_cast<int>(front_segment_lengths.size()) + 1; }
  int n_back_nodes() const { return design.back_beam ? static_cast<int>(back_segment_lengths.size()) + 1 : 0; }
  int n_nodes() const { return n_front_nodes() + n_back_nodes(); }
  int n_dofs() const;
  double modulus() const { return nominal_modulus(design.material) * design.modulus_scale; }
  void validate() const;
};

FinRayFinger build_finray(const FinRayDesign& design);
FinRayDesign finray_design_from_config(const KeyValueFile& kv);
KeyValueFile finray_design_to_config(const FinRayDesign& d);

/// Node numbering: front beam 0..nf-1 (0 = base, then one node per joint,
/// nf-1 = apex), then the back beam in the same order starting at the pin.
struct NodeLoad {
  int node = 0;
  Vec2 force = Vec2::Zero();
};

/// One-sided spring pushing a node along `direction` toward `anchor`:
/// energy 0.5 k max(0, (anchor - p) . direction)^2.
struct NodePusher {
  int node = 0;
  Vec2 anchor = Vec2::Zero();
  Vec2 direction = Vec2::UnitY();
  double stiffness = 1e6;
};

struct FinRayDeflection {
  std::vector<double> front_rotations;
  std::vector<double> back_rotations;
  double pin_slide_position = 0.0;
  std::vector<Vec2> deformed_node_positions;
  double residual = 0.0;        // max |generalised force| on the free set
  double elastic_energy = 0.0;  // springs only (no load potential)
  int iterations = 0;
  bool pin_at_stop = false;
  double pin_constraint_force = 0.0;
};

struct ContactSample {
  Vec2 position = Vec2::Zero();  // finger local frame
  Vec2 normal = Vec2::Zero();    // into the object, local frame
  double penetration = 0.0;
  double normal_force = 0.0;
  int segment = 0;
};

struct SolveOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
  double contact_stiffness = 1e5;
  int contact_samples_per_segment = 4;
};

struct FinRayProblem {
  std::vector<NodeLoad> loads;
  std::vector<NodePusher> pushers;
  const contact::ObjectShape2D* object = nullptr;
  Pose2 object_pose;  // in finger local frame
};

/// Node positions for a set of joint rotations (forward kinematics).
std::vector<Vec2> finray_nodes(const FinRayFinger& finger, const std::vector<double>& front,
                               const std::vector<double>& back, double pin);

FinRayDeflection finray_rest(const FinRayFinger& finger);

FinRayDeflection finray_solve(const FinRayFinger& finger, const FinRayProblem& problem, const FinRayDeflection* warm_start,
                              const SolveOptions& options = {});

FinRayDeflection finray_equilibrium(const FinRayFinger& finger, const std::vector<NodeLoad>& external_loads,
                                    const SolveOptions& options = {});

struct WrapResult {
  FinRayDeflection deflection;
  std::vector<ContactSample> contacts;
};

/// Equilibrium of the finger pressed against a fixed object. `base_pose`
/// places the finger frame in the world; the object is given in world frame.
WrapResult finray_contact_wrap(const FinRayFinger& finger, const contact::ObjectShape2D& object, const Pose2& object_pose,
                               const Pose2& base_pose, const FinRayDeflection* warm_start = nullptr,
                               const SolveOptions& options = {});

/// Active penalty contacts of a solved state.
std::vector<ContactSample> finray_contacts(const FinRayFinger& finger, const FinRayDeflection& state,
                                           const contact::ObjectShape2D& object, const Pose2& object_pose_local,
                                           const SolveOptions& options = {});

/// Analytic series stiffness of a single cantilevered chain under a tip
/// load normal to the undeformed beam (small-angle).
double chain_series_stiffness(const FinRayFinger& finger);

/// Smallest Hessian eigenvalue of the elastic energy on the free set.
double finray_min_hessian_eigenvalue(const FinRayFinger& finger, const FinRayProblem& problem,
                                     const FinRayDeflection& state, const SolveOptions& options = {});

struct FingertipSpring {
  double stiffness = 0.5;  // N m / rad
  double rest_angle = 0.0;
  double stopper_angle = 0.0;
};

struct SpringResponse {
  double torque = 0.0;
  bool stopper_engaged = false;
  double angle = 0.0;              // after clamping at the stopper
  double forwarded_torque = 0.0;   // load carried by the stopper
};

/// Flexion is angle > rest. Extension is blocked by the stopper; `applied_torque`
/// (optional) is the external torque acting on the fingertip, forwarded to
/// the linkage when the stopper carries it.
SpringResponse fingertip_spring_torque(const FingertipSpring& spring, double angle, double applied_torque = 0.0);

}  // namespace bariflex::elastics
