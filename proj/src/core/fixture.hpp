#pragma once

#include <string>
#include <vector>

#include "actuation.hpp"
#include "contact.hpp"
#include "elastics.hpp"
#include "linkage.hpp"

namespace bariflex::sim {

enum class FingerKind { bariflex, rigid, finray };

// How the compliance rig presses the finger: straight up under the fingertip
// pad, or outward into the contact face at the finger tip.
enum class ProbeMode { underside, face };

std::string finger_kind_name(FingerKind k);
std::string probe_mode_name(ProbeMode m);

/// One gripper under test. Both fingers are mirror images of the right
/// finger described here.
struct GripperFixture {
  std::string name;
  FingerKind finger = FingerKind::bariflex;
  linkage::LinkageGeometry geometry;
  actuation::MotorModel motor;
  elastics::FinRayDesign finray;  // inner Fin-Ray (bariflex) or whole finger (finray)
  elastics::FingertipSpring spring;
  double pad_length = 0.020;   // rigid pad above the fingertip point [m]
  double force_limit = 11.0;   // per-finger squeeze cap while grasping [N]
  ProbeMode probe_mode = ProbeMode::underside;
  double probe_lever = 0.05;   // fingertip joint to the probe contact [m]
  double grasp_height = 0.040; // nominal object centre above the fingertip [m]

  bool has_finray() const { return finger != FingerKind::rigid; }
  bool has_pad() const { return finger != FingerKind::finray; }
  void validate() const;
};

const std::vector<std::string>& fixture_names();

/// Built-in definition; throws ConfigError for unknown names.
GripperFixture builtin_fixture(const std::string& name);

/// Bundle file: `name`, `finger`, scalar fields, and `geometry`, `motor`,
/// `finray` entries naming sibling files (relative to the bundle).
GripperFixture load_fixture(const std::string& path);

/// Writes the bundle plus its referenced files into `dir`.
void save_fixture(const GripperFixture& f, const std::string& dir);

/// `spec` is a bundle path, a fixture name, or "default" (= bariflex).
/// Names are looked up as `<dir>/<name>.fixture` first, then built in.
GripperFixture resolve_fixture(const std::string& spec, const std::string& fixture_dir);

// Objects -------------------------------------------------------------------

std::vector<contact::ObjectShape2D> default_objects();

/// Flat file with `<object>.<field>` keys; `objects` lists the names in order.
std::vector<contact::ObjectShape2D> load_objects(const std::string& path);
KeyValueFile objects_to_config(const std::vector<contact::ObjectShape2D>& objects);

contact::ObjectShape2D make_cube(double side, double mass, double friction);

}  // namespace bariflex::sim
