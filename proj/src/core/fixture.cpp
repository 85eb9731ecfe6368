#include "fixture.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "errors.hpp"

namespace bariflex::sim {
namespace {

namespace fs = std::filesystem;

FingerKind finger_from_name(const std::string& s) {
  if (s == "bariflex") return FingerKind::bariflex;
  if (s == "rigid") return FingerKind::rigid;
  if (s == "finray") return FingerKind::finray;
  throw ConfigError("unknown finger kind '" + s + "'");
}

ProbeMode probe_from_name(const std::string& s) {
  if (s == "underside") return ProbeMode::underside;
  if (s == "face") return ProbeMode::face;
  throw ConfigError("unknown probe mode '" + s + "'");
}

// Franka-hand stand-in: same linkage and motor, non-back-drivable friction
// and enough torque for the 70 N jaw force over the whole stroke.
actuation::MotorModel franka_motor() {
  actuation::MotorModel m;
  m.coulomb_friction *= 100.0;
  m.torque_limit = 3.5;
  return m;
}

}  // namespace

std::string finger_kind_name(FingerKind k) {
  switch (k) {
    case FingerKind::bariflex: return "bariflex";
    case FingerKind::rigid: return "rigid";
    case FingerKind::finray: return "finray";
  }
  return "?";
}

std::string probe_mode_name(ProbeMode m) { return m == ProbeMode::underside ? "underside" : "face"; }

const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names = {"bariflex", "rigid_baseline", "finray87", "finray95"};
  return names;
}

void GripperFixture::validate() const {
  const auto& names = fixture_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("fixture name must be one of bariflex, rigid_baseline, finray87, finray95; got '" + name + "'");
  }
  geometry.validate();
  motor.validate();
  if (has_finray()) build_finray(finray).validate();
  if (!(pad_length >= 0.0) || (has_pad() && pad_length <= 0.0)) throw ConfigError("pad_length must be > 0");
  if (!(force_limit > 0.0)) throw ConfigError("force_limit must be > 0");
  if (!(probe_lever > 0.0)) throw ConfigError("probe_lever must be > 0");
  if (!(spring.stiffness > 0.0)) throw ConfigError("spring stiffness must be > 0");
  if (!std::isfinite(grasp_height)) throw ConfigError("grasp_height must be finite");
}

GripperFixture builtin_fixture(const std::string& name) {
  GripperFixture f;
  f.name = name;
  f.geometry = linkage::default_geometry();
  if (name == "bariflex") {
    f.finger = FingerKind::bariflex;
    // Inner Fin-Ray: shorter than the baseline fingers, walls thinned in
    // proportion.
    f.finray.length = 0.060;
    f.finray.beam_thickness = 0.003;
    f.finray.crossbeam_thickness = 0.0025;
    f.finray.material = elastics::Material::TPU95A;
    f.spring.stiffness = 1.75;
    f.probe_mode = ProbeMode::underside;
    f.force_limit = 11.0;
    f.grasp_height = 0.080;
  } else if (name == "rigid_baseline") {
    f.finger = FingerKind::rigid;
    f.motor = franka_motor();
    f.probe_mode = ProbeMode::face;
    f.force_limit = 70.0;
    f.grasp_height = 0.010;
  } else if (name == "finray87" || name == "finray95") {
    f.finger = FingerKind::finray;
    f.motor = franka_motor();
    f.finray.length = 0.090;
    f.finray.material = name == "finray87" ? elastics::Material::TPU87A : elastics::Material::TPU95A;
    f.finray.modulus_scale = name == "finray87" ? 1.5 : 1.0;
    f.pad_length = 0.0;
    f.probe_mode = ProbeMode::face;
    f.force_limit = 70.0;
    f.grasp_height = 0.055;
  } else {
    throw ConfigError("unknown fixture '" + name + "'");
  }
  return f;
}

GripperFixture load_fixture(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  const fs::path dir = fs::path(path).parent_path();
  auto sibling = [&](const std::string& key) { return KeyValueFile::load((dir / kv.text(key)).string()); };

  GripperFixture f;
  f.name = kv.text("name");
  f.finger = finger_from_name(kv.text("finger"));
  f.geometry = linkage::geometry_from_config(sibling("geometry"));
  f.motor = actuation::motor_from_config(sibling("motor"));
  if (kv.has("finray")) f.finray = elastics::finray_design_from_config(sibling("finray"));
  f.spring.stiffness = kv.number("spring_stiffness");
  f.spring.rest_angle = kv.number_or("spring_rest_deg", 0.0) * kPi / 180.0;
  f.spring.stopper_angle = kv.number_or("spring_stopper_deg", 0.0) * kPi / 180.0;
  f.pad_length = kv.number("pad_length");
  f.force_limit = kv.number("force_limit");
  f.probe_mode = probe_from_name(kv.text("probe_mode"));
  f.probe_lever = kv.number("probe_lever");
  f.grasp_height = kv.number("grasp_height");
  try {
    f.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (f.has_finray() && !kv.has("finray")) throw ConfigError(path + ": missing key 'finray'");
  return f;
}

void save_fixture(const GripperFixture& f, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  write_text_file((d / "default_geometry.cfg").string(), linkage::geometry_to_config(f.geometry).dump());
  const std::string motor_file = "motor_" + f.name + ".cfg";
  write_text_file((d / motor_file).string(), actuation::motor_to_config(f.motor).dump());

  KeyValueFile kv;
  kv.set("name", f.name);
  kv.set("finger", finger_kind_name(f.finger));
  kv.set("geometry", std::string("default_geometry.cfg"));
  kv.set("motor", motor_file);
  if (f.has_finray()) {
    const std::string finray_file = "finray_" + f.name + ".cfg";
    write_text_file((d / finray_file).string(), elastics::finray_design_to_config(f.finray).dump());
    kv.set("finray", finray_file);
  }
  kv.set("spring_stiffness", f.spring.stiffness);
  kv.set("spring_rest_deg", f.spring.rest_angle * 180.0 / kPi);
  kv.set("spring_stopper_deg", f.spring.stopper_angle * 180.0 / kPi);
  kv.set("pad_length", f.pad_length);
  kv.set("force_limit", f.force_limit);
  kv.set("probe_mode", probe_mode_name(f.probe_mode));
  kv.set("probe_lever", f.probe_lever);
  kv.set("grasp_height", f.grasp_height);
  write_text_file((d / (f.name + ".fixture")).string(), kv.dump());
}

GripperFixture resolve_fixture(const std::string& spec, const std::string& fixture_dir) {
  const std::string name = spec == "default" ? "bariflex" : spec;
  if (fs::is_regular_file(name)) return load_fixture(name);
  if (!fixture_dir.empty()) {
    const fs::path p = fs::path(fixture_dir) / (name + ".fixture");
    if (fs::is_regular_file(p)) return load_fixture(p.string());
  }
  const auto& names = fixture_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return builtin_fixture(name);
  throw ConfigError("fixture not found: '" + spec + "'");
}

// Objects -------------------------------------------------------------------

contact::ObjectShape2D make_cube(double side, double mass, double friction) {
  return contact::make_rectangle("cube", side, side, mass, friction);
}

std::vector<contact::ObjectShape2D> default_objects() {
  using namespace contact;
  const double mu = 0.4;
  std::vector<ObjectShape2D> out;
  out.push_back(make_circle("pringles", 0.038, 0.205, mu));
  out.push_back(make_rounded_rectangle("mustard", 0.064, 0.090, 0.012, 0.603, mu));
  // Hull of a handle under a body that overhangs to one side; the motor
  // at the top carries the centre of mass.
  const std::vector<Vec2> drill_outline = {Vec2(-0.020, -0.070), Vec2(0.020, -0.070), Vec2(0.060, 0.0),
                                           Vec2(0.060, 0.045),   Vec2(-0.030, 0.045), Vec2(-0.030, 0.0)};
  ObjectShape2D drill = make_polygon("drill", drill_outline, 0.895, mu);
  drill.center_of_mass = Vec2(0.0, 0.030) - (drill_outline[0] - drill.vertices[0]);
  out.push_back(drill);
  out.push_back(make_rectangle("knife", 0.015, 0.200, 0.032, mu));
  out.push_back(make_rectangle("gelatin", 0.028, 0.085, 0.097, mu));
  return out;
}

KeyValueFile objects_to_config(const std::vector<contact::ObjectShape2D>& objects) {
  KeyValueFile kv;
  std::string names;
  for (const auto& o : objects) names += (names.empty() ? "" : ", ") + o.name;
  kv.set("objects", names);
  for (const auto& o : objects) {
    const std::string p = o.name + ".";
    if (o.kind == contact::ShapeKind::circle) {
      kv.set(p + "shape", std::string("circle"));
      kv.set(p + "radius", o.radius);
    } else {
      kv.set(p + "shape", std::string("polygon"));
      std::vector<double> xy;
      for (const Vec2& v : o.vertices) {
        xy.push_back(v.x());
        xy.push_back(v.y());
      }
      kv.set(p + "vertices", xy);
    }
    kv.set(p + "mass", o.mass);
    kv.set(p + "friction", o.friction_coefficient);
    kv.set(p + "orientation_deg", o.canonical_orientation * 180.0 / kPi);
    kv.set(p + "com", std::vector<double>{o.center_of_mass.x(), o.center_of_mass.y()});
  }
  return kv;
}

std::vector<contact::ObjectShape2D> load_objects(const std::string& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  std::vector<contact::ObjectShape2D> out;
  std::string list = kv.text("objects");
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string::npos) comma = list.size();
    std::string name = list.substr(pos, comma - pos);
    name.erase(0, name.find_first_not_of(' '));
    name.erase(name.find_last_not_of(' ') + 1);
    pos = comma + 1;
    if (name.empty()) continue;

    const std::string p = name + ".";
    contact::ObjectShape2D o;
    o.name = name;
    const std::string shape = kv.text(p + "shape");
    if (shape == "circle") {
      o.kind = contact::ShapeKind::circle;
      o.radius = kv.number(p + "radius");
    } else if (shape == "polygon") {
      o.kind = contact::ShapeKind::convex_polygon;
      const auto xy = kv.numbers(p + "vertices");
      if (xy.size() % 2 != 0) throw ConfigError(path + ": '" + p + "vertices' needs x, y pairs");
      for (std::size_t i = 0; i < xy.size(); i += 2) o.vertices.emplace_back(xy[i], xy[i + 1]);
    } else {
      throw ConfigError(path + ": unknown shape '" + shape + "' for " + name);
    }
    o.mass = kv.number(p + "mass");
    o.friction_coefficient = kv.number(p + "friction");
    o.canonical_orientation = kv.number_or(p + "orientation_deg", 0.0) * kPi / 180.0;
    if (kv.has(p + "com")) {
      const auto c = kv.numbers(p + "com");
      if (c.size() != 2) throw ConfigError(path + ": '" + p + "com' needs two numbers");
      o.center_of_mass = Vec2(c[0], c[1]);
    }
    try {
      o.validate();
    } catch (const Error& e) {
      throw ConfigError(path + ": object " + name + ": " + e.what());
    }
    out.push_back(std::move(o));
  }
  if (out.empty()) throw ConfigError(path + ": no objects listed");
  return out;
}

}  // namespace bariflex::sim
