#include "elastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "errors.hpp"

namespace bariflex::elastics {
namespace {

std::vector<double> piece_lengths(double length, int n) {
  const double l = length / n;
  std::vector<double> out(n + 1, l);
  out.front() = 0.5 * l;
  out.back() = 0.5 * l;
  return out;
}

// Positions of one chain: base, one node per joint, tip.
void chain_nodes(const Vec2& base, double rest_angle, const std::vector<double>& pieces, const double* rotations,
                 std::vector<Vec2>& out) {
  Vec2 p = base;
  out.push_back(p);
  double angle = rest_angle;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (i > 0) angle += rotations[i - 1];
    p += pieces[i] * Vec2(std::cos(angle), std::sin(angle));
    out.push_back(p);
  }
}

struct Evaluation {
  double energy = 0.0;
  double elastic = 0.0;
  Eigen::VectorXd gradient;
  std::vector<Vec2> nodes;
};

struct Layout {
  int n_front = 0;  // joints on the front beam
  int n_back = 0;
  bool has_pin = false;
  int dofs() const { return n_front + n_back + (has_pin ? 1 : 0); }
  int pin_index() const { return n_front + n_back; }
};

Layout layout_of(const FinRayFinger& f) {
  Layout l;
  l.n_front = static_cast<int>(f.front_joint_stiffness.size());
  l.n_back = f.design.back_beam ? static_cast<int>(f.back_joint_stiffness.size()) : 0;
  l.has_pin = f.design.back_beam;
  return l;
}

std::vector<Vec2> nodes_of(const FinRayFinger& f, const Layout& lay, const Eigen::VectorXd& q) {
  std::vector<Vec2> nodes;
  nodes.reserve(f.n_nodes());
  chain_nodes(Vec2::Zero(), f.front_rest_angle, f.front_segment_lengths, q.data(), nodes);
  if (lay.n_back > 0) {
    const double pin = q(lay.pin_index());
    chain_nodes(Vec2(-f.design.base_width, pin), f.back_rest_angle, f.back_segment_lengths, q.data() + lay.n_front,
                nodes);
  }
  return nodes;
}

// Contact samples along the front face: fraction t on piece i.
struct SamplePoint {
  int a = 0;
  int b = 0;
  double t = 0.0;
};

std::vector<SamplePoint> face_samples(const FinRayFinger& f, int per_piece) {
  std::vector<SamplePoint> out;
  const int pieces = static_cast<int>(f.front_segment_lengths.size());
  for (int i = 0; i < pieces; ++i) {
    for (int k = 0; k < per_piece; ++k) out.push_back({i, i + 1, static_cast<double>(k) / per_piece});
  }
  out.push_back({pieces, pieces, 0.0});
  return out;
}

using Mat2 = Eigen::Matrix2d;

Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

// Energy, generalised gradient and (optionally) the exact Hessian. Every
// position-dependent term reports its node force -dE/dp and its Hessian in
// node space; the chain kinematics map both to joint coordinates.
Evaluation evaluate(const FinRayFinger& f, const Layout& lay, const FinRayProblem& prob, const SolveOptions& opt,
                    const Eigen::VectorXd& q, Eigen::MatrixXd* hessian = nullptr) {
  Evaluation ev;
  ev.nodes = nodes_of(f, lay, q);
  const int nf = f.n_front_nodes();
  const int nn = static_cast<int>(ev.nodes.size());
  const int nd = lay.dofs();
  std::vector<Vec2> force(nn, Vec2::Zero());
  Eigen::MatrixXd kp;  // node-space Hessian, 2 nn x 2 nn
  if (hessian) kp = Eigen::MatrixXd::Zero(2 * nn, 2 * nn);
  auto add_block = [&](int i, int j, const Mat2& m) { kp.block<2, 2>(2 * i, 2 * j) += m; };
  auto add_pair = [&](int a, int b, const Mat2& m) {
    add_block(a, a, m);
    add_block(b, b, m);
    add_block(a, b, -m);
    add_block(b, a, -m);
  };

  // Wall direction at a joint node is the mean of its two pieces: dwall/dq = w.
  auto wall_weights = [&](int joint, int dof0) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(nd);
    for (int k = 0; k < joint; ++k) w(dof0 + k) = 1.0;
    w(dof0 + joint) = 0.5;
    return w;
  };
  struct RibTerm {
    int a, b;
    Vec2 grad_theta;  // d(rib angle)/d(p_b); -grad for p_a
    Eigen::VectorXd wa, wb;
    double ka, kb;    // stiffness * angle error
    double k;
  };
  std::vector<RibTerm> ribs;

  double e = 0.0;
  for (int j = 0; j < lay.n_front; ++j) e += 0.5 * f.front_joint_stiffness[j] * q(j) * q(j);
  for (int j = 0; j < lay.n_back; ++j) e += 0.5 * f.back_joint_stiffness[j] * q(lay.n_front + j) * q(lay.n_front + j);

  if (lay.n_back > 0) {
    for (const Crossbeam& cb : f.crossbeams) {
      const int a = cb.front_node, b = nf + cb.back_node;
      const Vec2 d = ev.nodes[b] - ev.nodes[a];
      const double len = d.norm();
      const double stretch = len - cb.rest_length;
      e += 0.5 * cb.stiffness * stretch * stretch;
      const Vec2 u = d / len;
      force[a] += cb.stiffness * stretch * u;
      force[b] -= cb.stiffness * stretch * u;
      if (hessian) {
        const Mat2 uu = u * u.transpose();
        add_pair(a, b, cb.stiffness * (uu + (stretch / len) * (Mat2::Identity() - uu)));
      }

      // Rib ends are fused to the walls: bending springs on the relative angle.
      const double rib = std::atan2(d.y(), d.x());
      const int ja = cb.front_node - 1, jb = cb.back_node - 1;
      double wall_a = f.front_rest_angle + 0.5 * q(ja);
      for (int k = 0; k < ja; ++k) wall_a += q(k);
      double wall_b = f.back_rest_angle + 0.5 * q(lay.n_front + jb);
      for (int k = 0; k < jb; ++k) wall_b += q(lay.n_front + k);
      const double da = std::remainder(rib - wall_a - cb.rest_front_angle, 2 * kPi);
      const double db = std::remainder(rib - wall_b - cb.rest_back_angle, 2 * kPi);
      e += 0.5 * cb.end_stiffness * (da * da + db * db);
      const double r2 = d.squaredNorm();
      const Vec2 gt = perp(d) / r2;
      const double t = cb.end_stiffness * (da + db);
      force[a] += t * gt;
      force[b] -= t * gt;
      RibTerm rt{a, b, gt, wall_weights(ja, 0), wall_weights(jb, lay.n_front), cb.end_stiffness * da,
                 cb.end_stiffness * db, cb.end_stiffness};
      if (hessian) {
        // d2(theta)/dd2 for theta = atan2(dy, dx).
        Mat2 h2;
        const double dx = d.x(), dy = d.y();
        h2 << 2 * dx * dy, dy * dy - dx * dx, dy * dy - dx * dx, -2 * dx * dy;
        h2 /= r2 * r2;
        add_pair(a, b, 2.0 * cb.end_stiffness * gt * gt.transpose() + t * h2);
      }
      ribs.push_back(std::move(rt));
    }
    const double pin = q(lay.pin_index());
    e += 0.5 * f.pin_seat_stiffness * pin * pin;
    const int apex_f = nf - 1, apex_b = nn - 1;
    const Vec2 gap = ev.nodes[apex_b] - ev.nodes[apex_f];
    e += 0.5 * f.apex_stiffness * gap.squaredNorm();
    force[apex_f] += f.apex_stiffness * gap;
    force[apex_b] -= f.apex_stiffness * gap;
    if (hessian) add_pair(apex_f, apex_b, f.apex_stiffness * Mat2::Identity());
  }
  ev.elastic = e;

  for (const NodePusher& p : prob.pushers) {
    const double pen = (p.anchor - ev.nodes[p.node]).dot(p.direction);
    if (pen > 0) {
      e += 0.5 * p.stiffness * pen * pen;
      force[p.node] += p.stiffness * pen * p.direction;
      if (hessian) add_block(p.node, p.node, p.stiffness * p.direction * p.direction.transpose());
    }
  }
  if (prob.object != nullptr) {
    const bool round = prob.object->kind == contact::ShapeKind::circle;
    for (const SamplePoint& s : face_samples(f, opt.contact_samples_per_segment)) {
      const Vec2 x = (1.0 - s.t) * ev.nodes[s.a] + s.t * ev.nodes[s.b];
      const SurfaceQuery sq = prob.object->query(prob.object_pose, x);
      if (sq.depth > 0) {
        const double k = opt.contact_stiffness;
        e += 0.5 * k * sq.depth * sq.depth;
        const Vec2 fc = k * sq.depth * sq.normal;
        force[s.a] += (1.0 - s.t) * fc;
        force[s.b] += s.t * fc;
        if (hessian) {
          Mat2 hx = k * sq.normal * sq.normal.transpose();
          if (round) {
            const double rx = (x - prob.object_pose.translation).norm();
            if (rx > 1e-12) hx -= k * sq.depth / rx * (Mat2::Identity() - sq.normal * sq.normal.transpose());
          }
          const double wa = 1.0 - s.t, wb = s.t;
          add_block(s.a, s.a, wa * wa * hx);
          if (s.b != s.a) {
            add_block(s.b, s.b, wb * wb * hx);
            add_block(s.a, s.b, wa * wb * hx);
            add_block(s.b, s.a, wa * wb * hx);
          } else {
            add_block(s.a, s.a, (2 * wa * wb + wb * wb) * hx);
          }
        }
      }
    }
  }
  for (const NodeLoad& l : prob.loads) {
    e -= l.force.dot(ev.nodes[l.node]);
    force[l.node] += l.force;
  }
  ev.energy = e;

  // Node Jacobian: rotating joint j swings every node distal to its pivot;
  // the pin slides the whole back beam along +y.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * nn, nd);
  auto chain_jacobian = [&](int first_node, int n_joints, int dof0) {
    const int tip = first_node + n_joints + 1;
    for (int j = 0; j < n_joints; ++j) {
      const Vec2 c = ev.nodes[first_node + 1 + j];
      for (int k = first_node + 2 + j; k <= tip; ++k) jac.block<2, 1>(2 * k, dof0 + j) = perp(ev.nodes[k] - c);
    }
  };
  chain_jacobian(0, lay.n_front, 0);
  if (lay.n_back > 0) {
    chain_jacobian(nf, lay.n_back, lay.n_front);
    for (int k = nf; k < nn; ++k) jac(2 * k + 1, lay.pin_index()) = 1.0;
  }

  Eigen::VectorXd fvec(2 * nn);
  for (int k = 0; k < nn; ++k) fvec.segment<2>(2 * k) = force[k];
  ev.gradient = -jac.transpose() * fvec;
  for (int j = 0; j < lay.n_front; ++j) ev.gradient(j) += f.front_joint_stiffness[j] * q(j);
  for (int j = 0; j < lay.n_back; ++j) ev.gradient(lay.n_front + j) += f.back_joint_stiffness[j] * q(lay.n_front + j);
  if (lay.has_pin) ev.gradient(lay.pin_index()) += f.pin_seat_stiffness * q(lay.pin_index());
  for (const RibTerm& r : ribs) ev.gradient += -r.ka * r.wa - r.kb * r.wb;

  if (hessian) {
    Eigen::MatrixXd h = jac.transpose() * kp * jac;
    // Curvature of the kinematics: d2p_k/dq_i dq_j = -(p_k - c_max(i,j)).
    auto chain_geometric = [&](int first_node, int n_joints, int dof0) {
      const int tip = first_node + n_joints + 1;
      for (int j = 0; j < n_joints; ++j) {
        const Vec2 c = ev.nodes[first_node + 1 + j];
        double s = 0.0;
        for (int k = first_node + 2 + j; k <= tip; ++k) s += force[k].dot(ev.nodes[k] - c);
        for (int i = 0; i <= j; ++i) {
          h(dof0 + i, dof0 + j) += s;
          if (i != j) h(dof0 + j, dof0 + i) += s;
        }
      }
    };
    chain_geometric(0, lay.n_front, 0);
    for (int j = 0; j < lay.n_front; ++j) h(j, j) += f.front_joint_stiffness[j];
    if (lay.n_back > 0) {
      chain_geometric(nf, lay.n_back, lay.n_front);
      for (int j = 0; j < lay.n_back; ++j) h(lay.n_front + j, lay.n_front + j) += f.back_joint_stiffness[j];
      h(lay.pin_index(), lay.pin_index()) += f.pin_seat_stiffness;
    }
    for (const RibTerm& r : ribs) {
      // d(rib angle)/dq, then the cross terms with the linear wall angles.
      Eigen::VectorXd jt = jac.block(2 * r.b, 0, 2, nd).transpose() * r.grad_theta -
                           jac.block(2 * r.a, 0, 2, nd).transpose() * r.grad_theta;
      h += r.k * (r.wa * r.wa.transpose() + r.wb * r.wb.transpose());
      h -= r.k * (jt * (r.wa + r.wb).transpose() + (r.wa + r.wb) * jt.transpose());
    }
    *hessian = 0.5 * (h + h.transpose());
  }
  return ev;
}

Eigen::MatrixXd exact_hessian(const FinRayFinger& f, const Layout& lay, const FinRayProblem& prob,
                              const SolveOptions& opt, const Eigen::VectorXd& q) {
  Eigen::MatrixXd h;
  evaluate(f, lay, prob, opt, q, &h);
  return h;
}

Eigen::VectorXd pack(const FinRayFinger& f, const Layout& lay, const FinRayDeflection& d) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(lay.dofs());
  for (int j = 0; j < lay.n_front && j < static_cast<int>(d.front_rotations.size()); ++j) q(j) = d.front_rotations[j];
  for (int j = 0; j < lay.n_back && j < static_cast<int>(d.back_rotations.size()); ++j)
    q(lay.n_front + j) = d.back_rotations[j];
  if (lay.has_pin) q(lay.pin_index()) = std::clamp(d.pin_slide_position, f.design.pin_slide_min, f.design.pin_slide_max);
  return q;
}

FinRayDeflection unpack(const Layout& lay, const Eigen::VectorXd& q, const Evaluation& ev) {
  FinRayDeflection d;
  d.front_rotations.assign(q.data(), q.data() + lay.n_front);
  d.back_rotations.assign(q.data() + lay.n_front, q.data() + lay.n_front + lay.n_back);
  d.pin_slide_position = lay.has_pin ? q(lay.pin_index()) : 0.0;
  d.deformed_node_positions = ev.nodes;
  d.elastic_energy = ev.elastic;
  return d;
}

// Free-set mask: the pin is fixed when it sits on a stop and the energy
// gradient pushes it further out.
std::vector<bool> free_mask(const FinRayFinger& f, const Layout& lay, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& g) {
  std::vector<bool> free(lay.dofs(), true);
  if (lay.has_pin) {
    const double s = q(lay.pin_index());
    const double gs = g(lay.pin_index());
    const double eps = 1e-13;
    if ((s <= f.design.pin_slide_min + eps && gs > 0) || (s >= f.design.pin_slide_max - eps && gs < 0)) {
      free[lay.pin_index()] = false;
    }
  }
  return free;
}

}  // namespace

double nominal_modulus(Material m) { return m == Material::TPU95A ? 26e6 : 12e6; }

std::string material_name(Material m) { return m == Material::TPU95A ? "TPU95A" : "TPU87A"; }

Material material_from_name(const std::string& name) {
  if (name == "TPU95A") return Material::TPU95A;
  if (name == "TPU87A") return Material::TPU87A;
  throw ConfigError("unknown material '" + name + "' (expected TPU87A or TPU95A)");
}

int FinRayFinger::n_dofs() const { return layout_of(*this).dofs(); }

void FinRayFinger::validate() const {
  if (design.n_segments < 1) throw InvalidArgument("Fin-Ray needs at least one segment");
  for (double k : front_joint_stiffness)
    if (!(k > 0)) throw InvalidArgument("joint stiffness must be positive");
  for (double k : back_joint_stiffness)
    if (!(k > 0)) throw InvalidArgument("joint stiffness must be positive");
  for (const Crossbeam& c : crossbeams)
    if (!(c.stiffness > 0)) throw InvalidArgument("crossbeam stiffness must be positive");
  if (!(design.pin_slide_min <= 0.0 && design.pin_slide_max >= 0.0)) {
    throw InvalidArgument("pin slide range must contain the rest position");
  }
}

FinRayFinger build_finray(const FinRayDesign& d) {
  if (d.n_segments < 1 || !(d.length > 0 && d.base_width > 0 && d.depth > 0 && d.beam_thickness > 0 &&
                            d.crossbeam_thickness > 0 && d.modulus_scale > 0)) {
    throw InvalidArgument("Fin-Ray design parameters must be positive");
  }
  FinRayFinger f;
  f.design = d;
  const double e = nominal_modulus(d.material) * d.modulus_scale;
  const double inertia = d.depth * std::pow(d.beam_thickness, 3) / 12.0;

  const Vec2 apex(d.apex_offset, d.length);
  const Vec2 back_base(-d.base_width, 0.0);
  const double front_len = apex.norm();
  const double back_len = (apex - back_base).norm();
  f.front_rest_angle = std::atan2(apex.y(), apex.x());
  f.back_rest_angle = std::atan2(apex.y() - back_base.y(), apex.x() - back_base.x());
  f.front_segment_lengths = piece_lengths(front_len, d.n_segments);
  f.front_joint_stiffness.assign(d.n_segments, e * inertia / (front_len / d.n_segments));
  if (d.back_beam) {
    f.back_segment_lengths = piece_lengths(back_len, d.n_segments);
    f.back_joint_stiffness.assign(d.n_segments, e * inertia / (back_len / d.n_segments));
    f.pin_seat_stiffness = d.pin_seat_factor * e * d.depth * d.beam_thickness / d.length;
    f.apex_stiffness = 100.0 * e * d.depth * d.beam_thickness / (front_len / d.n_segments);

    std::vector<Vec2> rest;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * d.n_segments + 1);
    chain_nodes(Vec2::Zero(), f.front_rest_angle, f.front_segment_lengths, zero.data(), rest);
    std::vector<Vec2> back_rest;
    chain_nodes(back_base, f.back_rest_angle, f.back_segment_lengths, zero.data(), back_rest);
    // The joint next to the apex is left free: a rib there would be a stub.
    const int count = std::clamp(d.crossbeam_count, 0, d.n_segments - 1);
    for (int i = 0; i < count; ++i) {
      const int joint = count == 1 ? 0 : static_cast<int>(std::lround(double(i) * (d.n_segments - 2) / (count - 1)));
      Crossbeam cb;
      cb.front_node = joint + 1;
      cb.back_node = joint + 1;
      cb.rest_length = (back_rest[cb.back_node] - rest[cb.front_node]).norm();
      cb.stiffness = e * d.depth * d.crossbeam_thickness / cb.rest_length;
      cb.end_stiffness = 4.0 * e * d.depth * std::pow(d.crossbeam_thickness, 3) / 12.0 / cb.rest_length;
      const Vec2 rib = back_rest[cb.back_node] - rest[cb.front_node];
      const double rib_angle = std::atan2(rib.y(), rib.x());
      cb.rest_front_angle = std::remainder(rib_angle - f.front_rest_angle, 2 * kPi);
      cb.rest_back_angle = std::remainder(rib_angle - f.back_rest_angle, 2 * kPi);
      f.crossbeams.push_back(cb);
    }
  }
  f.validate();
  return f;
}

FinRayDesign finray_design_from_config(const KeyValueFile& kv) {
  FinRayDesign d;
  d.n_segments = static_cast<int>(kv.integer("n_segments"));
  d.length = kv.number("length");
  d.base_width = kv.number("base_width");
  d.apex_offset = kv.number("apex_offset");
  d.depth = kv.number("depth");
  d.beam_thickness = kv.number("beam_thickness");
  d.crossbeam_thickness = kv.number("crossbeam_thickness");
  d.crossbeam_count = static_cast<int>(kv.integer("crossbeam_count"));
  d.back_beam = kv.text("back_beam") == "true";
  d.material = material_from_name(kv.text("material"));
  d.modulus_scale = kv.number("modulus_scale");
  d.pin_slide_min = kv.number("pin_slide_min");
  d.pin_slide_max = kv.number("pin_slide_max");
  d.pin_seat_factor = kv.number("pin_seat_factor");
  return d;
}

KeyValueFile finray_design_to_config(const FinRayDesign& d) {
  KeyValueFile kv;
  kv.set("n_segments", static_cast<double>(d.n_segments));
  kv.set("length", d.length);
  kv.set("base_width", d.base_width);
  kv.set("apex_offset", d.apex_offset);
  kv.set("depth", d.depth);
  kv.set("beam_thickness", d.beam_thickness);
  kv.set("crossbeam_thickness", d.crossbeam_thickness);
  kv.set("crossbeam_count", static_cast<double>(d.crossbeam_count));
  kv.set("back_beam", std::string(d.back_beam ? "true" : "false"));
  kv.set("material", material_name(d.material));
  kv.set("modulus_scale", d.modulus_scale);
  kv.set("pin_slide_min", d.pin_slide_min);
  kv.set("pin_slide_max", d.pin_slide_max);
  kv.set("pin_seat_factor", d.pin_seat_factor);
  return kv;
}

std::vector<Vec2> finray_nodes(const FinRayFinger& f, const std::vector<double>& front, const std::vector<double>& back,
                               double pin) {
  const Layout lay = layout_of(f);
  FinRayDeflection d;
  d.front_rotations = front;
  d.back_rotations = back;
  d.pin_slide_position = pin;
  return nodes_of(f, lay, pack(f, lay, d));
}

FinRayDeflection finray_rest(const FinRayFinger& f) {
  const Layout lay = layout_of(f);
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(lay.dofs());
  FinRayProblem none;
  FinRayDeflection d = unpack(lay, q, evaluate(f, lay, none, SolveOptions{}, q));
  return d;
}

FinRayDeflection finray_solve(const FinRayFinger& f, const FinRayProblem& prob, const FinRayDeflection* warm,
                              const SolveOptions& opt) {
  const Layout lay = layout_of(f);
  for (const NodeLoad& l : prob.loads) {
    if (l.node < 0 || l.node >= f.n_nodes()) throw InvalidArgument("load node index out of range");
    if (!std::isfinite(l.force.x()) || !std::isfinite(l.force.y()) || l.force.norm() > 500.0) {
      throw InvalidArgument("loads must be finite and at most 500 N");
    }
  }
  Eigen::VectorXd q = warm ? pack(f, lay, *warm) : Eigen::VectorXd::Zero(lay.dofs());
  Evaluation ev = evaluate(f, lay, prob, opt, q);
  auto finish = [&](const std::vector<bool>& free, double residual, int iter) {
    FinRayDeflection out = unpack(lay, q, ev);
    out.residual = residual;
    out.iterations = iter;
    if (lay.has_pin) {
      const int p = lay.pin_index();
      out.pin_at_stop = !free[p];
      out.pin_constraint_force = out.pin_at_stop ? -ev.gradient(p) : 0.0;
    }
    return out;
  };

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    const std::vector<bool> free = free_mask(f, lay, q, ev.gradient);
    std::vector<int> idx;
    for (int i = 0; i < lay.dofs(); ++i)
      if (free[i]) idx.push_back(i);
    double residual = 0.0;
    for (int i : idx) residual = std::max(residual, std::abs(ev.gradient(i)));
    if (residual < opt.tolerance) return finish(free, residual, iter);

    const Eigen::MatrixXd h_full = exact_hessian(f, lay, prob, opt, q);
    const int m = static_cast<int>(idx.size());
    Eigen::MatrixXd h(m, m);
    Eigen::VectorXd g(m);
    for (int a = 0; a < m; ++a) {
      g(a) = ev.gradient(idx[a]);
      for (int b = 0; b < m; ++b) h(a, b) = h_full(idx[a], idx[b]);
    }
    // Levenberg shift until the reduced Hessian is positive definite.
    Eigen::VectorXd step;
    double shift = 0.0;
    const double scale = std::max(1e-12, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd hs = h;
      hs.diagonal().array() += shift;
      Eigen::LLT<Eigen::MatrixXd> llt(hs);
      if (llt.info() == Eigen::Success) {
        step = -llt.solve(g);
        break;
      }
      shift = shift == 0.0 ? 1e-10 * scale : shift * 10.0;
    }
    if (step.size() == 0) break;

    auto trial_at = [&](double alpha) {
      Eigen::VectorXd trial = q;
      for (int a = 0; a < m; ++a) trial(idx[a]) += alpha * step(a);
      if (lay.has_pin) {
        trial(lay.pin_index()) = std::clamp(trial(lay.pin_index()), f.design.pin_slide_min, f.design.pin_slide_max);
      }
      return trial;
    };
    const double slope = g.dot(step);
    bool accepted = false;
    if (-slope > 1e-13 * (std::abs(ev.energy) + 1e-12)) {
      // Backtracking on the energy while it still resolves the decrease.
      double alpha = 1.0;
      for (int ls = 0; ls < 40 && !accepted; ++ls, alpha *= 0.5) {
        Eigen::VectorXd trial = trial_at(alpha);
        Evaluation te = evaluate(f, lay, prob, opt, trial);
        if (te.energy <= ev.energy + 1e-4 * alpha * slope) {
          q = trial;
          ev = std::move(te);
          accepted = true;
        }
      }
    } else {
      // Round-off level: the energy no longer discriminates, judge by the residual.
      Eigen::VectorXd trial = trial_at(1.0);
      Evaluation te = evaluate(f, lay, prob, opt, trial);
      const std::vector<bool> free_new = free_mask(f, lay, trial, te.gradient);
      double r_new = 0.0;
      for (int i = 0; i < lay.dofs(); ++i)
        if (free_new[i]) r_new = std::max(r_new, std::abs(te.gradient(i)));
      if (r_new < residual) {
        q = trial;
        ev = std::move(te);
        accepted = true;
      }
    }
    if (!accepted) {
      // Converged as far as double precision allows.
      if (residual < 1e6 * opt.tolerance) {
        return finish(free, residual, iter);
      }
      break;
    }
  }
  throw NoConvergence("Fin-Ray equilibrium did not converge within " + std::to_string(opt.max_iterations) +
                      " iterations");
}

FinRayDeflection finray_equilibrium(const FinRayFinger& f, const std::vector<NodeLoad>& loads, const SolveOptions& opt) {
  FinRayProblem prob;
  prob.loads = loads;
  return finray_solve(f, prob, nullptr, opt);
}

std::vector<ContactSample> finray_contacts(const FinRayFinger& f, const FinRayDeflection& state,
                                           const contact::ObjectShape2D& object, const Pose2& pose_local,
                                           const SolveOptions& opt) {
  std::vector<ContactSample> out;
  const auto& nodes = state.deformed_node_positions;
  for (const SamplePoint& s : face_samples(f, opt.contact_samples_per_segment)) {
    const Vec2 x = (1.0 - s.t) * nodes[s.a] + s.t * nodes[s.b];
    const SurfaceQuery sq = object.query(pose_local, x);
    if (sq.depth > 0) {
      ContactSample c;
      c.position = x;
      c.normal = -sq.normal;
      c.penetration = sq.depth;
      c.normal_force = opt.contact_stiffness * sq.depth;
      c.segment = s.a;
      out.push_back(c);
    }
  }
  return out;
}

WrapResult finray_contact_wrap(const FinRayFinger& f, const contact::ObjectShape2D& object, const Pose2& object_pose,
                               const Pose2& base_pose, const FinRayDeflection* warm, const SolveOptions& opt) {
  object.validate();
  if (!std::isfinite(base_pose.angle) || !base_pose.translation.allFinite()) {
    throw InvalidArgument("base pose must be finite");
  }
  // Object pose expressed in the finger frame.
  Pose2 local;
  local.angle = object_pose.angle - base_pose.angle;
  local.translation = base_pose.inverse_apply(object_pose.translation);
  FinRayProblem prob;
  prob.object = &object;
  prob.object_pose = local;
  WrapResult r;
  r.deflection = finray_solve(f, prob, warm, opt);
  r.contacts = finray_contacts(f, r.deflection, object, local, opt);
  return r;
}

double chain_series_stiffness(const FinRayFinger& f) {
  // Joint j sits at distance d_j from the tip; a tip load F normal to the
  // beam rotates it by F d_j / k_j and moves the tip by F d_j^2 / k_j.
  const auto& pieces = f.front_segment_lengths;
  double compliance = 0.0;
  for (std::size_t j = 0; j < f.front_joint_stiffness.size(); ++j) {
    double d = 0.0;
    for (std::size_t i = j + 1; i < pieces.size(); ++i) d += pieces[i];
    compliance += d * d / f.front_joint_stiffness[j];
  }
  return 1.0 / compliance;
}

double finray_min_hessian_eigenvalue(const FinRayFinger& f, const FinRayProblem& prob, const FinRayDeflection& state,
                                     const SolveOptions& opt) {
  const Layout lay = layout_of(f);
  const Eigen::VectorXd q = pack(f, lay, state);
  const Evaluation ev = evaluate(f, lay, prob, opt, q);
  const std::vector<bool> free = free_mask(f, lay, q, ev.gradient);
  const Eigen::MatrixXd h_full = exact_hessian(f, lay, prob, opt, q);
  std::vector<int> idx;
  for (int i = 0; i < lay.dofs(); ++i)
    if (free[i]) idx.push_back(i);
  Eigen::MatrixXd h(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) h(a, b) = h_full(idx[a], idx[b]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  return es.eigenvalues().minCoeff();
}

SpringResponse fingertip_spring_torque(const FingertipSpring& spring, double angle, double applied_torque) {
  SpringResponse r;
  if (angle > spring.rest_angle) {
    r.angle = angle;
    r.torque = -spring.stiffness * (angle - spring.rest_angle);
    r.stopper_engaged = false;
    return r;
  }
  r.angle = spring.stopper_angle;
  r.torque = 0.0;
  r.stopper_engaged = true;
  r.forwarded_torque = std::min(applied_torque, 0.0);
  return r;
}

}  // namespace bariflex::elastics
