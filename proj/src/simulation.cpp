#include "seatsim/simulation.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace seatsim {

namespace {

// FNV-1a, 64-bit, fed with the exact byte patterns of the numeric fields so
// the hash is reproducible across runs and processes.
class StructureHasher {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 1099511628211ull;
    }
  }
  void add(double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    bytes(&bits, sizeof(bits));
  }
  void add(std::int64_t v) { bytes(&v, sizeof(v)); }
  void add(int v) { add(static_cast<std::int64_t>(v)); }
  void add(const std::string& s) {
    add(static_cast<std::int64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void add(const Vec3& v) {
    for (int i = 0; i < 3; ++i) add(v[i]);
  }
  void add(const Mat3& m) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) add(m(r, c));
  }
  void add(const Pose& p) {
    add(p.R);
    add(p.p);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

void apply_seat(const Model& model, VectorXd& q, VectorXd& u, const ExcitationSignal* excitation,
                double t) {
  if (model.seat_body < 0) return;
  int off = model.tree.dof_offset[model.seat_body];
  for (int axis = 0; axis < 3; ++axis) {
    ExcitationSignal::Sample s;
    if (excitation) s = excitation->eval(axis, t);
    q[off + axis] = model.q0.size() > 0 ? model.q0[off + axis] + s.disp : s.disp;
    u[off + axis] = s.vel;
    q[off + 3 + axis] = model.q0.size() > 0 ? model.q0[off + 3 + axis] : 0.0;
    u[off + 3 + axis] = 0.0;
  }
}

std::vector<PrescribedJoint> prescribed_joints(const Model& model,
                                               const ExcitationSignal* excitation, double t) {
  if (model.seat_body < 0) return {};
  PrescribedJoint pj;
  pj.body = model.seat_body;
  pj.udot = VectorXd::Zero(6);
  if (excitation)
    for (int axis = 0; axis < 3; ++axis) pj.udot[axis] = excitation->eval(axis, t).acc;
  return {pj};
}

// Dynamics of one instant. The seat coordinates of (q, u) are overwritten
// from the prescription before anything is computed, so Runge-Kutta stages
// see the exact prescribed motion at their own stage times.
struct InstantDynamics {
  std::vector<BodyKinematics> kin;
  std::vector<ContactReport> contacts;
  VectorXd qdot, udot;
};

InstantDynamics evaluate_dynamics(const Model& model, VectorXd q, VectorXd u,
                                  const VectorXd& tau_control, const ExcitationSignal* excitation,
                                  double t) {
  apply_seat(model, q, u, excitation, t);
  InstantDynamics out;
  out.kin = compute_kinematics(model.tree, q, u);
  VectorXd tau = assemble_generalized_forces(model.tree, q, u, out.kin, model.elements,
                                             model.gravity, &out.contacts);
  tau += tau_control;
  out.udot = forward_dynamics_aba(model.tree, out.kin, tau, {}, prescribed_joints(model, excitation, t));
  out.qdot = u;
  return out;
}

void check_finite(const Model& model, const SimState& state, double t) {
  for (int i = 0; i < state.q.size(); ++i) {
    if (std::isfinite(state.q[i]) && std::isfinite(state.u[i])) continue;
    throw DivergenceError(coordinate_name(model.tree, i), t);
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

DivergenceError::DivergenceError(std::string channel_, double time_)
    : SimulationError("state diverged at t=" + std::to_string(time_) + " s: coordinate '" +
                      channel_ + "' is not finite"),
      channel(std::move(channel_)),
      time(time_) {}

std::uint64_t model_structure_hash(const Model& model) {
  StructureHasher h;
  h.add(std::string("seatsim.model.v1"));
  h.add(model.tree.body_count());
  for (const SegmentDef& s : model.tree.segments) {
    h.add(s.name);
    h.add(s.mass);
    h.add(s.com);
    h.add(s.inertia_com);
    h.add(s.environment ? 1 : 0);
    h.add(static_cast<std::int64_t>(s.geometry.size()));
    for (const Ellipsoid& e : s.geometry) {
      h.add(e.name);
      h.add(e.semi_axes);
      h.add(e.pose);
    }
    h.add(static_cast<std::int64_t>(s.planes.size()));
    for (const Plane& p : s.planes) {
      h.add(p.name);
      h.add(p.normal);
      h.add(p.offset);
    }
  }
  for (std::size_t i = 0; i < model.tree.joints.size(); ++i) {
    const JointDef& j = model.tree.joints[i];
    h.add(static_cast<int>(j.kind));
    h.add(j.parent);
    h.add(j.child);
    h.add(j.parent_frame);
    h.add(j.child_frame);
    h.add(static_cast<std::int64_t>(j.axes.size()));
    for (const Vec3& a : j.axes) h.add(a);
  }
  h.add(model.gravity);
  h.add(model.seat_body);
  h.add(static_cast<std::int64_t>(model.q0.size()));
  for (int i = 0; i < model.q0.size(); ++i) h.add(model.q0[i]);
  h.add(static_cast<std::int64_t>(model.u0.size()));
  for (int i = 0; i < model.u0.size(); ++i) h.add(model.u0[i]);
  return h.value();
}

SimState initial_state(const Model& model) {
  int n = model.tree.dof();
  if (model.q0.size() != 0 && model.q0.size() != n)
    throw SimulationError("initial coordinates do not match the model DoF count");
  if (model.u0.size() != 0 && model.u0.size() != n)
    throw SimulationError("initial velocities do not match the model DoF count");
  SimState st;
  st.q = model.q0.size() == n ? model.q0 : VectorXd::Zero(n);
  st.u = model.u0.size() == n ? model.u0 : VectorXd::Zero(n);
  st.controllers = model.controllers;
  return st;
}

void advance(const Model& model, SimState& state, const ExcitationSignal* excitation, double h,
             Integrator integrator, StepOutput* out) {
  if (h <= 0.0) throw SimulationError("step size must be positive");
  if (model.seat_body >= 0 && model.tree.joints[model.seat_body].kind != JointKind::kFree6)
    throw SimulationError("the seat body must hang on a free6 joint");

  double t = static_cast<double>(state.step_index) * h;
  apply_seat(model, state.q, state.u, excitation, t);

  // Controllers are discrete: one update per step, torque held over the step.
  VectorXd tau_control = VectorXd::Zero(model.tree.dof());
  if (!state.controllers.dofs.empty())
    tau_control = state.controllers.update(state.q, state.u, h, model.tree.dof());

  InstantDynamics d1 = evaluate_dynamics(model, state.q, state.u, tau_control, excitation, t);

  if (out) {
    out->t = t;
    out->q = state.q;
    out->u = state.u;
    out->body_acc = body_accelerations(model.tree, d1.kin, d1.udot);
    out->contacts = d1.contacts;
    out->udot = d1.udot;
    out->tau_control = tau_control;
    out->kin = d1.kin;
  }

  switch (integrator) {
    case Integrator::kSemiImplicitEuler:
      state.u += h * d1.udot;
      state.q += h * state.u;
      break;
    case Integrator::kRungeKutta4: {
      InstantDynamics d2 = evaluate_dynamics(model, state.q + 0.5 * h * d1.qdot,
                                             state.u + 0.5 * h * d1.udot, tau_control, excitation,
                                             t + 0.5 * h);
      InstantDynamics d3 = evaluate_dynamics(model, state.q + 0.5 * h * d2.qdot,
                                             state.u + 0.5 * h * d2.udot, tau_control, excitation,
                                             t + 0.5 * h);
      InstantDynamics d4 = evaluate_dynamics(model, state.q + h * d3.qdot, state.u + h * d3.udot,
                                             tau_control, excitation, t + h);
      state.q += (h / 6.0) * (d1.qdot + 2.0 * d2.qdot + 2.0 * d3.qdot + d4.qdot);
      state.u += (h / 6.0) * (d1.udot + 2.0 * d2.udot + 2.0 * d3.udot + d4.udot);
      break;
    }
  }

  state.step_index += 1;
  apply_seat(model, state.q, state.u, excitation, static_cast<double>(state.step_index) * h);
  check_finite(model, state, static_cast<double>(state.step_index) * h);
}

int TrajectoryLog::column(const std::string& name) const {
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i] == name) return static_cast<int>(i);
  throw SimulationError("trajectory log has no channel '" + name + "'");
}

std::vector<double> TrajectoryLog::series(const std::string& name) const {
  int c = column(name);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][c];
  return out;
}

void TrajectoryLog::write_csv(std::ostream& os) const {
  std::string line = "t";
  for (const std::string& c : channels) {
    line += ',';
    line += c;
  }
  line += '\n';
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    line.clear();
    append_number(line, times[i]);
    for (double v : rows[i]) {
      line += ',';
      append_number(line, v);
    }
    line += '\n';
    os.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

void save_restart(const RestartSnapshot& snapshot, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = snapshot.format_version;
  j["model_hash"] = snapshot.model_hash;
  j["step_index"] = snapshot.step_index;
  j["step_size"] = snapshot.h;
  j["q"] = std::vector<double>(snapshot.q.data(), snapshot.q.data() + snapshot.q.size());
  j["u"] = std::vector<double>(snapshot.u.data(), snapshot.u.data() + snapshot.u.size());
  j["controller_references"] = snapshot.controller_references;
  j["controller_integrals"] = snapshot.controller_integrals;
  std::ofstream os(path);
  if (!os) throw SimulationError("cannot write restart file '" + path + "'");
  os << j.dump(2) << '\n';
  if (!os.good()) throw SimulationError("failed writing restart file '" + path + "'");
}

RestartSnapshot load_restart(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SimulationError("cannot open restart file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    RestartSnapshot s;
    s.format_version = j.at("format_version").get<int>();
    s.model_hash = j.at("model_hash").get<std::uint64_t>();
    s.step_index = j.at("step_index").get<std::int64_t>();
    s.h = j.at("step_size").get<double>();
    auto q = j.at("q").get<std::vector<double>>();
    auto u = j.at("u").get<std::vector<double>>();
    s.q = Eigen::Map<const VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    s.u = Eigen::Map<const VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
    s.controller_references = j.at("controller_references").get<std::vector<double>>();
    s.controller_integrals = j.at("controller_integrals").get<std::vector<double>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SimulationError("restart file '" + path + "' is not valid: " + e.what());
  }
}

namespace {

struct ChannelFn {
  std::string name;
  std::function<double(const Model&, const StepOutput&)> fn;
};

int coordinate_by_name(const KinematicTree& tree, int body, const std::string& label) {
  int off = tree.dof_offset[body];
  int nd = joint_dof(tree.joints[body].kind);
  std::string want = tree.segments[body].name + "." + label;
  for (int k = 0; k < nd; ++k)
    if (coordinate_name(tree, off + k) == want) return off + k;
  throw SimulationError("joint of '" + tree.segments[body].name + "' has no coordinate '" + label +
                        "'");
}

std::vector<std::string> split_channel(const std::string& name) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = name.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(name.substr(start));
      return parts;
    }
    parts.push_back(name.substr(start, dot - start));
    start = dot + 1;
  }
}

int axis_index(const std::string& s) {
  if (s == "x") return 0;
  if (s == "y") return 1;
  if (s == "z") return 2;
  return -1;
}

ChannelFn resolve_channel(const Model& model, const std::string& name) {
  const KinematicTree& tree = model.tree;
  auto parts = split_channel(name);
  auto bad = [&]() -> SimulationError {
    return SimulationError("unknown channel '" + name + "'");
  };

  if (parts.size() == 3 && (parts[0] == "q" || parts[0] == "u" || parts[0] == "ctrl")) {
    if (!tree.has_body(parts[1])) throw bad();
    int idx;
    try {
      idx = coordinate_by_name(tree, tree.body_index(parts[1]), parts[2]);
    } catch (const SimulationError&) {
      throw bad();
    }
    if (parts[0] == "q")
      return {name, [idx](const Model&, const StepOutput& so) { return so.q[idx]; }};
    if (parts[0] == "u")
      return {name, [idx](const Model&, const StepOutput& so) { return so.u[idx]; }};
    return {name, [idx](const Model&, const StepOutput& so) { return so.tau_control[idx]; }};
  }

  if (parts.size() == 3 && parts[0] == "contact") {
    for (std::size_t i = 0; i < model.elements.contacts.size(); ++i) {
      if (model.elements.contacts[i].name != parts[1]) continue;
      if (parts[2] == "fn")
        return {name,
                [i](const Model&, const StepOutput& so) { return so.contacts[i].normal_force; }};
      if (parts[2] == "depth")
        return {name, [i](const Model&, const StepOutput& so) { return so.contacts[i].depth; }};
      throw bad();
    }
    throw bad();
  }

  if (parts.size() == 3 && tree.has_body(parts[0])) {
    int b = tree.body_index(parts[0]);
    int ax = axis_index(parts[2]);
    if (ax < 0) throw bad();
    const std::string& kind = parts[1];
    if (kind == "pos")
      return {name,
              [b, ax](const Model&, const StepOutput& so) { return so.kin[b].com_world[ax]; }};
    if (kind == "vel")
      return {name, [b, ax](const Model& m, const StepOutput& so) {
                return point_velocity_world(so.kin[b], m.tree.segments[b].com)[ax];
              }};
    if (kind == "acc")
      return {name, [b, ax](const Model& m, const StepOutput& so) {
                return point_acceleration_world(so.kin[b], so.body_acc[b],
                                                m.tree.segments[b].com)[ax];
              }};
    if (kind == "ang")
      return {name, [b, ax](const Model&, const StepOutput& so) {
                return matrix_to_cardan(so.kin[b].X_wb.R)[ax];
              }};
    if (kind == "angvel")
      return {name,
              [b, ax](const Model&, const StepOutput& so) { return so.kin[b].v_world[ax]; }};
    if (kind == "angacc")
      return {name, [b, ax](const Model&, const StepOutput& so) {
                return (so.kin[b].X_wb.R * so.body_acc[b].head<3>())[ax];
              }};
    throw bad();
  }

  throw bad();
}

RestartSnapshot snapshot_of(const Model& model, const SimState& state, double h) {
  RestartSnapshot s;
  s.model_hash = model_structure_hash(model);
  s.step_index = state.step_index;
  s.h = h;
  s.q = state.q;
  s.u = state.u;
  s.controller_references.reserve(state.controllers.dofs.size());
  s.controller_integrals.reserve(state.controllers.dofs.size());
  for (const ControlledDof& d : state.controllers.dofs) {
    s.controller_references.push_back(d.state.reference);
    s.controller_integrals.push_back(d.state.integral);
  }
  return s;
}

std::int64_t steps_of(double seconds, double h, const char* what) {
  double n = seconds / h;
  auto rounded = static_cast<std::int64_t>(std::llround(n));
  if (std::abs(n - static_cast<double>(rounded)) > 1e-6)
    throw SimulationError(std::string(what) + " is not a whole number of steps");
  return rounded;
}

RunOutput run_window(const Model& model, SimState state, const ExcitationSignal* excitation,
                     const RunSettings& cfg, std::int64_t settle_steps, bool fresh_run) {
  std::int64_t total_steps = steps_of(cfg.duration, cfg.h, "run duration");
  if (state.step_index > total_steps)
    throw SimulationError("snapshot lies beyond the end of the run");
  if (cfg.log_stride < 1) throw SimulationError("log stride must be at least 1");

  std::vector<ChannelFn> chans;
  chans.reserve(cfg.channels.size());
  for (const std::string& c : cfg.channels) chans.push_back(resolve_channel(model, c));

  RunOutput out;
  out.log.sample_step = cfg.h * static_cast<double>(cfg.log_stride);
  for (const ChannelFn& c : chans) out.log.channels.push_back(c.name);

  StepOutput so;
  auto loop = [&](std::int64_t from, std::int64_t to) {
    for (std::int64_t k = from; k < to; ++k) {
      bool want_row = (k % cfg.log_stride) == 0;
      advance(model, state, excitation, cfg.h, cfg.integrator, want_row ? &so : nullptr);
      if (!want_row) continue;
      out.log.times.push_back(so.t);
      std::vector<double> row(chans.size());
      for (std::size_t j = 0; j < chans.size(); ++j) row[j] = chans[j].fn(model, so);
      out.log.rows.push_back(std::move(row));
    }
  };

  if (fresh_run) {
    loop(state.step_index, settle_steps);
    // The settled posture becomes the reference the controllers defend.
    if (!state.controllers.dofs.empty()) state.controllers.capture_references(state.q);
    if (cfg.make_snapshot) out.snapshot = snapshot_of(model, state, cfg.h);
  }
  loop(state.step_index, total_steps);
  out.steps = total_steps;
  return out;
}

}  // namespace

RunOutput run(const Model& model, const ExcitationSignal* excitation, const RunSettings& cfg) {
  if (cfg.settle_time < 0.0 || cfg.settle_time > cfg.duration)
    throw SimulationError("settling window must lie inside the run duration");
  std::int64_t settle_steps = steps_of(cfg.settle_time, cfg.h, "settling window");
  SimState state = initial_state(model);
  if (!state.controllers.dofs.empty()) state.controllers.capture_references(state.q);
  return run_window(model, std::move(state), excitation, cfg, settle_steps, true);
}

RunOutput resume(const Model& model, const RestartSnapshot& snapshot,
                 const ExcitationSignal* excitation, const RunSettings& cfg) {
  if (snapshot.format_version != kRestartFormatVersion)
    throw SimulationError("unsupported restart format version");
  if (snapshot.model_hash != model_structure_hash(model))
    throw SimulationError("restart snapshot does not match this model");
  if (snapshot.h != cfg.h)
    throw SimulationError("restart snapshot step size differs from the run settings");
  if (snapshot.q.size() != model.tree.dof() || snapshot.u.size() != model.tree.dof())
    throw SimulationError("restart snapshot state does not match the model DoF count");

  SimState state;
  state.q = snapshot.q;
  state.u = snapshot.u;
  state.step_index = snapshot.step_index;
  state.controllers = model.controllers;
  if (!state.controllers.dofs.empty())
    state.controllers.restore_references(snapshot.controller_references,
                                         snapshot.controller_integrals);
  // Resume enters the excited window directly; the settle point is wherever
  // the snapshot was taken.
  return run_window(model, std::move(state), excitation, cfg, snapshot.step_index, false);
}

}  // namespace seatsim
