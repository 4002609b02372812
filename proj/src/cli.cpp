#include "seatsim/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "seatsim/simulation.hpp"

namespace seatsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_config(const std::string& msg) { throw ConfigError(msg); }
[[noreturn]] void missing(const std::string& msg) { throw DataError(msg); }

// Schema-checked view of one JSON object: getters consume keys, finish()
// rejects whatever was not consumed, and every diagnostic carries the full
// field path.
class Section {
 public:
  Section(const json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_->is_object()) bad_config("config " + path_ + ": expected an object");
  }

  bool present() const { return node_ != nullptr; }

  std::optional<double> opt_number(const char* key) {
    const json* v = take(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) bad_config("config " + at(key) + ": expected a number");
    return v->get<double>();
  }

  double number(const char* key, double def) { return opt_number(key).value_or(def); }

  double positive(const char* key, double def) {
    double v = number(key, def);
    if (!(v > 0.0)) bad_config("config " + at(key) + ": must be positive");
    return v;
  }

  double nonneg(const char* key, double def) {
    double v = number(key, def);
    if (v < 0.0) bad_config("config " + at(key) + ": must not be negative");
    return v;
  }

  int integer(const char* key, int def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_integer()) bad_config("config " + at(key) + ": expected an integer");
    return v->get<int>();
  }

  std::uint64_t uint(const char* key, std::uint64_t def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !v->is_number_integer())
      bad_config("config " + at(key) + ": expected a non-negative integer");
    if (v->is_number_integer() && v->get<std::int64_t>() < 0)
      bad_config("config " + at(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const char* key, bool def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_boolean()) bad_config("config " + at(key) + ": expected true or false");
    return v->get<bool>();
  }

  std::string str(const char* key, const std::string& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_string()) bad_config("config " + at(key) + ": expected a string");
    return v->get<std::string>();
  }

  std::vector<std::string> str_list(const char* key, std::vector<std::string> def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array()) bad_config("config " + at(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) bad_config("config " + at(key) + ": expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Vec3 vec3(const char* key, const Vec3& def) {
    const json* v = take(key);
    if (!v) return def;
    if (!v->is_array() || v->size() != 3 || !(*v)[0].is_number() || !(*v)[1].is_number() ||
        !(*v)[2].is_number())
      bad_config("config " + at(key) + ": expected [x, y, z]");
    return Vec3((*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>());
  }

  /// Child object; nullptr when absent.
  const json* child(const char* key) { return take(key); }

  std::string at(const char* key) const { return path_ + "/" + key; }

  void finish() {
    if (!node_) return;
    for (const auto& [key, value] : node_->items())
      if (!seen_.count(key)) bad_config("config: unknown key " + path_ + "/" + key);
  }

 private:
  const json* take(const char* key) {
    if (!node_) return nullptr;
    seen_.insert(key);
    auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  const json* node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<std::string> default_output_channels() {
  return {"pelvis.acc.z", "upper_torso.acc.z", "head.acc.z", "upper_torso.angacc.y",
          "head.angacc.y"};
}

std::vector<std::string> default_logged_channels() {
  return {"seat.acc.z",         "pelvis.acc.z", "upper_torso.acc.z", "head.acc.z",
          "upper_torso.angacc.y", "head.angacc.y", "head.ang.y",      "upper_torso.ang.y",
          "upper_torso.pos.x",  "head.pos.x",   "pelvis.pos.z"};
}

std::vector<ParameterSpec> default_parameters() {
  return {{"stiffness_scale", "/model/stiffness_scale", 0.05, 20.0, true},
          {"damping_scale", "/model/damping_scale", 0.05, 20.0, true},
          {"pan_stiffness", "/seat/pan_stiffness", 5e3, 5e5, true},
          {"pan_damping", "/seat/pan_damping", 50.0, 5e3, true}};
}

}  // namespace

double weight_for_channel(const WeightRule& rule, const std::string& channel) {
  const std::string segment = channel.substr(0, channel.find('.'));
  if (segment == "head" || segment == "neck") return rule.head;
  if (segment == "upper_torso" || segment == "middle_torso" || segment == "lower_torso")
    return rule.trunk;
  if (segment == "pelvis") return rule.pelvis;
  return rule.fallback;
}

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) bad_config("config: top level must be an object");
  RunConfig cfg;
  Section root(&doc, "");

  {
    Section model(root.child("model"), "/model");
    cfg.anthropometry_file = model.str("anthropometry_file", "");
    try {
      cfg.anthro = cfg.anthropometry_file.empty()
                       ? load_anthropometry(default_anthropometry_path())
                       : load_anthropometry(cfg.anthropometry_file);
    } catch (const BodyModelError& e) {
      bad_config("config /model/anthropometry_file: " + std::string(e.what()));
    }
    if (auto v = model.opt_number("total_mass_kg")) cfg.anthro.total_mass = *v;
    if (auto v = model.opt_number("stature_m")) cfg.anthro.stature = *v;
    if (auto v = model.opt_number("sitting_height_m")) cfg.anthro.sitting_height = *v;
    try {
      validate_anthropometry(cfg.anthro);
    } catch (const BodyModelError& e) {
      bad_config("config /model: " + std::string(e.what()));
    }

    cfg.tuning.stiffness_scale = model.positive("stiffness_scale", 1.0);
    cfg.tuning.damping_scale = model.positive("damping_scale", 1.0);

    cfg.tuning.restraints = default_joint_restraints();
    if (const json* restraints = model.child("restraints")) {
      if (!restraints->is_object()) bad_config("config /model/restraints: expected an object");
      for (const auto& [joint, value] : restraints->items()) {
        if (!cfg.tuning.restraints.count(joint))
          bad_config("config /model/restraints: no joint restraint named '" + joint + "'");
        Section entry(&value, "/model/restraints/" + joint);
        RestraintOverride& ov = cfg.tuning.restraints[joint];
        ov.stiffness = entry.vec3("stiffness", ov.stiffness);
        ov.damping = entry.vec3("damping", ov.damping);
        entry.finish();
        for (int i = 0; i < 3; ++i)
          if (ov.stiffness[i] < 0.0 || ov.damping[i] < 0.0)
            bad_config("config /model/restraints/" + joint + ": must not be negative");
      }
    }

    Section controllers(model.child("controllers"), "/model/controllers");
    cfg.tuning.controllers_enabled = controllers.boolean("enabled", true);
    cfg.tuning.controller_settle_target = controllers.positive("settle_target_s", 3.0);
    cfg.tuning.integrator_limit = controllers.positive("integrator_limit", 6.0);
    controllers.finish();
    model.finish();
  }

  {
    Section seat(root.child("seat"), "/seat");
    cfg.seat.seat_mass = seat.positive("mass_kg", cfg.seat.seat_mass);
    cfg.seat.pan_lift = seat.number("pan_lift", cfg.seat.pan_lift);
    cfg.seat.floor_lift = seat.number("floor_lift", cfg.seat.floor_lift);
    cfg.seat.pan_preload = seat.nonneg("pan_preload", cfg.seat.pan_preload);
    cfg.seat.backrest_clearance = seat.nonneg("backrest_clearance", cfg.seat.backrest_clearance);
    cfg.seat.backrest_angle = seat.number("backrest_angle", cfg.seat.backrest_angle);
    cfg.seat.backrest = seat.boolean("backrest", cfg.seat.backrest);
    cfg.seat.pan_stiffness = seat.positive("pan_stiffness", cfg.seat.pan_stiffness);
    cfg.seat.pan_damping = seat.positive("pan_damping", cfg.seat.pan_damping);
    cfg.seat.floor_stiffness = seat.positive("floor_stiffness", cfg.seat.floor_stiffness);
    cfg.seat.floor_damping = seat.positive("floor_damping", cfg.seat.floor_damping);
    cfg.seat.backrest_stiffness = seat.positive("backrest_stiffness", cfg.seat.backrest_stiffness);
    cfg.seat.backrest_damping = seat.positive("backrest_damping", cfg.seat.backrest_damping);
    cfg.seat.friction_mu = seat.nonneg("friction_mu", cfg.seat.friction_mu);
    seat.finish();
  }

  {
    Section sim(root.child("simulation"), "/simulation");
    cfg.settings.h = sim.positive("step_s", 1e-3);
    double rate = sim.positive("output_rate_hz", 1000.0);
    double stride = 1.0 / (cfg.settings.h * rate);
    cfg.settings.log_stride = static_cast<int>(std::llround(stride));
    if (cfg.settings.log_stride < 1 || std::abs(stride - cfg.settings.log_stride) > 1e-6)
      bad_config("config /simulation/output_rate_hz: must divide the step rate 1/step_s");
    std::string integrator = sim.str("integrator", "semi_implicit_euler");
    if (integrator == "semi_implicit_euler")
      cfg.settings.integrator = Integrator::kSemiImplicitEuler;
    else if (integrator == "rk4")
      cfg.settings.integrator = Integrator::kRungeKutta4;
    else
      bad_config("config /simulation/integrator: expected semi_implicit_euler or rk4");
    sim.finish();
  }

  {
    Section exc(root.child("excitation"), "/excitation");
    cfg.excitation.seed = exc.uint("seed", 1);
    cfg.excitation.f_lo = exc.positive("f_lo", 0.3);
    cfg.excitation.f_hi = exc.positive("f_hi", 12.0);
    cfg.excitation.target_rms = exc.positive("rms", 0.1941);
    cfg.excitation.duration = exc.positive("duration", 35.0);
    cfg.excitation.settle_time = exc.nonneg("settle_time", 5.0);
    cfg.excitation.ramp_time = exc.nonneg("ramp_time", 1.0);
    if (!(cfg.excitation.f_lo < cfg.excitation.f_hi))
      bad_config("config /excitation: f_lo must be below f_hi");
    if (cfg.excitation.settle_time > cfg.excitation.duration)
      bad_config("config /excitation: settle_time cannot exceed duration");
    exc.finish();
    cfg.excitation.sample_rate = 1.0 / cfg.settings.h;
    cfg.settings.duration = cfg.excitation.duration;
    cfg.settings.settle_time = cfg.excitation.settle_time;
  }

  {
    Section an(root.child("analysis"), "/analysis");
    cfg.analysis.estimator.window_seconds = an.positive("window_s", 10.0);
    cfg.analysis.estimator.overlap = an.nonneg("overlap", 0.5);
    if (cfg.analysis.estimator.overlap >= 1.0)
      bad_config("config /analysis/overlap: must be below 1");
    cfg.analysis.f_lo = an.positive("f_lo", 0.3);
    cfg.analysis.f_hi = an.positive("f_hi", 12.0);
    if (!(cfg.analysis.f_lo < cfg.analysis.f_hi))
      bad_config("config /analysis: f_lo must be below f_hi");
    cfg.analysis.input_channel = an.str("input_channel", "seat.acc.z");
    cfg.analysis.output_channels = an.str_list("output_channels", default_output_channels());
    cfg.analysis.channels = an.str_list("channels", default_logged_channels());
    an.finish();

    auto logged = [&](const std::string& c) {
      return std::find(cfg.analysis.channels.begin(), cfg.analysis.channels.end(), c) !=
             cfg.analysis.channels.end();
    };
    if (!logged(cfg.analysis.input_channel))
      bad_config("config /analysis/input_channel: '" + cfg.analysis.input_channel +
                 "' is not in channels");
    for (const std::string& c : cfg.analysis.output_channels)
      if (!logged(c))
        bad_config("config /analysis/output_channels: '" + c + "' is not in channels");
  }

  {
    Section cal(root.child("calibration"), "/calibration");
    cfg.calibration.budget = cal.integer("budget", 300);
    if (cfg.calibration.budget < 0) bad_config("config /calibration/budget: must not be negative");
    cfg.calibration.seed = cal.uint("seed", 1);
    cfg.calibration.divergence_penalty = cal.positive("divergence_penalty", 1.0e6);
    Section weights(cal.child("weights"), "/calibration/weights");
    cfg.calibration.weights.head = weights.nonneg("head", 1.0);
    cfg.calibration.weights.trunk = weights.nonneg("trunk", 1.0);
    cfg.calibration.weights.pelvis = weights.nonneg("pelvis", 0.3);
    cfg.calibration.weights.fallback = weights.nonneg("default", 1.0);
    weights.finish();

    if (const json* params = cal.child("parameters")) {
      if (!params->is_array()) bad_config("config /calibration/parameters: expected an array");
      for (std::size_t i = 0; i < params->size(); ++i) {
        std::string path = "/calibration/parameters/" + std::to_string(i);
        Section p(&(*params)[i], path);
        ParameterSpec spec;
        spec.name = p.str("name", "");
        spec.path = p.str("path", "");
        if (spec.name.empty()) bad_config("config " + path + "/name: must not be empty");
        if (spec.path.empty()) bad_config("config " + path + "/path: must not be empty");
        spec.lower = p.number("lower", 0.0);
        spec.upper = p.number("upper", 0.0);
        std::string scale = p.str("scale", "linear");
        if (scale == "log")
          spec.log_scale = true;
        else if (scale != "linear")
          bad_config("config " + path + "/scale: expected linear or log");
        p.finish();
        if (!(spec.lower < spec.upper))
          bad_config("config " + path + ": lower must be below upper");
        if (spec.log_scale && !(spec.lower > 0.0))
          bad_config("config " + path + ": log scale needs positive bounds");
        cfg.calibration.parameters.push_back(std::move(spec));
      }
    } else {
      cfg.calibration.parameters = default_parameters();
    }
    cal.finish();
  }

  root.finish();
  return cfg;
}

json canonical_config(const RunConfig& cfg) {
  json doc;
  json& model = doc["model"];
  model["anthropometry_file"] = cfg.anthropometry_file;
  model["total_mass_kg"] = cfg.anthro.total_mass;
  model["stature_m"] = cfg.anthro.stature;
  model["sitting_height_m"] = cfg.anthro.sitting_height;
  model["stiffness_scale"] = cfg.tuning.stiffness_scale;
  model["damping_scale"] = cfg.tuning.damping_scale;
  json& restraints = model["restraints"];
  for (const auto& [joint, ov] : cfg.tuning.restraints) {
    restraints[joint]["stiffness"] = {ov.stiffness[0], ov.stiffness[1], ov.stiffness[2]};
    restraints[joint]["damping"] = {ov.damping[0], ov.damping[1], ov.damping[2]};
  }
  model["controllers"]["enabled"] = cfg.tuning.controllers_enabled;
  model["controllers"]["settle_target_s"] = cfg.tuning.controller_settle_target;
  model["controllers"]["integrator_limit"] = cfg.tuning.integrator_limit;

  json& seat = doc["seat"];
  seat["mass_kg"] = cfg.seat.seat_mass;
  seat["pan_lift"] = cfg.seat.pan_lift;
  seat["floor_lift"] = cfg.seat.floor_lift;
  seat["pan_preload"] = cfg.seat.pan_preload;
  seat["backrest_clearance"] = cfg.seat.backrest_clearance;
  seat["backrest_angle"] = cfg.seat.backrest_angle;
  seat["backrest"] = cfg.seat.backrest;
  seat["pan_stiffness"] = cfg.seat.pan_stiffness;
  seat["pan_damping"] = cfg.seat.pan_damping;
  seat["floor_stiffness"] = cfg.seat.floor_stiffness;
  seat["floor_damping"] = cfg.seat.floor_damping;
  seat["backrest_stiffness"] = cfg.seat.backrest_stiffness;
  seat["backrest_damping"] = cfg.seat.backrest_damping;
  seat["friction_mu"] = cfg.seat.friction_mu;

  json& sim = doc["simulation"];
  sim["step_s"] = cfg.settings.h;
  sim["output_rate_hz"] = 1.0 / (cfg.settings.h * cfg.settings.log_stride);
  sim["integrator"] =
      cfg.settings.integrator == Integrator::kRungeKutta4 ? "rk4" : "semi_implicit_euler";

  json& exc = doc["excitation"];
  exc["seed"] = cfg.excitation.seed;
  exc["f_lo"] = cfg.excitation.f_lo;
  exc["f_hi"] = cfg.excitation.f_hi;
  exc["rms"] = cfg.excitation.target_rms;
  exc["duration"] = cfg.excitation.duration;
  exc["settle_time"] = cfg.excitation.settle_time;
  exc["ramp_time"] = cfg.excitation.ramp_time;

  json& an = doc["analysis"];
  an["window_s"] = cfg.analysis.estimator.window_seconds;
  an["overlap"] = cfg.analysis.estimator.overlap;
  an["f_lo"] = cfg.analysis.f_lo;
  an["f_hi"] = cfg.analysis.f_hi;
  an["input_channel"] = cfg.analysis.input_channel;
  an["output_channels"] = cfg.analysis.output_channels;
  an["channels"] = cfg.analysis.channels;

  json& cal = doc["calibration"];
  cal["budget"] = cfg.calibration.budget;
  cal["seed"] = cfg.calibration.seed;
  cal["divergence_penalty"] = cfg.calibration.divergence_penalty;
  cal["weights"]["head"] = cfg.calibration.weights.head;
  cal["weights"]["trunk"] = cfg.calibration.weights.trunk;
  cal["weights"]["pelvis"] = cfg.calibration.weights.pelvis;
  cal["weights"]["default"] = cfg.calibration.weights.fallback;
  cal["parameters"] = json::array();
  for (const ParameterSpec& p : cfg.calibration.parameters) {
    json entry;
    entry["name"] = p.name;
    entry["path"] = p.path;
    entry["lower"] = p.lower;
    entry["upper"] = p.upper;
    entry["scale"] = p.log_scale ? "log" : "linear";
    cal["parameters"].push_back(entry);
  }
  return doc;
}

json default_config() { return canonical_config(parse_config(json::object())); }

Model model_from_config(const RunConfig& cfg) {
  return build_model(cfg.anthro, cfg.seat, cfg.tuning);
}

namespace {

// Field documentation for the generated reference. An entry whose path is an
// object or array in the default document stops the walk, so collections are
// documented as one row.
const std::pair<const char*, const char*> kFieldDocs[] = {
    {"/model/anthropometry_file",
     "Path to an anthropometry table; empty uses the shipped reference body."},
    {"/model/total_mass_kg", "Occupant mass; overrides the table value."},
    {"/model/stature_m", "Occupant stature; scales all segment dimensions."},
    {"/model/sitting_height_m", "Crown height above the pan in the seated posture."},
    {"/model/stiffness_scale", "Multiplier on every joint restraint stiffness."},
    {"/model/damping_scale", "Multiplier on every joint restraint damping."},
    {"/model/restraints",
     "Per-joint restraint override keyed by segment base name: stiffness [x,y,z] in N*m/rad and "
     "damping in N*m*s/rad about the joint axes; mirrored sides share one entry."},
    {"/model/controllers/enabled", "Attach PID posture controllers to every occupant joint."},
    {"/model/controllers/settle_target_s",
     "Time the integral action needs to pull a disturbed joint back to its setpoint."},
    {"/model/controllers/integrator_limit", "Anti-windup clamp on the integral state."},
    {"/seat/mass_kg", "Mass of the driven seat platform."},
    {"/seat/pan_lift", "Raises the pan surfaces into the body (m)."},
    {"/seat/floor_lift", "Raises the floor plane toward the feet (m)."},
    {"/seat/pan_preload", "Initial pelvis penetration into the pan (m)."},
    {"/seat/backrest_clearance", "Initial gap between torso and backrest pads (m)."},
    {"/seat/backrest_angle", "Rearward recline of the backrest pad column (rad)."},
    {"/seat/backrest", "Whether the backrest pads and torso ties exist."},
    {"/seat/pan_stiffness", "Pan contact stiffness (N/m)."},
    {"/seat/pan_damping", "Pan contact damping (N*s/m)."},
    {"/seat/floor_stiffness", "Floor contact stiffness (N/m)."},
    {"/seat/floor_damping", "Floor contact damping (N*s/m)."},
    {"/seat/backrest_stiffness", "Backrest contact stiffness (N/m)."},
    {"/seat/backrest_damping", "Backrest contact damping (N*s/m)."},
    {"/seat/friction_mu", "Tangential friction coefficient at the contacts."},
    {"/simulation/step_s", "Integration step (s)."},
    {"/simulation/output_rate_hz", "Trajectory sample rate; must divide 1/step_s."},
    {"/simulation/integrator", "semi_implicit_euler (default) or rk4."},
    {"/excitation/seed", "Random seed for the excitation synthesis."},
    {"/excitation/f_lo", "Lower edge of the excited band (Hz)."},
    {"/excitation/f_hi", "Upper edge of the excited band (Hz)."},
    {"/excitation/rms", "Target acceleration RMS per axis over the excited window (m/s^2)."},
    {"/excitation/duration", "Total simulated time including settling (s)."},
    {"/excitation/settle_time", "Quiet settling window before the shaker starts (s)."},
    {"/excitation/ramp_time", "Smooth switch-on inside the excited window (s)."},
    {"/analysis/window_s", "Welch window length (s)."},
    {"/analysis/overlap", "Welch window overlap fraction."},
    {"/analysis/f_lo", "Lower edge of the reported and fitted band (Hz)."},
    {"/analysis/f_hi", "Upper edge of the reported and fitted band (Hz)."},
    {"/analysis/input_channel", "Transmissibility input channel."},
    {"/analysis/output_channels", "Transmissibility output channels, one FRF each."},
    {"/analysis/channels", "Trajectory columns to log; must cover the FRF channels."},
    {"/calibration/budget", "Objective evaluation budget."},
    {"/calibration/seed", "Seed for the optimizer restarts."},
    {"/calibration/divergence_penalty", "Cost charged to a diverged simulation."},
    {"/calibration/weights",
     "Cost weights resolved from the output channel's segment: head, trunk (any torso segment), "
     "pelvis, and default for everything else."},
    {"/calibration/parameters",
     "Tunable parameters: name, JSON-pointer path into this document, bounds, and scale "
     "(linear or log)."},
};

const char* doc_for(const std::string& path) {
  for (const auto& [key, doc] : kFieldDocs)
    if (path == key) return doc;
  return nullptr;
}

void reference_rows(const json& node, const std::string& path, std::string& out) {
  const char* doc = path.empty() ? nullptr : doc_for(path);
  if (doc || !node.is_structured()) {
    const char* type = node.is_object()    ? "object"
                       : node.is_array()   ? "array"
                       : node.is_string()  ? "string"
                       : node.is_boolean() ? "bool"
                                           : "number";
    out += "| `" + path + "` | " + type + " | `" + node.dump() + "` | " +
           (doc ? doc : "(undocumented)") + " |\n";
    return;
  }
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) reference_rows(value, path + "/" + key, out);
  } else {
    for (std::size_t i = 0; i < node.size(); ++i)
      reference_rows(node[i], path + "/" + std::to_string(i), out);
  }
}

}  // namespace

std::string config_reference() {
  std::string out =
      "# Configuration reference\n\n"
      "Every key is optional; absent keys take the default shown here. Unknown keys are "
      "rejected.\n\n"
      "| key | type | default | description |\n|---|---|---|---|\n";
  reference_rows(default_config(), "", out);
  return out;
}

namespace {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) missing("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) missing("cannot write " + path);
  return os;
}

json manifest_base(const char* command, const RunConfig& cfg) {
  json m;
  m["command"] = command;
  m["seatsim_version"] = kVersion;
  m["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                       std::to_string(EIGEN_MINOR_VERSION);
  m["config_hash"] = hex64(fnv1a64(canonical_config(cfg).dump()));
  m["excitation_seed"] = cfg.excitation.seed;
  return m;
}

void write_manifest(const json& manifest, const std::string& out_dir) {
  open_out(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) missing("cannot open trajectory " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,", 0) != 0)
    missing(path + " is not a trajectory table");
  TrajectoryLog log;
  for (std::size_t pos = 2; pos <= line.size();) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    log.channels.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* s = line.c_str();
    char* end = nullptr;
    double t = std::strtod(s, &end);
    if (end == s) missing(path + ": malformed row '" + line + "'");
    for (s = end; *s == ','; s = end) {
      row.push_back(std::strtod(s + 1, &end));
      if (end == s + 1) missing(path + ": malformed row '" + line + "'");
    }
    if (row.size() != log.channels.size()) missing(path + ": inconsistent column count");
    log.times.push_back(t);
    log.rows.push_back(std::move(row));
  }
  if (log.times.size() < 2) missing(path + " holds fewer than two rows");
  log.sample_step = log.times[1] - log.times[0];
  for (std::size_t k = 1; k < log.times.size(); ++k)
    if (std::abs(log.times[k] - log.times[k - 1] - log.sample_step) > 1e-9)
      missing(path + ": time grid is not uniform");
  return log;
}

std::vector<double> excited_series(const TrajectoryLog& log, const std::string& channel,
                                   double settle_time) {
  if (std::find(log.channels.begin(), log.channels.end(), channel) == log.channels.end())
    missing("trajectory lacks channel '" + channel + "'");
  const int col = log.column(channel);
  const double cut = settle_time - 0.5 * log.sample_step;
  std::vector<double> out;
  for (std::size_t k = 0; k < log.times.size(); ++k)
    if (log.times[k] >= cut) out.push_back(log.rows[k][static_cast<std::size_t>(col)]);
  return out;
}

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& out) {
  Model model = model_from_config(cfg);
  // duration == settle_time is a settle-only run: nothing drives the seat.
  ExcitationSignal excitation;
  const ExcitationSignal* drive = nullptr;
  if (cfg.settings.duration > cfg.settings.settle_time) {
    excitation = ExcitationSignal::generate(cfg.excitation);
    drive = &excitation;
  }
  RunSettings settings = cfg.settings;
  settings.channels = cfg.analysis.channels;
  settings.make_snapshot = true;

  auto t0 = std::chrono::steady_clock::now();
  RunOutput res = run(model, drive, settings);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_dir(out_dir);
  {
    auto os = open_out(out_dir + "/trajectory.csv");
    res.log.write_csv(os);
  }
  if (res.snapshot) save_restart(*res.snapshot, out_dir + "/restart.json");

  json manifest = manifest_base("simulate", cfg);
  manifest["duration_s"] = cfg.settings.duration;
  manifest["settle_time_s"] = cfg.settings.settle_time;
  manifest["steps"] = res.steps;
  manifest["segments"] = model.tree.body_count();
  manifest["dof"] = model.tree.dof();
  manifest["wall_s"] = wall;
  manifest["real_time_factor"] = cfg.settings.duration / wall;
  manifest["outputs"] = {"trajectory.csv", "restart.json", "manifest.json"};
  write_manifest(manifest, out_dir);

  char line[160];
  std::snprintf(line, sizeof line,
                "simulate: %.6g s simulated in %.3g s wall (real-time factor %.3g)\n",
                cfg.settings.duration, wall, cfg.settings.duration / wall);
  out << line << "wrote " << out_dir << "/trajectory.csv, restart.json, manifest.json\n";
}

void cmd_frf(const RunConfig& cfg, const std::string& traj_path, const std::string& out_dir,
             std::ostream& out) {
  TrajectoryLog log = read_trajectory_csv(traj_path);
  const double fs = 1.0 / log.sample_step;
  std::vector<double> input =
      excited_series(log, cfg.analysis.input_channel, cfg.settings.settle_time);

  ensure_dir(out_dir);
  std::vector<FrfIndexEntry> index;
  for (const std::string& output : cfg.analysis.output_channels) {
    std::vector<double> y = excited_series(log, output, cfg.settings.settle_time);
    FrequencyResponse resp =
        frf(input, y, fs, cfg.analysis.estimator, cfg.analysis.input_channel, output);
    std::string file = "frf_" + cfg.analysis.input_channel + "__" + output + ".csv";
    auto os = open_out(out_dir + "/" + file);
    write_frf_csv(resp, os);
    index.push_back({cfg.analysis.input_channel, output, file});
  }
  {
    auto os = open_out(out_dir + "/frf_index.json");
    write_frf_index(index, os);
  }

  json manifest = manifest_base("frf", cfg);
  manifest["trajectory"] = traj_path;
  manifest["tables"] = index.size();
  write_manifest(manifest, out_dir);
  out << "frf: wrote " << index.size() << " tables and frf_index.json to " << out_dir << "\n";
}

void cmd_calibrate(const RunConfig& cfg, const std::string& refs_dir, const std::string& out_dir,
                   int workers, std::ostream& out, std::ostream& err) {
  json index;
  {
    std::ifstream in(refs_dir + "/frf_index.json");
    if (!in) missing("no frf_index.json in " + refs_dir);
    try {
      in >> index;
    } catch (const json::exception& e) {
      missing(refs_dir + "/frf_index.json: " + std::string(e.what()));
    }
  }

  CalibrationProblem problem;
  problem.document = canonical_config(cfg);
  problem.factory = [](const json& doc) { return model_from_config(parse_config(doc)); };
  ExcitationSignal excitation = ExcitationSignal::generate(cfg.excitation);
  problem.excitation = &excitation;
  problem.settings = cfg.settings;
  problem.settings.channels = cfg.analysis.channels;
  problem.settings.make_snapshot = false;
  problem.objective.f_lo = cfg.analysis.f_lo;
  problem.objective.f_hi = cfg.analysis.f_hi;
  problem.objective.estimator = cfg.analysis.estimator;
  problem.objective.divergence_penalty = cfg.calibration.divergence_penalty;
  problem.parameters = cfg.calibration.parameters;

  for (const std::string& output : cfg.analysis.output_channels) {
    std::string file;
    for (const auto& entry : index)
      if (entry.is_object() && entry.value("input", "") == cfg.analysis.input_channel &&
          entry.value("output", "") == output)
        file = entry.value("file", "");
    if (file.empty()) missing("no reference for channel '" + output + "' in " + refs_dir);
    FrfReference ref =
        load_frf_reference(refs_dir + "/" + file, cfg.analysis.input_channel, output,
                           weight_for_channel(cfg.calibration.weights, output));
    if (ref.frequencies.front() > cfg.analysis.f_lo + 1e-9 ||
        ref.frequencies.back() < cfg.analysis.f_hi - 1e-9) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "reference for '%s' covers %.3g-%.3g Hz, the cost band needs %.3g-%.3g Hz",
                    output.c_str(), ref.frequencies.front(), ref.frequencies.back(),
                    cfg.analysis.f_lo, cfg.analysis.f_hi);
      missing(msg);
    }
    problem.objective.references.push_back(std::move(ref));
  }

  const int dim = static_cast<int>(problem.parameters.size());
  if (cfg.calibration.budget < 10 * dim)
    err << "warning: budget " << cfg.calibration.budget << " is below the recommended "
        << 10 * dim << " (10 x dimension)\n";

  auto t0 = std::chrono::steady_clock::now();
  CalibrationResult result = calibrate(problem, cfg.calibration.budget, cfg.calibration.seed,
                                       workers);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (result.best_cost >= cfg.calibration.divergence_penalty)
    throw SimulationError("every evaluation diverged; no stable parameter set within the budget");

  json fitted = problem.document;
  json best_params;
  for (std::size_t i = 0; i < problem.parameters.size(); ++i) {
    fitted[json::json_pointer(problem.parameters[i].path)] =
        result.best_parameters[static_cast<int>(i)];
    best_params[problem.parameters[i].name] = result.best_parameters[static_cast<int>(i)];
  }
  parse_config(fitted);  // the emitted config must be directly runnable

  ensure_dir(out_dir);
  open_out(out_dir + "/fitted_config.json") << fitted.dump(2) << "\n";
  {
    auto os = open_out(out_dir + "/calibration_trace.csv");
    write_trace_csv(result.trace, problem.parameters, os);
  }

  json manifest = manifest_base("calibrate", cfg);
  manifest["calibration_seed"] = cfg.calibration.seed;
  manifest["budget"] = cfg.calibration.budget;
  manifest["evaluations"] = result.trace.size();
  manifest["best_cost"] = result.best_cost;
  manifest["best_parameters"] = best_params;
  manifest["workers"] = workers;
  manifest["wall_s"] = wall;
  write_manifest(manifest, out_dir);

  out << "calibrate: best cost " << result.best_cost << " after " << result.trace.size()
      << " evaluations\n";
  for (std::size_t i = 0; i < problem.parameters.size(); ++i)
    out << "  " << problem.parameters[i].name << " = "
        << result.best_parameters[static_cast<int>(i)] << "\n";
  out << "wrote " << out_dir << "/fitted_config.json, calibration_trace.csv, manifest.json\n";
}

void cmd_ablate(const RunConfig& cfg, const std::string& mode, const std::string& out_dir,
                std::ostream& out) {
  RunConfig scenario = cfg;
  if (mode == "high_stiffness_passive") {
    // Passive high-stiffness variant: controllers off, restraints scaled up.
    // Damping rises much less than sqrt(stiffness): the explicit integrators
    // bound the damping rate on the light neck segment near c/I ~ 2/h, which
    // a ratio-preserving raise would exceed at the default step.
    scenario.tuning.controllers_enabled = false;
    scenario.tuning.stiffness_scale *= 30.0;
    scenario.tuning.damping_scale *= 1.5;
  } else if (mode != "full_pid" && mode != "no_integrator") {
    bad_config("unknown ablate mode '" + mode + "'");
  }
  if (!(cfg.settings.duration > cfg.settings.settle_time))
    bad_config("ablate needs an excited window (duration > settle_time)");

  Model model = model_from_config(scenario);
  Model excited_model = model;
  if (mode == "no_integrator")
    for (ControlledDof& dof : excited_model.controllers.dofs) dof.gains.i_enabled = false;

  std::vector<std::string> channels = cfg.analysis.channels;
  auto want = [&](const std::string& c) {
    if (std::find(channels.begin(), channels.end(), c) == channels.end()) channels.push_back(c);
  };
  want("head.ang.y");
  want("upper_torso.pos.x");
  std::vector<std::string> joint_channels;
  for (int b = 0; b < model.tree.body_count(); ++b) {
    if (model.tree.segments[b].environment || model.tree.joints[b].parent == "world") continue;
    for (int i = 0; i < model.tree.joint_dof_count(b); ++i) {
      joint_channels.push_back("q." + coordinate_name(model.tree, model.tree.dof_offset[b] + i));
      want(joint_channels.back());
    }
  }

  ExcitationSignal excitation = ExcitationSignal::generate(cfg.excitation);
  RunSettings settle_settings = cfg.settings;
  settle_settings.duration = cfg.settings.settle_time;
  settle_settings.channels.clear();
  settle_settings.make_snapshot = true;
  RunOutput settled = run(model, &excitation, settle_settings);

  RunSettings window = cfg.settings;
  window.channels = channels;
  window.make_snapshot = false;
  RunOutput res = resume(excited_model, *settled.snapshot, &excitation, window);

  const auto& log = res.log;
  auto value = [&](const std::string& channel, bool at_end) {
    const auto& row = at_end ? log.rows.back() : log.rows.front();
    return row[static_cast<std::size_t>(log.column(channel))];
  };
  auto triple = [&](const std::string& channel, double scale) {
    double a = value(channel, false) * scale, b = value(channel, true) * scale;
    json j;
    j["settle_end"] = a;
    j["run_end"] = b;
    j["drift"] = b - a;
    return j;
  };

  json report;
  report["mode"] = mode;
  report["settle_time_s"] = cfg.settings.settle_time;
  report["duration_s"] = cfg.settings.duration;
  report["head_pitch_deg"] = triple("head.ang.y", 180.0 / M_PI);
  report["trunk_forward_m"] = triple("upper_torso.pos.x", 1.0);
  json drifts;
  double max_drift = 0.0;
  for (const std::string& c : joint_channels) {
    double d = value(c, true) - value(c, false);
    drifts[c] = d;
    max_drift = std::max(max_drift, std::abs(d));
  }
  report["joint_drift_rad"] = drifts;
  report["max_abs_joint_drift_rad"] = max_drift;

  ensure_dir(out_dir);
  open_out(out_dir + "/ablate_report.json") << report.dump(2) << "\n";
  {
    auto os = open_out(out_dir + "/trajectory.csv");
    log.write_csv(os);
  }
  json manifest = manifest_base("ablate", cfg);
  manifest["mode"] = mode;
  write_manifest(manifest, out_dir);

  char line[200];
  std::snprintf(line, sizeof line,
                "ablate(%s): head pitch drift %+.3f deg, trunk forward %+.4f m, max joint drift "
                "%.4f rad\n",
                mode.c_str(), report["head_pitch_deg"]["drift"].get<double>(),
                report["trunk_forward_m"]["drift"].get<double>(), max_drift);
  out << line << "wrote " << out_dir << "/ablate_report.json, trajectory.csv, manifest.json\n";
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad_config("cannot open config " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    bad_config("config " + path + ": " + std::string(e.what()));
  }
}

std::string default_out_dir() {
  const char* env = std::getenv("SEATSIM_OUT_DIR");
  return env && *env ? env : "seatsim_out";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"seated-body vibration simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir(), traj_path, refs_dir;
  std::string mode = "full_pid";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = std::max(1u, std::thread::hardware_concurrency());

  auto add_common = [&](CLI::App* cmd, bool with_seed) {
    cmd->add_option("--config", config_path, "Configuration file")->required();
    cmd->add_option("--out", out_dir, "Output directory (default $SEATSIM_OUT_DIR)");
    if (with_seed)
      cmd->add_option("--seed", seed, "Override the excitation and calibration seeds")
          ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Settle, shake, and log a trajectory");
  add_common(simulate, true);
  CLI::App* frf_cmd = app.add_subcommand("frf", "Estimate transmissibility from a trajectory");
  frf_cmd->add_option("trajectory", traj_path, "Trajectory CSV")->required();
  add_common(frf_cmd, false);
  CLI::App* calibrate_cmd =
      app.add_subcommand("calibrate", "Fit configured parameters to reference FRFs");
  add_common(calibrate_cmd, true);
  calibrate_cmd->add_option("--refs", refs_dir, "Directory holding frf_index.json")->required();
  calibrate_cmd->add_option("--workers", workers, "Parallel simulation workers");
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Posture drift report for one mode");
  add_common(ablate_cmd, true);
  ablate_cmd->add_option("--mode", mode, "full_pid, no_integrator, or high_stiffness_passive")
      ->required();
  CLI::App* dump_cmd = app.add_subcommand("dump-model", "Print the assembled model");
  dump_cmd->add_option("--config", config_path, "Configuration file")->required();
  CLI::App* init_cmd = app.add_subcommand("init-config", "Print the default configuration");
  CLI::App* ref_cmd = app.add_subcommand("config-reference", "Print the field reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (init_cmd->parsed()) {
      out << default_config().dump(2) << "\n";
      return kExitOk;
    }
    if (ref_cmd->parsed()) {
      out << config_reference();
      return kExitOk;
    }

    RunConfig cfg = parse_config(load_config_file(config_path));
    if (seed_given) {
      cfg.excitation.seed = seed;
      cfg.calibration.seed = seed;
    }

    if (simulate->parsed()) {
      cmd_simulate(cfg, out_dir, out);
    } else if (frf_cmd->parsed()) {
      cmd_frf(cfg, traj_path, out_dir, out);
    } else if (calibrate_cmd->parsed()) {
      if (workers < 1) bad_config("--workers must be at least 1");
      cmd_calibrate(cfg, refs_dir, out_dir, workers, out, err);
    } else if (ablate_cmd->parsed()) {
      cmd_ablate(cfg, mode, out_dir, out);
    } else if (dump_cmd->parsed()) {
      dump_model(model_from_config(cfg), out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const BodyModelError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ExcitationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CalibrationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AnalysisError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "missing data: " << e.what() << "\n";
    return kExitMissingData;
  } catch (const DivergenceError& e) {
    err << "simulation diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const SingularityError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const SimulationError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitDiverged;
  }
}

}  // namespace seatsim::cli
