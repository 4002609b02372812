#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seatsim/calibration.hpp"
#include "seatsim/forces.hpp"
#include "seatsim/tree.hpp"

using namespace seatsim;
using nlohmann::json;

namespace {

// Three masses stacked on vertical sliders above a prescribed seat; the
// spring/damper of each slider comes from the document, so the document is
// the single source of truth the calibration patches.
Model lumped_chain(const json& doc) {
  std::vector<SegmentDef> segments;
  std::vector<JointDef> joints;

  SegmentDef seat;
  seat.name = "seat";
  seat.mass = 80.0;
  seat.inertia_com = Mat3::Identity() * 5.0;
  seat.environment = true;
  segments.push_back(seat);

  JointDef root;
  root.kind = JointKind::kFree6;
  root.parent = "world";
  root.child = "seat";
  joints.push_back(root);

  const char* names[3] = {"m1", "m2", "m3"};
  const double masses[3] = {45.0, 20.0, 8.0};
  std::string parent = "seat";
  for (int i = 0; i < 3; ++i) {
    SegmentDef seg;
    seg.name = names[i];
    seg.mass = masses[i];
    seg.inertia_com = Mat3::Identity() * 0.5;
    segments.push_back(seg);

    JointDef j;
    j.kind = JointKind::kTranslational1;
    j.parent = parent;
    j.child = names[i];
    j.parent_frame.p = Vec3(0.0, 0.0, 0.2);
    j.axes = {Vec3(0.0, 0.0, 1.0)};
    joints.push_back(j);
    parent = names[i];
  }

  Model model;
  model.tree = build_tree(segments, joints);
  for (int i = 0; i < 3; ++i) {
    AxialRestraint r;
    r.body = model.tree.body_index(names[i]);
    r.stiffness = doc.at("k" + std::to_string(i + 1)).get<double>();
    r.damping = doc.at("c" + std::to_string(i + 1)).get<double>();
    model.elements.axial_restraints.push_back(r);
  }
  model.seat_body = model.tree.body_index("seat");
  return model;
}

json chain_document(double k1, double k2, double k3, double c1, double c2, double c3) {
  return json{{"k1", k1}, {"k2", k2}, {"k3", k3}, {"c1", c1}, {"c2", c2}, {"c3", c3}};
}

std::vector<ParameterSpec> chain_parameters() {
  std::vector<ParameterSpec> specs;
  for (int i = 1; i <= 3; ++i)
    specs.push_back({"k" + std::to_string(i), "/k" + std::to_string(i), 5e3, 2e5, true});
  for (int i = 1; i <= 3; ++i)
    specs.push_back({"c" + std::to_string(i), "/c" + std::to_string(i), 50.0, 5e3, true});
  return specs;
}

const ExcitationSignal& chain_excitation() {
  static ExcitationSignal cache = [] {
    ExcitationSpec spec;
    spec.seed = 7;
    spec.duration = 16.0;
    spec.settle_time = 2.0;
    spec.f_lo = 0.5;
    spec.f_hi = 12.0;
    spec.target_rms = 0.5;
    return ExcitationSignal::generate(spec);
  }();
  return cache;
}

// Shared scenario: the document holds the starting guess, references come
// from whoever the test says the "true" parameters are.
CalibrationProblem chain_problem(const json& document) {
  CalibrationProblem problem;
  problem.document = document;
  problem.factory = lumped_chain;
  problem.excitation = &chain_excitation();
  problem.settings.h = 2e-3;
  problem.settings.duration = 16.0;
  problem.settings.settle_time = 2.0;
  problem.settings.make_snapshot = false;
  problem.settings.channels = {"seat.acc.z", "m1.acc.z", "m2.acc.z", "m3.acc.z"};
  problem.objective.f_lo = 0.5;
  problem.objective.f_hi = 12.0;
  problem.objective.estimator.window_seconds = 4.0;
  problem.objective.estimator.overlap = 0.5;
  problem.parameters = chain_parameters();
  return problem;
}

void attach_references(CalibrationProblem& problem, const std::vector<FrequencyResponse>& frfs,
                       double w1 = 1.0, double w2 = 1.0, double w3 = 1.0) {
  const double weights[3] = {w1, w2, w3};
  problem.objective.references.clear();
  for (int i = 0; i < 3; ++i) {
    FrfReference ref;
    ref.input_channel = frfs[static_cast<size_t>(i)].input_channel;
    ref.output_channel = frfs[static_cast<size_t>(i)].output_channel;
    ref.weight = weights[i];
    ref.frequencies = frfs[static_cast<size_t>(i)].frequencies;
    ref.gain = frfs[static_cast<size_t>(i)].gain;
    problem.objective.references.push_back(std::move(ref));
  }
}

VectorXd chain_vector(double k1, double k2, double k3, double c1, double c2, double c3) {
  VectorXd v(6);
  v << k1, k2, k3, c1, c2, c3;
  return v;
}

}  // namespace

TEST_CASE("optimizer recovers a quadratic optimum within the example budget") {
  std::vector<ParameterSpec> specs = {{"x", "/x", -5.0, 5.0, false},
                                      {"y", "/y", -5.0, 5.0, false}};
  auto f = [](const VectorXd& p) {
    return (p[0] - 1.0) * (p[0] - 1.0) + (p[1] + 2.0) * (p[1] + 2.0);
  };
  OptimizeResult res = optimize(f, specs, 200, 1);
  CHECK(std::abs(res.best[0] - 1.0) < 1e-4);
  CHECK(std::abs(res.best[1] + 2.0) < 1e-4);
  CHECK(res.best_cost < 1e-7);
}

TEST_CASE("optimizer trace is complete, monotone, in bounds, and reproducible") {
  std::vector<ParameterSpec> specs = {{"a", "/a", -2.0, 2.0, false},
                                      {"b", "/b", 1e-2, 1e2, true}};
  auto f = [](const VectorXd& p) {
    double u = p[0] - 0.5, v = std::log(p[1]) - 1.0;
    return u * u + 0.3 * v * v + 0.1 * std::sin(5.0 * u) * std::sin(3.0 * v);
  };

  OptimizeResult res = optimize(f, specs, 120, 42);
  CHECK(res.trace.size() <= 120);
  CHECK(res.trace.size() >= 120 - 2);

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const TraceEntry& e = res.trace[i];
    CHECK(e.eval == static_cast<int>(i) + 1);
    best = std::min(best, e.cost);
    CHECK(e.best_cost == best);  // best-so-far never increases
    CHECK(e.params[0] >= -2.0);
    CHECK(e.params[0] <= 2.0);
    CHECK(e.params[1] >= 1e-2);  // log-scaled stays positive and bounded
    CHECK(e.params[1] <= 1e2);
  }

  OptimizeResult again = optimize(f, specs, 120, 42);
  REQUIRE(again.trace.size() == res.trace.size());
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    CHECK(again.trace[i].cost == res.trace[i].cost);
    CHECK((again.trace[i].params - res.trace[i].params).norm() == 0.0);
  }

  OptimizeResult parallel = optimize(f, specs, 120, 42, 3);
  REQUIRE(parallel.trace.size() == res.trace.size());
  for (std::size_t i = 0; i < res.trace.size(); ++i)
    CHECK(parallel.trace[i].cost == res.trace[i].cost);
}

TEST_CASE("optimizer starts from a given point when one is supplied") {
  std::vector<ParameterSpec> specs = {{"x", "/x", -10.0, 10.0, false}};
  auto f = [](const VectorXd& p) { return std::cos(p[0]) + 0.01 * p[0] * p[0]; };
  VectorXd start(1);
  start << 3.0;  // basin of the stationary point at sin(x) = 0.02 x
  OptimizeResult res = optimize(f, specs, 60, 5, 1, &start);
  CHECK(res.trace.front().params[0] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::abs(res.best[0] - 3.0802) < 0.01);
}

TEST_CASE("optimizer rejects budgets and specs that cannot work") {
  std::vector<ParameterSpec> specs = {{"x", "/x", 0.0, 1.0, false},
                                      {"y", "/y", 0.0, 1.0, false}};
  auto f = [](const VectorXd& p) { return p.squaredNorm(); };
  CHECK_THROWS_WITH_AS(optimize(f, specs, 0, 1), doctest::Contains("budget"), CalibrationError);
  CHECK_THROWS_WITH_AS(optimize(f, specs, 2, 1), doctest::Contains("budget"), CalibrationError);

  CHECK_THROWS_WITH_AS(optimize(f, {}, 10, 1), doctest::Contains("no parameters"),
                       CalibrationError);
  CHECK_THROWS_WITH_AS(optimize(f, {{"x", "/x", 2.0, 1.0, false}}, 10, 1),
                       doctest::Contains("lower bound"), CalibrationError);
  CHECK_THROWS_WITH_AS(optimize(f, {{"x", "/x", -1.0, 1.0, true}},  10, 1),
                       doctest::Contains("positive"), CalibrationError);
  CHECK_THROWS_WITH_AS(optimize(f, {{"x", "/x", 0.0, 1.0, false}, {"x", "/x2", 0.0, 1.0, false}},
                                10, 1),
                       doctest::Contains("duplicate"), CalibrationError);
}

TEST_CASE("objective is zero against references the same parameters produced") {
  json doc = chain_document(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  CalibrationProblem problem = chain_problem(doc);
  // References need to exist before validation lets anything run; they are
  // replaced by the model's own curves right after.
  attach_references(problem,
                    {FrequencyResponse{"seat.acc.z", "m1.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m2.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m3.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}}});
  RestartSnapshot snap = settle_template(problem);

  VectorXd p = chain_vector(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  std::vector<FrequencyResponse> frfs = evaluate_frfs(problem, p, &snap);
  REQUIRE(frfs.size() == 3);
  attach_references(problem, frfs);

  CHECK(objective_cost(problem, p, &snap) < 1e-4);

  // A genuinely different stiffness must cost something.
  VectorXd off = chain_vector(90000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  CHECK(objective_cost(problem, off, &snap) > 1e-3);
}

TEST_CASE("channel weights gate and scale their share of the cost") {
  json doc = chain_document(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  CalibrationProblem problem = chain_problem(doc);
  attach_references(problem,
                    {FrequencyResponse{"seat.acc.z", "m1.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m2.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m3.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}}});
  RestartSnapshot snap = settle_template(problem);
  VectorXd p_true = chain_vector(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  std::vector<FrequencyResponse> frfs = evaluate_frfs(problem, p_true, &snap);

  VectorXd off = chain_vector(70000.0, 18000.0, 9000.0, 900.0, 1100.0, 300.0);

  SUBCASE("a zero-weight channel cannot move the cost") {
    attach_references(problem, frfs, 1.0, 1.0, 0.0);
    double base = objective_cost(problem, off, &snap);

    // Corrupt the zero-weight reference; the cost must not notice.
    CalibrationProblem corrupted = problem;
    for (double& g : corrupted.objective.references[2].gain) g *= 10.0;
    CHECK(objective_cost(corrupted, off, &snap) == base);
  }

  SUBCASE("cost is linear and monotone in a channel weight") {
    attach_references(problem, frfs, 0.0, 1.0, 0.3);
    double w0 = objective_cost(problem, off, &snap);
    attach_references(problem, frfs, 1.0, 1.0, 0.3);
    double w1 = objective_cost(problem, off, &snap);
    attach_references(problem, frfs, 2.0, 1.0, 0.3);
    double w2 = objective_cost(problem, off, &snap);
    CHECK(w1 > w0);
    CHECK(w2 > w1);
    CHECK(w2 - w1 == doctest::Approx(w1 - w0).epsilon(1e-9));
  }
}

TEST_CASE("a diverging simulation costs exactly the configured penalty") {
  json doc = chain_document(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  CalibrationProblem problem = chain_problem(doc);
  attach_references(problem,
                    {FrequencyResponse{"seat.acc.z", "m1.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m2.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m3.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}}});
  problem.objective.divergence_penalty = 4321.5;
  RestartSnapshot snap = settle_template(problem);

  // Negative damping on every slider pumps energy into the chain until the
  // state overflows; the cost must then be the penalty, nothing else.
  VectorXd p = chain_vector(45000.0, 25000.0, 12000.0, -3000.0, -4000.0, -2000.0);
  CHECK(objective_cost(problem, p, &snap) == 4321.5);
}

TEST_CASE("calibration validation rejects broken problems") {
  json doc = chain_document(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  CalibrationProblem good = chain_problem(doc);
  attach_references(good,
                    {FrequencyResponse{"seat.acc.z", "m1.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m2.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m3.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}}});

  SUBCASE("missing excitation") {
    CalibrationProblem p = good;
    p.excitation = nullptr;
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("excitation"), CalibrationError);
  }
  SUBCASE("unlogged reference channel") {
    CalibrationProblem p = good;
    p.objective.references[0].output_channel = "m9.acc.z";
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("m9.acc.z"), CalibrationError);
  }
  SUBCASE("parameter path absent from the document") {
    CalibrationProblem p = good;
    p.parameters[0].path = "/k9";
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("/k9"), CalibrationError);
  }
  SUBCASE("parameter path that is not a JSON pointer") {
    CalibrationProblem p = good;
    p.parameters[0].path = "k1";
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("JSON pointer"),
                         CalibrationError);
  }
  SUBCASE("all weights zero") {
    CalibrationProblem p = good;
    for (auto& r : p.objective.references) r.weight = 0.0;
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("zero"), CalibrationError);
  }
  SUBCASE("negative weight") {
    CalibrationProblem p = good;
    p.objective.references[1].weight = -0.5;
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("negative"), CalibrationError);
  }
  SUBCASE("empty cost band") {
    CalibrationProblem p = good;
    p.objective.f_lo = 12.0;
    p.objective.f_hi = 0.5;
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("band"), CalibrationError);
  }
  SUBCASE("malformed reference curve") {
    CalibrationProblem p = good;
    p.objective.references[0].frequencies = {1.0};
    p.objective.references[0].gain = {1.0};
    CHECK_THROWS_WITH_AS(settle_template(p), doctest::Contains("malformed"), CalibrationError);
  }
}

TEST_CASE("trace CSV has the documented layout") {
  std::vector<ParameterSpec> specs = {{"x", "/x", -5.0, 5.0, false},
                                      {"y", "/y", -5.0, 5.0, false}};
  auto f = [](const VectorXd& p) { return p.squaredNorm(); };
  OptimizeResult res = optimize(f, specs, 20, 9);

  std::ostringstream os;
  write_trace_csv(res.trace, specs, os);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "eval,cost,best_cost,x,y");
  REQUIRE(std::getline(is, line));
  int eval = 0;
  double cost = 0.0, best = 0.0, x = 0.0, y = 0.0;
  REQUIRE(std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &eval, &cost, &best, &x, &y) == 5);
  CHECK(eval == 1);
  CHECK(cost == res.trace[0].cost);
  CHECK(best == res.trace[0].best_cost);
  CHECK(x == res.trace[0].params[0]);
  CHECK(y == res.trace[0].params[1]);

  std::size_t rows = 1;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == res.trace.size());
}

TEST_CASE("reference curves round-trip through the FRF CSV format") {
  FrequencyResponse resp;
  resp.input_channel = "seat.acc.z";
  resp.output_channel = "m1.acc.z";
  resp.frequencies = {0.5, 1.0, 2.0, 4.0, 8.0};
  resp.gain = {1.01, 1.2, 1.7, 0.9, 0.33};
  resp.phase = {0.0, -0.1, -0.4, -1.2, -2.0};
  resp.coherence = {0.99, 0.99, 0.98, 0.97, 0.95};

  std::string path = "calibration_ref_roundtrip.csv";
  {
    std::ofstream os(path);
    write_frf_csv(resp, os);
  }
  FrfReference ref = load_frf_reference(path, "seat.acc.z", "m1.acc.z", 0.3);
  std::remove(path.c_str());

  CHECK(ref.weight == 0.3);
  REQUIRE(ref.frequencies.size() == resp.frequencies.size());
  for (std::size_t k = 0; k < ref.frequencies.size(); ++k) {
    CHECK(ref.frequencies[k] == resp.frequencies[k]);
    CHECK(ref.gain[k] == resp.gain[k]);
  }

  CHECK_THROWS_WITH_AS(load_frf_reference("no_such_file.csv", "a", "b"),
                       doctest::Contains("cannot open"), CalibrationError);
}

TEST_CASE("six lumped parameters are recovered from self-generated references") {
  // Start from a deliberately wrong guess; the references encode the truth.
  json start_doc = chain_document(70000.0, 15000.0, 20000.0, 700.0, 1300.0, 250.0);
  CalibrationProblem problem = chain_problem(start_doc);
  attach_references(problem,
                    {FrequencyResponse{"seat.acc.z", "m1.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m2.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}},
                     FrequencyResponse{"seat.acc.z", "m3.acc.z", {0.5, 12.0}, {1.0, 1.0}, {}, {}}});
  RestartSnapshot snap = settle_template(problem);

  VectorXd truth = chain_vector(45000.0, 25000.0, 12000.0, 1200.0, 800.0, 400.0);
  attach_references(problem, evaluate_frfs(problem, truth, &snap));

  CalibrationResult result = calibrate(problem, 1500, 3);

  CHECK(result.trace.size() <= 1500);
  for (std::size_t i = 1; i < result.trace.size(); ++i)
    CHECK(result.trace[i].best_cost <= result.trace[i - 1].best_cost);

  bool all_within = true;
  for (int i = 0; i < 6; ++i) {
    double rel = std::abs(result.best_parameters[i] - truth[i]) / truth[i];
    if (rel > 0.10) all_within = false;
  }
  INFO("best cost ", result.best_cost);
  CHECK((all_within || result.best_cost < 1e-3));
}
