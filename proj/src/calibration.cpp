#include "seatsim/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace seatsim {

namespace {

[[noreturn]] void bad(const std::string& msg) { throw CalibrationError(msg); }

void validate_parameters(const std::vector<ParameterSpec>& parameters) {
  if (parameters.empty()) bad("no parameters to calibrate");
  std::set<std::string> names;
  for (const auto& p : parameters) {
    if (p.name.empty()) bad("parameter with empty name");
    if (!names.insert(p.name).second) bad("duplicate parameter name '" + p.name + "'");
    if (!(p.lower < p.upper))
      bad("parameter '" + p.name + "': lower bound must be below upper bound");
    if (p.log_scale && !(p.lower > 0.0))
      bad("parameter '" + p.name + "': log scale needs strictly positive bounds");
  }
}

// Bijective map between the unbounded search coordinate z and the natural
// value inside (lower, upper); log-scaled parameters go through log space so
// the search sees their orders of magnitude evenly.
double sigmoid(double z) {
  if (z >= 0.0) {
    double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(z);
  return e / (1.0 + e);
}

double span_lo(const ParameterSpec& p) { return p.log_scale ? std::log(p.lower) : p.lower; }
double span_hi(const ParameterSpec& p) { return p.log_scale ? std::log(p.upper) : p.upper; }

double to_natural(double z, const ParameterSpec& p) {
  double y = span_lo(p) + (span_hi(p) - span_lo(p)) * sigmoid(z);
  return p.log_scale ? std::exp(y) : y;
}

double to_search(double natural, const ParameterSpec& p) {
  double y = p.log_scale ? std::log(natural) : natural;
  double frac = (y - span_lo(p)) / (span_hi(p) - span_lo(p));
  frac = std::clamp(frac, 1e-12, 1.0 - 1e-12);
  return std::log(frac / (1.0 - frac));
}

VectorXd natural_point(const VectorXd& z, const std::vector<ParameterSpec>& specs) {
  VectorXd out(z.size());
  for (int i = 0; i < z.size(); ++i) out[i] = to_natural(z[i], specs[static_cast<size_t>(i)]);
  return out;
}

// Evaluates a batch of points, at most `workers` concurrently, and returns
// the costs in submission order so the trace is identical for any worker
// count.
std::vector<double> run_batch(const std::function<double(const VectorXd&)>& f,
                              const std::vector<VectorXd>& points, int workers) {
  std::vector<double> costs(points.size());
  if (workers <= 1 || points.size() <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) costs[i] = f(points[i]);
    return costs;
  }
  for (std::size_t base = 0; base < points.size(); base += static_cast<std::size_t>(workers)) {
    std::size_t end = std::min(points.size(), base + static_cast<std::size_t>(workers));
    std::vector<std::future<double>> futures;
    futures.reserve(end - base);
    for (std::size_t i = base; i < end; ++i)
      futures.push_back(std::async(std::launch::async, [&f, &points, i] { return f(points[i]); }));
    for (std::size_t i = base; i < end; ++i) costs[i] = futures[i - base].get();
  }
  return costs;
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

OptimizeResult optimize(const std::function<double(const VectorXd&)>& objective,
                        const std::vector<ParameterSpec>& parameters, int budget, uint64_t seed,
                        int workers, const VectorXd* start) {
  validate_parameters(parameters);
  if (!objective) bad("optimize needs an objective");
  const int n = static_cast<int>(parameters.size());
  if (budget < n + 1)
    bad("budget " + std::to_string(budget) + " cannot cover the initial simplex (" +
        std::to_string(n + 1) + " evaluations)");
  if (start && start->size() != n) bad("start point has the wrong dimension");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jump(0.0, 1.5);

  OptimizeResult result;
  result.best_cost = std::numeric_limits<double>::infinity();
  int used = 0;

  // Evaluates as many of the requested points as the budget still allows and
  // records them; a short return signals exhaustion to the caller.
  auto evaluate = [&](const std::vector<VectorXd>& zs) {
    std::size_t m = std::min(zs.size(), static_cast<std::size_t>(budget - used));
    std::vector<VectorXd> naturals(m);
    for (std::size_t i = 0; i < m; ++i) naturals[i] = natural_point(zs[i], parameters);
    std::vector<double> costs = run_batch(objective, naturals, workers);
    for (std::size_t i = 0; i < m; ++i) {
      ++used;
      if (costs[i] < result.best_cost) {
        result.best_cost = costs[i];
        result.best = naturals[i];
      }
      result.trace.push_back({used, costs[i], result.best_cost, naturals[i]});
    }
    return costs;
  };

  bool first_round = true;
  while (budget - used >= n + 1) {
    VectorXd z0 = VectorXd::Zero(n);
    if (first_round && start) {
      for (int i = 0; i < n; ++i) z0[i] = to_search((*start)[i], parameters[static_cast<size_t>(i)]);
    } else if (!first_round) {
      for (int i = 0; i < n; ++i) z0[i] = jump(rng);
    }
    first_round = false;

    std::vector<VectorXd> simplex(static_cast<std::size_t>(n) + 1, z0);
    for (int i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i) + 1][i] += 0.6;
    std::vector<double> cost = evaluate(simplex);

    bool exhausted = false;
    while (!exhausted) {
      std::vector<int> order(simplex.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return cost[static_cast<size_t>(a)] < cost[static_cast<size_t>(b)]; });
      int best = order.front();
      int worst = order.back();
      int second = order[order.size() - 2];

      double spread = cost[static_cast<size_t>(worst)] - cost[static_cast<size_t>(best)];
      double width = 0.0;
      for (const auto& v : simplex)
        width = std::max(width, (v - simplex[static_cast<size_t>(best)]).lpNorm<Eigen::Infinity>());
      if (spread <= 1e-12 * (1.0 + std::abs(cost[static_cast<size_t>(best)])) && width < 1e-9)
        break;  // converged; restart from a fresh seeded point

      VectorXd centroid = VectorXd::Zero(n);
      for (int i : order)
        if (i != worst) centroid += simplex[static_cast<size_t>(i)];
      centroid /= static_cast<double>(n);

      VectorXd reflect = centroid + (centroid - simplex[static_cast<size_t>(worst)]);
      auto rc = evaluate({reflect});
      if (rc.empty()) break;
      double fr = rc[0];

      if (fr < cost[static_cast<size_t>(best)]) {
        VectorXd expand = centroid + 2.0 * (centroid - simplex[static_cast<size_t>(worst)]);
        auto ec = evaluate({expand});
        if (!ec.empty() && ec[0] < fr) {
          simplex[static_cast<size_t>(worst)] = expand;
          cost[static_cast<size_t>(worst)] = ec[0];
        } else {
          simplex[static_cast<size_t>(worst)] = reflect;
          cost[static_cast<size_t>(worst)] = fr;
        }
        if (ec.empty()) break;
      } else if (fr < cost[static_cast<size_t>(second)]) {
        simplex[static_cast<size_t>(worst)] = reflect;
        cost[static_cast<size_t>(worst)] = fr;
      } else {
        bool outside = fr < cost[static_cast<size_t>(worst)];
        VectorXd contract;
        if (outside)
          contract = centroid + 0.5 * (reflect - centroid);
        else
          contract = centroid - 0.5 * (centroid - simplex[static_cast<size_t>(worst)]);
        auto cc = evaluate({contract});
        if (cc.empty()) break;
        double fc = cc[0];
        double accept_below = outside ? fr : cost[static_cast<size_t>(worst)];
        if (fc <= accept_below) {
          simplex[static_cast<size_t>(worst)] = contract;
          cost[static_cast<size_t>(worst)] = fc;
        } else {
          // Shrink every vertex toward the best one.
          std::vector<VectorXd> shrunk;
          std::vector<int> slots;
          for (int i = 0; i < static_cast<int>(simplex.size()); ++i) {
            if (i == best) continue;
            shrunk.push_back(simplex[static_cast<size_t>(best)] +
                             0.5 * (simplex[static_cast<size_t>(i)] - simplex[static_cast<size_t>(best)]));
            slots.push_back(i);
          }
          auto sc = evaluate(shrunk);
          for (std::size_t k = 0; k < sc.size(); ++k) {
            simplex[static_cast<size_t>(slots[k])] = shrunk[k];
            cost[static_cast<size_t>(slots[k])] = sc[k];
          }
          if (sc.size() < shrunk.size()) break;
        }
      }
      if (used >= budget) exhausted = true;
    }
    if (used >= budget) break;
  }
  return result;
}

namespace {

void validate_problem(const CalibrationProblem& problem) {
  validate_parameters(problem.parameters);
  if (!problem.factory) bad("problem has no model factory");
  if (!problem.excitation) bad("problem has no excitation");
  const auto& obj = problem.objective;
  if (obj.references.empty()) bad("no reference curves");
  if (!(obj.f_lo >= 0.0) || !(obj.f_lo < obj.f_hi)) bad("cost band is empty");
  if (!std::isfinite(obj.divergence_penalty) || !(obj.divergence_penalty > 0.0))
    bad("divergence penalty must be finite and positive");
  double weight_sum = 0.0;
  for (const auto& ref : obj.references) {
    if (ref.weight < 0.0) bad("reference weight for '" + ref.output_channel + "' is negative");
    weight_sum += ref.weight;
    if (ref.frequencies.size() < 2 || ref.frequencies.size() != ref.gain.size())
      bad("reference curve for '" + ref.output_channel + "' is malformed");
    for (std::size_t k = 1; k < ref.frequencies.size(); ++k)
      if (!(ref.frequencies[k] > ref.frequencies[k - 1]))
        bad("reference frequencies for '" + ref.output_channel + "' are not increasing");
    for (const std::string& ch : {ref.input_channel, ref.output_channel})
      if (std::find(problem.settings.channels.begin(), problem.settings.channels.end(), ch) ==
          problem.settings.channels.end())
        bad("reference channel '" + ch + "' is not logged by the run settings");
  }
  if (!(weight_sum > 0.0)) bad("all reference weights are zero");
  for (const auto& p : problem.parameters) {
    try {
      nlohmann::json::json_pointer ptr(p.path);
      if (!problem.document.contains(ptr) || !problem.document.at(ptr).is_number())
        bad("parameter '" + p.name + "': document has no number at " + p.path);
    } catch (const nlohmann::json::exception&) {
      bad("parameter '" + p.name + "': '" + p.path + "' is not a JSON pointer");
    }
  }
}

nlohmann::json patched_document(const CalibrationProblem& problem, const VectorXd& params) {
  if (params.size() != static_cast<int>(problem.parameters.size()))
    bad("parameter vector has the wrong dimension");
  nlohmann::json doc = problem.document;
  for (std::size_t i = 0; i < problem.parameters.size(); ++i)
    doc[nlohmann::json::json_pointer(problem.parameters[i].path)] = params[static_cast<int>(i)];
  return doc;
}

// Linear interpolation onto the reference curve; exact at its nodes.
double interp_gain(const FrfReference& ref, double f) {
  const auto& xs = ref.frequencies;
  auto it = std::upper_bound(xs.begin(), xs.end(), f);
  if (it == xs.begin()) return ref.gain.front();
  if (it == xs.end()) return ref.gain.back();
  std::size_t j = static_cast<std::size_t>(it - xs.begin());
  double t = (f - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ref.gain[j - 1] + t * (ref.gain[j] - ref.gain[j - 1]);
}

double log_gain(double g) { return std::log(std::max(g, 1e-12)); }

}  // namespace

RestartSnapshot settle_template(const CalibrationProblem& problem) {
  validate_problem(problem);
  Model model = problem.factory(problem.document);
  RunSettings settle = problem.settings;
  settle.duration = settle.settle_time;
  settle.channels.clear();
  settle.make_snapshot = true;
  RunOutput out = run(model, problem.excitation, settle);
  if (!out.snapshot) bad("settling produced no snapshot");
  return *out.snapshot;
}

std::vector<FrequencyResponse> evaluate_frfs(const CalibrationProblem& problem,
                                             const VectorXd& params,
                                             const RestartSnapshot* snapshot) {
  validate_problem(problem);
  Model model = problem.factory(patched_document(problem, params));
  RunOutput out = snapshot ? resume(model, *snapshot, problem.excitation, problem.settings)
                           : run(model, problem.excitation, problem.settings);

  // Only the excited window feeds the estimator; a resumed log already
  // starts there, a full run's settling rows are dropped.
  const auto& log = out.log;
  double cut = problem.settings.settle_time - 0.5 * log.sample_step;
  std::size_t begin = 0;
  while (begin < log.times.size() && log.times[begin] < cut) ++begin;

  auto excited = [&](const std::string& channel) {
    int col = log.column(channel);
    std::vector<double> series(log.times.size() - begin);
    for (std::size_t k = begin; k < log.times.size(); ++k)
      series[k - begin] = log.rows[k][static_cast<std::size_t>(col)];
    return series;
  };

  double fs = 1.0 / log.sample_step;
  std::vector<FrequencyResponse> frfs;
  for (const auto& ref : problem.objective.references) {
    bool seen = false;
    for (const auto& done : frfs)
      if (done.input_channel == ref.input_channel && done.output_channel == ref.output_channel)
        seen = true;
    if (seen) continue;
    frfs.push_back(frf(excited(ref.input_channel), excited(ref.output_channel), fs,
                       problem.objective.estimator, ref.input_channel, ref.output_channel));
  }
  return frfs;
}

double objective_cost(const CalibrationProblem& problem, const VectorXd& params,
                      const RestartSnapshot* snapshot) {
  std::vector<FrequencyResponse> frfs;
  try {
    frfs = evaluate_frfs(problem, params, snapshot);
  } catch (const DivergenceError&) {
    return problem.objective.divergence_penalty;
  } catch (const SingularityError&) {
    return problem.objective.divergence_penalty;
  }

  double cost = 0.0;
  for (const auto& ref : problem.objective.references) {
    const FrequencyResponse* model_frf = nullptr;
    for (const auto& f : frfs)
      if (f.input_channel == ref.input_channel && f.output_channel == ref.output_channel)
        model_frf = &f;
    double lo = std::max(problem.objective.f_lo, ref.frequencies.front());
    double hi = std::min(problem.objective.f_hi, ref.frequencies.back());
    std::vector<std::size_t> bins = band_indices(model_frf->frequencies, lo, hi);
    if (bins.empty())
      bad("no estimator bins fall inside the cost band for '" + ref.output_channel + "'");
    double acc = 0.0;
    for (std::size_t k : bins) {
      double d = log_gain(model_frf->gain[k]) - log_gain(interp_gain(ref, model_frf->frequencies[k]));
      acc += d * d;
    }
    cost += ref.weight * acc / static_cast<double>(bins.size());
  }
  return cost;
}

CalibrationResult calibrate(const CalibrationProblem& problem, int budget, uint64_t seed,
                            int workers) {
  validate_problem(problem);
  RestartSnapshot snapshot = settle_template(problem);

  VectorXd start(static_cast<int>(problem.parameters.size()));
  for (std::size_t i = 0; i < problem.parameters.size(); ++i) {
    const auto& p = problem.parameters[i];
    double v = problem.document.at(nlohmann::json::json_pointer(p.path)).get<double>();
    start[static_cast<int>(i)] = std::clamp(v, p.lower, p.upper);
  }

  auto f = [&](const VectorXd& x) { return objective_cost(problem, x, &snapshot); };
  OptimizeResult opt = optimize(f, problem.parameters, budget, seed, workers, &start);

  CalibrationResult result;
  result.best_parameters = opt.best;
  result.best_cost = opt.best_cost;
  result.trace = std::move(opt.trace);
  return result;
}

void write_trace_csv(const std::vector<TraceEntry>& trace,
                     const std::vector<ParameterSpec>& parameters, std::ostream& os) {
  std::string line = "eval,cost,best_cost";
  for (const auto& p : parameters) line += "," + p.name;
  line += '\n';
  os.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (const auto& entry : trace) {
    line = std::to_string(entry.eval);
    line += ',';
    append_number(line, entry.cost);
    line += ',';
    append_number(line, entry.best_cost);
    for (int i = 0; i < entry.params.size(); ++i) {
      line += ',';
      append_number(line, entry.params[i]);
    }
    line += '\n';
    os.write(line.data(), static_cast<std::streamsize>(line.size()));
  }
}

FrfReference load_frf_reference(const std::string& path, const std::string& input_channel,
                                const std::string& output_channel, double weight) {
  std::ifstream in(path);
  if (!in) bad("cannot open reference file " + path);
  std::string line;
  if (!std::getline(in, line) || line != "freq_hz,gain,phase_rad,coherence")
    bad(path + " is not an FRF table");
  FrfReference ref;
  ref.input_channel = input_channel;
  ref.output_channel = output_channel;
  ref.weight = weight;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double f = 0.0, g = 0.0, ph = 0.0, coh = 0.0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &f, &g, &ph, &coh) != 4)
      bad(path + ": malformed row '" + line + "'");
    ref.frequencies.push_back(f);
    ref.gain.push_back(g);
  }
  if (ref.frequencies.size() < 2) bad(path + " holds fewer than two bins");
  return ref;
}

}  // namespace seatsim
