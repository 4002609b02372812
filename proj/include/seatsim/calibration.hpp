// Derivative-free parameter identification: fit model transmissibility
// gains to reference curves by patching numeric parameters into a model
// document and re-running the simulation pipeline.
//
// Parameters live in a JSON document; a user-supplied factory turns the
// patched document into a Model. Every objective evaluation resumes from
// one shared settled snapshot (valid because the structure hash ignores
// force-element parameters and controller gains), so settling is paid once
// per calibration rather than once per evaluation.

#pragma once

#include <json.hpp>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seatsim/analysis.hpp"
#include "seatsim/excitation.hpp"
#include "seatsim/simulation.hpp"

namespace seatsim {

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One tunable scalar: a JSON-pointer path into the model document with
/// bounds. Log-scaled parameters are searched in log space, so their
/// bounds must be strictly positive.
struct ParameterSpec {
  std::string name;
  std::string path;  // e.g. "/restraints/lumbar/stiffness"
  double lower = 0.0;
  double upper = 0.0;
  bool log_scale = false;
};

/// One reference transmissibility curve and its weight in the cost.
struct FrfReference {
  std::string input_channel;
  std::string output_channel;
  double weight = 1.0;
  std::vector<double> frequencies;  // Hz, strictly increasing
  std::vector<double> gain;
};

struct ObjectiveConfig {
  std::vector<FrfReference> references;
  double f_lo = 0.5;  // Hz, cost band
  double f_hi = 12.0;
  double divergence_penalty = 1.0e6;  // returned for diverged simulations
  EstimatorConfig estimator;
};

/// Everything an objective evaluation needs. `settings` must log every
/// channel the references use; the excitation outlives the problem.
struct CalibrationProblem {
  nlohmann::json document;
  std::function<Model(const nlohmann::json&)> factory;
  const ExcitationSignal* excitation = nullptr;
  RunSettings settings;
  ObjectiveConfig objective;
  std::vector<ParameterSpec> parameters;
};

struct TraceEntry {
  int eval = 0;       // 1-based evaluation index
  double cost = 0.0;  // this evaluation
  double best_cost = 0.0;  // best seen so far, non-increasing
  VectorXd params;    // natural units, within bounds
};

struct OptimizeResult {
  VectorXd best;
  double best_cost = 0.0;
  std::vector<TraceEntry> trace;
};

/// Bounded Nelder-Mead: parameters are searched through a logistic bound
/// transform, stagnated simplices restart from seeded random points until
/// the evaluation budget runs out. Same seed and budget reproduce the
/// trace exactly; `workers` > 1 parallelizes simplex batches without
/// changing the result. `start`, when given, seeds the first simplex.
OptimizeResult optimize(const std::function<double(const VectorXd&)>& objective,
                        const std::vector<ParameterSpec>& parameters, int budget, uint64_t seed,
                        int workers = 1, const VectorXd* start = nullptr);

/// Settles the template model once and returns the snapshot every
/// evaluation resumes from.
RestartSnapshot settle_template(const CalibrationProblem& problem);

/// FRFs of the model at one parameter vector, estimated over the excited
/// window. Resumes from `snapshot` when given, otherwise runs settling too.
std::vector<FrequencyResponse> evaluate_frfs(const CalibrationProblem& problem,
                                             const VectorXd& params,
                                             const RestartSnapshot* snapshot = nullptr);

/// Weighted band-mean squared log-gain error against the references.
/// A diverged or gimbal-locked simulation costs the configured penalty.
double objective_cost(const CalibrationProblem& problem, const VectorXd& params,
                      const RestartSnapshot* snapshot = nullptr);

struct CalibrationResult {
  VectorXd best_parameters;
  double best_cost = 0.0;
  std::vector<TraceEntry> trace;
};

/// The full loop: validate, settle once, then optimize the objective.
/// The starting point is the parameter values found in the document.
CalibrationResult calibrate(const CalibrationProblem& problem, int budget, uint64_t seed,
                            int workers = 1);

/// Convergence trace as CSV: eval,cost,best_cost,<one column per parameter>.
void write_trace_csv(const std::vector<TraceEntry>& trace,
                     const std::vector<ParameterSpec>& parameters, std::ostream& os);

/// Reads one reference curve from the FRF CSV format
/// (freq_hz,gain,phase_rad,coherence).
FrfReference load_frf_reference(const std::string& path, const std::string& input_channel,
                                const std::string& output_channel, double weight = 1.0);

}  // namespace seatsim
