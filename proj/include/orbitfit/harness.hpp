// Reproducible numerical experiments: feasible-by-construction sums of
// orbits, the 3x3 Hermitian + skew-Hermitian instance with a closed-form
// optimum, Ky Fan-feasible but unreachable diagonal triples, and random
// complex targets against sums of random orbits.

#ifndef ORBITFIT_HARNESS_HPP
#define ORBITFIT_HARNESS_HPP

#include <orbitfit/flows.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orbitfit {

enum class ExperimentName { example1, example2, example4, example5, example6 };

std::string_view to_string(ExperimentName name);
/// Throws std::invalid_argument on an unknown name.
ExperimentName parse_experiment_name(std::string_view name);

struct ExperimentSpec {
  ExperimentName name = ExperimentName::example2;
  Eigen::Index n = 3;
  Eigen::Index m = 3;
  std::size_t orbit_count = 2;  // N
  /// Orbit action; only example6 accepts similarity in place of equivalence.
  OrbitKind kind = OrbitKind::similarity;
  int restarts = 20;
  std::uint64_t seed = 0;
  FlowConfig flow;
  unsigned threads = 1;

  /// Default dimensions and kind for the named experiment.
  static ExperimentSpec defaults(ExperimentName name);
  void validate() const;
};

enum class OracleKind { none, optimum, lower_bound };

std::string_view to_string(OracleKind kind);

struct BuiltExperiment {
  OrbitProblem problem;
  OracleKind oracle_kind = OracleKind::none;
  double oracle = 0.0;  // objective^2 units
  /// Objective of the hidden construction (feasible examples only).
  std::optional<double> construction_objective;
  std::optional<bool> kyfan_holds;
};

BuiltExperiment build_experiment(const ExperimentSpec& spec);

/// A_0 = diag(N^2, N+1) (+) 0, A_j = diag(N, 1) (+) 0 as an n x n
/// equivalence problem. Fails the trace-norm necessary condition.
OrbitProblem build_example3(std::size_t orbit_count, Eigen::Index n);

/// Fixed 3x3 matrices; the skew-Hermitian operand is i times a real
/// symmetric matrix.
OrbitProblem example2_problem();

/// Lower floor on the Ky Fan-feasible diagonal triple's minimum.
inline constexpr double kExample4Floor = 0.1;
/// Threshold on objective^2 for feasible constructions.
inline constexpr double kFeasibleThreshold = 1e-6;
/// Threshold on objective^2 for random targets against N >= 2 orbits.
inline constexpr double kRandomSumThreshold = 1e-4;
/// Tolerance on objective^2 against the closed-form optimum.
inline constexpr double kClosedFormTolerance = 1e-6;
/// Floor for "visibly positive" distances.
inline constexpr double kVisiblyPositive = 0.1;

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<FlowResult> runs;
  std::vector<double> finals;  // objective^2 per restart
  double mean = 0.0;
  double rmsd = 0.0;
  double best_objective = 0.0;
  OracleKind oracle_kind = OracleKind::none;
  double oracle = 0.0;
  std::optional<double> construction_objective;
  std::optional<bool> kyfan_holds;
  bool pass = false;
};

ExperimentReport run_experiment(const ExperimentSpec& spec);

/// First recorded iteration whose objective^2 is below threshold.
std::optional<int> iterations_to_threshold(const FlowResult& run, double threshold);

/// CSV: restart,iteration,objective_sq,grad_norm,step. Throws std::runtime_error on I/O failure.
void export_trace(const ExperimentReport& report, const std::filesystem::path& path);
void export_trace(const std::vector<FlowResult>& runs, const std::filesystem::path& path);

}  // namespace orbitfit

#endif  // ORBITFIT_HARNESS_HPP
