// Coupled Riemannian gradient flows minimizing
//
//     || sum_j act(g_j, A_j) - A_0 ||_F
//
// over unitary similarity (U A U*), unitary equivalence (U A V) and
// unitary t-congruence (U A U^t) orbits. Every element is moved along a
// geodesic exp(t * Omega) * U with Omega skew-Hermitian, so the iterates
// stay on U(n) up to rounding.

#ifndef ORBITFIT_FLOWS_HPP
#define ORBITFIT_FLOWS_HPP

#include <orbitfit/matcore.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace orbitfit {

enum class OrbitKind { similarity, equivalence, congruence };

std::string_view to_string(OrbitKind kind);
/// Throws std::invalid_argument on an unknown name.
OrbitKind parse_orbit_kind(std::string_view name);

struct OrbitProblem {
  OrbitKind kind = OrbitKind::similarity;
  CMatrix target;                 // A_0
  std::vector<CMatrix> operands;  // A_1 ... A_N

  std::size_t size() const { return operands.size(); }
  Eigen::Index rows() const { return target.rows(); }
  Eigen::Index cols() const { return target.cols(); }

  /// Enforces the kind-specific shape rules; throws ShapeError.
  void validate() const;
  /// Non-fatal findings such as zero operands, which contribute nothing.
  std::vector<std::string> warnings() const;
};

/// One unitary per orbit term (lefts); rights are only used for equivalence.
struct GroupElements {
  std::vector<CMatrix> lefts;
  std::vector<CMatrix> rights;

  static GroupElements identity(const OrbitProblem& problem);
};

struct FlowConfig {
  int max_iters = 10000;
  double grad_tol = 1e-8;
  double obj_tol = 1e-12;
  /// Step used on the first iteration; <= 0 selects 1 / (1 + sup_j ||Omega_j||).
  double initial_step = 0.0;
  double backtrack_factor = 0.5;
  double growth_factor = 1.5;
  int restarts = 20;
  std::uint64_t seed = 0;
  int reunitarize_every = 50;

  void validate() const;
};

enum class FlowStatus { converged_gradient, converged_objective, budget_exhausted };

std::string_view to_string(FlowStatus status);

struct TraceEntry {
  int iteration = 0;
  double objective_sq = 0.0;
  double grad_norm = 0.0;  // sup_j ||Omega_j|| at this iterate
  double step = 0.0;       // step accepted from this iterate, 0 if none
};

struct FlowResult {
  double best_objective = 0.0;  // the norm, not its square
  GroupElements best_elements;
  std::vector<TraceEntry> trace;
  FlowStatus status = FlowStatus::budget_exhausted;
  int restart_index = 0;
};

/// Descent directions for one orbit term. omega_v is empty unless the
/// problem is an equivalence problem.
struct Direction {
  CMatrix omega_u;
  CMatrix omega_v;
};

/// Image of A under the orbit action selected by kind.
CMatrix act(OrbitKind kind, const CMatrix& a, const CMatrix& u, const CMatrix& v);

/// sum_j act(g_j, A_j)
CMatrix orbit_sum(const OrbitProblem& problem, const GroupElements& g);

double objective(const OrbitProblem& problem, const GroupElements& g);
double objective_sq(const OrbitProblem& problem, const GroupElements& g);

/// A_0 minus every orbit term except term j (0-based).
CMatrix residual(const OrbitProblem& problem, const GroupElements& g, std::size_t j);

/// Omega = -[U A U*, R*]_s with R the residual of term j.
CMatrix gradient_similarity(const OrbitProblem& problem, const GroupElements& g, std::size_t j);
/// Omega_U = -(U A V R*)_s, Omega_V = -(V R* U A)_s.
Direction gradient_equivalence(const OrbitProblem& problem, const GroupElements& g, std::size_t j);
/// Omega = -(X R* + (R* X)^t)_s with X = U A U^t.
CMatrix gradient_congruence(const OrbitProblem& problem, const GroupElements& g, std::size_t j);

/// Dispatches on the problem kind.
Direction gradient(const OrbitProblem& problem, const GroupElements& g, std::size_t j);
std::vector<Direction> gradients(const OrbitProblem& problem, const GroupElements& g);

/// sum_j ||Omega_j||^2 (both sides for equivalence); the objective^2
/// decreases at rate twice this along the flow.
double squared_gradient_norm(const std::vector<Direction>& dirs);
double sup_gradient_norm(const std::vector<Direction>& dirs);

/// Moves every element along its direction: U <- exp(t Omega) U.
GroupElements advance(const GroupElements& g, const std::vector<Direction>& dirs, double t);

/// Mutable line-search state carried between iterations of a single run.
struct FlowState {
  GroupElements elements;
  double objective_sq = 0.0;
  double step = 0.0;
  int first_try_streak = 0;
  int iteration = 0;
};

struct StepOutcome {
  bool accepted = false;  // false: step underflowed without decrease
  double step = 0.0;
};

/// One simultaneous update of all elements with Armijo backtracking on the
/// squared objective. Updates state in place.
StepOutcome flow_step(const OrbitProblem& problem, const FlowConfig& config,
                      const std::vector<Direction>& dirs, FlowState& state);

FlowResult run_flow(const OrbitProblem& problem, const FlowConfig& config,
                    const GroupElements& initial);

/// Haar-random elements for every orbit term.
GroupElements random_elements(const OrbitProblem& problem, std::mt19937_64& rng);

/// Generator for restart r, derived from the master seed.
std::mt19937_64 restart_generator(std::uint64_t seed, int restart);

struct RestartStats {
  double mean = 0.0;  // over final objective^2 values
  double rmsd = 0.0;
  int restarts = 0;
};

struct MultiRestartResult {
  FlowResult best;
  std::vector<FlowResult> runs;  // indexed by restart
  RestartStats stats;
};

/// Runs config.restarts flows from Haar-random starts. threads = 0 uses the
/// hardware concurrency. The result does not depend on the thread count.
MultiRestartResult multi_restart(const OrbitProblem& problem, const FlowConfig& config,
                                 unsigned threads = 1);

/// Population mean and root-mean-square deviation.
RestartStats summarize(const std::vector<double>& values);

}  // namespace orbitfit

#endif  // ORBITFIT_FLOWS_HPP
