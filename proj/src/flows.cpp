#include <orbitfit/flows.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace orbitfit {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-16;
constexpr double kDriftTolerance = 1e-10;
constexpr int kObjectiveWindow = 10;

std::string shape_of(const CMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_elements(const OrbitProblem& problem, const GroupElements& g) {
  const std::size_t n_terms = problem.size();
  if (g.lefts.size() != n_terms)
    throw ShapeError("group elements: expected " + std::to_string(n_terms) + " left unitaries");
  const bool two_sided = problem.kind == OrbitKind::equivalence;
  if (two_sided && g.rights.size() != n_terms)
    throw ShapeError("group elements: expected " + std::to_string(n_terms) + " right unitaries");
  for (std::size_t j = 0; j < n_terms; ++j) {
    if (g.lefts[j].rows() != problem.rows() || g.lefts[j].cols() != problem.rows())
      throw ShapeError("group elements: left unitary " + std::to_string(j) + " is " +
                       shape_of(g.lefts[j]));
    if (two_sided && (g.rights[j].rows() != problem.cols() || g.rights[j].cols() != problem.cols()))
      throw ShapeError("group elements: right unitary " + std::to_string(j) + " is " +
                       shape_of(g.rights[j]));
  }
}

const CMatrix& right_or_empty(const GroupElements& g, std::size_t j) {
  static const CMatrix empty;
  return g.rights.empty() ? empty : g.rights[j];
}

// Orbit terms X_j and the residuals R_j = A_0 - sum_{k != j} X_k.
struct Terms {
  std::vector<CMatrix> images;
  std::vector<CMatrix> residuals;
};

Terms terms(const OrbitProblem& problem, const GroupElements& g) {
  Terms t;
  t.images.reserve(problem.size());
  CMatrix total = CMatrix::Zero(problem.rows(), problem.cols());
  for (std::size_t j = 0; j < problem.size(); ++j) {
    t.images.push_back(act(problem.kind, problem.operands[j], g.lefts[j], right_or_empty(g, j)));
    total += t.images.back();
  }
  const CMatrix base = problem.target - total;
  t.residuals.reserve(problem.size());
  for (const auto& x : t.images) t.residuals.push_back(base + x);
  return t;
}

CMatrix similarity_direction(const CMatrix& x, const CMatrix& r) {
  const CMatrix rs = r.adjoint();
  return -skew_part(x * rs - rs * x);
}

Direction equivalence_direction(const CMatrix& a, const CMatrix& u, const CMatrix& v,
                                const CMatrix& r) {
  const CMatrix rs = r.adjoint();
  Direction d;
  d.omega_u = -skew_part(u * a * v * rs);
  d.omega_v = -skew_part(v * rs * u * a);
  return d;
}

CMatrix congruence_direction(const CMatrix& x, const CMatrix& r) {
  const CMatrix rs = r.adjoint();
  return -skew_part(x * rs + (rs * x).transpose());
}

Direction direction_for(const OrbitProblem& problem, const GroupElements& g, const Terms& t,
                        std::size_t j) {
  switch (problem.kind) {
    case OrbitKind::similarity:
      return {similarity_direction(t.images[j], t.residuals[j]), {}};
    case OrbitKind::equivalence:
      return equivalence_direction(problem.operands[j], g.lefts[j], g.rights[j], t.residuals[j]);
    case OrbitKind::congruence:
      return {congruence_direction(t.images[j], t.residuals[j]), {}};
  }
  throw std::logic_error("unreachable orbit kind");
}

void check_term(const OrbitProblem& problem, std::size_t j) {
  if (j >= problem.size())
    throw std::out_of_range("orbit term index " + std::to_string(j) + " out of range [0, " +
                            std::to_string(problem.size()) + ")");
}

void require_kind(const OrbitProblem& problem, OrbitKind kind, const char* what) {
  if (problem.kind != kind)
    throw std::invalid_argument(std::string(what) + " requires a " + std::string(to_string(kind)) +
                                " problem, got " + std::string(to_string(problem.kind)));
}

double term_norm_sq(const Direction& d) {
  double s = d.omega_u.squaredNorm();
  if (d.omega_v.size() > 0) s += d.omega_v.squaredNorm();
  return s;
}

bool window_converged(const std::vector<double>& history, double tol) {
  if (history.size() <= static_cast<std::size_t>(kObjectiveWindow)) return false;
  const double now = history.back();
  const double before = history[history.size() - 1 - kObjectiveWindow];
  if (before <= 0.0) return true;
  return (before - now) < tol * before;
}

}  // namespace

std::string_view to_string(OrbitKind kind) {
  switch (kind) {
    case OrbitKind::similarity: return "similarity";
    case OrbitKind::equivalence: return "equivalence";
    case OrbitKind::congruence: return "congruence";
  }
  return "unknown";
}

OrbitKind parse_orbit_kind(std::string_view name) {
  if (name == "similarity") return OrbitKind::similarity;
  if (name == "equivalence") return OrbitKind::equivalence;
  if (name == "congruence") return OrbitKind::congruence;
  throw std::invalid_argument("unknown orbit kind '" + std::string(name) + "'");
}

std::string_view to_string(FlowStatus status) {
  switch (status) {
    case FlowStatus::converged_gradient: return "converged_gradient";
    case FlowStatus::converged_objective: return "converged_objective";
    case FlowStatus::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

void OrbitProblem::validate() const {
  if (operands.empty()) throw ShapeError("orbit problem needs at least one operand");
  if (target.size() == 0) throw ShapeError("orbit problem target is empty");
  if (!target.allFinite()) throw StructureError("orbit problem target has non-finite entries");
  const bool square_kind = kind != OrbitKind::equivalence;
  if (square_kind && target.rows() != target.cols())
    throw ShapeError(std::string(to_string(kind)) + " problems need square matrices, target is " +
                     shape_of(target));
  for (std::size_t j = 0; j < operands.size(); ++j) {
    const auto& a = operands[j];
    if (a.rows() != target.rows() || a.cols() != target.cols())
      throw ShapeError("operand " + std::to_string(j + 1) + " is " + shape_of(a) +
                       ", target is " + shape_of(target));
    if (!a.allFinite())
      throw StructureError("operand " + std::to_string(j + 1) + " has non-finite entries");
  }
}

std::vector<std::string> OrbitProblem::warnings() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < operands.size(); ++j)
    if (operands[j].isZero(0.0))
      out.push_back("operand " + std::to_string(j + 1) + " is zero and contributes nothing");
  return out;
}

GroupElements GroupElements::identity(const OrbitProblem& problem) {
  GroupElements g;
  g.lefts.assign(problem.size(), CMatrix::Identity(problem.rows(), problem.rows()));
  if (problem.kind == OrbitKind::equivalence)
    g.rights.assign(problem.size(), CMatrix::Identity(problem.cols(), problem.cols()));
  return g;
}

void FlowConfig::validate() const {
  if (max_iters <= 0) throw std::invalid_argument("max_iters must be positive");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
  if (!(obj_tol > 0.0)) throw std::invalid_argument("obj_tol must be positive");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw std::invalid_argument("backtrack_factor must lie in (0, 1)");
  if (!(growth_factor > 1.0)) throw std::invalid_argument("growth_factor must exceed 1");
  if (restarts <= 0) throw std::invalid_argument("restarts must be positive");
  if (reunitarize_every <= 0) throw std::invalid_argument("reunitarize_every must be positive");
  if (!std::isfinite(initial_step)) throw std::invalid_argument("initial_step must be finite");
}

CMatrix act(OrbitKind kind, const CMatrix& a, const CMatrix& u, const CMatrix& v) {
  switch (kind) {
    case OrbitKind::similarity: return u * a * u.adjoint();
    case OrbitKind::equivalence: return u * a * v;
    case OrbitKind::congruence: return u * a * u.transpose();
  }
  throw std::logic_error("unreachable orbit kind");
}

CMatrix orbit_sum(const OrbitProblem& problem, const GroupElements& g) {
  check_elements(problem, g);
  CMatrix total = CMatrix::Zero(problem.rows(), problem.cols());
  for (std::size_t j = 0; j < problem.size(); ++j)
    total += act(problem.kind, problem.operands[j], g.lefts[j], right_or_empty(g, j));
  return total;
}

double objective_sq(const OrbitProblem& problem, const GroupElements& g) {
  return (orbit_sum(problem, g) - problem.target).squaredNorm();
}

double objective(const OrbitProblem& problem, const GroupElements& g) {
  return std::sqrt(objective_sq(problem, g));
}

CMatrix residual(const OrbitProblem& problem, const GroupElements& g, std::size_t j) {
  check_term(problem, j);
  check_elements(problem, g);
  return terms(problem, g).residuals[j];
}

CMatrix gradient_similarity(const OrbitProblem& problem, const GroupElements& g, std::size_t j) {
  require_kind(problem, OrbitKind::similarity, "gradient_similarity");
  return gradient(problem, g, j).omega_u;
}

Direction gradient_equivalence(const OrbitProblem& problem, const GroupElements& g,
                               std::size_t j) {
  require_kind(problem, OrbitKind::equivalence, "gradient_equivalence");
  return gradient(problem, g, j);
}

CMatrix gradient_congruence(const OrbitProblem& problem, const GroupElements& g, std::size_t j) {
  require_kind(problem, OrbitKind::congruence, "gradient_congruence");
  return gradient(problem, g, j).omega_u;
}

Direction gradient(const OrbitProblem& problem, const GroupElements& g, std::size_t j) {
  check_term(problem, j);
  check_elements(problem, g);
  return direction_for(problem, g, terms(problem, g), j);
}

std::vector<Direction> gradients(const OrbitProblem& problem, const GroupElements& g) {
  check_elements(problem, g);
  const Terms t = terms(problem, g);
  std::vector<Direction> dirs;
  dirs.reserve(problem.size());
  for (std::size_t j = 0; j < problem.size(); ++j) dirs.push_back(direction_for(problem, g, t, j));
  return dirs;
}

double squared_gradient_norm(const std::vector<Direction>& dirs) {
  double s = 0.0;
  for (const auto& d : dirs) s += term_norm_sq(d);
  return s;
}

double sup_gradient_norm(const std::vector<Direction>& dirs) {
  double s = 0.0;
  for (const auto& d : dirs) s = std::max(s, std::sqrt(term_norm_sq(d)));
  return s;
}

GroupElements advance(const GroupElements& g, const std::vector<Direction>& dirs, double t) {
  GroupElements next;
  next.lefts.reserve(g.lefts.size());
  for (std::size_t j = 0; j < g.lefts.size(); ++j)
    next.lefts.push_back(expm_skew<double>(t * dirs[j].omega_u) * g.lefts[j]);
  next.rights.reserve(g.rights.size());
  for (std::size_t j = 0; j < g.rights.size(); ++j)
    next.rights.push_back(expm_skew<double>(t * dirs[j].omega_v) * g.rights[j]);
  return next;
}

StepOutcome flow_step(const OrbitProblem& problem, const FlowConfig& config,
                      const std::vector<Direction>& dirs, FlowState& state) {
  const double slope = 2.0 * squared_gradient_norm(dirs);
  if (!(slope > 0.0)) return {};

  const bool cadence = (state.iteration + 1) % config.reunitarize_every == 0;
  double t = state.step > 0.0 ? state.step : 1.0;
  bool first_try = true;
  while (t >= kMinStep) {
    GroupElements candidate = advance(state.elements, dirs, t);
    auto polish = [&](std::vector<CMatrix>& elems) {
      for (auto& u : elems)
        if (cadence || unitarity_defect<double>(u) > kDriftTolerance) u = reunitarize<double>(u);
    };
    polish(candidate.lefts);
    polish(candidate.rights);

    const double value = objective_sq(problem, candidate);
    if (value < state.objective_sq && value <= state.objective_sq - kArmijo * t * slope) {
      state.elements = std::move(candidate);
      state.objective_sq = value;
      if (first_try && ++state.first_try_streak >= 2) {
        state.step = t * config.growth_factor;
        state.first_try_streak = 0;
      } else {
        if (!first_try) state.first_try_streak = 0;
        state.step = t;
      }
      return {true, t};
    }
    t *= config.backtrack_factor;
    first_try = false;
  }
  state.first_try_streak = 0;
  return {};
}

FlowResult run_flow(const OrbitProblem& problem, const FlowConfig& config,
                    const GroupElements& initial) {
  problem.validate();
  config.validate();
  check_elements(problem, initial);

  FlowState state;
  state.elements = initial;
  auto polish = [](std::vector<CMatrix>& elems) {
    for (auto& u : elems)
      if (unitarity_defect<double>(u) > kDriftTolerance) u = reunitarize<double>(u);
  };
  polish(state.elements.lefts);
  polish(state.elements.rights);
  state.objective_sq = objective_sq(problem, state.elements);
  state.step = config.initial_step;

  FlowResult result;
  std::vector<double> history{state.objective_sq};
  for (int k = 0;; ++k) {
    state.iteration = k;
    const auto dirs = gradients(problem, state.elements);
    const double sup = sup_gradient_norm(dirs);
    if (k == 0 && !(state.step > 0.0)) state.step = 1.0 / (1.0 + sup);

    TraceEntry entry{k, state.objective_sq, sup, 0.0};
    if (sup < config.grad_tol) {
      result.status = FlowStatus::converged_gradient;
      result.trace.push_back(entry);
      break;
    }
    if (window_converged(history, config.obj_tol)) {
      result.status = FlowStatus::converged_objective;
      result.trace.push_back(entry);
      break;
    }
    if (k >= config.max_iters) {
      result.status = FlowStatus::budget_exhausted;
      result.trace.push_back(entry);
      break;
    }

    const StepOutcome outcome = flow_step(problem, config, dirs, state);
    if (!outcome.accepted) {
      // no decrease down to the minimal step: numerically stationary
      result.status = FlowStatus::converged_objective;
      result.trace.push_back(entry);
      break;
    }
    entry.step = outcome.step;
    result.trace.push_back(entry);
    history.push_back(state.objective_sq);
  }

  result.best_objective = std::sqrt(state.objective_sq);
  result.best_elements = std::move(state.elements);
  return result;
}

GroupElements random_elements(const OrbitProblem& problem, std::mt19937_64& rng) {
  GroupElements g;
  for (std::size_t j = 0; j < problem.size(); ++j) {
    g.lefts.push_back(haar_unitary<double>(problem.rows(), rng));
    if (problem.kind == OrbitKind::equivalence)
      g.rights.push_back(haar_unitary<double>(problem.cols(), rng));
  }
  return g;
}

std::mt19937_64 restart_generator(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x6f726269u};
  return std::mt19937_64(seq);
}

RestartStats summarize(const std::vector<double>& values) {
  RestartStats s;
  s.restarts = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double dev = 0.0;
  for (double v : values) dev += (v - s.mean) * (v - s.mean);
  s.rmsd = std::sqrt(dev / static_cast<double>(values.size()));
  return s;
}

MultiRestartResult multi_restart(const OrbitProblem& problem, const FlowConfig& config,
                                 unsigned threads) {
  problem.validate();
  config.validate();

  const int restarts = config.restarts;
  std::vector<FlowResult> runs(static_cast<std::size_t>(restarts));
  auto run_one = [&](int r) {
    auto rng = restart_generator(config.seed, r);
    const GroupElements start = random_elements(problem, rng);
    FlowResult res = run_flow(problem, config, start);
    res.restart_index = r;
    runs[static_cast<std::size_t>(r)] = std::move(res);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(restarts));
  if (threads <= 1) {
    for (int r = 0; r < restarts; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int r = next++; r < restarts && !failed; r = next++) {
          try {
            run_one(r);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  MultiRestartResult out;
  std::vector<double> finals;
  finals.reserve(runs.size());
  std::size_t best = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    finals.push_back(runs[r].trace.back().objective_sq);
    if (runs[r].best_objective < runs[best].best_objective) best = r;
  }
  out.stats = summarize(finals);
  out.best = runs[best];
  out.runs = std::move(runs);
  return out;
}

}  // namespace orbitfit
