#include <orbitfit/flows.hpp>
#include <orbitfit/harness.hpp>
#include <orbitfit/oracles.hpp>

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace orbitfit;
using namespace orbitfit::testing;

namespace {

CMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
  CMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

OrbitProblem random_problem(OrbitKind kind, Eigen::Index n, Eigen::Index m, std::size_t terms,
                            std::mt19937_64& rng) {
  OrbitProblem p;
  p.kind = kind;
  const Eigen::Index cols = kind == OrbitKind::equivalence ? m : n;
  p.target = random_complex(n, cols, rng);
  for (std::size_t j = 0; j < terms; ++j) p.operands.push_back(random_complex(n, cols, rng));
  return p;
}

void check_fd(const OrbitProblem& p, const GroupElements& g, std::mt19937_64& rng) {
  for (std::size_t j = 0; j < p.size(); ++j) {
    const Direction d = gradient(p, g, j);
    const CMatrix du = random_skew(p.rows(), rng);
    const CMatrix dv = p.kind == OrbitKind::equivalence ? random_skew(p.cols(), rng) : CMatrix();
    const double fd = fd_derivative(p, g, j, du, dv);
    const double an = analytic_derivative(d, du, dv);
    CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

TEST_CASE("objective") {
  OrbitProblem p;
  p.kind = OrbitKind::similarity;
  p.target = CMatrix::Zero(2, 2);
  p.operands = {CMatrix::Identity(2, 2)};
  CHECK(objective(p, GroupElements::identity(p)) == doctest::Approx(std::sqrt(2.0)));

  p.target = CMatrix::Identity(2, 2);
  CHECK(objective(p, GroupElements::identity(p)) == 0.0);

  SUBCASE("equivalence with swaps") {
    OrbitProblem q;
    q.kind = OrbitKind::equivalence;
    q.target = mat2(0, 1, 0, 0);
    q.operands = {mat2(0, 0, 1, 0)};
    GroupElements g = GroupElements::identity(q);
    g.lefts[0] = mat2(0, 1, 1, 0);
    CHECK(objective(q, g) == doctest::Approx(std::sqrt(2.0)));
    g.rights[0] = mat2(0, 1, 1, 0);
    CHECK(objective(q, g) == 0.0);
  }

  SUBCASE("reference two-term value at the closed-form optimum") {
    const OrbitProblem q = example2_problem();
    const auto opt = herm_skew_min_max(q.operands[0], q.operands[1], q.target);
    GroupElements g;
    g.lefts = {opt.u_opt, opt.v_opt};
    CHECK(objective(q, g) == doctest::Approx(std::sqrt(605.8521)).epsilon(1e-6));
    CHECK(objective_sq(q, g) == doctest::Approx(opt.min_value * opt.min_value).epsilon(1e-12));
  }

  SUBCASE("invariance under joint unitary transport") {
    std::mt19937_64 rng(20);
    for (OrbitKind kind : {OrbitKind::similarity, OrbitKind::congruence}) {
      const OrbitProblem q = random_problem(kind, 4, 4, 3, rng);
      const GroupElements g = random_elements(q, rng);
      const CMatrix w = haar_unitary<double>(4, rng);
      OrbitProblem moved = q;
      moved.target = act(kind, q.target, w, CMatrix());
      GroupElements h = g;
      for (auto& u : h.lefts) u = w * u;
      CHECK(objective(moved, h) == doctest::Approx(objective(q, g)).epsilon(1e-12));
    }
  }

  SUBCASE("shape checks") {
    OrbitProblem q;
    q.kind = OrbitKind::similarity;
    q.target = CMatrix::Zero(2, 2);
    q.operands = {CMatrix::Zero(3, 3)};
    CHECK_THROWS_AS(q.validate(), ShapeError);
    q.operands.clear();
    CHECK_THROWS_AS(q.validate(), ShapeError);
    q.target = CMatrix::Zero(2, 3);
    q.operands = {CMatrix::Zero(2, 3)};
    CHECK_THROWS_AS(q.validate(), ShapeError);
    q.kind = OrbitKind::equivalence;
    CHECK_NOTHROW(q.validate());
    CHECK(q.warnings().size() == 1);
    GroupElements bad = GroupElements::identity(q);
    bad.rights[0] = CMatrix::Identity(2, 2);
    CHECK_THROWS_AS(objective(q, bad), ShapeError);
  }
}

TEST_CASE("residual") {
  OrbitProblem p;
  p.kind = OrbitKind::similarity;
  p.target = 5.0 * CMatrix::Identity(2, 2);
  p.operands = {CMatrix::Identity(2, 2), 2.0 * CMatrix::Identity(2, 2)};
  const GroupElements g = GroupElements::identity(p);
  CHECK((residual(p, g, 0) - 3.0 * CMatrix::Identity(2, 2)).norm() < 1e-15);
  CHECK((residual(p, g, 1) - 4.0 * CMatrix::Identity(2, 2)).norm() < 1e-15);
  CHECK_THROWS_AS(residual(p, g, 2), std::out_of_range);

  OrbitProblem single = p;
  single.operands = {CMatrix::Identity(2, 2)};
  CHECK((residual(single, GroupElements::identity(single), 0) - single.target).norm() == 0.0);
}

TEST_CASE("gradient_similarity") {
  SUBCASE("zero at an exact fit") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    std::mt19937_64 rng(21);
    p.operands = {random_hermitian(3, rng)};
    p.target = p.operands[0];
    CHECK(gradient_similarity(p, GroupElements::identity(p), 0).norm() < 1e-14);
  }
  SUBCASE("commuting data gives zero") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = mat2(1, 0, 0, 2);
    p.operands = {mat2(3, 0, 0, 4)};
    CHECK(gradient_similarity(p, GroupElements::identity(p), 0).norm() < 1e-15);
  }
  SUBCASE("swap example") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = mat2(0, 1, 1, 0);
    p.operands = {mat2(1, 0, 0, -1)};
    const CMatrix omega = gradient_similarity(p, GroupElements::identity(p), 0);
    CHECK(omega.norm() > 0.0);
    CHECK((omega + omega.adjoint()).norm() < 1e-15);
  }
  SUBCASE("wrong kind") {
    OrbitProblem p;
    p.kind = OrbitKind::equivalence;
    p.target = CMatrix::Zero(2, 2);
    p.operands = {CMatrix::Identity(2, 2)};
    CHECK_THROWS_AS(gradient_similarity(p, GroupElements::identity(p), 0), std::invalid_argument);
    CHECK_THROWS_AS(gradient_congruence(p, GroupElements::identity(p), 0), std::invalid_argument);
  }
}

TEST_CASE("gradient_equivalence") {
  OrbitProblem p;
  p.kind = OrbitKind::equivalence;
  p.target = mat2(0, 1, 0, 0);
  p.operands = {mat2(0, 1, 0, 0)};
  const Direction d = gradient_equivalence(p, GroupElements::identity(p), 0);
  CHECK(d.omega_u.norm() < 1e-15);
  CHECK(d.omega_v.norm() < 1e-15);

  OrbitProblem s = p;
  s.kind = OrbitKind::similarity;
  CHECK_THROWS_AS(gradient_equivalence(s, GroupElements::identity(s), 0), std::invalid_argument);

  SUBCASE("directions are skew-Hermitian of the right sizes") {
    std::mt19937_64 rng(22);
    const OrbitProblem q = random_problem(OrbitKind::equivalence, 3, 5, 2, rng);
    const GroupElements g = random_elements(q, rng);
    for (std::size_t j = 0; j < 2; ++j) {
      const Direction dj = gradient_equivalence(q, g, j);
      CHECK(dj.omega_u.rows() == 3);
      CHECK(dj.omega_v.rows() == 5);
      CHECK((dj.omega_u + dj.omega_u.adjoint()).norm() < 1e-12);
      CHECK((dj.omega_v + dj.omega_v.adjoint()).norm() < 1e-12);
    }
  }
}

TEST_CASE("gradient_congruence") {
  OrbitProblem p;
  p.kind = OrbitKind::congruence;
  std::mt19937_64 rng(23);
  p.operands = {random_symmetric(3, rng)};
  p.target = p.operands[0];
  CHECK(gradient_congruence(p, GroupElements::identity(p), 0).norm() < 1e-14);
  p.target = CMatrix::Zero(3, 3);
  const CMatrix omega = gradient_congruence(p, random_elements(p, rng), 0);
  CHECK((omega + omega.adjoint()).norm() < 1e-12);
}

TEST_CASE("gradients match finite differences") {
  std::mt19937_64 rng(24);
  SUBCASE("similarity, Hermitian and general operands") {
    OrbitProblem p = random_problem(OrbitKind::similarity, 4, 4, 2, rng);
    check_fd(p, random_elements(p, rng), rng);
    p.operands = {random_hermitian(4, rng), random_hermitian(4, rng)};
    p.target = random_hermitian(4, rng);
    check_fd(p, random_elements(p, rng), rng);
  }
  SUBCASE("equivalence, rectangular") {
    const OrbitProblem p = random_problem(OrbitKind::equivalence, 3, 5, 2, rng);
    check_fd(p, random_elements(p, rng), rng);
  }
  SUBCASE("congruence, symmetric and general") {
    OrbitProblem p = random_problem(OrbitKind::congruence, 4, 4, 2, rng);
    check_fd(p, random_elements(p, rng), rng);
    p.operands = {random_symmetric(4, rng), random_symmetric(4, rng)};
    check_fd(p, random_elements(p, rng), rng);
  }
  SUBCASE("random sizes and term counts") {
    for (int trial = 0; trial < 30; ++trial) {
      const auto kind = static_cast<OrbitKind>(trial % 3);
      const Eigen::Index n = 2 + trial % 4;
      const OrbitProblem p = random_problem(kind, n, n + trial % 2, 1 + trial % 3, rng);
      check_fd(p, random_elements(p, rng), rng);
    }
  }
}

TEST_CASE("flow_step") {
  std::mt19937_64 rng(25);
  const FlowConfig config;

  SUBCASE("first-order decrease along the flow") {
    for (OrbitKind kind : {OrbitKind::similarity, OrbitKind::equivalence, OrbitKind::congruence}) {
      const OrbitProblem p = random_problem(kind, 3, 4, 2, rng);
      const GroupElements g = random_elements(p, rng);
      const auto dirs = gradients(p, g);
      const double t = 1e-6;
      const double drop = objective_sq(p, g) - objective_sq(p, advance(g, dirs, t));
      const double predicted = 2.0 * t * squared_gradient_norm(dirs);
      CHECK(std::abs(drop - predicted) <= 0.1 * predicted);
    }
  }
  SUBCASE("accepted steps decrease and keep unitarity") {
    const OrbitProblem p = random_problem(OrbitKind::equivalence, 3, 3, 2, rng);
    FlowState state;
    state.elements = random_elements(p, rng);
    state.objective_sq = objective_sq(p, state.elements);
    state.step = 1.0;
    for (int k = 0; k < 30; ++k) {
      state.iteration = k;
      const double before = state.objective_sq;
      const StepOutcome out = flow_step(p, config, gradients(p, state.elements), state);
      REQUIRE(out.accepted);
      CHECK(state.objective_sq < before);
      CHECK(state.objective_sq == doctest::Approx(objective_sq(p, state.elements)).epsilon(1e-14));
      for (const auto& u : state.elements.lefts) CHECK(unitarity_defect<double>(u) <= 1e-10);
      for (const auto& v : state.elements.rights) CHECK(unitarity_defect<double>(v) <= 1e-10);
    }
  }
  SUBCASE("stationary point is left alone") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = mat2(1, 0, 0, 2);
    p.operands = {mat2(1, 0, 0, 2)};
    FlowState state;
    state.elements = GroupElements::identity(p);
    state.objective_sq = 0.0;
    state.step = 1.0;
    const StepOutcome out = flow_step(p, config, gradients(p, state.elements), state);
    CHECK_FALSE(out.accepted);
    CHECK((state.elements.lefts[0] - CMatrix::Identity(2, 2)).norm() == 0.0);
  }
}

TEST_CASE("run_flow") {
  std::mt19937_64 rng(26);
  FlowConfig config;

  SUBCASE("feasible single-orbit problem reaches zero") {
    int hits = 0;
    for (int trial = 0; trial < 10; ++trial) {
      OrbitProblem p;
      p.kind = OrbitKind::similarity;
      const CMatrix a = random_hermitian(4, rng);
      const CMatrix w = haar_unitary<double>(4, rng);
      p.operands = {a};
      p.target = w * a * w.adjoint();
      const FlowResult r = run_flow(p, config, random_elements(p, rng));
      if (r.best_objective * r.best_objective < 1e-6) ++hits;
    }
    CHECK(hits >= 8);
  }

  SUBCASE("trace is monotone, elements stay unitary, status is reported") {
    for (OrbitKind kind : {OrbitKind::similarity, OrbitKind::equivalence, OrbitKind::congruence}) {
      const OrbitProblem p = random_problem(kind, 4, 3, 2, rng);
      const FlowResult r = run_flow(p, config, random_elements(p, rng));
      REQUIRE(!r.trace.empty());
      for (std::size_t k = 1; k < r.trace.size(); ++k) {
        CHECK(r.trace[k].objective_sq <= r.trace[k - 1].objective_sq);
        CHECK(r.trace[k].iteration == static_cast<int>(k));
      }
      CHECK(r.trace.back().objective_sq == doctest::Approx(r.best_objective * r.best_objective));
      CHECK(r.trace.back().step == 0.0);
      CHECK(objective(p, r.best_elements) == doctest::Approx(r.best_objective).epsilon(1e-12));
      for (const auto& u : r.best_elements.lefts) CHECK(unitarity_defect<double>(u) <= 1e-10);
      for (const auto& v : r.best_elements.rights) CHECK(unitarity_defect<double>(v) <= 1e-10);
    }
  }

  SUBCASE("budget exhaustion") {
    const OrbitProblem p = random_problem(OrbitKind::similarity, 4, 4, 2, rng);
    FlowConfig tight = config;
    tight.max_iters = 3;
    const FlowResult r = run_flow(p, tight, random_elements(p, rng));
    CHECK(r.status == FlowStatus::budget_exhausted);
    CHECK(r.trace.size() == 4);
  }

  SUBCASE("critical points commute with the residual") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = random_hermitian(4, rng);
    p.operands = {random_hermitian(4, rng), random_hermitian(4, rng)};
    const FlowResult r = run_flow(p, config, random_elements(p, rng));
    REQUIRE(r.trace.back().grad_norm < 1e-6);
    for (std::size_t j = 0; j < 2; ++j) {
      const CMatrix x = act(p.kind, p.operands[j], r.best_elements.lefts[j], CMatrix());
      const CMatrix res = residual(p, r.best_elements, j);
      CHECK((x * res - res * x).norm() < 1e-6);
    }
  }

  SUBCASE("zero operand converges immediately") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = random_hermitian(3, rng);
    p.operands = {CMatrix::Zero(3, 3)};
    const FlowResult r = run_flow(p, config, random_elements(p, rng));
    CHECK(r.status == FlowStatus::converged_gradient);
    CHECK(r.best_objective == doctest::Approx(p.target.norm()));
  }

  SUBCASE("config validation") {
    const OrbitProblem p = random_problem(OrbitKind::similarity, 2, 2, 1, rng);
    FlowConfig bad = config;
    bad.max_iters = 0;
    CHECK_THROWS_AS(run_flow(p, bad, random_elements(p, rng)), std::invalid_argument);
    bad = config;
    bad.backtrack_factor = 1.0;
    CHECK_THROWS_AS(run_flow(p, bad, random_elements(p, rng)), std::invalid_argument);
  }
}

TEST_CASE("multi_restart") {
  std::mt19937_64 rng(27);
  const OrbitProblem p = random_problem(OrbitKind::similarity, 3, 3, 2, rng);
  FlowConfig config;
  config.restarts = 6;
  config.seed = 99;

  SUBCASE("deterministic for a fixed seed and any thread count") {
    const auto a = multi_restart(p, config, 1);
    const auto b = multi_restart(p, config, 1);
    const auto c = multi_restart(p, config, 3);
    CHECK(a.best.best_objective == b.best.best_objective);
    CHECK(a.best.best_objective == c.best.best_objective);
    CHECK(a.best.restart_index == c.best.restart_index);
    CHECK(a.stats.mean == c.stats.mean);
    CHECK(a.stats.rmsd == c.stats.rmsd);
    REQUIRE(a.runs.size() == 6);
    for (std::size_t r = 0; r < 6; ++r) CHECK(a.runs[r].trace.size() == c.runs[r].trace.size());
  }

  SUBCASE("best is the minimum over restarts and stats match the finals") {
    const auto res = multi_restart(p, config, 2);
    std::vector<double> finals;
    for (const auto& run : res.runs) {
      CHECK(res.best.best_objective <= run.best_objective);
      finals.push_back(run.trace.back().objective_sq);
    }
    const RestartStats s = summarize(finals);
    CHECK(res.stats.mean == doctest::Approx(s.mean));
    CHECK(res.stats.rmsd == doctest::Approx(s.rmsd));
    CHECK(res.stats.restarts == 6);
  }

  SUBCASE("a single restart equals run_flow from the restart generator") {
    config.restarts = 1;
    const auto res = multi_restart(p, config);
    auto gen = restart_generator(config.seed, 0);
    const FlowResult direct = run_flow(p, config, random_elements(p, gen));
    CHECK(res.best.best_objective == direct.best_objective);
    CHECK(res.best.trace.size() == direct.trace.size());
    CHECK(res.stats.rmsd == 0.0);
  }

  SUBCASE("different seeds give different starts") {
    auto g0 = restart_generator(1, 0);
    auto g1 = restart_generator(2, 0);
    auto g2 = restart_generator(1, 1);
    const CMatrix a = haar_unitary<double>(3, g0);
    CHECK((a - haar_unitary<double>(3, g1)).norm() > 1e-3);
    CHECK((a - haar_unitary<double>(3, g2)).norm() > 1e-3);
  }
}

TEST_CASE("summarize") {
  const RestartStats s = summarize({1.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.rmsd == 1.0);
  CHECK(s.restarts == 2);
  CHECK(summarize({}).restarts == 0);
}

TEST_CASE("orbit invariance of the optimum") {
  std::mt19937_64 rng(28);
  FlowConfig config;
  config.restarts = 10;
  config.seed = 5;

  SUBCASE("similarity") {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = random_hermitian(3, rng);
    p.operands = {random_hermitian(3, rng)};
    OrbitProblem moved = p;
    const CMatrix q = haar_unitary<double>(3, rng);
    moved.operands[0] = q * p.operands[0] * q.adjoint();
    const double a = multi_restart(p, config).best.best_objective;
    const double b = multi_restart(moved, config).best.best_objective;
    CHECK(std::abs(a - b) <= 1e-6);
    CHECK(a == doctest::Approx(hermitian_nearest(p.operands[0], p.target).min).epsilon(1e-6));
  }
  SUBCASE("equivalence") {
    const OrbitProblem p = random_problem(OrbitKind::equivalence, 3, 4, 1, rng);
    OrbitProblem moved = p;
    moved.operands[0] = haar_unitary<double>(3, rng) * p.operands[0] * haar_unitary<double>(4, rng);
    const double a = multi_restart(p, config).best.best_objective;
    const double b = multi_restart(moved, config).best.best_objective;
    CHECK(std::abs(a - b) <= 1e-6);
    CHECK(a == doctest::Approx(equivalence_nearest(p.operands[0], p.target)).epsilon(1e-6));
  }
  SUBCASE("congruence") {
    OrbitProblem p;
    p.kind = OrbitKind::congruence;
    p.target = random_symmetric(3, rng);
    p.operands = {random_symmetric(3, rng)};
    OrbitProblem moved = p;
    const CMatrix q = haar_unitary<double>(3, rng);
    moved.operands[0] = q * p.operands[0] * q.transpose();
    const double a = multi_restart(p, config).best.best_objective;
    const double b = multi_restart(moved, config).best.best_objective;
    CHECK(std::abs(a - b) <= 1e-6);
  }
}

TEST_CASE("flow never beats an analytic lower bound") {
  std::mt19937_64 rng(29);
  FlowConfig config;
  config.restarts = 3;
  for (int trial = 0; trial < 5; ++trial) {
    OrbitProblem p;
    p.kind = OrbitKind::similarity;
    p.target = random_complex(3, 3, rng);
    p.operands = {random_complex(3, 3, rng), random_complex(3, 3, rng)};
    const CMatrix sum = p.operands[0] + p.operands[1];
    const double bound = similarity_trace_bound(sum, p.target);
    config.seed = static_cast<std::uint64_t>(trial);
    CHECK(multi_restart(p, config).best.best_objective >= bound - 1e-9);
  }
}
