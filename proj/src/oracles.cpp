#include <orbitfit/oracles.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace orbitfit {

namespace {

constexpr double kSymmetryTolerance = 1e-8;
// relative slack for the linear inequalities on lengths / norms
constexpr double kInequalitySlack = 1e-12;

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
}

void require_hermitian(const CMatrix& h, const char* what) {
  if (h.rows() != h.cols()) throw ShapeError(std::string(what) + ": matrix must be square");
  if ((h - h.adjoint()).norm() > kSymmetryTolerance * std::max(1.0, h.norm()))
    throw StructureError(std::string(what) + ": matrix is not Hermitian");
}

void require_skew(const CMatrix& s, const char* what) {
  if (s.rows() != s.cols()) throw ShapeError(std::string(what) + ": matrix must be square");
  if ((s + s.adjoint()).norm() > kSymmetryTolerance * std::max(1.0, s.norm()))
    throw StructureError(std::string(what) + ": matrix is not skew-Hermitian");
}

bool polygon_holds(const std::vector<double>& sides, std::size_t* violating) {
  const double total = std::accumulate(sides.begin(), sides.end(), 0.0);
  for (std::size_t k = 0; k < sides.size(); ++k)
    if (total - 2.0 * sides[k] < -kInequalitySlack * total) {
      if (violating) *violating = k;
      return false;
    }
  return true;
}

// Row-by-row backtracking over the permutations of every v_j.
class DecompositionSearch {
 public:
  DecompositionSearch(const std::vector<double>& v0, const std::vector<std::vector<double>>& vs)
      : v0_(v0), vs_(vs), used_(vs.size(), std::vector<bool>(v0.size(), false)),
        perms_(vs.size(), std::vector<std::size_t>(v0.size(), 0)) {}

  bool run() { return fill(0, 0); }
  const std::vector<std::vector<std::size_t>>& perms() const { return perms_; }

 private:
  bool row_ok(std::size_t row) const {
    std::vector<double> sides;
    if (v0_[row] > 0.0) sides.push_back(v0_[row]);
    for (std::size_t j = 0; j < vs_.size(); ++j) {
      const double x = vs_[j][perms_[j][row]];
      if (x > 0.0) sides.push_back(x);
    }
    return sides.empty() || polygon_holds(sides, nullptr);
  }

  bool fill(std::size_t row, std::size_t col) {
    const std::size_t n = v0_.size();
    if (row == n) return true;
    if (col == vs_.size()) return row_ok(row) && fill(row + 1, 0);
    const auto& v = vs_[col];
    for (std::size_t idx = 0; idx < n; ++idx) {
      if (used_[col][idx]) continue;
      // an equal value at an earlier free index was already tried
      bool duplicate = false;
      for (std::size_t prev = 0; prev < idx && !duplicate; ++prev)
        duplicate = !used_[col][prev] && v[prev] == v[idx];
      if (duplicate) continue;
      used_[col][idx] = true;
      perms_[col][row] = idx;
      if (fill(row, col + 1)) return true;
      used_[col][idx] = false;
    }
    return false;
  }

  const std::vector<double>& v0_;
  const std::vector<std::vector<double>>& vs_;
  std::vector<std::vector<bool>> used_;
  std::vector<std::vector<std::size_t>> perms_;
};

}  // namespace

HermSkewOptimum herm_skew_min_max(const CMatrix& a, const CMatrix& b, const CMatrix& c) {
  require_hermitian(a, "herm_skew_min_max");
  require_skew(b, "herm_skew_min_max");
  if (c.rows() != c.cols()) throw ShapeError("herm_skew_min_max: C must be square");
  if (b.rows() != a.rows() || c.rows() != a.rows())
    throw ShapeError("herm_skew_min_max: A, B, C must share one size");

  const Complex i(0.0, 1.0);
  const CMatrix herm_c = herm_part(c);
  const CMatrix skew_c_over_i = -i * skew_part(c);  // G with C = F + iG
  const CMatrix minus_ib = -i * b;

  const auto ea = herm_eig<double>(a);
  const auto eb = herm_eig<double>(minus_ib);
  const auto ef = herm_eig<double>(herm_c);
  const auto eg = herm_eig<double>(skew_c_over_i);

  HermSkewOptimum out;
  out.a = ea.values;
  out.b = eb.values;
  out.f = ef.values;
  out.g = eg.values;
  out.min_value = std::sqrt((out.f - out.a).squaredNorm() + (out.g - out.b).squaredNorm());
  const RVector a_up = out.a.reverse();
  const RVector b_up = out.b.reverse();
  out.max_value = std::sqrt((out.f - a_up).squaredNorm() + (out.g - b_up).squaredNorm());

  // Rotate the eigenbasis of A onto that of F, and of -iB onto that of G.
  out.u_opt = ef.vectors * ea.vectors.adjoint();
  out.v_opt = eg.vectors * eb.vectors.adjoint();
  return out;
}

NearestBounds hermitian_nearest(const CMatrix& a, const CMatrix& c) {
  require_hermitian(a, "hermitian_nearest");
  require_hermitian(c, "hermitian_nearest");
  require_same_shape(a, c, "hermitian_nearest");
  const RVector ea = herm_eigenvalues<double>(a);
  const RVector ec = herm_eigenvalues<double>(c);
  return {(ea - ec).norm(), (ea - RVector(ec.reverse())).norm()};
}

double equivalence_nearest(const CMatrix& a, const CMatrix& c) {
  require_same_shape(a, c, "equivalence_nearest");
  return (singular_values<double>(a) - singular_values<double>(c)).norm();
}

FeasibilityReport polygon_check(const std::vector<double>& lengths) {
  if (lengths.empty()) throw std::invalid_argument("polygon_check: no side lengths");
  for (double x : lengths)
    if (!(x > 0.0) || !std::isfinite(x))
      throw std::invalid_argument("polygon_check: side lengths must be positive and finite");
  FeasibilityReport report;
  report.condition = "polygon";
  std::size_t k = 0;
  report.holds = polygon_holds(lengths, &k);
  if (!report.holds) report.witness = PolygonWitness{k};
  return report;
}

FeasibilityReport diagonal_decomposition_search(const std::vector<double>& v0,
                                                const std::vector<std::vector<double>>& vs) {
  const std::size_t n = v0.size();
  if (n == 0) throw std::invalid_argument("diagonal_decomposition_search: empty vectors");
  if (n > kMaxDecompositionSize)
    throw std::invalid_argument("diagonal_decomposition_search: n = " + std::to_string(n) +
                                " exceeds the exhaustive limit " +
                                std::to_string(kMaxDecompositionSize));
  if (vs.empty()) throw std::invalid_argument("diagonal_decomposition_search: no operands");
  auto check = [n](const std::vector<double>& v) {
    if (v.size() != n) throw ShapeError("diagonal_decomposition_search: length mismatch");
    for (double x : v)
      if (!(x >= 0.0) || !std::isfinite(x))
        throw std::invalid_argument("diagonal_decomposition_search: entries must be non-negative");
  };
  check(v0);
  for (const auto& v : vs) check(v);

  DecompositionSearch search(v0, vs);
  FeasibilityReport report;
  report.condition = "diagonal_decomposition";
  report.holds = search.run();
  if (report.holds) report.witness = PermutationWitness{search.perms()};
  return report;
}

FeasibilityReport kyfan_necessary(const std::vector<CMatrix>& matrices) {
  if (matrices.size() < 2) throw std::invalid_argument("kyfan_necessary: need A_0 and at least one A_j");
  for (const auto& m : matrices) require_same_shape(matrices.front(), m, "kyfan_necessary");

  // cumulative Ky Fan norms: partial[i][k-1] = ||A_i||_k
  std::vector<RVector> partial;
  partial.reserve(matrices.size());
  for (const auto& m : matrices) {
    const RVector s = singular_values<double>(m);
    RVector cum(s.size());
    std::partial_sum(s.begin(), s.end(), cum.begin());
    partial.push_back(cum);
  }

  FeasibilityReport report;
  report.condition = "kyfan";
  report.holds = true;
  KyFanWitness witness;
  const auto p = static_cast<std::size_t>(partial.front().size());
  for (std::size_t k = 1; k <= p; ++k) {
    double total = 0.0;
    for (const auto& cum : partial) total += cum(static_cast<Eigen::Index>(k - 1));
    for (std::size_t i = 0; i < partial.size(); ++i) {
      const double lhs = 2.0 * partial[i](static_cast<Eigen::Index>(k - 1));
      if (lhs - total > kInequalitySlack * total) {
        if (report.holds) {
          witness.matrix_index = i;
          witness.k = k;
        }
        report.holds = false;
        witness.all.emplace_back(i, k);
      }
    }
  }
  if (!report.holds) report.witness = std::move(witness);
  return report;
}

double similarity_trace_bound(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != a.cols()) throw ShapeError("similarity_trace_bound: matrices must be square");
  require_same_shape(a, b, "similarity_trace_bound");
  return std::abs(a.trace() - b.trace()) / std::sqrt(static_cast<double>(a.rows()));
}

double similarity_to_scalar_inf(const CMatrix& a, Complex b) {
  if (a.rows() != a.cols()) throw ShapeError("similarity_to_scalar_inf: matrix must be square");
  if (!a.allFinite()) throw StructureError("similarity_to_scalar_inf: non-finite entry");
  Eigen::ComplexEigenSolver<CMatrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw StructureError("similarity_to_scalar_inf: Schur failed");
  return (solver.eigenvalues().array() - b).matrix().norm();
}

CMatrix tilde_embed(const CMatrix& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  CMatrix out = CMatrix::Zero(n + m, n + m);
  out.topRightCorner(n, m) = a;
  out.bottomLeftCorner(m, n) = a.adjoint();
  return out;
}

}  // namespace orbitfit
