// Closed-form optima, lower bounds and feasibility tests for sums of
// unitary orbits. These are independent of the flow engine and serve as
// its ground truth.

#ifndef ORBITFIT_ORACLES_HPP
#define ORBITFIT_ORACLES_HPP

#include <orbitfit/matcore.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace orbitfit {

/// Optimum of min/max over unitary X, Y of ||X A X* + Y B Y* - C|| for
/// Hermitian A and skew-Hermitian B.
struct HermSkewOptimum {
  double min_value = 0.0;
  double max_value = 0.0;
  CMatrix u_opt;  // u_opt A u_opt* + v_opt B v_opt* attains min_value
  CMatrix v_opt;
  RVector a;  // eig(A), descending
  RVector b;  // eig(-iB)
  RVector f;  // eig((C + C*)/2)
  RVector g;  // eig(-i(C - C*)/2)
};

HermSkewOptimum herm_skew_min_max(const CMatrix& a, const CMatrix& b, const CMatrix& c);

struct NearestBounds {
  double min = 0.0;
  double max = 0.0;
};

/// Extremes of ||C - U A U*|| over unitary U for Hermitian A, C.
NearestBounds hermitian_nearest(const CMatrix& a, const CMatrix& c);

/// min over unitary U, V of ||U A V - C|| = ||s(A) - s(C)||_2.
double equivalence_nearest(const CMatrix& a, const CMatrix& c);

struct PolygonWitness {
  std::size_t violating_side = 0;
};

struct KyFanWitness {
  std::size_t matrix_index = 0;  // i in 2||A_i||_k <= sum_j ||A_j||_k
  std::size_t k = 0;
  /// every violating (i, k), in the order they were found
  std::vector<std::pair<std::size_t, std::size_t>> all;
};

/// perms[j][r] is the index into v_{j+1} placed on row r.
struct PermutationWitness {
  std::vector<std::vector<std::size_t>> perms;
};

using Witness = std::variant<std::monostate, PolygonWitness, KyFanWitness, PermutationWitness>;

struct FeasibilityReport {
  std::string condition;
  bool holds = false;
  Witness witness;
};

/// Positive lengths a_0..a_N close into a convex polygon iff
/// sum_j a_j - 2 a_k >= 0 for every k.
FeasibilityReport polygon_check(const std::vector<double>& lengths);

/// Largest n accepted by diagonal_decomposition_search.
inline constexpr std::size_t kMaxDecompositionSize = 8;

/// Searches permutations P_j such that every row of [v0 | P_1 v_1 | ... ]
/// passes polygon_check (zero entries are dropped from a row).
FeasibilityReport diagonal_decomposition_search(const std::vector<double>& v0,
                                                const std::vector<std::vector<double>>& vs);

/// 2 ||A_i||_k <= sum_j ||A_j||_k for all i and all Ky Fan k.
FeasibilityReport kyfan_necessary(const std::vector<CMatrix>& matrices);

/// |tr A - tr B| / sqrt(n): lower bound on ||S^-1 A S - T^-1 B T||.
double similarity_trace_bound(const CMatrix& a, const CMatrix& b);

/// inf over invertible S of ||S^-1 A S - b I|| = sqrt(sum |a_i - b|^2).
double similarity_to_scalar_inf(const CMatrix& a, Complex b);

/// [[0, A], [A*, 0]]
CMatrix tilde_embed(const CMatrix& a);

}  // namespace orbitfit

#endif  // ORBITFIT_ORACLES_HPP
