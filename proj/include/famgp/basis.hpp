#pragma once

#include "famgp/types.hpp"

namespace famgp {

// Truncated Mercer expansion k(x,y) ~ sum_i lambda_i phi_i(x) phi_i(y).
// n is the retained count after the eigenvalue floor; n_requested what the
// caller asked for.
struct MercerBasis {
  KernelKind kind = KernelKind::Chebyshev;
  KernelParams params;
  int n = 0;
  int n_requested = 0;
  Vec lambda;
  double eig_floor = 1e-14;  // relative to the largest eigenvalue; 0 disables
  bool floored = false;      // any trailing eigenvalues dropped
};

struct BasisMatrix {
  Mat values;                // N x n, entry (i,j) = d^k phi_j / dx^k at x_i
  int derivative_order = 0;  // 0 = plain eigenfunctions
};

// The squared-exponential eigenfunctions exist in two normalizations:
// orthonormalized Hermite functions (default, numerically convergent) and
// raw Hermite polynomials with a wider Gaussian envelope. The latter is kept
// selectable for comparison; it reconstructs poorly and supports evaluation
// only (no derivatives or parameter gradients).
enum class SeVariant { Normalized, Unnormalized };
void set_se_variant(SeVariant v);
SeVariant se_variant();

constexpr double kDefaultEigFloor = 1e-14;

// Exact closed-form kernel value. Chebyshev requires x, x2 in [-1,1].
double kernel_eval(KernelKind kind, const KernelParams& p, double x, double x2);

// Eigenvalues per closed form, trailing values below floor*max dropped.
// Throws std::underflow_error if everything beyond index 0 is floored away.
MercerBasis make_basis(KernelKind kind, const KernelParams& p, int n,
                       double eig_floor = kDefaultEigFloor);

BasisMatrix basis_matrix(const MercerBasis& basis, const Vec& X);

// k-th derivative of every eigenfunction, k >= 1.
BasisMatrix basis_derivative(const MercerBasis& basis, const Vec& X, int k);

// d lambda_i / d param. Zero vector for parameters absent from the
// eigenvalues (periodic f_pr).
Vec lambda_grad(const MercerBasis& basis, const std::string& param);

// d phi_j(x_i) / d param. Zero matrix for eigenvalue-only parameters.
BasisMatrix basis_matrix_grad(const MercerBasis& basis, const Vec& X,
                              const std::string& param);

// Phi(X) Lambda Phi(X2)^T.
Mat reconstruct_kernel(const MercerBasis& basis, const Vec& X, const Vec& X2);

// Chebyshev derivative via the Gegenbauer closed form; interior x only.
// Production path is the differentiated recurrence inside basis_derivative;
// this is exposed as a cross-check oracle.
double chebyshev_derivative_closed_form(int i, double x, int k);

}  // namespace famgp
