#pragma once

// Matrix factorization beyond the edge of stability: dense SVD (one-sided
// Jacobi), the leading Hessian eigenvector on the minimum manifold, the 1-D
// cross-section condition, and symmetric / quasi-symmetric GD runs with
// period-2 orbit predictions.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "eoslab/dynamics.hpp"

namespace eoslab::matfac {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  double& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * cols + j];
  }

  static Matrix identity(int n);
};

Matrix matmul(const Matrix& A, const Matrix& B);
Matrix transpose(const Matrix& A);
Matrix operator+(const Matrix& A, const Matrix& B);
Matrix operator-(const Matrix& A, const Matrix& B);
Matrix scale(const Matrix& A, double c);
double frob_dot(const Matrix& A, const Matrix& B);
double frob_norm(const Matrix& A);
Matrix outer(const std::vector<double>& u, const std::vector<double>& v);

/// Deterministic factor with prescribed singular values: Q1 diag(sigmas) Q2^T
/// with seeded random orthogonal Q1, Q2.
Matrix seeded_factor(int rows, int cols, const std::vector<double>& sigmas,
                     std::uint64_t seed);

struct SvdResult {
  Matrix U;                   // rows x r, orthonormal columns
  std::vector<double> sigma;  // length r = min(rows, cols), non-increasing
  Matrix V;                   // cols x r, orthonormal columns
};

/// Thin SVD via one-sided Jacobi. Singular values sorted descending; the
/// largest-magnitude entry of each column of U is made positive.
SvdResult svd(const Matrix& M);

struct LeadingEigvec {
  Matrix dX;
  Matrix dY;
  double C1 = 0.0;
  double C2 = 0.0;
};

/// Leading Hessian eigenvector at a minimum (X, Y) of 1/2 |XY - C|^2, as the
/// pair (C1 u_x1 u_y1^T, C2 v_x1 v_y1^T) of unit total Frobenius norm. When C
/// is given, XY = C is checked to 1e-8.
LeadingEigvec leading_hessian_eigvec(const Matrix& X, const Matrix& Y,
                                     const Matrix* C = nullptr);

struct CrossSection {
  double f2 = 0.0;
  double f3 = 0.0;
  double f4 = 0.0;
  double margin = 0.0;  // 3 f3^2 - f2 f4
};

/// Derivatives of the loss along the ray (X + t dX, Y + t dY) at t = 0:
/// f2 = |dX Y + X dY|_F^2, f3 = 6 <dX Y + X dY, dX dY>, f4 = 12 |dX dY|_F^2.
CrossSection cross_section_condition(const Matrix& X, const Matrix& Y,
                                     const Matrix& dX, const Matrix& dY,
                                     const Matrix* C = nullptr);

enum class OrbitMode { Symmetric, QuasiSymmetric };

struct MatfacOrbit {
  OrbitMode mode = OrbitMode::Symmetric;
  double sigma1 = 0.0;
  double beta = 0.0;
  double alpha = 1.0;            // quasi-symmetric only
  double delta1 = 0.0, delta2 = 0.0;  // symmetric: delta1 in (0,1), delta2 in (-1,0)
  double rho1 = 0.0, rho2 = 0.0;      // quasi-symmetric: rho1 in (1,2), rho2 in (0,1)
  std::vector<Matrix> orbit_matrices;  // the two predicted factor settings
};

struct MatfacRun {
  dynamics::Trajectory traj;  // points: flattened factor(s); scalars below
  MatfacOrbit orbit;
  bool zero_leading_projection = false;  // u1^T dX0 v1 == 0 at init
};

/// GD on 1/4 |X X^T - X0 X0^T|_F^2 from X0 + dX0 at eta = 1/sigma1^2 + beta.
/// Scalars: "loss", "sigma_top". Orbit deltas come from the period-2 quartic
/// at eta mu = 1 + beta sigma1^2.
MatfacRun gd_symmetric(const Matrix& X0, const Matrix& dX0, double beta,
                       int steps);

/// GD on 1/2 |YZ - X0 X0^T|_F^2 from (alpha X0 + dY0, (1/alpha) X0^T + dZ0)
/// at eta = 1/sigma1^2 + beta. Scalars: "loss", "sigma_top_y", "sigma_top_z".
/// Theorem mode enforces the sigma2 admissibility bound; pass
/// simulation_only = true to run regardless.
MatfacRun gd_quasisymmetric(const Matrix& X0, double alpha, const Matrix& dY0,
                            const Matrix& dZ0, double beta, int steps,
                            bool simulation_only = false);

/// max{eta (s1^2/a^2)(1 + a^4 s2^2/s1^2), eta s1^2 a^2 (1 + s2^2/(a^4 s1^2))} <= 2.
bool sigma2_admissible(double sigma1, double sigma2, double alpha, double eta);

}  // namespace eoslab::matfac
