#include "eoslab/matfac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "eoslab/scalar1d.hpp"

namespace eoslab::matfac {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows) throw PreconditionError("matmul: shape mismatch");
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < B.cols; ++j) C(i, j) += aik * B(k, j);
    }
  return C;
}

Matrix transpose(const Matrix& A) {
  Matrix T(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) T(j, i) = A(i, j);
  return T;
}

Matrix operator+(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows || A.cols != B.cols)
    throw PreconditionError("matrix add: shape mismatch");
  Matrix C = A;
  for (std::size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
  return C;
}

Matrix operator-(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows || A.cols != B.cols)
    throw PreconditionError("matrix sub: shape mismatch");
  Matrix C = A;
  for (std::size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
  return C;
}

Matrix scale(const Matrix& A, double c) {
  Matrix B = A;
  for (double& x : B.a) x *= c;
  return B;
}

double frob_dot(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows || A.cols != B.cols)
    throw PreconditionError("frob_dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < A.a.size(); ++i) s += A.a[i] * B.a[i];
  return s;
}

double frob_norm(const Matrix& A) { return std::sqrt(frob_dot(A, A)); }

Matrix outer(const std::vector<double>& u, const std::vector<double>& v) {
  Matrix M(static_cast<int>(u.size()), static_cast<int>(v.size()));
  for (int i = 0; i < M.rows; ++i)
    for (int j = 0; j < M.cols; ++j) M(i, j) = u[static_cast<std::size_t>(i)] *
                                               v[static_cast<std::size_t>(j)];
  return M;
}

namespace {

Matrix random_orthogonal(int n, std::mt19937_64& rng) {
  // QR of a Gaussian matrix by modified Gram-Schmidt on columns.
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix A(n, n);
  for (double& x : A.a) x = gauss(rng);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < j; ++k) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += A(i, k) * A(i, j);
      for (int i = 0; i < n; ++i) A(i, j) -= d * A(i, k);
    }
    double nrm = 0.0;
    for (int i = 0; i < n; ++i) nrm += A(i, j) * A(i, j);
    nrm = std::sqrt(nrm);
    if (nrm < 1e-12) {
      // Degenerate draw; fall back to a canonical direction.
      for (int i = 0; i < n; ++i) A(i, j) = i == j ? 1.0 : 0.0;
      --j;
      continue;
    }
    for (int i = 0; i < n; ++i) A(i, j) /= nrm;
  }
  return A;
}

std::vector<double> column(const Matrix& M, int j) {
  std::vector<double> c(static_cast<std::size_t>(M.rows));
  for (int i = 0; i < M.rows; ++i) c[static_cast<std::size_t>(i)] = M(i, j);
  return c;
}

}  // namespace

Matrix seeded_factor(int rows, int cols, const std::vector<double>& sigmas,
                     std::uint64_t seed) {
  const int r = std::min(rows, cols);
  if (static_cast<int>(sigmas.size()) != r)
    throw PreconditionError("seeded_factor: need min(rows, cols) sigmas");
  std::mt19937_64 rng(seed);
  const Matrix Q1 = random_orthogonal(rows, rng);
  const Matrix Q2 = random_orthogonal(cols, rng);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < r; ++k)
        s += Q1(i, k) * sigmas[static_cast<std::size_t>(k)] * Q2(j, k);
      M(i, j) = s;
    }
  return M;
}

SvdResult svd(const Matrix& M) {
  for (double x : M.a)
    if (!std::isfinite(x))
      throw PreconditionError("svd: entries must be finite");
  if (M.rows < M.cols) {
    SvdResult t = svd(transpose(M));
    std::swap(t.U, t.V);
    // Re-apply the sign convention to the swapped pair.
    for (int j = 0; j < t.U.cols; ++j) {
      int imax = 0;
      for (int i = 1; i < t.U.rows; ++i)
        if (std::abs(t.U(i, j)) > std::abs(t.U(imax, j))) imax = i;
      if (t.U(imax, j) < 0.0) {
        for (int i = 0; i < t.U.rows; ++i) t.U(i, j) = -t.U(i, j);
        for (int i = 0; i < t.V.rows; ++i) t.V(i, j) = -t.V(i, j);
      }
    }
    return t;
  }

  const int m = M.rows, n = M.cols;
  Matrix B = M;                     // columns converge to sigma_j * u_j
  Matrix V = Matrix::identity(n);

  const double tol = 1e-14;
  const int max_sweeps = 64;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (int i = 0; i < m; ++i) {
          app += B(i, p) * B(i, p);
          aqq += B(i, q) * B(i, q);
          apq += B(i, p) * B(i, q);
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0)
          continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double bp = B(i, p), bq = B(i, q);
          B(i, p) = c * bp - s * bq;
          B(i, q) = s * bp + c * bq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = V(i, p), vq = V(i, q);
          V(i, p) = c * vp - s * vq;
          V(i, q) = s * vp + c * vq;
        }
      }
    if (!rotated) break;
  }
  if (sweep == max_sweeps)
    throw NonConvergedError("svd: Jacobi sweeps did not converge", 0.0,
                            max_sweeps);

  std::vector<double> sig(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += B(i, j) * B(i, j);
    sig[static_cast<std::size_t>(j)] = std::sqrt(s);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return sig[static_cast<std::size_t>(a)] > sig[static_cast<std::size_t>(b)];
  });

  SvdResult out;
  out.U = Matrix(m, n);
  out.V = Matrix(n, n);
  out.sigma.resize(static_cast<std::size_t>(n));
  const double mnorm = frob_norm(M);
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[static_cast<std::size_t>(jj)];
    const double s = sig[static_cast<std::size_t>(j)];
    out.sigma[static_cast<std::size_t>(jj)] = s;
    if (s > 1e-15 * std::max(1.0, mnorm)) {
      for (int i = 0; i < m; ++i) out.U(i, jj) = B(i, j) / s;
    } else {
      // Null direction: complete the basis deterministically.
      std::vector<double> e(static_cast<std::size_t>(m), 0.0);
      for (int cand = 0; cand < m; ++cand) {
        std::fill(e.begin(), e.end(), 0.0);
        e[static_cast<std::size_t>(cand)] = 1.0;
        for (int k = 0; k < jj; ++k) {
          double d = 0.0;
          for (int i = 0; i < m; ++i)
            d += out.U(i, k) * e[static_cast<std::size_t>(i)];
          for (int i = 0; i < m; ++i)
            e[static_cast<std::size_t>(i)] -= d * out.U(i, k);
        }
        double nrm = 0.0;
        for (double x : e) nrm += x * x;
        if (nrm > 0.5) {
          nrm = std::sqrt(nrm);
          for (int i = 0; i < m; ++i)
            out.U(i, jj) = e[static_cast<std::size_t>(i)] / nrm;
          break;
        }
      }
    }
    for (int i = 0; i < n; ++i) out.V(i, jj) = V(i, j);
  }

  for (int j = 0; j < n; ++j) {
    int imax = 0;
    for (int i = 1; i < m; ++i)
      if (std::abs(out.U(i, j)) > std::abs(out.U(imax, j))) imax = i;
    if (out.U(imax, j) < 0.0) {
      for (int i = 0; i < m; ++i) out.U(i, j) = -out.U(i, j);
      for (int i = 0; i < n; ++i) out.V(i, j) = -out.V(i, j);
    }
  }
  return out;
}

namespace {

void require_on_manifold(const Matrix& X, const Matrix& Y, const Matrix* C,
                         const char* who) {
  if (!C) return;
  const Matrix R = matmul(X, Y) - *C;
  if (frob_norm(R) > 1e-8 * std::max(1.0, frob_norm(*C)))
    throw PreconditionError(std::string(who) + ": XY != C (off-manifold)");
}

}  // namespace

LeadingEigvec leading_hessian_eigvec(const Matrix& X, const Matrix& Y,
                                     const Matrix* C) {
  require_on_manifold(X, Y, C, "leading_hessian_eigvec");
  const SvdResult sx = svd(X);
  const SvdResult sy = svd(Y);
  if (sx.sigma.size() > 1 && sx.sigma[0] - sx.sigma[1] <= 1e-8)
    throw PreconditionError(
        "leading_hessian_eigvec: top singular value of X is degenerate");
  if (sy.sigma.size() > 1 && sy.sigma[0] - sy.sigma[1] <= 1e-8)
    throw PreconditionError(
        "leading_hessian_eigvec: top singular value of Y is degenerate");

  const auto ux1 = column(sx.U, 0);
  const auto vx1 = column(sx.V, 0);
  const auto uy1 = column(sy.U, 0);
  const auto vy1 = column(sy.V, 0);
  double cross = 0.0;
  for (std::size_t i = 0; i < vx1.size(); ++i) cross += vx1[i] * uy1[i];
  if (std::abs(cross) <= 1e-12)
    throw PreconditionError(
        "leading_hessian_eigvec: v_x1^T u_y1 = 0 (theorem assumption)");

  const double sx1 = sx.sigma[0], sy1 = sy.sigma[0];
  const double denom = std::sqrt(sx1 * sx1 + sy1 * sy1);
  LeadingEigvec out;
  out.C1 = sy1 / denom;
  out.C2 = sx1 / denom;
  out.dX = scale(outer(ux1, uy1), out.C1);
  out.dY = scale(outer(vx1, vy1), out.C2);
  return out;
}

CrossSection cross_section_condition(const Matrix& X, const Matrix& Y,
                                     const Matrix& dX, const Matrix& dY,
                                     const Matrix* C) {
  require_on_manifold(X, Y, C, "cross_section_condition");
  const Matrix A = matmul(dX, Y) + matmul(X, dY);
  const Matrix B = matmul(dX, dY);
  CrossSection out;
  out.f2 = frob_dot(A, A);
  out.f3 = 6.0 * frob_dot(A, B);
  out.f4 = 12.0 * frob_dot(B, B);
  out.margin = 3.0 * out.f3 * out.f3 - out.f2 * out.f4;
  return out;
}

bool sigma2_admissible(double sigma1, double sigma2, double alpha, double eta) {
  if (sigma1 <= sigma2 || sigma2 < 0.0)
    throw PreconditionError("sigma2_admissible: need sigma1 > sigma2 >= 0");
  if (alpha <= 0.0 || eta <= 0.0)
    throw PreconditionError("sigma2_admissible: alpha, eta must be positive");
  const double s1sq = sigma1 * sigma1, s2sq = sigma2 * sigma2;
  const double a2 = alpha * alpha, a4 = a2 * a2;
  const double lhs = std::max(eta * (s1sq / a2) * (1.0 + a4 * s2sq / s1sq),
                              eta * s1sq * a2 * (1.0 + s2sq / (a4 * s1sq)));
  return lhs <= 2.0;
}

namespace {

MatfacOrbit predict_orbit(OrbitMode mode, double sigma1, double beta,
                          double alpha) {
  MatfacOrbit orbit;
  orbit.mode = mode;
  orbit.sigma1 = sigma1;
  orbit.beta = beta;
  orbit.alpha = alpha;
  const auto pred = scalar1d::solve_period2(1.0, 1.0 + beta * sigma1 * sigma1);
  if (mode == OrbitMode::Symmetric) {
    orbit.delta1 = pred.x_high - 1.0;
    orbit.delta2 = pred.x_low - 1.0;
  } else {
    orbit.rho1 = pred.x_high;
    orbit.rho2 = pred.x_low;
  }
  return orbit;
}

}  // namespace

MatfacRun gd_symmetric(const Matrix& X0, const Matrix& dX0, double beta,
                       int steps) {
  if (steps < 1) throw PreconditionError("gd_symmetric: steps must be >= 1");
  if (X0.rows != dX0.rows || X0.cols != dX0.cols)
    throw PreconditionError("gd_symmetric: dX0 shape must match X0");

  const SvdResult s0 = svd(X0);
  const double sigma1 = s0.sigma[0];
  if (sigma1 <= 0.0) throw PreconditionError("gd_symmetric: X0 must be nonzero");
  const double bs = beta * sigma1 * sigma1;
  if (bs <= 0.0 || bs > 0.121)
    throw PreconditionError(
        "gd_symmetric: beta*sigma1^2 must lie in (0, 0.121]");
  const double eta = 1.0 / (sigma1 * sigma1) + beta;
  if (s0.sigma.size() > 1 && eta * s0.sigma[1] * s0.sigma[1] >= 1.0)
    throw PreconditionError("gd_symmetric: requires eta*sigma2^2 < 1");

  MatfacRun run;
  // u1^T dX0 v1 projection; exact zero is measure-zero and lets round-off
  // decide, so it is only flagged.
  double proj = 0.0;
  for (int i = 0; i < X0.rows; ++i)
    for (int j = 0; j < X0.cols; ++j)
      proj += s0.U(i, 0) * dX0(i, j) * s0.V(j, 0);
  run.zero_leading_projection = proj == 0.0;

  run.orbit = predict_orbit(OrbitMode::Symmetric, sigma1, beta, 1.0);
  const Matrix top = outer(column(s0.U, 0), column(s0.V, 0));
  run.orbit.orbit_matrices = {X0 + scale(top, run.orbit.delta1 * sigma1),
                              X0 + scale(top, run.orbit.delta2 * sigma1)};

  const Matrix C = matmul(X0, transpose(X0));
  Matrix X = X0 + dX0;
  run.traj.eta = eta;
  auto& loss = run.traj.scalars["loss"];
  auto& stop = run.traj.scalars["sigma_top"];
  const double bound = 1e6 * std::max(1.0, frob_norm(X0));

  auto record = [&] {
    run.traj.points.push_back(X.a);
    const Matrix R = matmul(X, transpose(X)) - C;
    loss.push_back(0.25 * frob_dot(R, R));
    stop.push_back(svd(X).sigma[0]);
  };
  record();
  for (int t = 0; t < steps; ++t) {
    const Matrix R = matmul(X, transpose(X)) - C;
    X = X - scale(matmul(R, X), eta);
    bool finite = true;
    for (double x : X.a) finite = finite && std::isfinite(x);
    if (!finite || frob_norm(X) > bound)
      throw DivergenceError(
          "gd_symmetric: diverged at step " + std::to_string(t + 1),
          static_cast<std::size_t>(t), run.traj.points.back());
    record();
  }
  return run;
}

MatfacRun gd_quasisymmetric(const Matrix& X0, double alpha, const Matrix& dY0,
                            const Matrix& dZ0, double beta, int steps,
                            bool simulation_only) {
  if (steps < 1)
    throw PreconditionError("gd_quasisymmetric: steps must be >= 1");
  if (alpha <= 0.0)
    throw PreconditionError("gd_quasisymmetric: alpha must be positive");
  if (dY0.rows != X0.rows || dY0.cols != X0.cols)
    throw PreconditionError("gd_quasisymmetric: dY0 shape must match X0");
  if (dZ0.rows != X0.cols || dZ0.cols != X0.rows)
    throw PreconditionError("gd_quasisymmetric: dZ0 shape must match X0^T");

  const SvdResult s0 = svd(X0);
  const double sigma1 = s0.sigma[0];
  if (sigma1 <= 0.0)
    throw PreconditionError("gd_quasisymmetric: X0 must be nonzero");
  const double bs = beta * sigma1 * sigma1;
  if (bs <= 0.0 || bs > 0.121)
    throw PreconditionError(
        "gd_quasisymmetric: beta*sigma1^2 must lie in (0, 0.121]");
  const double eta = 1.0 / (sigma1 * sigma1) + beta;
  const double sigma2 = s0.sigma.size() > 1 ? s0.sigma[1] : 0.0;
  if (!simulation_only && !sigma2_admissible(sigma1, sigma2, alpha, eta))
    throw PreconditionError(
        "gd_quasisymmetric: sigma2 admissibility fails; pass simulation_only "
        "to run anyway");

  MatfacRun run;
  double proj_y = 0.0, proj_z = 0.0;
  for (int i = 0; i < X0.rows; ++i)
    for (int j = 0; j < X0.cols; ++j) {
      proj_y += s0.U(i, 0) * dY0(i, j) * s0.V(j, 0);
      proj_z += s0.V(j, 0) * dZ0(j, i) * s0.U(i, 0);
    }
  run.zero_leading_projection = proj_y == 0.0 || proj_z == 0.0;

  run.orbit = predict_orbit(OrbitMode::QuasiSymmetric, sigma1, beta, alpha);
  const Matrix top = outer(column(s0.U, 0), column(s0.V, 0));
  const Matrix Y0 = scale(X0, alpha) + dY0;
  run.orbit.orbit_matrices = {
      Y0 + scale(top, (run.orbit.rho1 - alpha) * sigma1),
      Y0 + scale(top, (run.orbit.rho2 - alpha) * sigma1)};

  const Matrix C = matmul(X0, transpose(X0));
  Matrix Y = Y0;
  Matrix Z = scale(transpose(X0), 1.0 / alpha) + dZ0;
  run.traj.eta = eta;
  auto& loss = run.traj.scalars["loss"];
  auto& stop_y = run.traj.scalars["sigma_top_y"];
  auto& stop_z = run.traj.scalars["sigma_top_z"];
  const double bound =
      1e6 * std::max({1.0, frob_norm(Y), frob_norm(Z)});

  auto record = [&] {
    std::vector<double> flat = Y.a;
    flat.insert(flat.end(), Z.a.begin(), Z.a.end());
    run.traj.points.push_back(std::move(flat));
    const Matrix R = matmul(Y, Z) - C;
    loss.push_back(0.5 * frob_dot(R, R));
    stop_y.push_back(svd(Y).sigma[0]);
    stop_z.push_back(svd(Z).sigma[0]);
  };
  record();
  for (int t = 0; t < steps; ++t) {
    const Matrix R = matmul(Y, Z) - C;
    const Matrix Yn = Y - scale(matmul(R, transpose(Z)), eta);
    const Matrix Zn = Z - scale(matmul(transpose(Y), R), eta);
    Y = Yn;
    Z = Zn;
    bool finite = true;
    for (double x : Y.a) finite = finite && std::isfinite(x);
    for (double x : Z.a) finite = finite && std::isfinite(x);
    if (!finite || std::max(frob_norm(Y), frob_norm(Z)) > bound)
      throw DivergenceError(
          "gd_quasisymmetric: diverged at step " + std::to_string(t + 1),
          static_cast<std::size_t>(t), run.traj.points.back());
    record();
  }
  return run;
}

}  // namespace eoslab::matfac
