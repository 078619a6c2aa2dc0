#include <cmath>
#include <random>

#include "doctest.h"
#include "eoslab/matfac.hpp"

using namespace eoslab;
using matfac::Matrix;
using matfac::outer;
using matfac::scale;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed, double sc = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.a) v = sc * g(rng);
  return m;
}

void check_svd_of(const Matrix& m, double tol = 1e-10) {
  const auto s = matfac::svd(m);
  const int r = std::min(m.rows, m.cols);
  REQUIRE(static_cast<int>(s.sigma.size()) == r);
  for (int i = 0; i + 1 < r; ++i) CHECK(s.sigma[i] >= s.sigma[i + 1]);
  for (double v : s.sigma) CHECK(v >= 0.0);

  Matrix us = s.U;
  for (int i = 0; i < us.rows; ++i)
    for (int j = 0; j < us.cols; ++j) us(i, j) *= s.sigma[j];
  const Matrix rec = matmul(us, transpose(s.V));
  CHECK(frob_norm(rec - m) <= tol * std::max(1.0, frob_norm(m)));

  const Matrix utu = matmul(transpose(s.U), s.U);
  const Matrix vtv = matmul(transpose(s.V), s.V);
  const Matrix eye = Matrix::identity(r);
  CHECK(frob_norm(utu - eye) <= tol);
  CHECK(frob_norm(vtv - eye) <= tol);
}

}  // namespace

TEST_CASE("matrix helpers") {
  const Matrix a = random_matrix(3, 4, 1);
  const Matrix b = random_matrix(4, 2, 2);
  const Matrix ab = matmul(a, b);
  CHECK(ab.rows == 3);
  CHECK(ab.cols == 2);
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += a(1, k) * b(k, 0);
  CHECK(ab(1, 0) == doctest::Approx(s));
  CHECK(transpose(a)(2, 1) == a(1, 2));
  CHECK(frob_dot(a, a) == doctest::Approx(frob_norm(a) * frob_norm(a)));
  const Matrix o = outer({1.0, 2.0}, {3.0, 4.0, 5.0});
  CHECK(o(1, 2) == doctest::Approx(10.0));
}

TEST_CASE("svd on simple matrices") {
  SUBCASE("identity") {
    const auto s = matfac::svd(Matrix::identity(3));
    for (double v : s.sigma) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("diagonal") {
    Matrix m(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = 1.0;
    const auto s = matfac::svd(m);
    CHECK(s.sigma[0] == doctest::Approx(3.0));
    CHECK(s.sigma[1] == doctest::Approx(1.0));
    CHECK(s.U(0, 0) == doctest::Approx(1.0));
    CHECK(s.V(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("svd across shapes, scales and rank deficiency") {
  check_svd_of(random_matrix(1, 1, 3));
  check_svd_of(random_matrix(3, 2, 4));
  check_svd_of(random_matrix(2, 3, 5));
  check_svd_of(random_matrix(5, 5, 6));
  check_svd_of(random_matrix(8, 3, 7));
  check_svd_of(random_matrix(3, 8, 8));
  check_svd_of(random_matrix(6, 6, 9, 1e3));
  check_svd_of(random_matrix(6, 6, 10, 1e-3));
  // Rank 1 via an outer product: trailing singular values near zero.
  const auto u = random_matrix(5, 1, 11);
  const auto v = random_matrix(1, 4, 12);
  const Matrix r1 = matmul(u, v);
  check_svd_of(r1);
  CHECK(matfac::svd(r1).sigma[1] <= 1e-10 * frob_norm(r1));
}

TEST_CASE("singular values are orthogonally invariant") {
  const Matrix m = random_matrix(5, 4, 13);
  const Matrix q = matfac::seeded_factor(5, 5, {1, 1, 1, 1, 1}, 14);
  const auto s1 = matfac::svd(m).sigma;
  const auto s2 = matfac::svd(matmul(q, m)).sigma;
  for (std::size_t i = 0; i < s1.size(); ++i)
    CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-10));
}

TEST_CASE("seeded_factor realizes the requested spectrum") {
  const std::vector<double> want{2.0, 1.0, 0.5, 0.1};
  const auto got = matfac::svd(matfac::seeded_factor(6, 4, want, 11)).sigma;
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
}

TEST_CASE("leading Hessian eigenvector") {
  SUBCASE("symmetric factor pair splits the norm evenly") {
    const Matrix x = matfac::seeded_factor(4, 3, {2, 1, 0.5}, 21);
    const auto e = matfac::leading_hessian_eigvec(x, transpose(x));
    CHECK(e.C1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    CHECK(e.C2 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    CHECK(frob_norm(e.dX) == doctest::Approx(e.C1).epsilon(1e-10));
  }
  SUBCASE("asymmetric top singular values weight the factors") {
    const Matrix x = matfac::seeded_factor(4, 3, {2, 0.8, 0.3}, 22);
    const Matrix y = matfac::seeded_factor(3, 5, {1, 0.4, 0.15}, 23);
    const auto e = matfac::leading_hessian_eigvec(x, y);
    CHECK(e.C1 == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-10));
    CHECK(e.C2 == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-10));
    const double total = e.C1 * e.C1 + e.C2 * e.C2;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("a mismatched target matrix is rejected") {
    const Matrix x = matfac::seeded_factor(4, 3, {2, 1, 0.5}, 24);
    const Matrix y = transpose(x);
    Matrix c = matmul(x, y);
    c(0, 0) += 0.5;
    CHECK_THROWS_AS(matfac::leading_hessian_eigvec(x, y, &c),
                    PreconditionError);
    const Matrix good = matmul(x, y);
    CHECK_NOTHROW(matfac::leading_hessian_eigvec(x, y, &good));
  }
}

TEST_CASE("cross-section derivatives") {
  SUBCASE("1x1 case reduces to the scalar quartic") {
    for (const double mu : {0.5, 1.0, 2.0}) {
      Matrix x(1, 1), dx(1, 1);
      x(0, 0) = std::sqrt(mu);
      dx(0, 0) = 1.0 / std::sqrt(2.0);
      const auto cs = matfac::cross_section_condition(x, x, dx, dx);
      CHECK(cs.f2 == doctest::Approx(2.0 * mu).epsilon(1e-12));
      CHECK(cs.f3 == doctest::Approx(3.0 * std::sqrt(2.0 * mu)).epsilon(1e-12));
      CHECK(cs.f4 == doctest::Approx(3.0).epsilon(1e-12));
      CHECK(cs.margin == doctest::Approx(48.0 * mu).epsilon(1e-12));
      // Half the 1-D quartic margin: the section is a unit-speed ray in the
      // doubled (x, y) space.
      CHECK(cs.margin == doctest::Approx(0.5 * 96.0 * mu).epsilon(1e-12));
    }
  }
  SUBCASE("orthogonal perturbation products kill f3 and f4") {
    const Matrix x = matfac::seeded_factor(3, 2, {1.5, 0.7}, 31);
    const Matrix y = matfac::seeded_factor(2, 4, {1.2, 0.4}, 32);
    Matrix dx(3, 2), dy(2, 4);
    dx(0, 0) = 1.0;  // columns e1 on the left, rows e2 on the right
    dy(1, 0) = 1.0;
    const auto cs = matfac::cross_section_condition(x, y, dx, dy);
    CHECK(cs.f4 == 0.0);
    CHECK(cs.f3 == 0.0);
    CHECK(cs.margin == 0.0);
    CHECK(cs.f2 > 0.0);
  }
  SUBCASE("values reproduce the exact quartic section") {
    const Matrix x = random_matrix(4, 3, 33);
    const Matrix y = random_matrix(3, 5, 34);
    const Matrix dx = random_matrix(4, 3, 35, 0.3);
    const Matrix dy = random_matrix(3, 5, 36, 0.3);
    const auto cs = matfac::cross_section_condition(x, y, dx, dy);
    const Matrix c = matmul(x, y);
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> ut(-1.5, 1.5);
    for (int i = 0; i < 10; ++i) {
      const double t = ut(rng);
      Matrix xt = x + scale(dx, t);
      Matrix yt = y + scale(dy, t);
      const double res = frob_norm(matmul(xt, yt) - c);
      const double lt = 0.5 * res * res;
      const double pred = t * t * cs.f2 / 2.0 + t * t * t * cs.f3 / 6.0 +
                          t * t * t * t * cs.f4 / 24.0;
      CHECK(lt == doctest::Approx(pred).epsilon(1e-10));
    }
  }
  SUBCASE("margin is positive along the leading eigenvector") {
    const Matrix x = matfac::seeded_factor(4, 3, {2, 0.9, 0.4}, 38);
    const Matrix y = matfac::seeded_factor(3, 5, {1.7, 0.6, 0.2}, 39);
    const auto e = matfac::leading_hessian_eigvec(x, y);
    const auto cs = matfac::cross_section_condition(x, y, e.dX, e.dY);
    CHECK(cs.margin > 0.0);
    // Parallel rank-1 products: the margin identity 3 f3^2 - f2 f4 = 8 f2 f4.
    CHECK(cs.margin == doctest::Approx(8.0 * cs.f2 * cs.f4).epsilon(1e-10));
  }
}

TEST_CASE("symmetric GD beyond the edge of stability") {
  const Matrix x0 = matfac::seeded_factor(6, 4, {2, 1, 0.5, 0.25}, 41);
  const double beta = 0.05 / 4.0;  // beta sigma1^2 = 0.05

  SUBCASE("zero perturbation stays at the minimum") {
    const Matrix dx0(6, 4);
    const auto run = matfac::gd_symmetric(x0, dx0, beta, 50);
    CHECK(run.zero_leading_projection);
    for (double l : run.traj.scalars.at("loss")) CHECK(l <= 1e-20);
  }

  SUBCASE("orbit prediction carries the 1-D deltas") {
    const Matrix dx0(6, 4);
    const auto run = matfac::gd_symmetric(x0, dx0, beta, 1);
    CHECK(run.orbit.mode == matfac::OrbitMode::Symmetric);
    CHECK(run.orbit.sigma1 == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(run.orbit.delta1 ==
          doctest::Approx(0.0910894511799618).epsilon(1e-10));
    CHECK(run.orbit.delta2 ==
          doctest::Approx(-0.1271284390560306).epsilon(1e-10));
  }

  SUBCASE("top singular value settles on the predicted two-cycle") {
    const auto s = matfac::svd(x0);
    std::vector<double> u1(6), v1(4);
    for (int i = 0; i < 6; ++i) u1[i] = s.U(i, 0);
    for (int i = 0; i < 4; ++i) v1[i] = s.V(i, 0);
    const Matrix dx0 = scale(outer(u1, v1), 2e-3);
    const auto run = matfac::gd_symmetric(x0, dx0, beta, 1500);
    CHECK_FALSE(run.zero_leading_projection);
    const auto& st = run.traj.scalars.at("sigma_top");
    double lo = st[st.size() - 2], hi = st.back();
    if (lo > hi) std::swap(lo, hi);
    CHECK(std::abs(lo - 2.0 * (1.0 + run.orbit.delta2)) <= 1e-8);
    CHECK(std::abs(hi - 2.0 * (1.0 + run.orbit.delta1)) <= 1e-8);

    // Movement stays confined to the leading singular direction.
    const Matrix w = outer(u1, v1);
    for (std::size_t t = 0; t < run.traj.points.size(); t += 100) {
      Matrix xt(6, 4);
      std::copy(run.traj.points[t].begin(), run.traj.points[t].end(),
                xt.a.begin());
      const Matrix d = xt - x0;
      const Matrix resid = d - scale(w, frob_dot(d, w));
      CHECK(frob_norm(resid) <= 0.05);
    }
  }

  SUBCASE("beta outside the admissible range is rejected") {
    const Matrix dx0(6, 4);
    CHECK_THROWS_AS(matfac::gd_symmetric(x0, dx0, 0.2, 10), PreconditionError);
    CHECK_THROWS_AS(matfac::gd_symmetric(x0, dx0, 0.0, 10), PreconditionError);
  }
}

TEST_CASE("quasi-symmetric GD") {
  const Matrix x0 = matfac::seeded_factor(5, 5, {2, 0.9, 0.4, 0.2, 0.1}, 51);
  const double beta = 0.02 / 4.0;

  SUBCASE("alpha = 1 with transposed perturbations reduces to symmetric") {
    const Matrix dy0 = random_matrix(5, 5, 52, 1e-4);
    const Matrix dz0 = transpose(dy0);
    const auto q = matfac::gd_quasisymmetric(x0, 1.0, dy0, dz0, beta, 400);
    const auto s = matfac::gd_symmetric(x0, dy0, beta, 400);
    CHECK(q.orbit.rho1 == doctest::Approx(1.0 + s.orbit.delta1).epsilon(1e-12));
    CHECK(q.orbit.rho2 == doctest::Approx(1.0 + s.orbit.delta2).epsilon(1e-12));
    for (std::size_t t = 0; t < q.traj.points.size(); t += 50) {
      for (int i = 0; i < 25; ++i) {
        CHECK(std::abs(q.traj.points[t][i] - s.traj.points[t][i]) <= 1e-10);
      }
    }
  }

  SUBCASE("factors balance and land on the rho cycle") {
    const Matrix dy0 = random_matrix(5, 5, 53, 1e-3);
    const Matrix dz0 = random_matrix(5, 5, 54, 1e-3);
    const auto run =
        matfac::gd_quasisymmetric(x0, 0.8, dy0, dz0, beta, 1500);
    const auto& sy = run.traj.scalars.at("sigma_top_y");
    const auto& sz = run.traj.scalars.at("sigma_top_z");
    CHECK(std::abs(sy.back() - sz.back()) <= 1e-6);
    double lo = sy[sy.size() - 2], hi = sy.back();
    if (lo > hi) std::swap(lo, hi);
    CHECK(std::abs(lo - 2.0 * run.orbit.rho2) <= 1e-4);
    CHECK(std::abs(hi - 2.0 * run.orbit.rho1) <= 1e-4);
    CHECK(run.orbit.rho1 > 1.0);
    CHECK(run.orbit.rho2 > 0.0);
    CHECK(run.orbit.rho2 < 1.0);
  }

  SUBCASE("inadmissible alpha is gated unless simulation_only") {
    const Matrix dy0 = random_matrix(5, 5, 55, 1e-4);
    const Matrix dz0 = random_matrix(5, 5, 56, 1e-4);
    CHECK_THROWS_AS(
        matfac::gd_quasisymmetric(x0, 2.0, dy0, dz0, beta, 10),
        PreconditionError);
    CHECK_NOTHROW(
        matfac::gd_quasisymmetric(x0, 2.0, dy0, dz0, beta, 10, true));
  }
}

TEST_CASE("sigma2 admissibility bound") {
  const double eta = 1.0 / 4.0 + 0.0125;
  CHECK(matfac::sigma2_admissible(2.0, 0.5, 0.8, eta));
  CHECK(matfac::sigma2_admissible(2.0, 0.0, 1.0, eta));
  CHECK_FALSE(matfac::sigma2_admissible(2.0, 0.5, 2.0, eta));
}

TEST_CASE("the loss is invariant under right-orthogonal factor motion") {
  const Matrix x = random_matrix(5, 3, 61);
  const Matrix q = matfac::seeded_factor(3, 3, {1, 1, 1}, 62);
  const Matrix c = random_matrix(5, 5, 63);
  auto loss = [&c](const Matrix& m) {
    const double r = frob_norm(matmul(m, transpose(m)) - c);
    return 0.25 * r * r;
  };
  CHECK(loss(x) == doctest::Approx(loss(matmul(x, q))).epsilon(1e-12));
}
