#include "ctql/lqr_oracle.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "ctql/dynamics.hpp"
#include "test_util.hpp"

using namespace ctql;

namespace {

Eigen::MatrixXd mat1(double a) {
  Eigen::MatrixXd M(1, 1);
  M << a;
  return M;
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("matrix exponential matches closed forms") {
  CHECK(matrix_exponential(mat1(-1.0))(0, 0) == doctest::Approx(std::exp(-1.0)));
  CHECK(matrix_exponential(mat1(2.5))(0, 0) == doctest::Approx(std::exp(2.5)));

  Eigen::MatrixXd N(2, 2);
  N << 0.0, 1.0, 0.0, 0.0;
  const Eigen::MatrixXd expN = matrix_exponential(N);
  CHECK(expN(0, 0) == doctest::Approx(1.0));
  CHECK(expN(0, 1) == doctest::Approx(1.0));
  CHECK(expN(1, 0) == doctest::Approx(0.0));
  CHECK(expN(1, 1) == doctest::Approx(1.0));

  const double w = 1.3;
  Eigen::MatrixXd R(2, 2);
  R << 0.0, -w, w, 0.0;
  const Eigen::MatrixXd expR = matrix_exponential(R);
  CHECK(expR(0, 0) == doctest::Approx(std::cos(w)).epsilon(1e-12));
  CHECK(expR(0, 1) == doctest::Approx(-std::sin(w)).epsilon(1e-12));
  CHECK(expR(1, 0) == doctest::Approx(std::sin(w)).epsilon(1e-12));

  // exp(A) exp(-A) = I, exercising the scaling path with a larger norm
  Eigen::MatrixXd A(3, 3);
  A << 1.0, 2.0, 0.5, -1.5, 0.2, 3.0, 0.7, -2.0, 1.1;
  const Eigen::MatrixXd should_be_identity =
      matrix_exponential(A) * matrix_exponential(-A);
  CHECK((should_be_identity - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("matrix exponential matches rk4 propagation") {
  const LinearModel model = f16_model();
  const double delta_t = 0.1;
  const Eigen::MatrixXd Phi = matrix_exponential(model.A() * delta_t);
  for (int col = 0; col < 3; ++col) {
    State x = Eigen::VectorXd::Zero(3);
    x(col) = 1.0;
    for (int s = 0; s < 10; ++s) {
      x = rk4_step(model, x, ctql_test::vec({0.0}), delta_t / 10.0);
    }
    CHECK((x - Phi.col(col)).norm() < 1e-8);
  }
}

TEST_CASE("hurwitz test distinguishes stability") {
  CHECK(is_hurwitz(mat1(-0.001)));
  CHECK_FALSE(is_hurwitz(mat1(0.0)));
  CHECK_FALSE(is_hurwitz(mat1(1.0)));
  Eigen::MatrixXd rotation(2, 2);
  rotation << 0.0, -1.0, 1.0, 0.0;  // eigenvalues on the imaginary axis
  CHECK_FALSE(is_hurwitz(rotation));
  CHECK(is_hurwitz(f16_model().A()));
}

TEST_CASE("lyapunov solve satisfies its equation") {
  Eigen::MatrixXd A(3, 3);
  A << -2.0, 1.0, 0.0, 0.0, -1.5, 0.5, -0.3, 0.0, -1.0;
  Eigen::MatrixXd Q(3, 3);
  Q << 2.0, 0.1, 0.0, 0.1, 1.0, 0.2, 0.0, 0.2, 3.0;
  const Eigen::MatrixXd P = solve_lyapunov(A, Q);
  CHECK((A.transpose() * P + P * A + Q).norm() < 1e-11);
  CHECK(P.isApprox(P.transpose()));
  CHECK(min_eigenvalue(P) > 0.0);  // stable A, PD Q

  // eigenvalues 1 and -1 sum to zero, so the equation is singular
  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(solve_lyapunov(singular, Eigen::MatrixXd::Identity(2, 2)),
                  std::runtime_error);
}

TEST_CASE("bass gain stabilizes unstable plants") {
  const Eigen::MatrixXd K1 = stabilizing_gain(mat1(2.0), mat1(1.0));
  CHECK(is_hurwitz(mat1(2.0) - mat1(1.0) * K1));

  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, 3.0, 0.1;  // saddle
  B << 0.0, 1.0;
  const Eigen::MatrixXd K2 = stabilizing_gain(A, B);
  CHECK(is_hurwitz(A - B * K2));

  const LinearModel f16 = f16_model();
  const Eigen::MatrixXd K3 = stabilizing_gain(f16.A(), f16.B());
  CHECK(is_hurwitz(f16.A() - f16.B() * K3));
}

TEST_CASE("riccati solution on scalar plants") {
  // A = 0, B = 1: P^2 = 1, so P = 1 and K = 1
  const RiccatiSolution integrator =
      solve_care(mat1(0.0), mat1(1.0), mat1(1.0), mat1(1.0));
  CHECK(std::abs(integrator.P(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(integrator.K(0, 0) - 1.0) < 1e-12);

  // A = -1, B = 1: P^2 + 2P - 1 = 0, so P = sqrt(2) - 1
  const RiccatiSolution lag = solve_care(mat1(-1.0), mat1(1.0), mat1(1.0), mat1(1.0));
  CHECK(std::abs(lag.P(0, 0) - (std::sqrt(2.0) - 1.0)) < 1e-10);
  CHECK(std::abs(lag.K(0, 0) - (std::sqrt(2.0) - 1.0)) < 1e-10);
}

TEST_CASE("riccati solution for the pitch model") {
  const LinearModel model = f16_model();
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(1, 1);
  const RiccatiSolution sol = solve_care(model.A(), model.B(), S, W);

  const Eigen::MatrixXd residual = model.A().transpose() * sol.P +
                                   sol.P * model.A() + S -
                                   sol.P * model.B() * model.B().transpose() * sol.P;
  CHECK(residual.norm() < 1e-10 * S.norm());
  CHECK(min_eigenvalue(sol.P) > 0.0);
  CHECK(is_hurwitz(model.A() - model.B() * sol.K));

  REQUIRE(sol.K.rows() == 1);
  CHECK(std::abs(std::abs(sol.K(0, 0)) - 0.1352) < 1e-3);
  CHECK(std::abs(std::abs(sol.K(0, 1)) - 0.1501) < 1e-3);
  CHECK(std::abs(std::abs(sol.K(0, 2)) - 0.4329) < 1e-3);
}

TEST_CASE("newton iterates decrease monotonically") {
  const LinearModel model = f16_model();
  const RiccatiSolution sol =
      solve_care(model.A(), model.B(), Eigen::MatrixXd::Identity(3, 3),
                 Eigen::MatrixXd::Identity(1, 1));
  REQUIRE(sol.newton_iterates.size() >= 2);
  for (size_t j = 0; j + 1 < sol.newton_iterates.size(); ++j) {
    CHECK(min_eigenvalue(sol.newton_iterates[j] - sol.newton_iterates[j + 1]) >
          -1e-9);
  }
  // and every iterate dominates the solution
  for (const Eigen::MatrixXd& Pj : sol.newton_iterates) {
    CHECK(min_eigenvalue(Pj - sol.P) > -1e-9);
  }
}

TEST_CASE("constant-action q matrix has scalar closed forms") {
  // A = 0, B = 1, S = W = 1, P = 1: E(t) = 1 and F(t) = t, so
  //   G11 = dt + 1, G12 = dt^2/2 + dt, G22 = dt + dt^3/3 + dt^2.
  const double dt = 0.3;
  const OptimalQMatrix q =
      optimal_q_matrix(mat1(0.0), mat1(1.0), mat1(1.0), mat1(1.0), mat1(1.0), dt);
  CHECK(q.delta_t == dt);
  CHECK(q.G(0, 0) == doctest::Approx(dt + 1.0).epsilon(1e-10));
  CHECK(q.G(0, 1) == doctest::Approx(dt * dt / 2.0 + dt).epsilon(1e-10));
  CHECK(q.G(1, 1) == doctest::Approx(dt + dt * dt * dt / 3.0 + dt * dt).epsilon(1e-10));
  CHECK(q.G(1, 0) == q.G(0, 1));
}

TEST_CASE("constant-action q matrix is symmetric with convex control block") {
  const LinearModel model = f16_model();
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(1, 1);
  const RiccatiSolution sol = solve_care(model.A(), model.B(), S, W);
  const OptimalQMatrix q =
      optimal_q_matrix(model.A(), model.B(), S, W, sol.P, 0.025);
  CHECK(q.G.isApprox(q.G.transpose()));
  CHECK(q.G(3, 3) > 0.0);
  CHECK(min_eigenvalue(q.G) > 0.0);

  // quadrature refinement barely moves the result
  const OptimalQMatrix fine =
      optimal_q_matrix(model.A(), model.B(), S, W, sol.P, 0.025, 400);
  CHECK((q.G - fine.G).norm() < 1e-10);
}

TEST_CASE("constant-action gain approaches the continuous gain as dt shrinks") {
  const LinearModel model = f16_model();
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(1, 1);
  const RiccatiSolution sol = solve_care(model.A(), model.B(), S, W);

  const auto gain_error = [&](double dt) {
    const OptimalQMatrix q = optimal_q_matrix(model.A(), model.B(), S, W, sol.P, dt);
    // implied gain uses u = K x; the Riccati gain uses u = -K x
    return (implied_gain(q.G, 3) + sol.K).norm();
  };
  const double coarse = gain_error(0.2);
  const double fine = gain_error(0.05);
  CHECK(fine < coarse);
  CHECK(fine < 0.05);
  const double ratio = coarse / fine;  // first-order bias: about 4
  CHECK(ratio > 2.5);
  CHECK(ratio < 6.0);
}

TEST_CASE("oracle input validation") {
  CHECK_THROWS_AS(solve_care(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 1),
                             Eigen::MatrixXd::Identity(2, 2), mat1(0.0)),
                  std::invalid_argument);
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(solve_care(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Ones(2, 1),
                             asym, mat1(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(optimal_q_matrix(mat1(0.0), mat1(1.0), mat1(1.0), mat1(1.0),
                                   mat1(1.0), -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(implied_gain(Eigen::MatrixXd::Identity(2, 2), 2),
                  std::invalid_argument);
}
