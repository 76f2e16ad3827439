#include "ctql/basis.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "ctql/random.hpp"
#include "test_util.hpp"

using namespace ctql;
using ctql_test::vec;

namespace {

Monomial mono(std::vector<int> x_exp, std::vector<int> mu_exp) {
  return Monomial{std::move(x_exp), std::move(mu_exp)};
}

std::shared_ptr<const BasisSet> shared(BasisSet basis) {
  return std::make_shared<const BasisSet>(std::move(basis));
}

}  // namespace

TEST_CASE("quadratic basis for one state and one input") {
  const BasisSet basis = BasisSet::lqr_quadratic(1, 1);
  REQUIRE(basis.size() == 3);
  CHECK(basis.terms()[0].to_string() == "x1^2");
  CHECK(basis.terms()[1].to_string() == "x1*u1");
  CHECK(basis.terms()[2].to_string() == "u1^2");
  const Eigen::VectorXd psi = basis.eval(vec({2.0}), vec({3.0}));
  CHECK(psi(0) == 4.0);
  CHECK(psi(1) == 6.0);
  CHECK(psi(2) == 9.0);
}

TEST_CASE("quadratic basis enumerates the upper triangle row-major") {
  const BasisSet basis = BasisSet::lqr_quadratic(3, 1);
  REQUIRE(basis.size() == 10);
  CHECK(basis.terms()[0].to_string() == "x1^2");
  CHECK(basis.terms()[1].to_string() == "x1*x2");
  CHECK(basis.terms()[3].to_string() == "x1*u1");
  CHECK(basis.terms()[4].to_string() == "x2^2");
  CHECK(basis.terms()[8].to_string() == "x3*u1");
  CHECK(basis.terms()[9].to_string() == "u1^2");
  CHECK(basis.mu_structure(0) == MuStructure::kFree);
  CHECK(basis.mu_structure(3) == MuStructure::kLinear);
  CHECK(basis.mu_structure(9) == MuStructure::kQuadratic);
}

TEST_CASE("nonlinear benchmark basis has the documented 18 terms") {
  const BasisSet basis = BasisSet::converse_hjb();
  REQUIRE(basis.size() == 18);
  CHECK(basis.state_dim() == 2);
  CHECK(basis.input_dim() == 1);
  CHECK(basis.terms()[0].to_string() == "x1^2");
  CHECK(basis.terms()[7].to_string() == "x1^4");
  CHECK(basis.terms()[11].to_string() == "x2^4");
  CHECK(basis.terms()[12].to_string() == "x1*u1");
  CHECK(basis.terms()[16].to_string() == "x2^2*u1");
  CHECK(basis.terms()[17].to_string() == "u1^2");

  const Eigen::VectorXd psi = basis.eval(vec({2.0, 3.0}), vec({5.0}));
  const double expected[18] = {4.0,  6.0,  9.0,  8.0,  12.0, 18.0, 27.0, 16.0, 24.0,
                               36.0, 54.0, 81.0, 10.0, 15.0, 20.0, 30.0, 45.0, 25.0};
  for (int t = 0; t < 18; ++t) CHECK(psi(t) == doctest::Approx(expected[t]));
  CHECK(basis.supports_closed_form_policy());
}

TEST_CASE("basis text round-trips") {
  const BasisSet lqr = BasisSet::lqr_quadratic(3, 1);
  CHECK(BasisSet::parse(lqr.to_text(), 3, 1) == lqr);
  const BasisSet nonlinear = BasisSet::converse_hjb();
  CHECK(BasisSet::parse(nonlinear.to_text(), 2, 1) == nonlinear);

  const BasisSet custom = BasisSet::parse(
      "# comment\n"
      "x1^2\n"
      "\n"
      "x1*u1\n"
      "u1^2\n",
      1, 1);
  CHECK(custom == BasisSet::lqr_quadratic(1, 1));
}

TEST_CASE("malformed basis text reports the line") {
  CHECK_THROWS_WITH_AS(BasisSet::parse("x1^2\nbogus\n", 1, 1),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(BasisSet::parse("x1^2\nx3*u1\n", 2, 1), std::runtime_error);
  CHECK_THROWS_AS(BasisSet::parse("u2^2\n", 1, 1), std::runtime_error);
  CHECK_THROWS_AS(BasisSet::parse("", 1, 1), std::invalid_argument);
}

TEST_CASE("invalid term lists are rejected") {
  // duplicate term
  CHECK_THROWS_AS(BasisSet(1, 1, {mono({2}, {0}), mono({2}, {0})}),
                  std::invalid_argument);
  // constant term
  CHECK_THROWS_AS(BasisSet(1, 1, {mono({0}, {0})}), std::invalid_argument);
  // negative exponent
  CHECK_THROWS_AS(BasisSet(1, 1, {mono({-1}, {0})}), std::invalid_argument);
  // exponent vector sized for the wrong dimension
  CHECK_THROWS_AS(BasisSet(2, 1, {mono({2}, {0})}), std::invalid_argument);
  CHECK_THROWS_AS(BasisSet(0, 1, {}), std::invalid_argument);
}

TEST_CASE("greedy policy recovers the completed square") {
  // Q = x^2 + 2 x u + u^2 = (x + u)^2, minimized at u = -x.
  const QApprox q{shared(BasisSet::lqr_quadratic(1, 1)), vec({1.0, 2.0, 1.0})};
  const GreedyPolicy policy(q);
  CHECK(policy(vec({0.7}))(0) == doctest::Approx(-0.7));
  CHECK(policy(vec({-2.0}))(0) == doctest::Approx(2.0));
  CHECK(greedy_policy(q, vec({1.0}))(0) == doctest::Approx(-1.0));
}

TEST_CASE("greedy policy is invariant under scaling the coefficients") {
  const auto basis = shared(BasisSet::converse_hjb());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(18);
  theta << 1.2, -0.3, 0.8, 0.1, 0.0, 0.2, -0.1, 0.05, 0.0, 0.1, 0.0, 0.02,
      0.6, -0.4, 0.3, 0.2, -0.5, 1.5;
  const GreedyPolicy one(QApprox{basis, theta});
  const GreedyPolicy two(QApprox{basis, 2.0 * theta});
  const State x = vec({0.4, -0.9});
  CHECK(one(x)(0) == doctest::Approx(two(x)(0)));
}

TEST_CASE("greedy policy beats a control grid") {
  const auto basis = shared(BasisSet::converse_hjb());
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::VectorXd theta(18);
    for (int t = 0; t < 18; ++t) theta(t) = 2.0 * uniform01(rng) - 1.0;
    theta(17) = 0.5 + uniform01(rng);  // keep the u^2 coefficient positive
    const QApprox q{basis, theta};
    const GreedyPolicy policy(q);
    const State x = vec({2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0});
    const double best = q.value(x, policy(x));
    for (int g = 0; g <= 100; ++g) {
      const Control mu = vec({-2.0 + 0.04 * g});
      CHECK(best <= q.value(x, mu) + 1e-12);
    }
    // first-order optimality by central difference
    const double h = 1e-6;
    const double grad = (q.value(x, policy(x) + vec({h})) -
                         q.value(x, policy(x) - vec({h}))) / (2.0 * h);
    CHECK(std::abs(grad) < 1e-6);
  }
}

TEST_CASE("non-coercive coefficients are rejected") {
  const auto basis = shared(BasisSet::lqr_quadratic(1, 1));
  CHECK_THROWS_AS(GreedyPolicy(QApprox{basis, vec({1.0, 2.0, 0.0})}),
                  NonCoerciveError);
  CHECK_THROWS_AS(GreedyPolicy(QApprox{basis, vec({1.0, 0.0, -1.0})}),
                  NonCoerciveError);
  CHECK_THROWS_AS(gain_from_theta(QApprox{basis, Eigen::VectorXd::Zero(3)}),
                  NonCoerciveError);
}

TEST_CASE("bases outside the quadratic-in-u structure are rejected") {
  // x1*u1^2 couples the curvature to the state
  const BasisSet coupled(1, 1, {mono({2}, {0}), mono({1}, {2}), mono({0}, {2})});
  CHECK_FALSE(coupled.supports_closed_form_policy());
  CHECK(coupled.mu_structure(1) == MuStructure::kOther);
  CHECK_THROWS_AS(GreedyPolicy(QApprox{std::make_shared<const BasisSet>(coupled),
                                       vec({1.0, 1.0, 1.0})}),
                  UnsupportedBasisError);
  // u1^3 is not quadratic
  const BasisSet cubic(1, 1, {mono({2}, {0}), mono({0}, {3}), mono({0}, {2})});
  CHECK_FALSE(cubic.supports_closed_form_policy());
}

TEST_CASE("gain extraction orders features by first appearance") {
  const auto basis = shared(BasisSet::converse_hjb());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(18);
  theta(12) = 4.0;   // x1*u1
  theta(13) = -2.0;  // x2*u1
  theta(14) = 1.0;   // x1^2*u1
  theta(16) = 6.0;   // x2^2*u1
  theta(17) = 2.0;   // u1^2
  const GainMatrix gain = gain_from_theta(QApprox{basis, theta});
  REQUIRE(gain.features.size() == 5);
  CHECK(gain.features[0].to_string() == "x1");
  CHECK(gain.features[1].to_string() == "x2");
  CHECK(gain.features[2].to_string() == "x1^2");
  CHECK(gain.features[3].to_string() == "x1*x2");
  CHECK(gain.features[4].to_string() == "x2^2");
  REQUIRE(gain.K.rows() == 1);
  REQUIRE(gain.K.cols() == 5);
  CHECK(gain.K(0, 0) == doctest::Approx(-1.0));
  CHECK(gain.K(0, 1) == doctest::Approx(0.5));
  CHECK(gain.K(0, 2) == doctest::Approx(-0.25));
  CHECK(gain.K(0, 3) == doctest::Approx(0.0));
  CHECK(gain.K(0, 4) == doctest::Approx(-1.5));

  // the gain evaluates exactly like the greedy policy
  const GreedyPolicy policy(QApprox{basis, theta});
  const State x = vec({0.3, -0.8});
  CHECK(gain.evaluate(x)(0) == doctest::Approx(policy(x)(0)));
  CHECK(gain.as_policy()(x)(0) == doctest::Approx(policy(x)(0)));
}

TEST_CASE("theta and the symmetric Q matrix are inverse views") {
  const auto basis = shared(BasisSet::lqr_quadratic(2, 1));
  Eigen::VectorXd theta(6);
  theta << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  const Eigen::MatrixXd G = theta_to_G(QApprox{basis, theta});
  REQUIRE(G.rows() == 3);
  CHECK(G(0, 0) == 1.0);
  CHECK(G(0, 1) == 1.0);   // half of the x1*x2 coefficient
  CHECK(G(0, 2) == 1.5);   // half of the x1*u1 coefficient
  CHECK(G(1, 1) == 4.0);
  CHECK(G(1, 2) == 2.5);
  CHECK(G(2, 2) == 6.0);
  CHECK(G.isApprox(G.transpose()));

  const Eigen::VectorXd back = G_to_theta(*basis, G);
  CHECK((back - theta).norm() == 0.0);

  // z' G z matches theta . psi everywhere
  const State x = vec({0.7, -1.3});
  const Control mu = vec({0.4});
  Eigen::VectorXd z(3);
  z << x(0), x(1), mu(0);
  CHECK(z.dot(G * z) == doctest::Approx(theta.dot(basis->eval(x, mu))));

  CHECK_THROWS_AS(G_to_theta(*basis, Eigen::MatrixXd::Identity(2, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(theta_to_G(QApprox{shared(BasisSet::converse_hjb()),
                                     Eigen::VectorXd::Zero(18)}),
                  std::invalid_argument);
}

TEST_CASE("coefficient size mismatches are rejected") {
  const auto basis = shared(BasisSet::lqr_quadratic(1, 1));
  CHECK_THROWS_AS((QApprox{basis, vec({1.0, 2.0})}.value(vec({1.0}), vec({0.0}))),
                  std::invalid_argument);
  CHECK_THROWS_AS(GreedyPolicy(QApprox{basis, vec({1.0})}), std::invalid_argument);
}
