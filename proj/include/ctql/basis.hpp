#pragma once

#include "ctql/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctql {

// Thrown when a Q approximant is not strictly convex in the control, so the
// greedy minimizer does not exist.
class NonCoerciveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a basis does not have the structure a closed-form greedy policy
// needs (at most quadratic in mu, mu-quadratic terms free of x).
class UnsupportedBasisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// prod_i x_i^{x_exp[i]} * prod_j mu_j^{mu_exp[j]}
struct Monomial {
  std::vector<int> x_exp;
  std::vector<int> mu_exp;

  int total_degree() const;
  int mu_degree() const;

  double eval(const State& x, const Control& mu) const;
  double eval_x(const State& x) const;  // ignores the mu part

  // "x1^2*u1" style; factors ordered x then u, skipping zero exponents.
  std::string to_string() const;

  bool operator==(const Monomial& other) const = default;
};

// How a basis term depends on the control, for closed-form minimization.
enum class MuStructure {
  kFree,       // no mu factor
  kLinear,     // exactly one mu_j, exponent 1 (any x part)
  kQuadratic,  // mu_i*mu_j or mu_i^2 with no x part
  kOther,
};

class BasisSet {
 public:
  BasisSet(int state_dim, int input_dim, std::vector<Monomial> terms);

  // All degree-2 monomials in (x, mu), upper-triangle row-major order. Exact
  // for linear-quadratic problems; theta maps to a symmetric Q matrix.
  static BasisSet lqr_quadratic(int state_dim, int input_dim);

  // The 18-term basis used for the converse-HJB benchmark: x-monomials of
  // degree 2..4, then [x1, x2, x1^2, x1*x2, x2^2]*u, then u^2.
  static BasisSet converse_hjb();

  // One monomial per line, "x1^2*u1" syntax; '#' comments and blank lines
  // are skipped. Inverse of to_text().
  static BasisSet parse(const std::string& text, int state_dim, int input_dim);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  int size() const { return static_cast<int>(terms_.size()); }
  const std::vector<Monomial>& terms() const { return terms_; }

  Eigen::VectorXd eval(const State& x, const Control& mu) const;
  MuStructure mu_structure(int index) const { return structure_[index]; }
  bool supports_closed_form_policy() const;

  std::string to_text() const;

  bool operator==(const BasisSet& other) const;

 private:
  int state_dim_;
  int input_dim_;
  std::vector<Monomial> terms_;
  std::vector<MuStructure> structure_;
};

// Parameterized Q approximant: Q(x, mu) = theta . basis(x, mu).
struct QApprox {
  std::shared_ptr<const BasisSet> basis;
  Eigen::VectorXd theta;

  double value(const State& x, const Control& mu) const;
};

// Minimizer of Q(x, .) for a fixed x. For the supported basis structure
// Q(x, mu) = a(x) + b(x).mu + mu' C mu, so the minimizer is -C^{-1} b(x) / 2.
// Construction validates the structure and that C is positive definite.
class GreedyPolicy {
 public:
  explicit GreedyPolicy(QApprox q);

  Control operator()(const State& x) const;

  const Eigen::MatrixXd& curvature() const { return C_; }  // the matrix C

 private:
  QApprox q_;
  Eigen::MatrixXd C_;
  Eigen::LDLT<Eigen::MatrixXd> solver_;
  // (term index, mu index) for each mu-linear term
  std::vector<std::pair<int, int>> linear_terms_;
};

// Convenience wrapper constructing the policy for a single evaluation.
Control greedy_policy(const QApprox& q, const State& x);

// Greedy policy restricted to the mu-linear terms: u(x) = K * features(x),
// with one feature per distinct x-monomial multiplying a control entry.
struct GainMatrix {
  Eigen::MatrixXd K;               // input_dim x feature count
  std::vector<Monomial> features;  // x-only monomials, first-appearance order

  Control evaluate(const State& x) const;
  Policy as_policy() const;
};

GainMatrix gain_from_theta(const QApprox& q);

// For the lqr_quadratic basis only: theta <-> symmetric (n+m)x(n+m) matrix G
// with Q(x, mu) = z' G z, z = (x, mu). Diagonal entries carry theta directly;
// each off-diagonal pair g_jk = g_kj carries half the matching coefficient.
Eigen::MatrixXd theta_to_G(const QApprox& q);
Eigen::VectorXd G_to_theta(const BasisSet& basis, const Eigen::MatrixXd& G);

}  // namespace ctql
