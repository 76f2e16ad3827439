#include "ctql/lqr_oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctql {

namespace {

void require_square(const Eigen::MatrixXd& M, const char* name) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument(std::string(name) + " must be square");
  }
}

void require_symmetric(const Eigen::MatrixXd& M, const char* name) {
  require_square(M, name);
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd out(X.rows() * Y.rows(), X.cols() * Y.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      out.block(i * Y.rows(), j * Y.cols(), Y.rows(), Y.cols()) = X(i, j) * Y;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A) {
  require_square(A, "matrix_exponential: A");
  const Eigen::Index n = A.rows();
  const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm

  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  }
  const Eigen::MatrixXd scaled = A / std::ldexp(1.0, squarings);

  // Taylor series of the scaled matrix; with |B| <= 1/2 the terms decay fast
  // enough that 30 terms are far below double precision.
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-19 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

bool is_hurwitz(const Eigen::MatrixXd& A) {
  require_square(A, "is_hurwitz: A");
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(A, /*computeEigenvectors=*/false);
  return (eig.eigenvalues().real().array() < 0.0).all();
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  require_square(A, "solve_lyapunov: A");
  require_square(Q, "solve_lyapunov: Q");
  if (A.rows() != Q.rows()) {
    throw std::invalid_argument("solve_lyapunov: A and Q sizes differ");
  }
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
  // vec(A'P) = (I kron A') vec(P), vec(PA) = (A' kron I) vec(P)
  const Eigen::MatrixXd system = kron(identity, A.transpose()) + kron(A.transpose(), identity);
  const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "solve_lyapunov: singular equation (two eigenvalues of A sum to zero)");
  }
  const Eigen::VectorXd p = lu.solve(-q);
  Eigen::MatrixXd P = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

Eigen::MatrixXd stabilizing_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  require_square(A, "stabilizing_gain: A");
  if (B.rows() != A.rows()) {
    throw std::invalid_argument("stabilizing_gain: B row count must match A");
  }
  const double beta = 1.0 + A.norm();
  const Eigen::MatrixXd shifted = A + beta * Eigen::MatrixXd::Identity(A.rows(), A.rows());
  // shifted Z + Z shifted' = 2 B B'
  const Eigen::MatrixXd Z =
      solve_lyapunov(shifted.transpose(), -2.0 * B * B.transpose());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(Z);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "stabilizing_gain: Gramian is singular (pair may be uncontrollable)");
  }
  Eigen::MatrixXd K0 = B.transpose() * lu.inverse();
  if (!is_hurwitz(A - B * K0)) {
    throw std::runtime_error("stabilizing_gain: candidate gain failed to stabilize");
  }
  return K0;
}

RiccatiSolution solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& S, const Eigen::MatrixXd& W) {
  require_square(A, "solve_care: A");
  require_symmetric(S, "solve_care: S");
  require_symmetric(W, "solve_care: W");
  if (B.rows() != A.rows() || S.rows() != A.rows() || W.rows() != B.cols()) {
    throw std::invalid_argument("solve_care: dimension mismatch");
  }
  const Eigen::LLT<Eigen::MatrixXd> w_llt(W);
  if (w_llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_care: W must be positive definite");
  }

  Eigen::MatrixXd K = is_hurwitz(A)
                          ? Eigen::MatrixXd::Zero(B.cols(), A.rows())
                          : stabilizing_gain(A, B);

  RiccatiSolution solution;
  Eigen::MatrixXd P_prev;
  constexpr int kMaxNewton = 60;
  for (int j = 0; j < kMaxNewton; ++j) {
    const Eigen::MatrixXd A_cl = A - B * K;
    if (!is_hurwitz(A_cl)) {
      throw std::runtime_error("solve_care: Newton iterate " + std::to_string(j) +
                               " lost closed-loop stability");
    }
    const Eigen::MatrixXd P = solve_lyapunov(A_cl, S + K.transpose() * W * K);
    solution.newton_iterates.push_back(P);
    K = w_llt.solve(B.transpose() * P);
    if (j > 0 && (P - P_prev).norm() <= 1e-13 * std::max(1.0, P.norm())) {
      P_prev = P;
      break;
    }
    P_prev = P;
  }

  solution.P = P_prev;
  solution.K = w_llt.solve(B.transpose() * solution.P);

  const Eigen::MatrixXd residual = A.transpose() * solution.P + solution.P * A + S -
                                   solution.P * B * w_llt.solve(B.transpose() * solution.P);
  if (residual.norm() > 1e-10 * std::max(1.0, S.norm())) {
    throw std::runtime_error("solve_care: Newton iteration failed to converge "
                             "(residual " + std::to_string(residual.norm()) + ")");
  }
  return solution;
}

OptimalQMatrix optimal_q_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& S, const Eigen::MatrixXd& W,
                                const Eigen::MatrixXd& P, double delta_t,
                                int quadrature_intervals) {
  require_square(A, "optimal_q_matrix: A");
  require_symmetric(S, "optimal_q_matrix: S");
  require_symmetric(W, "optimal_q_matrix: W");
  require_symmetric(P, "optimal_q_matrix: P");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (B.rows() != n || S.rows() != n || W.rows() != m || P.rows() != n) {
    throw std::invalid_argument("optimal_q_matrix: dimension mismatch");
  }
  if (delta_t <= 0.0) {
    throw std::invalid_argument("optimal_q_matrix: delta_t must be positive");
  }
  if (quadrature_intervals < 2) {
    throw std::invalid_argument("optimal_q_matrix: need at least 2 quadrature intervals");
  }
  int intervals = quadrature_intervals;
  if (intervals % 2 != 0) ++intervals;  // Simpson needs an even count

  const Eigen::Index d = n + m;
  Eigen::MatrixXd augmented = Eigen::MatrixXd::Zero(d, d);
  augmented.topLeftCorner(n, n) = A;
  augmented.topRightCorner(n, m) = B;

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(d, d);
  cost.topLeftCorner(n, n) = S;
  cost.bottomRightCorner(m, m) = W;

  const double h = delta_t / intervals;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k <= intervals; ++k) {
    const double weight = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    const Eigen::MatrixXd mexp = matrix_exponential(augmented * (h * k));
    G += (weight * h / 3.0) * (mexp.transpose() * cost * mexp);
  }

  const Eigen::MatrixXd terminal =
      matrix_exponential(augmented * delta_t).topRows(n);  // [E(dt) F(dt)]
  G += terminal.transpose() * P * terminal;

  OptimalQMatrix result;
  result.G = 0.5 * (G + G.transpose());
  result.delta_t = delta_t;
  return result;
}

Eigen::MatrixXd implied_gain(const Eigen::MatrixXd& G, int state_dim) {
  require_symmetric(G, "implied_gain: G");
  const Eigen::Index n = state_dim;
  const Eigen::Index m = G.rows() - n;
  if (n < 1 || m < 1) {
    throw std::invalid_argument("implied_gain: bad state dimension");
  }
  const Eigen::MatrixXd G22 = G.bottomRightCorner(m, m);
  const Eigen::LLT<Eigen::MatrixXd> llt(G22);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("implied_gain: G22 is not positive definite");
  }
  return -llt.solve(G.topRightCorner(n, m).transpose());
}

}  // namespace ctql
