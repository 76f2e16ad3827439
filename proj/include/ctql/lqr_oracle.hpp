#pragma once

#include <Eigen/Core>

#include <vector>

namespace ctql {

// exp(A), dense, scaling-and-squaring with a Taylor series summed to machine
// precision. Intended for the small matrices used here (n + m <= ~10).
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A);

// True iff every eigenvalue of A has strictly negative real part.
bool is_hurwitz(const Eigen::MatrixXd& A);

// Unique solution P of A' P + P A + Q = 0 (Kronecker-vectorized dense solve).
// Solvable iff no two eigenvalues of A sum to zero; throws otherwise.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

// A gain K0 with A - B K0 Hurwitz, by the Bass method: with beta = 1 + |A|_F,
// solve (A + beta I) Z + Z (A + beta I)' = 2 B B' and take K0 = B' Z^{-1}.
// Requires (A, B) controllable enough for Z to be invertible.
Eigen::MatrixXd stabilizing_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct RiccatiSolution {
  Eigen::MatrixXd P;  // stabilizing solution, symmetric positive definite
  Eigen::MatrixXd K;  // optimal gain with u = -K x, K = W^{-1} B' P
  std::vector<Eigen::MatrixXd> newton_iterates;  // P_j per Newton step
};

// Continuous-time algebraic Riccati equation A'P + PA + S - P B W^{-1} B' P = 0
// by Newton-Kleinman iteration (each step one Lyapunov solve); the final
// residual is verified to 1e-10 relative.
RiccatiSolution solve_care(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& S, const Eigen::MatrixXd& W);

struct OptimalQMatrix {
  Eigen::MatrixXd G;  // symmetric (n+m) x (n+m), z' G z with z = (x, mu)
  double delta_t = 0.0;
};

// Exact Q-matrix of applying a constant action for delta_t and paying z' P z
// afterwards: G = int_0^dt [E F; 0 I]' diag(S, W) [E F; 0 I] + [E F]' P [E F],
// with [E(t) F(t); 0 I] = exp([A B; 0 0] t). Composite Simpson quadrature.
OptimalQMatrix optimal_q_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                const Eigen::MatrixXd& S, const Eigen::MatrixXd& W,
                                const Eigen::MatrixXd& P, double delta_t,
                                int quadrature_intervals = 200);

// Greedy gain of z' G z: u = -(G22)^{-1} G12' x, returned so that u = K x.
Eigen::MatrixXd implied_gain(const Eigen::MatrixXd& G, int state_dim);

}  // namespace ctql
