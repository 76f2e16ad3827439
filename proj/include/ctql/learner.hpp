#pragma once

#include "ctql/basis.hpp"
#include "ctql/dynamics.hpp"
#include "ctql/sampling.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctql {

// Thrown when the weighted-residual normal equations are rank deficient.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How run_viql builds theta(0) when no explicit initial_theta is given.
enum class ViqlInit {
  kSmallQuadratic,     // 0.01 * (|x|^2 + |mu|^2) restricted to the basis
  kPolicyEvaluation,   // Galerkin evaluation of initial_policy (one solve);
                       // this is a stable policy's Q, so the value-iteration
                       // sequence decreases monotonically from above
};

struct LearnerConfig {
  double xi = 1e-5;               // stop when |theta_i - theta_{i-1}| <= xi
  int max_iterations = 100;
  double svd_tolerance = 1e-10;   // relative rank cutoff for the LS solve
  double holdout_fraction = 0.2;  // residual-reporting split; 0 disables
  std::uint64_t split_seed = 0x9e3779b97f4a7c15ull;
  Policy initial_policy;          // PIQL start (default: zero policy); also
                                  // the policy behind kPolicyEvaluation
  Eigen::VectorXd initial_theta;  // VIQL start when non-empty
  ViqlInit viql_init = ViqlInit::kSmallQuadratic;
};

struct IterationRecord {
  int iteration = 0;
  Eigen::VectorXd theta;
  double theta_delta = 0.0;  // |theta_i - theta_{i-1}|; |theta_0| at record 0
  Eigen::MatrixXd gain;      // greedy gain over the trace's gain_features
  double bellman_rms = 0.0;  // on the holdout split (train set if none)
};

enum class LearnStatus { kConverged, kMaxIterations, kError };

struct IterationTrace {
  LearnStatus status = LearnStatus::kError;
  std::string message;  // diagnostic, includes the iteration index on errors
  std::vector<IterationRecord> records;
  std::vector<Monomial> gain_features;  // column layout of the gain matrices
  double max_normal_residual = 0.0;     // worst |W'(Z theta - rhs)| / |W' rhs|
  int train_count = 0;
  int holdout_count = 0;

  const IterationRecord& final_record() const;
};

// One weighted-residual regression: find theta with (W' Z) theta = W' rhs.
struct RegressionSystem {
  Eigen::MatrixXd W;    // sample count x L, Galerkin weights = basis at (x, mu)
  Eigen::MatrixXd Z;    // sample count x L
  Eigen::VectorXd rhs;  // sample count
};

// Policy-evaluation system: Z row = psi(x, mu) - psi(x', policy(x')),
// rhs = pi. Exact Q of `policy` satisfies Z theta = rhs when representable.
RegressionSystem piql_regression(const std::vector<Sample>& samples,
                                 const BasisSet& basis, const Policy& policy);

// Value-iteration system: Z row = psi(x, mu),
// rhs = pi + Q_prev(x', greedy_prev(x')).
RegressionSystem viql_regression(const std::vector<Sample>& samples,
                                 const BasisSet& basis, const QApprox& previous);

// Solves the normal equations by SVD; singular values below
// tolerance * (largest singular value) mean the regression cannot identify
// theta and raise SingularSystemError (more samples or fewer terms needed).
Eigen::VectorXd solve_weighted_residuals(const RegressionSystem& system,
                                         double tolerance);

// RMS over the samples of Q(x, mu) - pi - Q(x', policy(x')).
double bellman_residual(const std::vector<Sample>& samples, const QApprox& q,
                        const Policy& policy);

// scale on each pure-square basis term (x_i^2, mu_j^2), zero elsewhere.
Eigen::VectorXd default_initial_theta(const BasisSet& basis, double scale = 0.01);

struct SampleSplit {
  std::vector<Sample> train;
  std::vector<Sample> holdout;
};

// Deterministic Fisher-Yates shuffle keyed by `seed`; the first
// round(fraction * count) shuffled samples form the holdout.
SampleSplit split_samples(const std::vector<Sample>& samples, double fraction,
                          std::uint64_t seed);

// Policy-iteration Q-learning: alternate Galerkin policy evaluation and
// closed-form greedy improvement until the theta update is below xi.
IterationTrace run_piql(const SampleSet& data,
                        std::shared_ptr<const BasisSet> basis,
                        const LearnerConfig& config);

// Value-iteration Q-learning: one-step Bellman backups from theta(0).
IterationTrace run_viql(const SampleSet& data,
                        std::shared_ptr<const BasisSet> basis,
                        const LearnerConfig& config);

// Columns: iter, theta_delta, bellman_rms, gain entries k_<input>_<feature>,
// theta_1..theta_L. `header_comments` lines are emitted as leading '# ' lines
// (status, counts, and feature names are always included).
void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path,
                     const std::vector<std::string>& header_comments = {});

}  // namespace ctql
