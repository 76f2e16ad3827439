#include "ctql/learner.hpp"

#include "ctql/random.hpp"
#include "ctql/text_format.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

namespace ctql {

namespace {

Policy zero_policy(int input_dim) {
  return [input_dim](const State&) { return Control::Zero(input_dim); };
}

const char* status_name(LearnStatus status) {
  switch (status) {
    case LearnStatus::kConverged: return "converged";
    case LearnStatus::kMaxIterations: return "max_iterations";
    case LearnStatus::kError: return "error";
  }
  return "unknown";
}

// Shared scaffolding for both learners: validated split, Galerkin weight
// matrix over the training set, and per-iteration bookkeeping.
struct LearnerRun {
  LearnerRun(const SampleSet& data, std::shared_ptr<const BasisSet> basis_in,
             const LearnerConfig& config)
      : basis(std::move(basis_in)),
        split(split_samples(data.samples, config.holdout_fraction, config.split_seed)) {
    if (!basis) throw std::invalid_argument("learner: null basis");
    if (basis->state_dim() != data.n || basis->input_dim() != data.m) {
      throw std::invalid_argument(
          "learner: basis dimensions (" + std::to_string(basis->state_dim()) + ", " +
          std::to_string(basis->input_dim()) + ") do not match dataset (" +
          std::to_string(data.n) + ", " + std::to_string(data.m) + ")");
    }
    if (static_cast<int>(split.train.size()) < basis->size()) {
      throw std::invalid_argument(
          "learner: " + std::to_string(split.train.size()) +
          " training samples cannot identify " + std::to_string(basis->size()) +
          " basis coefficients; collect more samples or shrink the holdout");
    }
    trace.train_count = static_cast<int>(split.train.size());
    trace.holdout_count = static_cast<int>(split.holdout.size());
  }

  const std::vector<Sample>& residual_set() const {
    return split.holdout.empty() ? split.train : split.holdout;
  }

  void note_normal_residual(const RegressionSystem& system, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd lhs = system.W.transpose() * (system.Z * theta);
    const Eigen::VectorXd rhs = system.W.transpose() * system.rhs;
    const double rel = (lhs - rhs).norm() / std::max(rhs.norm(), 1e-300);
    trace.max_normal_residual = std::max(trace.max_normal_residual, rel);
  }

  // Builds the record for a freshly solved theta. Throws NonCoerciveError /
  // UnsupportedBasisError if no greedy policy exists for it.
  IterationRecord make_record(int iteration, Eigen::VectorXd theta,
                              const Eigen::VectorXd* previous_theta) {
    const QApprox q{basis, theta};
    GainMatrix gain = gain_from_theta(q);
    if (trace.gain_features.empty()) trace.gain_features = gain.features;
    GreedyPolicy greedy{q};
    IterationRecord record;
    record.iteration = iteration;
    record.theta_delta = previous_theta ? (theta - *previous_theta).norm() : theta.norm();
    record.bellman_rms = bellman_residual(
        residual_set(), q, [&greedy](const State& x) { return greedy(x); });
    record.gain = std::move(gain.K);
    record.theta = std::move(theta);
    return record;
  }

  std::shared_ptr<const BasisSet> basis;
  SampleSplit split;
  IterationTrace trace;
};

}  // namespace

const IterationRecord& IterationTrace::final_record() const {
  if (records.empty()) {
    throw std::logic_error("IterationTrace: no records");
  }
  return records.back();
}

RegressionSystem piql_regression(const std::vector<Sample>& samples,
                                 const BasisSet& basis, const Policy& policy) {
  if (!policy) throw std::invalid_argument("piql_regression: empty policy");
  const int count = static_cast<int>(samples.size());
  RegressionSystem system;
  system.W.resize(count, basis.size());
  system.Z.resize(count, basis.size());
  system.rhs.resize(count);
  for (int k = 0; k < count; ++k) {
    const Sample& s = samples[k];
    const Eigen::VectorXd psi = basis.eval(s.x, s.mu);
    system.W.row(k) = psi;
    system.Z.row(k) = psi - basis.eval(s.x_next, policy(s.x_next));
    system.rhs(k) = s.pi;
  }
  return system;
}

RegressionSystem viql_regression(const std::vector<Sample>& samples,
                                 const BasisSet& basis, const QApprox& previous) {
  const GreedyPolicy greedy(previous);
  const int count = static_cast<int>(samples.size());
  RegressionSystem system;
  system.W.resize(count, basis.size());
  system.Z.resize(count, basis.size());
  system.rhs.resize(count);
  for (int k = 0; k < count; ++k) {
    const Sample& s = samples[k];
    const Eigen::VectorXd psi = basis.eval(s.x, s.mu);
    system.W.row(k) = psi;
    system.Z.row(k) = psi;
    system.rhs(k) = s.pi + previous.value(s.x_next, greedy(s.x_next));
  }
  return system;
}

Eigen::VectorXd solve_weighted_residuals(const RegressionSystem& system,
                                         double tolerance) {
  if (system.W.rows() != system.Z.rows() || system.W.rows() != system.rhs.size() ||
      system.W.cols() != system.Z.cols()) {
    throw std::invalid_argument("solve_weighted_residuals: inconsistent system");
  }
  const Eigen::MatrixXd normal = system.W.transpose() * system.Z;
  const Eigen::VectorXd target = system.W.transpose() * system.rhs;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(normal,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= tolerance * sv(0)) {
    throw SingularSystemError(
        "weighted-residual system is rank deficient (singular value ratio " +
        format_double(sv.size() ? sv(sv.size() - 1) / sv(0) : 0.0) +
        "); more samples or a smaller basis needed");
  }
  return svd.solve(target);
}

double bellman_residual(const std::vector<Sample>& samples, const QApprox& q,
                        const Policy& policy) {
  if (samples.empty()) {
    throw std::invalid_argument("bellman_residual: no samples");
  }
  double sum_sq = 0.0;
  for (const Sample& s : samples) {
    const double r = q.value(s.x, s.mu) - s.pi - q.value(s.x_next, policy(s.x_next));
    sum_sq += r * r;
  }
  return std::sqrt(sum_sq / static_cast<double>(samples.size()));
}

Eigen::VectorXd default_initial_theta(const BasisSet& basis, double scale) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(basis.size());
  for (int t = 0; t < basis.size(); ++t) {
    const Monomial& term = basis.terms()[t];
    const bool x_square =
        term.mu_degree() == 0 && term.total_degree() == 2 &&
        std::count(term.x_exp.begin(), term.x_exp.end(), 2) == 1;
    const bool mu_square =
        term.mu_degree() == 2 && term.total_degree() == 2 &&
        std::count(term.mu_exp.begin(), term.mu_exp.end(), 2) == 1;
    if (x_square || mu_square) theta(t) = scale;
  }
  return theta;
}

SampleSplit split_samples(const std::vector<Sample>& samples, double fraction,
                          std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("split_samples: fraction must be in [0, 1)");
  }
  const size_t count = samples.size();
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;

  std::mt19937_64 rng(seed);
  for (size_t i = count; i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }

  const size_t holdout_count =
      static_cast<size_t>(std::llround(fraction * static_cast<double>(count)));
  SampleSplit split;
  split.holdout.reserve(holdout_count);
  split.train.reserve(count - holdout_count);
  for (size_t i = 0; i < count; ++i) {
    (i < holdout_count ? split.holdout : split.train).push_back(samples[order[i]]);
  }
  return split;
}

IterationTrace run_piql(const SampleSet& data,
                        std::shared_ptr<const BasisSet> basis,
                        const LearnerConfig& config) {
  LearnerRun run(data, std::move(basis), config);
  Policy policy = config.initial_policy ? config.initial_policy : zero_policy(data.m);

  for (int i = 0; i < config.max_iterations; ++i) {
    try {
      const RegressionSystem system = piql_regression(run.split.train, *run.basis, policy);
      Eigen::VectorXd theta = solve_weighted_residuals(system, config.svd_tolerance);
      run.note_normal_residual(system, theta);

      const Eigen::VectorXd* previous =
          run.trace.records.empty() ? nullptr : &run.trace.records.back().theta;
      IterationRecord record = run.make_record(i, std::move(theta), previous);
      const double delta = record.theta_delta;
      run.trace.records.push_back(std::move(record));

      if (i > 0 && delta <= config.xi) {
        run.trace.status = LearnStatus::kConverged;
        run.trace.message = "converged at iteration " + std::to_string(i);
        return run.trace;
      }
      GreedyPolicy greedy{QApprox{run.basis, run.trace.records.back().theta}};
      policy = [greedy](const State& x) { return greedy(x); };
    } catch (const SingularSystemError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    } catch (const NonCoerciveError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    } catch (const UnsupportedBasisError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    }
  }
  run.trace.status = LearnStatus::kMaxIterations;
  run.trace.message = "no convergence within " + std::to_string(config.max_iterations) +
                      " iterations";
  return run.trace;
}

IterationTrace run_viql(const SampleSet& data,
                        std::shared_ptr<const BasisSet> basis,
                        const LearnerConfig& config) {
  LearnerRun run(data, std::move(basis), config);

  // theta(0): explicit vector, small quadratic, or one policy evaluation.
  Eigen::VectorXd theta0;
  if (config.initial_theta.size() > 0) {
    if (config.initial_theta.size() != run.basis->size()) {
      throw std::invalid_argument("run_viql: initial_theta length " +
                                  std::to_string(config.initial_theta.size()) +
                                  " != basis size " + std::to_string(run.basis->size()));
    }
    theta0 = config.initial_theta;
  } else if (config.viql_init == ViqlInit::kSmallQuadratic) {
    theta0 = default_initial_theta(*run.basis);
  } else {
    const Policy policy =
        config.initial_policy ? config.initial_policy : zero_policy(data.m);
    const RegressionSystem system = piql_regression(run.split.train, *run.basis, policy);
    theta0 = solve_weighted_residuals(system, config.svd_tolerance);
    run.note_normal_residual(system, theta0);
  }

  try {
    run.trace.records.push_back(run.make_record(0, std::move(theta0), nullptr));
  } catch (const NonCoerciveError& e) {
    run.trace.status = LearnStatus::kError;
    run.trace.message = std::string("iteration 0: ") + e.what();
    return run.trace;
  } catch (const UnsupportedBasisError& e) {
    run.trace.status = LearnStatus::kError;
    run.trace.message = std::string("iteration 0: ") + e.what();
    return run.trace;
  }

  for (int i = 1; i <= config.max_iterations; ++i) {
    try {
      const QApprox previous{run.basis, run.trace.records.back().theta};
      const RegressionSystem system = viql_regression(run.split.train, *run.basis, previous);
      Eigen::VectorXd theta = solve_weighted_residuals(system, config.svd_tolerance);
      run.note_normal_residual(system, theta);

      IterationRecord record = run.make_record(i, std::move(theta), &previous.theta);
      const double delta = record.theta_delta;
      run.trace.records.push_back(std::move(record));

      if (delta <= config.xi) {
        run.trace.status = LearnStatus::kConverged;
        run.trace.message = "converged at iteration " + std::to_string(i);
        return run.trace;
      }
    } catch (const SingularSystemError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    } catch (const NonCoerciveError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    } catch (const UnsupportedBasisError& e) {
      run.trace.status = LearnStatus::kError;
      run.trace.message = "iteration " + std::to_string(i) + ": " + e.what();
      return run.trace;
    }
  }
  run.trace.status = LearnStatus::kMaxIterations;
  run.trace.message = "no convergence within " + std::to_string(config.max_iterations) +
                      " iterations";
  return run.trace;
}

void write_trace_csv(const IterationTrace& trace, const std::filesystem::path& path,
                     const std::vector<std::string>& header_comments) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_trace_csv: cannot open '" + path.string() +
                             "' for writing");
  }
  for (const std::string& line : header_comments) out << "# " << line << '\n';
  out << "# status=" << status_name(trace.status) << '\n';
  out << "# message=" << trace.message << '\n';
  out << "# iterations=" << trace.records.size() << '\n';
  out << "# train_count=" << trace.train_count << '\n';
  out << "# holdout_count=" << trace.holdout_count << '\n';
  out << "# max_normal_residual=" << format_double(trace.max_normal_residual) << '\n';
  std::string features;
  for (const Monomial& f : trace.gain_features) {
    if (!features.empty()) features += ',';
    features += f.to_string();
  }
  out << "# gain_features=" << features << '\n';

  out << "iter,theta_delta,bellman_rms";
  if (!trace.records.empty()) {
    const IterationRecord& first = trace.records.front();
    for (Eigen::Index r = 0; r < first.gain.rows(); ++r) {
      for (Eigen::Index c = 0; c < first.gain.cols(); ++c) {
        out << ",k_" << (r + 1) << '_' << (c + 1);
      }
    }
    for (Eigen::Index t = 0; t < first.theta.size(); ++t) {
      out << ",theta_" << (t + 1);
    }
  }
  out << '\n';

  for (const IterationRecord& record : trace.records) {
    out << record.iteration << ',' << format_double(record.theta_delta) << ','
        << format_double(record.bellman_rms);
    for (Eigen::Index r = 0; r < record.gain.rows(); ++r) {
      for (Eigen::Index c = 0; c < record.gain.cols(); ++c) {
        out << ',' << format_double(record.gain(r, c));
      }
    }
    for (Eigen::Index t = 0; t < record.theta.size(); ++t) {
      out << ',' << format_double(record.theta(t));
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("write_trace_csv: write to '" + path.string() + "' failed");
  }
}

}  // namespace ctql
