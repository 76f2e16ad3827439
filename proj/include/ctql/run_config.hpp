#pragma once

#include "ctql/basis.hpp"
#include "ctql/dynamics.hpp"
#include "ctql/learner.hpp"
#include "ctql/sampling.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

namespace ctql {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parsed run configuration. Flat INI-style text with [model], [cost],
// [sampling], [basis], [learner], [evaluate] sections; vectors are
// whitespace-separated, matrices use ';' between rows, '#' starts a comment.
struct RunConfig {
  // [model] preset = f16 | converse_hjb | linear (linear needs A and B)
  std::string model_preset;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  // [cost] S, W quadratic weight matrices; empty means identity
  Eigen::MatrixXd S;
  Eigen::MatrixXd W;

  // [sampling]
  int count = 100;
  double delta_t = 0.025;
  int substeps = 10;
  std::uint64_t seed = 1;
  Eigen::VectorXd x_min, x_max, mu_min, mu_max;  // empty means -1..1

  // [basis] preset = lqr | converse_hjb | custom (custom needs terms)
  std::string basis_preset;  // empty = auto (converse_hjb model -> its basis,
                             // anything else -> lqr)
  std::string basis_terms;   // ';'-separated monomials for custom

  // [learner]
  std::string algorithm = "piql";  // piql | viql
  double xi = 1e-5;
  int max_iterations = 2000;
  double svd_tolerance = 1e-10;
  double holdout_fraction = 0.2;
  std::string initial_policy = "zero";  // zero | gain (needs initial_gain)
  Eigen::MatrixXd initial_gain;         // u = initial_gain * x
  std::string viql_init = "quadratic";  // quadratic | policy | theta
  Eigen::VectorXd initial_theta;        // for viql_init = theta

  // [evaluate]
  Eigen::VectorXd x0;
  double horizon = 30.0;
  double eval_step = 0.01;

  std::string source_name;  // file name, for messages
  std::string config_hash;  // FNV-1a of the source bytes

  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_text(const std::string& text, const std::string& name);

  std::unique_ptr<DynamicsModel> make_model() const;
  StageCost make_cost() const;          // sized to the model
  std::shared_ptr<const BasisSet> make_basis() const;
  BoxDomain make_domain() const;
  LearnerConfig make_learner_config() const;
};

}  // namespace ctql
