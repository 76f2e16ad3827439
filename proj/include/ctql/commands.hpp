#pragma once

#include "ctql/basis.hpp"
#include "ctql/run_config.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ctql {

// Exit codes shared by the commands and the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitNoConvergence = 4;

// Learned-model file: '# key=value' header, then a basis section (one
// monomial per line), a theta section (one coefficient per line), and the
// greedy gain for reference. Loading recomputes the gain from theta.
struct ModelFile {
  std::string model_name;
  std::string cost_name;
  std::string algorithm;
  std::string status;
  int n = 0;
  int m = 0;
  double delta_t = 0.0;
  std::shared_ptr<const BasisSet> basis;
  Eigen::VectorXd theta;
};

void save_model(const ModelFile& model, const std::filesystem::path& path,
                const std::vector<std::string>& extra_header = {});
ModelFile load_model(const std::filesystem::path& path);

// Collects the configured dataset and writes <out_dir>/dataset.txt.
int cmd_collect(const RunConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log);

// Trains on the dataset and writes <out_dir>/trace.csv and <out_dir>/model.txt.
// Returns kExitOk when converged, kExitNoConvergence on max_iterations,
// kExitNumerical when the learner stopped on a numerical error.
int cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path,
              const std::filesystem::path& out_dir, std::ostream& log);

// Simulates the greedy policy of a trained model from x0 and writes
// <out_dir>/trajectory.csv (t, x, u columns); prints and returns the cost.
int cmd_evaluate(const RunConfig& config, const std::filesystem::path& model_path,
                 const std::optional<State>& x0_override,
                 std::optional<double> horizon_override,
                 const std::filesystem::path& out_dir, std::ostream& log,
                 double* total_cost = nullptr);

// Riccati ground truth for linear models: prints P, K, and G(delta_t) and
// writes <out_dir>/oracle.csv in long form (name,row,col,value).
int cmd_oracle(const RunConfig& config, const std::filesystem::path& out_dir,
               std::ostream& log);

}  // namespace ctql
