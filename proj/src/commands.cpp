#include "ctql/commands.hpp"

#include "ctql/learner.hpp"
#include "ctql/lqr_oracle.hpp"
#include "ctql/sampling.hpp"
#include "ctql/text_format.hpp"

#include <fstream>
#include <sstream>

namespace ctql {

namespace {

void ensure_out_dir(const std::filesystem::path& out_dir) {
  if (out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create output directory '" + out_dir.string() +
                             "': " + ec.message());
  }
}

std::string gain_to_text(const Eigen::MatrixXd& K) {
  std::string out;
  for (Eigen::Index r = 0; r < K.rows(); ++r) {
    for (Eigen::Index c = 0; c < K.cols(); ++c) {
      if (c > 0) out += ' ';
      out += format_double(K(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

void save_model(const ModelFile& model, const std::filesystem::path& path,
                const std::vector<std::string>& extra_header) {
  if (!model.basis || model.theta.size() != model.basis->size()) {
    throw std::invalid_argument("save_model: malformed model");
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_model: cannot open '" + path.string() + "'");
  }
  for (const std::string& line : extra_header) out << "# " << line << '\n';
  out << "# model=" << model.model_name << '\n';
  out << "# cost=" << model.cost_name << '\n';
  out << "# algorithm=" << model.algorithm << '\n';
  out << "# status=" << model.status << '\n';
  out << "# n=" << model.n << '\n';
  out << "# m=" << model.m << '\n';
  out << "# delta_t=" << format_double(model.delta_t) << '\n';
  out << "basis:" << '\n' << model.basis->to_text();
  out << "theta:" << '\n';
  for (Eigen::Index t = 0; t < model.theta.size(); ++t) {
    out << format_double(model.theta(t)) << '\n';
  }
  const GainMatrix gain = gain_from_theta(QApprox{model.basis, model.theta});
  out << "gain:" << '\n' << gain_to_text(gain.K);
  if (!out) {
    throw std::runtime_error("save_model: write to '" + path.string() + "' failed");
  }
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_model: cannot open '" + path.string() + "'");
  }
  ModelFile model;
  std::string basis_text;
  std::vector<double> theta_entries;
  enum class Part { kHeader, kBasis, kTheta, kGain } part = Part::kHeader;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    if (trimmed[0] == '#') {
      const std::string entry = trim(trimmed.substr(1));
      const size_t eq = entry.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = trim(entry.substr(0, eq));
      const std::string value = trim(entry.substr(eq + 1));
      if (key == "model") model.model_name = value;
      else if (key == "cost") model.cost_name = value;
      else if (key == "algorithm") model.algorithm = value;
      else if (key == "status") model.status = value;
      else if (key == "n") model.n = std::stoi(value);
      else if (key == "m") model.m = std::stoi(value);
      else if (key == "delta_t") model.delta_t = parse_double(value, path.string() + " delta_t");
      continue;
    }
    if (trimmed == "basis:") { part = Part::kBasis; continue; }
    if (trimmed == "theta:") { part = Part::kTheta; continue; }
    if (trimmed == "gain:") { part = Part::kGain; continue; }
    switch (part) {
      case Part::kBasis:
        basis_text += trimmed;
        basis_text += '\n';
        break;
      case Part::kTheta:
        theta_entries.push_back(
            parse_double(trimmed, path.string() + " line " + std::to_string(line_no)));
        break;
      case Part::kGain:
        break;  // derived, recomputed below
      case Part::kHeader:
        throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                                 ": content before 'basis:' section");
    }
  }
  if (model.n < 1 || model.m < 1) {
    throw std::runtime_error(path.string() + ": missing n/m header");
  }
  if (basis_text.empty() || theta_entries.empty()) {
    throw std::runtime_error(path.string() + ": missing basis/theta section");
  }
  model.basis = std::make_shared<BasisSet>(BasisSet::parse(basis_text, model.n, model.m));
  if (static_cast<int>(theta_entries.size()) != model.basis->size()) {
    throw std::runtime_error(path.string() + ": theta has " +
                             std::to_string(theta_entries.size()) + " entries, basis has " +
                             std::to_string(model.basis->size()));
  }
  model.theta = Eigen::Map<Eigen::VectorXd>(theta_entries.data(),
                                            static_cast<Eigen::Index>(theta_entries.size()));
  return model;
}

int cmd_collect(const RunConfig& config, const std::filesystem::path& out_dir,
                std::ostream& log) {
  ensure_out_dir(out_dir);
  const std::unique_ptr<DynamicsModel> model = config.make_model();
  const StageCost cost = config.make_cost();
  const BoxDomain domain = config.make_domain();

  const SampleSet set = collect_samples(*model, cost, domain, config.count,
                                        config.delta_t, config.substeps, config.seed);
  const std::filesystem::path dataset_path = out_dir / "dataset.txt";
  save_dataset(set, dataset_path, {"config_hash=" + config.config_hash});

  log << "collected " << set.size() << " samples from model '" << set.model_name
      << "' (n=" << set.n << ", m=" << set.m << ", delta_t=" << set.delta_t
      << ", substeps=" << set.substeps << ", seed=" << set.seed << ")\n";
  log << "wrote " << dataset_path.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path,
              const std::filesystem::path& out_dir, std::ostream& log) {
  ensure_out_dir(out_dir);
  const SampleSet data = load_dataset(dataset_path);
  const std::shared_ptr<const BasisSet> basis = config.make_basis();
  if (basis->state_dim() != data.n || basis->input_dim() != data.m) {
    throw ConfigError("dataset '" + dataset_path.string() + "' has dimensions (" +
                      std::to_string(data.n) + ", " + std::to_string(data.m) +
                      ") but the configured basis expects (" +
                      std::to_string(basis->state_dim()) + ", " +
                      std::to_string(basis->input_dim()) + ")");
  }
  const LearnerConfig learner = config.make_learner_config();

  const IterationTrace trace = (config.algorithm == "viql")
                                   ? run_viql(data, basis, learner)
                                   : run_piql(data, basis, learner);

  const std::vector<std::string> provenance = {
      "config_hash=" + config.config_hash,
      "algorithm=" + config.algorithm,
      "dataset=" + dataset_path.filename().string(),
  };
  const std::filesystem::path trace_path = out_dir / "trace.csv";
  write_trace_csv(trace, trace_path, provenance);
  log << "wrote " << trace_path.string() << "\n";

  const char* status = trace.status == LearnStatus::kConverged ? "converged"
                       : trace.status == LearnStatus::kMaxIterations ? "max_iterations"
                                                                     : "error";
  if (!trace.records.empty()) {
    ModelFile model;
    model.model_name = data.model_name;
    model.cost_name = data.cost_name;
    model.algorithm = config.algorithm;
    model.status = status;
    model.n = data.n;
    model.m = data.m;
    model.delta_t = data.delta_t;
    model.basis = basis;
    model.theta = trace.final_record().theta;
    const std::filesystem::path model_path = out_dir / "model.txt";
    save_model(model, model_path, {"config_hash=" + config.config_hash});
    log << "wrote " << model_path.string() << "\n";
  }

  log << "status: " << status << " after " << trace.records.size() << " recorded iterations";
  if (!trace.records.empty()) {
    log << " (final theta_delta " << format_double(trace.final_record().theta_delta)
        << ", bellman_rms " << format_double(trace.final_record().bellman_rms) << ")";
  }
  log << "\n";
  if (trace.status == LearnStatus::kError) {
    log << "learner error: " << trace.message << "\n";
    return kExitNumerical;
  }
  return trace.status == LearnStatus::kConverged ? kExitOk : kExitNoConvergence;
}

int cmd_evaluate(const RunConfig& config, const std::filesystem::path& model_path,
                 const std::optional<State>& x0_override,
                 std::optional<double> horizon_override,
                 const std::filesystem::path& out_dir, std::ostream& log,
                 double* total_cost) {
  ensure_out_dir(out_dir);
  const ModelFile learned = load_model(model_path);
  const std::unique_ptr<DynamicsModel> model = config.make_model();
  if (model->state_dim() != learned.n || model->input_dim() != learned.m) {
    throw ConfigError("model file '" + model_path.string() + "' is for dimensions (" +
                      std::to_string(learned.n) + ", " + std::to_string(learned.m) +
                      ") but the configured plant has (" +
                      std::to_string(model->state_dim()) + ", " +
                      std::to_string(model->input_dim()) + ")");
  }
  const StageCost cost = config.make_cost();

  State x0;
  if (x0_override.has_value()) {
    x0 = *x0_override;
  } else if (config.x0.size() > 0) {
    x0 = config.x0;
  } else {
    throw ConfigError("config field '[evaluate] x0': required (or pass --x0)");
  }
  if (x0.size() != model->state_dim()) {
    throw ConfigError("evaluate x0 has " + std::to_string(x0.size()) +
                      " entries; the plant has " + std::to_string(model->state_dim()));
  }
  const double horizon = horizon_override.value_or(config.horizon);

  const GreedyPolicy greedy(QApprox{learned.basis, learned.theta});
  double cost_total = 0.0;
  const std::vector<TrajectoryPoint> trajectory = simulate_closed_loop(
      *model, cost, [&greedy](const State& x) { return greedy(x); }, x0, horizon,
      config.eval_step, &cost_total);

  const std::filesystem::path trajectory_path = out_dir / "trajectory.csv";
  std::ofstream out(trajectory_path);
  if (!out) {
    throw std::runtime_error("cmd_evaluate: cannot open '" + trajectory_path.string() + "'");
  }
  out << "# config_hash=" << config.config_hash << '\n';
  out << "# model_file=" << model_path.filename().string() << '\n';
  out << "# total_cost=" << format_double(cost_total) << '\n';
  out << "t";
  for (int i = 1; i <= learned.n; ++i) out << ",x" << i;
  for (int j = 1; j <= learned.m; ++j) out << ",u" << j;
  out << '\n';
  for (const TrajectoryPoint& point : trajectory) {
    out << format_double(point.t);
    for (Eigen::Index i = 0; i < point.x.size(); ++i) out << ',' << format_double(point.x(i));
    for (Eigen::Index j = 0; j < point.u.size(); ++j) out << ',' << format_double(point.u(j));
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("cmd_evaluate: write to '" + trajectory_path.string() +
                             "' failed");
  }

  log << "wrote " << trajectory_path.string() << "\n";
  log << "total cost over " << horizon << " s: " << format_double(cost_total) << "\n";
  if (total_cost != nullptr) *total_cost = cost_total;
  return kExitOk;
}

int cmd_oracle(const RunConfig& config, const std::filesystem::path& out_dir,
               std::ostream& log) {
  ensure_out_dir(out_dir);
  const std::unique_ptr<DynamicsModel> model = config.make_model();
  const auto* linear = dynamic_cast<const LinearModel*>(model.get());
  if (linear == nullptr) {
    throw ConfigError("oracle requires a linear model (preset f16 or linear); '" +
                      config.model_preset + "' is not linear");
  }
  const int n = linear->state_dim();
  const int m = linear->input_dim();
  const Eigen::MatrixXd S = config.S.size() ? config.S : Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd W = config.W.size() ? config.W : Eigen::MatrixXd::Identity(m, m);

  const RiccatiSolution care = solve_care(linear->A(), linear->B(), S, W);
  const OptimalQMatrix q =
      optimal_q_matrix(linear->A(), linear->B(), S, W, care.P, config.delta_t);
  const Eigen::MatrixXd sampled_gain = implied_gain(q.G, n);

  const auto print_matrix = [&log](const char* name, const Eigen::MatrixXd& M) {
    log << name << " =\n";
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      log << " ";
      for (Eigen::Index c = 0; c < M.cols(); ++c) log << " " << format_double(M(r, c));
      log << "\n";
    }
  };
  log << "Riccati solution for model '" << linear->name() << "' (u = -K x):\n";
  print_matrix("P", care.P);
  print_matrix("K", care.K);
  log << "Q matrix for constant actions over delta_t = " << config.delta_t
      << " (u = K x convention):\n";
  print_matrix("G", q.G);
  print_matrix("sampled_data_gain", sampled_gain);

  const std::filesystem::path oracle_path = out_dir / "oracle.csv";
  std::ofstream out(oracle_path);
  if (!out) {
    throw std::runtime_error("cmd_oracle: cannot open '" + oracle_path.string() + "'");
  }
  out << "# config_hash=" << config.config_hash << '\n';
  out << "# model=" << linear->name() << '\n';
  out << "# delta_t=" << format_double(config.delta_t) << '\n';
  out << "name,row,col,value\n";
  const auto dump = [&out](const char* name, const Eigen::MatrixXd& M) {
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        out << name << ',' << (r + 1) << ',' << (c + 1) << ',' << format_double(M(r, c))
            << '\n';
      }
    }
  };
  dump("P", care.P);
  dump("K", care.K);
  dump("G", q.G);
  dump("sampled_data_gain", sampled_gain);
  if (!out) {
    throw std::runtime_error("cmd_oracle: write to '" + oracle_path.string() + "' failed");
  }
  log << "wrote " << oracle_path.string() << "\n";
  return kExitOk;
}

}  // namespace ctql
