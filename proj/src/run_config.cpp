#include "ctql/run_config.hpp"

#include "ctql/text_format.hpp"

#include <fstream>
#include <sstream>
#include <utility>

namespace ctql {

namespace {

ConfigError field_error(const std::string& section, const std::string& key,
                        const std::string& why) {
  return ConfigError("config field '[" + section + "] " + key + "': " + why);
}

Eigen::VectorXd parse_vector(const std::string& value, const std::string& section,
                             const std::string& key) {
  std::istringstream in(value);
  std::vector<double> entries;
  std::string token;
  while (in >> token) {
    entries.push_back(parse_double(token, "config field '[" + section + "] " + key + "'"));
  }
  if (entries.empty()) {
    throw field_error(section, key, "empty vector");
  }
  return Eigen::Map<Eigen::VectorXd>(entries.data(),
                                     static_cast<Eigen::Index>(entries.size()));
}

Eigen::MatrixXd parse_matrix(const std::string& value, const std::string& section,
                             const std::string& key) {
  const std::vector<std::string> row_texts = split(value, ';');
  std::vector<Eigen::VectorXd> rows;
  for (const std::string& row_text : row_texts) {
    if (trim(row_text).empty()) continue;
    rows.push_back(parse_vector(row_text, section, key));
  }
  if (rows.empty()) {
    throw field_error(section, key, "empty matrix");
  }
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()), rows[0].size());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != matrix.cols()) {
      throw field_error(section, key, "ragged rows");
    }
    matrix.row(static_cast<Eigen::Index>(r)) = rows[r];
  }
  return matrix;
}

int parse_int(const std::string& value, const std::string& section,
              const std::string& key) {
  try {
    size_t used = 0;
    const int parsed = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw field_error(section, key, "not an integer: '" + value + "'");
  }
}

std::uint64_t parse_seed(const std::string& value, const std::string& section,
                         const std::string& key) {
  try {
    size_t used = 0;
    const std::uint64_t parsed = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    throw field_error(section, key, "not an unsigned integer: '" + value + "'");
  }
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str(), path.string());
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& name) {
  RunConfig config;
  config.source_name = name;
  config.config_hash = fnv1a_hex(text);

  std::istringstream lines(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;

    if (trimmed.front() == '[') {
      if (trimmed.back() != ']') {
        throw ConfigError(name + " line " + std::to_string(line_no) +
                          ": unterminated section header");
      }
      section = trim(trimmed.substr(1, trimmed.size() - 2));
      if (section != "model" && section != "cost" && section != "sampling" &&
          section != "basis" && section != "learner" && section != "evaluate") {
        throw ConfigError(name + " line " + std::to_string(line_no) +
                          ": unknown section '" + section + "'");
      }
      continue;
    }

    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(name + " line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    if (section.empty()) {
      throw ConfigError(name + " line " + std::to_string(line_no) +
                        ": entry before any [section]");
    }
    const std::string key = trim(trimmed.substr(0, eq));
    const std::string value = trim(trimmed.substr(eq + 1));
    const std::string context = "config field '[" + section + "] " + key + "'";
    const auto unknown = [&]() -> ConfigError {
      return ConfigError(name + " line " + std::to_string(line_no) +
                         ": unknown key '" + key + "' in [" + section + "]");
    };

    if (section == "model") {
      if (key == "preset") config.model_preset = value;
      else if (key == "A") config.A = parse_matrix(value, section, key);
      else if (key == "B") config.B = parse_matrix(value, section, key);
      else throw unknown();
    } else if (section == "cost") {
      if (key == "S") {
        if (value != "identity") config.S = parse_matrix(value, section, key);
      } else if (key == "W") {
        if (value != "identity") config.W = parse_matrix(value, section, key);
      } else {
        throw unknown();
      }
    } else if (section == "sampling") {
      if (key == "count") config.count = parse_int(value, section, key);
      else if (key == "delta_t") config.delta_t = parse_double(value, context);
      else if (key == "substeps") config.substeps = parse_int(value, section, key);
      else if (key == "seed") config.seed = parse_seed(value, section, key);
      else if (key == "x_min") config.x_min = parse_vector(value, section, key);
      else if (key == "x_max") config.x_max = parse_vector(value, section, key);
      else if (key == "mu_min") config.mu_min = parse_vector(value, section, key);
      else if (key == "mu_max") config.mu_max = parse_vector(value, section, key);
      else throw unknown();
    } else if (section == "basis") {
      if (key == "preset") config.basis_preset = value;
      else if (key == "terms") config.basis_terms = value;
      else throw unknown();
    } else if (section == "learner") {
      if (key == "algorithm") config.algorithm = value;
      else if (key == "xi") config.xi = parse_double(value, context);
      else if (key == "max_iterations") config.max_iterations = parse_int(value, section, key);
      else if (key == "svd_tolerance") config.svd_tolerance = parse_double(value, context);
      else if (key == "holdout_fraction") config.holdout_fraction = parse_double(value, context);
      else if (key == "initial_policy") config.initial_policy = value;
      else if (key == "initial_gain") config.initial_gain = parse_matrix(value, section, key);
      else if (key == "viql_init") config.viql_init = value;
      else if (key == "initial_theta") config.initial_theta = parse_vector(value, section, key);
      else throw unknown();
    } else if (section == "evaluate") {
      if (key == "x0") config.x0 = parse_vector(value, section, key);
      else if (key == "horizon") config.horizon = parse_double(value, context);
      else if (key == "step") config.eval_step = parse_double(value, context);
      else throw unknown();
    }
  }

  // cross-field validation with field names in the messages
  if (config.model_preset.empty()) {
    throw ConfigError("config field '[model] preset': required (f16, converse_hjb, or linear)");
  }
  if (config.model_preset != "f16" && config.model_preset != "converse_hjb" &&
      config.model_preset != "linear") {
    throw field_error("model", "preset", "unknown preset '" + config.model_preset + "'");
  }
  if (config.model_preset == "linear") {
    if (config.A.size() == 0 || config.B.size() == 0) {
      throw field_error("model", "A/B", "required for preset = linear");
    }
    if (config.A.rows() != config.A.cols() || config.B.rows() != config.A.rows()) {
      throw field_error("model", "A/B", "A must be square and B row-compatible");
    }
  }
  if (config.count < 1) throw field_error("sampling", "count", "must be >= 1");
  if (config.delta_t <= 0.0) throw field_error("sampling", "delta_t", "must be > 0");
  if (config.substeps < 1) throw field_error("sampling", "substeps", "must be >= 1");
  if (config.xi <= 0.0) throw field_error("learner", "xi", "must be > 0");
  if (config.max_iterations < 1) throw field_error("learner", "max_iterations", "must be >= 1");
  if (config.svd_tolerance <= 0.0 || config.svd_tolerance >= 1.0) {
    throw field_error("learner", "svd_tolerance", "must be in (0, 1)");
  }
  if (config.holdout_fraction < 0.0 || config.holdout_fraction >= 1.0) {
    throw field_error("learner", "holdout_fraction", "must be in [0, 1)");
  }
  if (config.algorithm != "piql" && config.algorithm != "viql") {
    throw field_error("learner", "algorithm", "must be piql or viql");
  }
  if (config.initial_policy != "zero" && config.initial_policy != "gain") {
    throw field_error("learner", "initial_policy", "must be zero or gain");
  }
  if (config.initial_policy == "gain" && config.initial_gain.size() == 0) {
    throw field_error("learner", "initial_gain", "required for initial_policy = gain");
  }
  if (config.viql_init != "quadratic" && config.viql_init != "policy" &&
      config.viql_init != "theta") {
    throw field_error("learner", "viql_init", "must be quadratic, policy, or theta");
  }
  if (config.viql_init == "theta" && config.initial_theta.size() == 0) {
    throw field_error("learner", "initial_theta", "required for viql_init = theta");
  }
  if (config.basis_preset == "custom" && config.basis_terms.empty()) {
    throw field_error("basis", "terms", "required for preset = custom");
  }
  if (config.horizon < 0.0) throw field_error("evaluate", "horizon", "must be >= 0");
  if (config.eval_step <= 0.0) throw field_error("evaluate", "step", "must be > 0");

  // dimension checks that do not need the model instantiated
  const auto check_dim = [&](const Eigen::VectorXd& v, int expected, const char* key) {
    if (v.size() != 0 && v.size() != expected) {
      throw field_error("sampling", key,
                        "expected " + std::to_string(expected) + " entries");
    }
  };
  int n = 0, m = 0;
  if (config.model_preset == "f16") { n = 3; m = 1; }
  else if (config.model_preset == "converse_hjb") { n = 2; m = 1; }
  else { n = static_cast<int>(config.A.rows()); m = static_cast<int>(config.B.cols()); }
  check_dim(config.x_min, n, "x_min");
  check_dim(config.x_max, n, "x_max");
  check_dim(config.mu_min, m, "mu_min");
  check_dim(config.mu_max, m, "mu_max");
  if (config.S.size() != 0 && (config.S.rows() != n || config.S.cols() != n)) {
    throw field_error("cost", "S", "must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (config.W.size() != 0 && (config.W.rows() != m || config.W.cols() != m)) {
    throw field_error("cost", "W", "must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  if (config.initial_gain.size() != 0 &&
      (config.initial_gain.rows() != m || config.initial_gain.cols() != n)) {
    throw field_error("learner", "initial_gain",
                      "must be " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (config.x0.size() != 0 && config.x0.size() != n) {
    throw field_error("evaluate", "x0", "expected " + std::to_string(n) + " entries");
  }
  return config;
}

std::unique_ptr<DynamicsModel> RunConfig::make_model() const {
  if (model_preset == "f16") {
    return std::make_unique<LinearModel>(f16_model());
  }
  if (model_preset == "converse_hjb") {
    return std::make_unique<ConverseHjbModel>();
  }
  return std::make_unique<LinearModel>(A, B, "linear");
}

StageCost RunConfig::make_cost() const {
  const std::unique_ptr<DynamicsModel> model = make_model();
  const int n = model->state_dim();
  const int m = model->input_dim();
  const Eigen::MatrixXd s = S.size() ? S : Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd w = W.size() ? W : Eigen::MatrixXd::Identity(m, m);
  return StageCost::quadratic(s, w);
}

std::shared_ptr<const BasisSet> RunConfig::make_basis() const {
  const std::unique_ptr<DynamicsModel> model = make_model();
  std::string preset = basis_preset;
  if (preset.empty()) {
    preset = (model_preset == "converse_hjb") ? "converse_hjb" : "lqr";
  }
  if (preset == "lqr") {
    return std::make_shared<BasisSet>(
        BasisSet::lqr_quadratic(model->state_dim(), model->input_dim()));
  }
  if (preset == "converse_hjb") {
    if (model->state_dim() != 2 || model->input_dim() != 1) {
      throw field_error("basis", "preset",
                        "converse_hjb basis needs a 2-state, 1-input model");
    }
    return std::make_shared<BasisSet>(BasisSet::converse_hjb());
  }
  if (preset == "custom") {
    std::string text = basis_terms;
    for (char& c : text) {
      if (c == ';') c = '\n';
    }
    return std::make_shared<BasisSet>(
        BasisSet::parse(text, model->state_dim(), model->input_dim()));
  }
  throw field_error("basis", "preset", "unknown preset '" + preset + "'");
}

BoxDomain RunConfig::make_domain() const {
  const std::unique_ptr<DynamicsModel> model = make_model();
  BoxDomain domain = BoxDomain::symmetric(model->state_dim(), model->input_dim(), 1.0);
  if (x_min.size()) domain.x_lo = x_min;
  if (x_max.size()) domain.x_hi = x_max;
  if (mu_min.size()) domain.mu_lo = mu_min;
  if (mu_max.size()) domain.mu_hi = mu_max;
  domain.validate(model->state_dim(), model->input_dim());
  return domain;
}

LearnerConfig RunConfig::make_learner_config() const {
  LearnerConfig learner;
  learner.xi = xi;
  learner.max_iterations = max_iterations;
  learner.svd_tolerance = svd_tolerance;
  learner.holdout_fraction = holdout_fraction;
  if (initial_policy == "gain") {
    learner.initial_policy = [K = initial_gain](const State& x) -> Control {
      return K * x;
    };
  }  // "zero" stays empty; the learners default to the zero policy
  if (viql_init == "quadratic") {
    learner.viql_init = ViqlInit::kSmallQuadratic;
  } else if (viql_init == "policy") {
    learner.viql_init = ViqlInit::kPolicyEvaluation;
  } else {
    learner.initial_theta = initial_theta;
  }
  return learner;
}

}  // namespace ctql
