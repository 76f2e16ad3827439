#include "ctql/sampling.hpp"

#include "ctql/random.hpp"
#include "ctql/text_format.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <utility>

namespace ctql {

namespace {

std::string join_coords(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(v(i));
  }
  return out;
}

Eigen::VectorXd parse_coords(const std::string& text, const std::string& context) {
  const std::vector<std::string> fields = split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size()));
  for (size_t i = 0; i < fields.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = parse_double(trim(fields[i]), context);
  }
  return v;
}

}  // namespace

BoxDomain BoxDomain::symmetric(int state_dim, int input_dim, double radius) {
  if (radius <= 0.0) {
    throw std::invalid_argument("BoxDomain::symmetric: radius must be positive");
  }
  BoxDomain d;
  d.x_lo = Eigen::VectorXd::Constant(state_dim, -radius);
  d.x_hi = Eigen::VectorXd::Constant(state_dim, radius);
  d.mu_lo = Eigen::VectorXd::Constant(input_dim, -radius);
  d.mu_hi = Eigen::VectorXd::Constant(input_dim, radius);
  return d;
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (Eigen::Index i = 0; i < x_lo.size(); ++i) v *= x_hi(i) - x_lo(i);
  for (Eigen::Index j = 0; j < mu_lo.size(); ++j) v *= mu_hi(j) - mu_lo(j);
  return v;
}

bool BoxDomain::contains(const State& x, const Control& mu) const {
  return (x.array() >= x_lo.array()).all() && (x.array() <= x_hi.array()).all() &&
         (mu.array() >= mu_lo.array()).all() && (mu.array() <= mu_hi.array()).all();
}

void BoxDomain::validate(int state_dim, int input_dim) const {
  if (x_lo.size() != state_dim || x_hi.size() != state_dim ||
      mu_lo.size() != input_dim || mu_hi.size() != input_dim) {
    throw std::invalid_argument("BoxDomain: bound sizes do not match dimensions");
  }
  if ((x_hi.array() < x_lo.array()).any() || (mu_hi.array() < mu_lo.array()).any()) {
    throw std::invalid_argument("BoxDomain: upper bound below lower bound");
  }
}

SampleSet collect_samples(const DynamicsModel& model, const StageCost& cost,
                          const BoxDomain& domain, int count, double delta_t,
                          int substeps, std::uint64_t seed) {
  if (count < 1) {
    throw std::invalid_argument("collect_samples: count must be >= 1");
  }
  domain.validate(model.state_dim(), model.input_dim());
  if (cost.state_dim() != model.state_dim() || cost.input_dim() != model.input_dim()) {
    throw std::invalid_argument("collect_samples: cost dimensions do not match model");
  }

  SampleSet set;
  set.model_name = model.name();
  set.cost_name = cost.name();
  set.n = model.state_dim();
  set.m = model.input_dim();
  set.delta_t = delta_t;
  set.substeps = substeps;
  set.seed = seed;
  set.domain = domain;
  set.samples.reserve(count);

  std::mt19937_64 rng(seed);
  for (int k = 0; k < count; ++k) {
    Sample s;
    s.x.resize(set.n);
    for (int i = 0; i < set.n; ++i) {
      s.x(i) = domain.x_lo(i) + (domain.x_hi(i) - domain.x_lo(i)) * uniform01(rng);
    }
    s.mu.resize(set.m);
    for (int j = 0; j < set.m; ++j) {
      s.mu(j) = domain.mu_lo(j) + (domain.mu_hi(j) - domain.mu_lo(j)) * uniform01(rng);
    }
    try {
      Transition tr = integrate_transition(model, cost, s.x, s.mu, delta_t, substeps);
      s.x_next = std::move(tr.x_next);
      s.pi = tr.cost;
    } catch (const DivergenceError& e) {
      throw DivergenceError("sample " + std::to_string(k) + ": " + e.what());
    }
    set.samples.push_back(std::move(s));
  }
  return set;
}

void save_dataset(const SampleSet& set, const std::filesystem::path& path,
                  const std::vector<std::string>& extra_header) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_dataset: cannot open '" + path.string() +
                             "' for writing");
  }
  out << "# model=" << set.model_name << '\n';
  out << "# cost=" << set.cost_name << '\n';
  out << "# n=" << set.n << '\n';
  out << "# m=" << set.m << '\n';
  out << "# M=" << set.size() << '\n';
  out << "# delta_t=" << format_double(set.delta_t) << '\n';
  out << "# substeps=" << set.substeps << '\n';
  out << "# seed=" << set.seed << '\n';
  out << "# x_lo=" << join_coords(set.domain.x_lo) << '\n';
  out << "# x_hi=" << join_coords(set.domain.x_hi) << '\n';
  out << "# mu_lo=" << join_coords(set.domain.mu_lo) << '\n';
  out << "# mu_hi=" << join_coords(set.domain.mu_hi) << '\n';
  out << "# domain_volume=" << format_double(set.domain.volume()) << '\n';
  for (const std::string& line : extra_header) {
    out << "# " << line << '\n';
  }
  for (const Sample& s : set.samples) {
    out << join_coords(s.x) << ',' << join_coords(s.mu) << ','
        << join_coords(s.x_next) << ',' << format_double(s.pi) << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_dataset: write to '" + path.string() + "' failed");
  }
}

SampleSet load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DatasetFormatError("load_dataset: cannot open '" + path.string() + "'");
  }

  SampleSet set;
  long declared_count = -1;
  bool have_n = false, have_m = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fail = [&](const std::string& why) -> DatasetFormatError {
      return DatasetFormatError(path.string() + " line " + std::to_string(line_no) +
                                ": " + why);
    };
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;

    if (trimmed[0] == '#') {
      const std::string entry = trim(trimmed.substr(1));
      const size_t eq = entry.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      const std::string key = trim(entry.substr(0, eq));
      const std::string value = trim(entry.substr(eq + 1));
      const std::string context = path.string() + " header '" + key + "'";
      try {
        if (key == "model") {
          set.model_name = value;
        } else if (key == "cost") {
          set.cost_name = value;
        } else if (key == "n") {
          set.n = std::stoi(value);
          have_n = true;
        } else if (key == "m") {
          set.m = std::stoi(value);
          have_m = true;
        } else if (key == "M") {
          declared_count = std::stol(value);
        } else if (key == "delta_t") {
          set.delta_t = parse_double(value, context);
        } else if (key == "substeps") {
          set.substeps = std::stoi(value);
        } else if (key == "seed") {
          set.seed = std::stoull(value);
        } else if (key == "x_lo") {
          set.domain.x_lo = parse_coords(value, context);
        } else if (key == "x_hi") {
          set.domain.x_hi = parse_coords(value, context);
        } else if (key == "mu_lo") {
          set.domain.mu_lo = parse_coords(value, context);
        } else if (key == "mu_hi") {
          set.domain.mu_hi = parse_coords(value, context);
        }
        // unknown keys (config_hash, domain_volume, ...) are provenance only
      } catch (const DatasetFormatError&) {
        throw;
      } catch (const std::exception& e) {
        throw fail(std::string("bad header value: ") + e.what());
      }
      continue;
    }

    if (!have_n || !have_m) {
      throw fail("sample record before n/m header");
    }
    const std::vector<std::string> fields = split(trimmed, ',');
    const size_t expected = static_cast<size_t>(2 * set.n + set.m + 1);
    if (fields.size() != expected) {
      throw fail("expected " + std::to_string(expected) + " fields, got " +
                 std::to_string(fields.size()));
    }
    Sample s;
    s.x.resize(set.n);
    s.mu.resize(set.m);
    s.x_next.resize(set.n);
    size_t f = 0;
    const std::string context = path.string() + " line " + std::to_string(line_no);
    try {
      for (int i = 0; i < set.n; ++i) s.x(i) = parse_double(trim(fields[f++]), context);
      for (int j = 0; j < set.m; ++j) s.mu(j) = parse_double(trim(fields[f++]), context);
      for (int i = 0; i < set.n; ++i) {
        s.x_next(i) = parse_double(trim(fields[f++]), context);
      }
      s.pi = parse_double(trim(fields[f]), context);
    } catch (const std::exception& e) {
      throw DatasetFormatError(e.what());
    }
    if (!s.x.allFinite() || !s.mu.allFinite() || !s.x_next.allFinite() ||
        !std::isfinite(s.pi)) {
      throw fail("non-finite value");
    }
    set.samples.push_back(std::move(s));
  }

  if (!have_n || !have_m) {
    throw DatasetFormatError(path.string() + ": missing n/m header");
  }
  set.domain.validate(set.n, set.m);
  if (declared_count >= 0 && declared_count != static_cast<long>(set.size())) {
    throw DatasetFormatError(path.string() + ": header M=" +
                             std::to_string(declared_count) + " but " +
                             std::to_string(set.size()) + " samples present");
  }
  return set;
}

}  // namespace ctql
