#include "ctql/basis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace ctql {

namespace {

double ipow(double v, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= v;
  return r;
}

MuStructure classify(const Monomial& t) {
  const int mu_deg = t.mu_degree();
  if (mu_deg == 0) return MuStructure::kFree;
  if (mu_deg == 1) return MuStructure::kLinear;
  if (mu_deg == 2) {
    const bool x_free = std::all_of(t.x_exp.begin(), t.x_exp.end(),
                                    [](int e) { return e == 0; });
    if (x_free) return MuStructure::kQuadratic;
  }
  return MuStructure::kOther;
}

// Accumulates the curvature matrix C from the mu-quadratic terms and checks
// positive definiteness. Shared by GreedyPolicy and gain_from_theta.
Eigen::MatrixXd curvature_matrix(const QApprox& q) {
  const BasisSet& basis = *q.basis;
  const int m = basis.input_dim();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(m, m);
  for (int t = 0; t < basis.size(); ++t) {
    const MuStructure s = basis.mu_structure(t);
    if (s == MuStructure::kOther) {
      throw UnsupportedBasisError(
          "basis term '" + basis.terms()[t].to_string() +
          "' is not constant, linear, or x-free quadratic in the control; "
          "no closed-form greedy policy");
    }
    if (s != MuStructure::kQuadratic) continue;
    const auto& me = basis.terms()[t].mu_exp;
    int i = -1, j = -1;
    for (int k = 0; k < m; ++k) {
      if (me[k] == 2) { i = j = k; }
      if (me[k] == 1) { (i < 0 ? i : j) = k; }
    }
    if (i == j) {
      C(i, i) += q.theta(t);
    } else {
      C(i, j) += 0.5 * q.theta(t);
      C(j, i) += 0.5 * q.theta(t);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw NonCoerciveError(
        "Q approximant is not strictly convex in the control "
        "(mu-curvature matrix has a nonpositive eigenvalue)");
  }
  return C;
}

}  // namespace

int Monomial::total_degree() const {
  return std::accumulate(x_exp.begin(), x_exp.end(), 0) + mu_degree();
}

int Monomial::mu_degree() const {
  return std::accumulate(mu_exp.begin(), mu_exp.end(), 0);
}

double Monomial::eval(const State& x, const Control& mu) const {
  double v = eval_x(x);
  for (size_t j = 0; j < mu_exp.size(); ++j) v *= ipow(mu(j), mu_exp[j]);
  return v;
}

double Monomial::eval_x(const State& x) const {
  double v = 1.0;
  for (size_t i = 0; i < x_exp.size(); ++i) v *= ipow(x(i), x_exp[i]);
  return v;
}

std::string Monomial::to_string() const {
  std::ostringstream out;
  bool first = true;
  const auto emit = [&](char symbol, int index, int exp) {
    if (exp == 0) return;
    if (!first) out << '*';
    first = false;
    out << symbol << (index + 1);
    if (exp > 1) out << '^' << exp;
  };
  for (size_t i = 0; i < x_exp.size(); ++i) emit('x', static_cast<int>(i), x_exp[i]);
  for (size_t j = 0; j < mu_exp.size(); ++j) emit('u', static_cast<int>(j), mu_exp[j]);
  return first ? "1" : out.str();
}

BasisSet::BasisSet(int state_dim, int input_dim, std::vector<Monomial> terms)
    : state_dim_(state_dim), input_dim_(input_dim), terms_(std::move(terms)) {
  if (state_dim_ < 1 || input_dim_ < 1) {
    throw std::invalid_argument("BasisSet: dimensions must be positive");
  }
  if (terms_.empty()) {
    throw std::invalid_argument("BasisSet: at least one term required");
  }
  for (const Monomial& t : terms_) {
    if (static_cast<int>(t.x_exp.size()) != state_dim_ ||
        static_cast<int>(t.mu_exp.size()) != input_dim_) {
      throw std::invalid_argument("BasisSet: term '" + t.to_string() +
                                  "' has wrong exponent vector sizes");
    }
    const auto neg = [](int e) { return e < 0; };
    if (std::any_of(t.x_exp.begin(), t.x_exp.end(), neg) ||
        std::any_of(t.mu_exp.begin(), t.mu_exp.end(), neg)) {
      throw std::invalid_argument("BasisSet: negative exponent");
    }
    if (t.total_degree() < 1) {
      throw std::invalid_argument(
          "BasisSet: constant terms are not allowed (basis must vanish at 0)");
    }
  }
  for (size_t a = 0; a < terms_.size(); ++a) {
    for (size_t b = a + 1; b < terms_.size(); ++b) {
      if (terms_[a] == terms_[b]) {
        throw std::invalid_argument("BasisSet: duplicate term '" +
                                    terms_[a].to_string() + "'");
      }
    }
  }
  structure_.reserve(terms_.size());
  for (const Monomial& t : terms_) structure_.push_back(classify(t));
}

BasisSet BasisSet::lqr_quadratic(int state_dim, int input_dim) {
  const int d = state_dim + input_dim;
  std::vector<Monomial> terms;
  terms.reserve(d * (d + 1) / 2);
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k) {
      Monomial t{std::vector<int>(state_dim, 0), std::vector<int>(input_dim, 0)};
      const auto bump = [&](int z) {
        if (z < state_dim) {
          t.x_exp[z] += 1;
        } else {
          t.mu_exp[z - state_dim] += 1;
        }
      };
      bump(j);
      bump(k);
      terms.push_back(std::move(t));
    }
  }
  return BasisSet(state_dim, input_dim, std::move(terms));
}

BasisSet BasisSet::converse_hjb() {
  const auto mono = [](int e1, int e2, int eu) {
    return Monomial{{e1, e2}, {eu}};
  };
  std::vector<Monomial> terms = {
      mono(2, 0, 0), mono(1, 1, 0), mono(0, 2, 0),
      mono(3, 0, 0), mono(2, 1, 0), mono(1, 2, 0), mono(0, 3, 0),
      mono(4, 0, 0), mono(3, 1, 0), mono(2, 2, 0), mono(1, 3, 0), mono(0, 4, 0),
      mono(1, 0, 1), mono(0, 1, 1), mono(2, 0, 1), mono(1, 1, 1), mono(0, 2, 1),
      mono(0, 0, 2),
  };
  return BasisSet(2, 1, std::move(terms));
}

BasisSet BasisSet::parse(const std::string& text, int state_dim, int input_dim) {
  std::vector<Monomial> terms;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto fail = [&](const std::string& why) -> std::runtime_error {
      return std::runtime_error("basis text line " + std::to_string(line_no) +
                                ": " + why);
    };
    // strip comments and whitespace
    if (const size_t hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::erase_if(line, [](unsigned char c) { return std::isspace(c); });
    if (line.empty()) continue;

    Monomial t{std::vector<int>(state_dim, 0), std::vector<int>(input_dim, 0)};
    size_t pos = 0;
    while (pos < line.size()) {
      const char symbol = line[pos];
      if (symbol != 'x' && symbol != 'u') {
        throw fail(std::string("expected 'x' or 'u', got '") + symbol + "'");
      }
      ++pos;
      size_t digits = 0;
      while (pos + digits < line.size() && std::isdigit(line[pos + digits])) ++digits;
      if (digits == 0) throw fail("missing variable index");
      const int index = std::stoi(line.substr(pos, digits));
      pos += digits;
      int exp = 1;
      if (pos < line.size() && line[pos] == '^') {
        ++pos;
        digits = 0;
        while (pos + digits < line.size() && std::isdigit(line[pos + digits])) ++digits;
        if (digits == 0) throw fail("missing exponent after '^'");
        exp = std::stoi(line.substr(pos, digits));
        pos += digits;
      }
      const int limit = (symbol == 'x') ? state_dim : input_dim;
      if (index < 1 || index > limit) {
        throw fail("variable " + std::string(1, symbol) + std::to_string(index) +
                   " out of range");
      }
      (symbol == 'x' ? t.x_exp : t.mu_exp)[index - 1] += exp;
      if (pos < line.size()) {
        if (line[pos] != '*') throw fail("expected '*' between factors");
        ++pos;
        if (pos == line.size()) throw fail("trailing '*'");
      }
    }
    terms.push_back(std::move(t));
  }
  return BasisSet(state_dim, input_dim, std::move(terms));
}

Eigen::VectorXd BasisSet::eval(const State& x, const Control& mu) const {
  if (x.size() != state_dim_ || mu.size() != input_dim_) {
    throw std::invalid_argument("BasisSet::eval: dimension mismatch");
  }
  Eigen::VectorXd psi(size());
  for (int t = 0; t < size(); ++t) psi(t) = terms_[t].eval(x, mu);
  return psi;
}

bool BasisSet::supports_closed_form_policy() const {
  return std::none_of(structure_.begin(), structure_.end(),
                      [](MuStructure s) { return s == MuStructure::kOther; });
}

std::string BasisSet::to_text() const {
  std::string out;
  for (const Monomial& t : terms_) {
    out += t.to_string();
    out += '\n';
  }
  return out;
}

bool BasisSet::operator==(const BasisSet& other) const {
  return state_dim_ == other.state_dim_ && input_dim_ == other.input_dim_ &&
         terms_ == other.terms_;
}

double QApprox::value(const State& x, const Control& mu) const {
  if (!basis) throw std::invalid_argument("QApprox: null basis");
  if (theta.size() != basis->size()) {
    throw std::invalid_argument("QApprox: theta length " +
                                std::to_string(theta.size()) +
                                " != basis size " + std::to_string(basis->size()));
  }
  return basis->eval(x, mu).dot(theta);
}

GreedyPolicy::GreedyPolicy(QApprox q) : q_(std::move(q)) {
  if (!q_.basis || q_.theta.size() != q_.basis->size()) {
    throw std::invalid_argument("GreedyPolicy: malformed Q approximant");
  }
  C_ = curvature_matrix(q_);
  solver_.compute(C_);
  for (int t = 0; t < q_.basis->size(); ++t) {
    if (q_.basis->mu_structure(t) != MuStructure::kLinear) continue;
    const auto& me = q_.basis->terms()[t].mu_exp;
    for (int j = 0; j < q_.basis->input_dim(); ++j) {
      if (me[j] == 1) linear_terms_.emplace_back(t, j);
    }
  }
}

Control GreedyPolicy::operator()(const State& x) const {
  const int m = q_.basis->input_dim();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (const auto& [t, j] : linear_terms_) {
    b(j) += q_.theta(t) * q_.basis->terms()[t].eval_x(x);
  }
  return -0.5 * solver_.solve(b);
}

Control greedy_policy(const QApprox& q, const State& x) {
  return GreedyPolicy(q)(x);
}

Control GainMatrix::evaluate(const State& x) const {
  Eigen::VectorXd phi(features.size());
  for (size_t i = 0; i < features.size(); ++i) phi(i) = features[i].eval_x(x);
  return K * phi;
}

Policy GainMatrix::as_policy() const {
  return [gain = *this](const State& x) { return gain.evaluate(x); };
}

GainMatrix gain_from_theta(const QApprox& q) {
  const BasisSet& basis = *q.basis;
  const int m = basis.input_dim();
  const Eigen::MatrixXd C = curvature_matrix(q);

  // Collect distinct x-monomial features of the mu-linear terms.
  std::vector<Monomial> features;
  std::vector<std::pair<int, int>> rows;  // term -> (mu index, feature index)
  std::vector<int> term_ids;
  for (int t = 0; t < basis.size(); ++t) {
    if (basis.mu_structure(t) != MuStructure::kLinear) continue;
    Monomial xpart{basis.terms()[t].x_exp, std::vector<int>(m, 0)};
    int f = -1;
    for (size_t i = 0; i < features.size(); ++i) {
      if (features[i] == xpart) { f = static_cast<int>(i); break; }
    }
    if (f < 0) {
      f = static_cast<int>(features.size());
      features.push_back(std::move(xpart));
    }
    int j = 0;
    while (basis.terms()[t].mu_exp[j] == 0) ++j;
    rows.emplace_back(j, f);
    term_ids.push_back(t);
  }

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, static_cast<int>(features.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    B(rows[r].first, rows[r].second) += q.theta(term_ids[r]);
  }
  GainMatrix gain;
  gain.K = -0.5 * C.ldlt().solve(B);
  gain.features = std::move(features);
  return gain;
}

Eigen::MatrixXd theta_to_G(const QApprox& q) {
  const BasisSet& basis = *q.basis;
  const int n = basis.state_dim();
  const int m = basis.input_dim();
  const BasisSet canonical = BasisSet::lqr_quadratic(n, m);
  if (!(basis == canonical)) {
    throw std::invalid_argument("theta_to_G: basis is not lqr_quadratic(" +
                                std::to_string(n) + ", " + std::to_string(m) + ")");
  }
  if (q.theta.size() != canonical.size()) {
    throw std::invalid_argument("theta_to_G: theta length mismatch");
  }
  const int d = n + m;
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
  int t = 0;
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k, ++t) {
      if (j == k) {
        G(j, j) = q.theta(t);
      } else {
        G(j, k) = 0.5 * q.theta(t);
        G(k, j) = 0.5 * q.theta(t);
      }
    }
  }
  return G;
}

Eigen::VectorXd G_to_theta(const BasisSet& basis, const Eigen::MatrixXd& G) {
  const int n = basis.state_dim();
  const int m = basis.input_dim();
  const BasisSet canonical = BasisSet::lqr_quadratic(n, m);
  if (!(basis == canonical)) {
    throw std::invalid_argument("G_to_theta: basis is not lqr_quadratic(" +
                                std::to_string(n) + ", " + std::to_string(m) + ")");
  }
  const int d = n + m;
  if (G.rows() != d || G.cols() != d) {
    throw std::invalid_argument("G_to_theta: G must be " + std::to_string(d) +
                                "x" + std::to_string(d));
  }
  if ((G - G.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("G_to_theta: G must be symmetric");
  }
  Eigen::VectorXd theta(canonical.size());
  int t = 0;
  for (int j = 0; j < d; ++j) {
    for (int k = j; k < d; ++k, ++t) {
      theta(t) = (j == k) ? G(j, j) : 2.0 * G(j, k);
    }
  }
  return theta;
}

}  // namespace ctql
