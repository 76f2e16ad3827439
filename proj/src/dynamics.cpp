#include "ctql/dynamics.hpp"

#include <cmath>
#include <utility>

namespace ctql {

namespace {

void check_dims(const DynamicsModel& model, const State& x, const Control& u) {
  if (x.size() != model.state_dim()) {
    throw std::invalid_argument("state dimension " + std::to_string(x.size()) +
                                " does not match model '" + model.name() +
                                "' (expects " + std::to_string(model.state_dim()) + ")");
  }
  if (u.size() != model.input_dim()) {
    throw std::invalid_argument("input dimension " + std::to_string(u.size()) +
                                " does not match model '" + model.name() +
                                "' (expects " + std::to_string(model.input_dim()) + ")");
  }
}

void check_bounded(const State& x, const char* where) {
  if (!x.allFinite() || x.norm() > kStateNormBound) {
    throw DivergenceError(std::string("trajectory diverged during ") + where +
                          " (state norm exceeded " + std::to_string(kStateNormBound) + ")");
  }
}

}  // namespace

LinearModel::LinearModel(Eigen::MatrixXd A, Eigen::MatrixXd B, std::string name)
    : A_(std::move(A)), B_(std::move(B)), name_(std::move(name)) {
  if (A_.rows() != A_.cols()) {
    throw std::invalid_argument("LinearModel: A must be square");
  }
  if (B_.rows() != A_.rows()) {
    throw std::invalid_argument("LinearModel: B must have as many rows as A");
  }
  if (B_.cols() < 1) {
    throw std::invalid_argument("LinearModel: B must have at least one column");
  }
}

State LinearModel::drift(const State& x, const Control& u) const {
  return A_ * x + B_ * u;
}

LinearModel f16_model() {
  Eigen::MatrixXd A(3, 3);
  A << -1.01887, 0.90506, -0.00215,
        0.82225, -1.07741, -0.17555,
        0.0, 0.0, -1.0;
  Eigen::MatrixXd B(3, 1);
  B << 0.0, 0.0, 1.0;
  return LinearModel(std::move(A), std::move(B), "f16");
}

State ConverseHjbModel::drift(const State& x, const Control& u) const {
  State dx(2);
  dx(0) = -x(0) + x(1);
  dx(1) = -0.5 * (x(0) + x(1)) + 0.5 * x(0) * x(0) * x(1) + x(0) * u(0);
  return dx;
}

StageCost::StageCost(int state_dim, int input_dim,
                     std::function<double(const State&)> state_cost,
                     std::function<double(const Control&)> control_cost,
                     std::string name)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      state_cost_(std::move(state_cost)),
      control_cost_(std::move(control_cost)),
      name_(std::move(name)) {
  if (state_dim_ < 1 || input_dim_ < 1) {
    throw std::invalid_argument("StageCost: dimensions must be positive");
  }
}

StageCost StageCost::quadratic(const Eigen::MatrixXd& S, const Eigen::MatrixXd& W) {
  if (S.rows() != S.cols() || W.rows() != W.cols()) {
    throw std::invalid_argument("StageCost::quadratic: S and W must be square");
  }
  const int n = static_cast<int>(S.rows());
  const int m = static_cast<int>(W.rows());
  return StageCost(
      n, m,
      [S](const State& x) { return x.dot(S * x); },
      [W](const Control& u) { return u.dot(W * u); },
      "quadratic");
}

double StageCost::state_cost(const State& x) const {
  if (x.size() != state_dim_) {
    throw std::invalid_argument("StageCost: state dimension mismatch");
  }
  return state_cost_(x);
}

double StageCost::control_cost(const Control& u) const {
  if (u.size() != input_dim_) {
    throw std::invalid_argument("StageCost: input dimension mismatch");
  }
  return control_cost_(u);
}

double StageCost::rate(const State& x, const Control& u) const {
  return state_cost(x) + control_cost(u);
}

State rk4_step(const DynamicsModel& model, const State& x, const Control& u,
               double h) {
  check_dims(model, x, u);
  const State k1 = model.drift(x, u);
  const State k2 = model.drift(x + 0.5 * h * k1, u);
  const State k3 = model.drift(x + 0.5 * h * k2, u);
  const State k4 = model.drift(x + h * k3, u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Transition integrate_transition(const DynamicsModel& model, const StageCost& cost,
                                const State& x0, const Control& mu,
                                double delta_t, int substeps) {
  check_dims(model, x0, mu);
  if (delta_t <= 0.0) {
    throw std::invalid_argument("integrate_transition: delta_t must be positive");
  }
  if (substeps < 1) {
    throw std::invalid_argument("integrate_transition: substeps must be >= 1");
  }
  check_bounded(x0, "integrate_transition");

  // RK4 on the state augmented with the running cost. The cost stage values
  // reuse the state stage points, which keeps the pair fourth-order accurate.
  const double h = delta_t / substeps;
  State x = x0;
  double c = 0.0;
  for (int s = 0; s < substeps; ++s) {
    const State k1 = model.drift(x, mu);
    const double c1 = cost.rate(x, mu);
    const State k2 = model.drift(x + 0.5 * h * k1, mu);
    const double c2 = cost.rate(x + 0.5 * h * k1, mu);
    const State k3 = model.drift(x + 0.5 * h * k2, mu);
    const double c3 = cost.rate(x + 0.5 * h * k2, mu);
    const State k4 = model.drift(x + h * k3, mu);
    const double c4 = cost.rate(x + h * k3, mu);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    c += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    check_bounded(x, "integrate_transition");
  }
  return Transition{std::move(x), c};
}

std::vector<TrajectoryPoint> simulate_closed_loop(
    const DynamicsModel& model, const StageCost& cost, const Policy& policy,
    const State& x0, double horizon, double step, double* total_cost) {
  if (horizon < 0.0 || step <= 0.0) {
    throw std::invalid_argument("simulate_closed_loop: horizon must be >= 0 and step > 0");
  }
  check_dims(model, x0, policy(x0));
  check_bounded(x0, "simulate_closed_loop");

  const auto loop_drift = [&](const State& x) { return model.drift(x, policy(x)); };
  const auto loop_rate = [&](const State& x) { return cost.rate(x, policy(x)); };

  const int steps = static_cast<int>(std::ceil(horizon / step - 1e-12));
  std::vector<TrajectoryPoint> points;
  points.reserve(steps + 1);
  State x = x0;
  double total = 0.0;
  double t = 0.0;
  points.push_back({t, x, policy(x)});
  for (int s = 0; s < steps; ++s) {
    const double h = std::min(step, horizon - t);
    const State k1 = loop_drift(x);
    const double c1 = loop_rate(x);
    const State k2 = loop_drift(x + 0.5 * h * k1);
    const double c2 = loop_rate(x + 0.5 * h * k1);
    const State k3 = loop_drift(x + 0.5 * h * k2);
    const double c3 = loop_rate(x + 0.5 * h * k2);
    const State k4 = loop_drift(x + h * k3);
    const double c4 = loop_rate(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    total += (h / 6.0) * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
    t += h;
    check_bounded(x, "simulate_closed_loop");
    points.push_back({t, x, policy(x)});
  }
  if (total_cost != nullptr) *total_cost = total;
  return points;
}

double closed_loop_cost(const DynamicsModel& model, const StageCost& cost,
                        const Policy& policy, const State& x0, double horizon,
                        double step) {
  double total = 0.0;
  simulate_closed_loop(model, cost, policy, x0, horizon, step, &total);
  return total;
}

}  // namespace ctql
