#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctql {

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;

// State-feedback policy. Must return a vector of the model's input dimension.
using Policy = std::function<Control(const State&)>;

// Thrown when a trajectory leaves the safety bound (see kStateNormBound).
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration aborts once ||x|| exceeds this; prevents NaN-poisoned samples.
inline constexpr double kStateNormBound = 1e6;

// Control-affine continuous-time plant, dx/dt = drift(x, u).
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual State drift(const State& x, const Control& u) const = 0;
  virtual std::string name() const = 0;
};

class LinearModel final : public DynamicsModel {
 public:
  LinearModel(Eigen::MatrixXd A, Eigen::MatrixXd B, std::string name = "linear");

  int state_dim() const override { return static_cast<int>(A_.rows()); }
  int input_dim() const override { return static_cast<int>(B_.cols()); }
  State drift(const State& x, const Control& u) const override;
  std::string name() const override { return name_; }

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
  std::string name_;
};

// Short-period F-16 pitch dynamics (angle of attack, pitch rate, elevator
// deflection), elevator rate command input.
LinearModel f16_model();

// Two-state polynomial benchmark built by the converse-HJB construction, so
// the optimal policy u = -x1*x2 and value (x1^2)/2 + x2^2 are known exactly.
class ConverseHjbModel final : public DynamicsModel {
 public:
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  State drift(const State& x, const Control& u) const override;
  std::string name() const override { return "converse_hjb"; }
};

// Running cost rate r(x, u) = state_cost(x) + control_cost(u).
class StageCost {
 public:
  StageCost(int state_dim, int input_dim,
            std::function<double(const State&)> state_cost,
            std::function<double(const Control&)> control_cost,
            std::string name = "custom");

  // x' S x + u' W u with S, W symmetric positive (semi)definite.
  static StageCost quadratic(const Eigen::MatrixXd& S, const Eigen::MatrixXd& W);

  double state_cost(const State& x) const;
  double control_cost(const Control& u) const;
  double rate(const State& x, const Control& u) const;

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  const std::string& name() const { return name_; }

 private:
  int state_dim_;
  int input_dim_;
  std::function<double(const State&)> state_cost_;
  std::function<double(const Control&)> control_cost_;
  std::string name_;
};

// One classical Runge-Kutta step of dx/dt = drift(x, u) with u held constant.
State rk4_step(const DynamicsModel& model, const State& x, const Control& u,
               double h);

struct Transition {
  State x_next;
  double cost;  // integral of the stage cost over the interval
};

// Integrates the plant and the running cost over [0, delta_t] with the action
// held constant, using `substeps` RK4 steps.
Transition integrate_transition(const DynamicsModel& model, const StageCost& cost,
                                const State& x0, const Control& mu,
                                double delta_t, int substeps);

struct TrajectoryPoint {
  double t = 0.0;
  State x;
  Control u;
};

// Runs `policy` from x0 for `horizon` seconds with closed-loop RK4 steps of
// size `step` (the policy is re-evaluated at every RK4 stage). Returns the
// state/control history at the step boundaries; `total_cost`, when given,
// receives the integrated stage cost.
std::vector<TrajectoryPoint> simulate_closed_loop(
    const DynamicsModel& model, const StageCost& cost, const Policy& policy,
    const State& x0, double horizon, double step, double* total_cost = nullptr);

// Total cost of running `policy` from x0 for `horizon` seconds with RK4 steps
// of size `step` (the policy is re-evaluated at every RK4 stage).
double closed_loop_cost(const DynamicsModel& model, const StageCost& cost,
                        const Policy& policy, const State& x0, double horizon,
                        double step);

}  // namespace ctql
