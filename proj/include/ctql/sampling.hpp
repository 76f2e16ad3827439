#pragma once

#include "ctql/dynamics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctql {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One observed transition: action mu held constant for one sampling interval,
// pi is the integrated stage cost over that interval.
struct Sample {
  State x;
  Control mu;
  State x_next;
  double pi = 0.0;
};

// Axis-aligned sampling box over states and controls.
struct BoxDomain {
  Eigen::VectorXd x_lo, x_hi;
  Eigen::VectorXd mu_lo, mu_hi;

  static BoxDomain symmetric(int state_dim, int input_dim, double radius);

  double volume() const;
  bool contains(const State& x, const Control& mu) const;
  void validate(int state_dim, int input_dim) const;
};

struct SampleSet {
  std::string model_name;
  std::string cost_name;
  int n = 0;
  int m = 0;
  double delta_t = 0.0;
  int substeps = 0;
  std::uint64_t seed = 0;
  BoxDomain domain;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
};

// Draws `count` (x, mu) pairs uniformly from the box (coordinates in order,
// one mt19937_64 stream keyed by `seed`) and integrates each transition.
SampleSet collect_samples(const DynamicsModel& model, const StageCost& cost,
                          const BoxDomain& domain, int count, double delta_t,
                          int substeps, std::uint64_t seed);

// Text format: '# key=value' header lines, then one sample per line as
// comma-separated decimals in the order x, mu, x_next, pi, full round-trip
// precision. `extra_header` lines (e.g. provenance) are emitted verbatim
// after the standard keys; unknown keys are ignored on load.
void save_dataset(const SampleSet& set, const std::filesystem::path& path,
                  const std::vector<std::string>& extra_header = {});
SampleSet load_dataset(const std::filesystem::path& path);

}  // namespace ctql
