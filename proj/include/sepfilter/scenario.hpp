#pragma once

#include <string>

#include "sepfilter/measure_criteria.hpp"

namespace sepfilter {

/// One experiment description: model, strategy, risk parameters, time grid,
/// Monte-Carlo settings and output directory.
struct Scenario {
  ModelSpec model;
  Strategy strategy = Strategy::constant(VectorXd::Zero(1));
  RiskSensitiveParams params;
  TimeGrid grid;
  MonteCarloConfig mc;
  FilterKind filter_kind = FilterKind::KalmanBucy;
  std::string outputs = "out";
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);

FilterKind parse_filter_kind(const std::string& name);
std::string to_string(FilterKind kind);

}  // namespace sepfilter
