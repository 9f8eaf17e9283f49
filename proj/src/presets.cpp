#include "sepfilter/presets.hpp"

#include <algorithm>
#include <cstdlib>

namespace sepfilter {

namespace {

const std::vector<std::string>& registry() {
  static const std::vector<std::string> names = {
      "linear-gaussian",   // scalar-factor benchmarked model, exact KF
      "wonham2",           // two-state regime chain, exact Wonham filter
      "nagai2001",         // wealth-based linear model, no expert block
      "bl2020",            // wealth-based linear model with expert signals
      "davis-lleo-2021",   // benchmarked linear model with expert signals
      "nonlinear-demo",    // nonlinear drifts, EKF approximation
      "lg-quadratic-c",    // linear-gaussian variant with a quadratic benchmark
      "lg-tabulated-a",    // linear-gaussian variant with a tabulated drift
  };
  return names;
}

}  // namespace

std::vector<std::string> list_presets() { return registry(); }

bool is_preset(const std::string& name) {
  const auto& r = registry();
  return std::find(r.begin(), r.end(), name) != r.end();
}

std::string preset_directory() {
  if (const char* env = std::getenv("SEPFILTER_PRESET_DIR")) return env;
#ifdef SEPFILTER_PRESET_DIR
  return SEPFILTER_PRESET_DIR;
#else
  return "presets";
#endif
}

Scenario build_preset(const std::string& name) {
  if (!is_preset(name)) throw ScenarioError("unknown preset: " + name);
  Scenario sc = load_scenario_file(preset_directory() + "/" + name + ".json");
  ValidationReport rep = validate(sc.model);
  if (!rep.ok) {
    std::string msg = "preset " + name + " failed validation:";
    for (const auto& v : rep.violations) msg += "\n  " + v.invariant + ": " + v.detail;
    throw ScenarioError(msg);
  }
  return sc;
}

}  // namespace sepfilter
