#pragma once

#include <string>
#include <vector>

#include "sepfilter/scenario.hpp"

namespace sepfilter {

/// Registered model presets. Parameter values live in the preset scenario
/// files; the registry resolves names to files and validates on load.
std::vector<std::string> list_presets();

bool is_preset(const std::string& name);

/// Loads, parses and validates a preset scenario. Throws ScenarioError on an
/// unknown name or an invalid model.
Scenario build_preset(const std::string& name);

/// Directory holding the preset files (env SEPFILTER_PRESET_DIR overrides
/// the build-time default).
std::string preset_directory();

}  // namespace sepfilter
