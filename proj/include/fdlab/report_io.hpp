#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fdlab/harness.hpp"

namespace fdlab {

// Serialized report layout: {"result_id": "...", "quantities": {...},
// "pass": bool, "notes": "..."}. Keys inside "quantities" are emitted in
// sorted order; numbers round-trip exactly (shortest exact decimal).
nlohmann::ordered_json report_to_json(const TheoremReport& report);

// Inverse of report_to_json. The stored "pass" flag is checked against a
// recomputation from the quantities; a mismatch throws ConfigError, since a
// report that disagrees with its own numbers is corrupt.
TheoremReport report_from_json(const nlohmann::json& j);

// Fixed-width human-readable table, one row per report.
std::string summary_table(const std::vector<TheoremReport>& reports);

}  // namespace fdlab
