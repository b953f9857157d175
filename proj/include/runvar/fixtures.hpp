#pragma once

// Published result tables shipped as CSV fixtures.

#include <string>
#include <string_view>
#include <vector>

#include "runvar/table.hpp"

namespace runvar {

/// ablation, findings_vs_citations, mitigation, api_temperature, tv_vs_accuracy
std::vector<std::string> fixture_names();

/// CSV text of a fixture. Throws ConfigError listing the valid names.
std::string_view fixture_csv(std::string_view name);

inline Table fixture_table(std::string_view name) { return Table::from_csv(fixture_csv(name)); }

}  // namespace runvar
