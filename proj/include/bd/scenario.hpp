#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

namespace bd {

/// Flag-level overrides layered on top of the JSON config.
struct ScenarioOverrides {
    std::optional<std::string> mode;
    std::optional<double> z;
    std::optional<double> mass;
    std::optional<std::size_t> n;
    std::optional<double> t_end;
    std::optional<double> eta;
    std::optional<std::string> out;
    std::optional<unsigned> threads; // sweep parallelism cap (from BD_THREADS)
};

/// Exit codes: 0 success, 1 computational error, 2 validation error.
int run_scenario(const nlohmann::json& config, const ScenarioOverrides& overrides,
                 std::ostream& summary_out, std::ostream& err_out);

int run_scenario_file(const std::string& config_path, const ScenarioOverrides& overrides,
                      std::ostream& summary_out, std::ostream& err_out);

} // namespace bd
