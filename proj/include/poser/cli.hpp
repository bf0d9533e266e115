#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace poser {

/// Per-run bookkeeping written next to the outputs.
struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string engine_version;
    std::string started_at;
    std::string finished_at;
    std::size_t seeds = 0;
    std::size_t valid = 0;
    std::size_t kept = 0;
    std::size_t failed = 0;
    std::size_t training_set = 0;

    /// Throws ParameterError unless kept <= valid <= seeds.
    void validate() const;
    nlohmann::json to_json() const;
};

/// Current UTC time as ISO 8601 with seconds.
std::string utc_timestamp();

/// Entry point shared by the executable and tests. Returns the process exit
/// code: 0 success, 1 internal error, 2 usage or IO error. Failures print one
/// JSON object on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace poser
