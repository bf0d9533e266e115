#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poser/consistency.hpp"
#include "poser/reward.hpp"

namespace poser {

inline constexpr int kSchemaVersion = 1;

struct Problem {
    std::string id;
    std::string question;
    std::optional<std::string> answer;
    std::optional<std::string> parent_id;

    friend bool operator==(const Problem&, const Problem&) = default;
};

/// One seed's trip through synthesis and, later, labeling.
struct SynthesisRecord {
    Problem seed;
    double a_ori = 0.0;
    std::string generator_raw;
    std::optional<std::string> question;
    std::optional<ConsistencyEstimate> estimate;
    RewardBreakdown reward;
    std::optional<NormalizedAnswer> label;
    bool kept = false;
    std::string stage = "synthesized";
    std::string config_hash;
    /// Set when a network call failed; such records are never persisted.
    std::optional<std::string> error;
};

nlohmann::json to_json(const Problem& p);
Problem problem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormalizedAnswer& a);
NormalizedAnswer answer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthesisRecord& r);
SynthesisRecord record_from_json(const nlohmann::json& j);

/// Seeds as JSONL {id, question, answer?}. Throws IoError("seeds not found")
/// for a missing file and ParseError naming the line for a malformed one.
std::vector<Problem> read_problems_jsonl(const std::filesystem::path& path);
void write_problems_jsonl(const std::filesystem::path& path, const std::vector<Problem>& problems);

/// Append-only JSONL store keyed by seed id. Reopening replays the file; the
/// last line for a seed wins. Appends are serialized and flushed per line.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path);

    std::optional<SynthesisRecord> find(const std::string& seed_id) const;
    void append(const SynthesisRecord& record);
    std::vector<SynthesisRecord> all() const;
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::map<std::string, SynthesisRecord> latest_;
    std::vector<std::string> order_;
};

}  // namespace poser
