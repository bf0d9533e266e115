#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "poser/grpo.hpp"
#include "poser/inference.hpp"
#include "poser/prompts.hpp"
#include "poser/sim.hpp"

namespace poser {

struct PipelinePaths {
    std::filesystem::path seeds = "seeds.jsonl";
    std::filesystem::path records = "out/records.jsonl";
    std::filesystem::path training_set = "out/training_set.jsonl";
    std::filesystem::path manifest = "out/manifest.json";
    std::filesystem::path raw_corpus = "corpus.jsonl";
    std::filesystem::path sft_output = "out/sft.jsonl";
    std::filesystem::path sim_csv = "out/episodes.csv";
};

/// Everything a run depends on. Defaults: m = 10, G = 4, 3 annotator votes.
struct PipelineConfig {
    InferenceEndpoint generator;
    InferenceEndpoint solver;
    InferenceEndpoint annotator;
    std::size_t m = 10;
    std::size_t group_size = 4;
    std::size_t annotator_votes = 3;
    std::size_t workers = 16;
    ClipConfig clip;
    PromptKind prompt_kind = PromptKind::solver_feedback;
    PipelinePaths paths;
    CoevolutionConfig sim;
    RewardMode reward_mode = RewardMode::full;
    std::uint64_t rng_seed = 0;

    /// Throws ParameterError on out-of-range values or output paths that
    /// collide with each other or with an input.
    void validate() const;
};

PipelineConfig default_config();

/// Copies run-level settings (m, G, clip, seed) into the sim block. Call
/// after changing them by hand.
void sync_derived(PipelineConfig& cfg);

/// Reads an INI file (sections run, clip, generator, solver, annotator,
/// paths, sim) over the defaults. `${NAME}` in values expands from the
/// environment; `api_key_env` names the variable holding an endpoint key.
/// Unknown keys throw ParseError; a missing file throws IoError.
PipelineConfig load_config(const std::filesystem::path& path);

/// Replaces every `${NAME}` with the environment value. An unset variable
/// throws ParseError naming it.
std::string interpolate_env(std::string_view value);

/// Stable key=value dump of every setting except secrets.
std::string canonical_config(const PipelineConfig& cfg);

/// Hex SHA-256 of canonical_config.
std::string config_hash(const PipelineConfig& cfg);

std::string sha256_hex(std::string_view data);

}  // namespace poser
