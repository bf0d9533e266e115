#include "poser/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "poser/answer.hpp"
#include "poser/config.hpp"
#include "poser/corpus.hpp"
#include "poser/error.hpp"
#include "poser/orchestrator.hpp"
#include "poser/records.hpp"
#include "poser/sim.hpp"

namespace poser {
namespace {

using nlohmann::json;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool verbose = false;

    std::string seeds;
    std::string records;
    std::string training_set;
    std::string manifest;

    std::string answers;
    std::string labels;

    std::string reward_mode;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> iterations;
    std::string csv;
    std::string jsonl;

    std::string corpus_in;
    std::string corpus_out;
};

void ensure_parent(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::ofstream open_out(const std::filesystem::path& p) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::trunc | std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

PipelineConfig resolve_config(const Options& o) {
    PipelineConfig cfg = o.config_path.empty() ? default_config() : load_config(o.config_path);
    if (o.seed) cfg.rng_seed = *o.seed;
    if (!o.seeds.empty()) cfg.paths.seeds = o.seeds;
    if (!o.records.empty()) cfg.paths.records = o.records;
    if (!o.training_set.empty()) cfg.paths.training_set = o.training_set;
    if (!o.manifest.empty()) cfg.paths.manifest = o.manifest;
    if (!o.reward_mode.empty()) cfg.reward_mode = parse_reward_mode(o.reward_mode);
    if (o.steps) cfg.sim.steps = *o.steps;
    if (o.iterations) cfg.sim.iterations = *o.iterations;
    if (!o.csv.empty()) cfg.paths.sim_csv = o.csv;
    if (!o.corpus_in.empty()) cfg.paths.raw_corpus = o.corpus_in;
    if (!o.corpus_out.empty()) cfg.paths.sft_output = o.corpus_out;
    sync_derived(cfg);
    cfg.validate();
    return cfg;
}

void log(const Options& o, std::ostream& err, const std::string& msg) {
    if (o.verbose) err << msg << '\n';
}

int cmd_synthesize(const Options& o, std::ostream& out, std::ostream& err) {
    const PipelineConfig cfg = resolve_config(o);
    RunManifest manifest;
    manifest.command = "synthesize";
    manifest.config_hash = config_hash(cfg);
    manifest.started_at = utc_timestamp();

    const auto seeds = read_problems_jsonl(cfg.paths.seeds);
    log(o, err, "loaded " + std::to_string(seeds.size()) + " seeds");

    ChatClient generator(cfg.generator);
    ChatClient solver(cfg.solver);
    ChatClient annotator(cfg.annotator);
    RecordStore store(cfg.paths.records);

    OrchestratorConfig oc;
    oc.m = cfg.m;
    oc.annotator_votes = cfg.annotator_votes;
    oc.prompt_kind = cfg.prompt_kind;
    oc.config_hash = manifest.config_hash;
    oc.workers = cfg.workers;

    std::map<std::string, double> a_ori_cache;
    auto records = synthesize_batch(generator, solver, seeds, a_ori_cache, oc, &store);
    records = label_and_filter(annotator, std::move(records), oc, &store);

    manifest.seeds = seeds.size();
    for (const auto& r : records) {
        if (r.error) {
            ++manifest.failed;
            log(o, err, "seed " + r.seed.id + " failed: " + *r.error);
            continue;
        }
        manifest.valid += r.reward.valid ? 1 : 0;
        manifest.kept += r.kept ? 1 : 0;
    }

    const auto training = build_solver_training_set(seeds, records);
    manifest.training_set = training.size();
    {
        auto f = open_out(cfg.paths.training_set);
        for (const auto& p : training) {
            json line = to_json(p);
            line["schema_version"] = kSchemaVersion;
            line["config_hash"] = manifest.config_hash;
            f << line.dump() << '\n';
        }
    }
    manifest.finished_at = utc_timestamp();
    manifest.validate();
    open_out(cfg.paths.manifest) << manifest.to_json().dump(2) << '\n';
    out << manifest.to_json().dump() << '\n';
    return manifest.failed == 0 ? 0 : 1;
}

std::map<std::string, std::string> read_id_map(const std::string& path, const char* field,
                                                const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string(what) + " not found: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            const json& v = j.at(field);
            out[id] = v.is_string() ? v.get<std::string>() : v.dump();
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(no) + ": " + e.what());
        }
    }
    return out;
}

int cmd_grade(const Options& o, std::ostream& out) {
    const auto answers = read_id_map(o.answers, "response", "answers file");
    const auto labels = read_id_map(o.labels, "answer", "labels file");
    std::vector<std::string> missing;
    for (const auto& [id, _] : labels) {
        if (!answers.count(id)) missing.push_back(id);
    }
    for (const auto& [id, _] : answers) {
        if (!labels.count(id)) missing.push_back(id);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ",") + id;
        throw ParseError("id mismatch: " + list);
    }
    std::size_t correct = 0;
    for (const auto& [id, label] : labels) {
        const std::string& response = answers.at(id);
        const int score = verifiable_reward(response, label);
        correct += static_cast<std::size_t>(score);
        out << id << '\t' << score;
        if (!try_extract_boxed(response)) out << "\tno boxed answer";
        out << '\n';
    }
    const double pct = labels.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
    out << "accuracy: " << std::fixed << std::setprecision(2) << pct << '\n';
    return 0;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
    const PipelineConfig cfg = resolve_config(o);
    const std::string hash = config_hash(cfg);
    log(o, err, "simulating " + std::to_string(cfg.sim.steps) + " steps x " +
                    std::to_string(cfg.sim.iterations) + " iterations");
    const auto result = run_coevolution(cfg.sim, cfg.reward_mode);

    {
        auto f = open_out(cfg.paths.sim_csv);
        f << "# schema_version=" << kSchemaVersion << " config_hash=" << hash << '\n'
          << "iteration,step,mean_reward,flip_success_rate,mean_difficulty_change,mean_plateau_distance,competence\n";
        f << std::setprecision(17);
        for (const auto& r : result.log) {
            f << r.iteration << ',' << r.step << ',' << r.mean_reward << ',' << r.flip_success_rate << ','
              << r.mean_difficulty_change << ',' << r.mean_plateau_distance << ',' << r.competence << '\n';
        }
    }
    if (!o.jsonl.empty()) {
        auto f = open_out(o.jsonl);
        for (const auto& r : result.log) {
            f << json{{"schema_version", kSchemaVersion},
                      {"config_hash", hash},
                      {"iteration", r.iteration},
                      {"step", r.step},
                      {"mean_reward", r.mean_reward},
                      {"flip_success_rate", r.flip_success_rate},
                      {"mean_difficulty_change", r.mean_difficulty_change},
                      {"mean_plateau_distance", r.mean_plateau_distance},
                      {"competence", r.competence}}
                     .dump()
              << '\n';
        }
    }

    const std::size_t w = std::min<std::size_t>(kMetricWindow, result.log.size());
    auto tail_mean = [&](auto field) {
        double s = 0.0;
        for (std::size_t i = result.log.size() - w; i < result.log.size(); ++i) s += field(result.log[i]);
        return s / static_cast<double>(w);
    };
    SyntheticSolver probe = cfg.sim.solver;
    const auto tasks = spread_tasks(probe, 500, 0.05, 0.95);
    json summary = {
        {"config_hash", hash},
        {"reward_mode", reward_mode_name(cfg.reward_mode)},
        {"steps", result.log.size()},
        {"final_reward", tail_mean([](const EpisodeLog& r) { return r.mean_reward; })},
        {"final_flip_success_rate", tail_mean([](const EpisodeLog& r) { return r.flip_success_rate; })},
        {"final_difficulty_change", tail_mean([](const EpisodeLog& r) { return r.mean_difficulty_change; })},
        {"final_plateau_distance", tail_mean([](const EpisodeLog& r) { return r.mean_plateau_distance; })},
        {"competence", result.competence},
        {"consistency_correlation", correlation_study(probe, tasks, cfg.m, 1)},
        {"csv", cfg.paths.sim_csv.string()}};
    out << summary.dump() << '\n';
    return 0;
}

int cmd_corpus(const Options& o, std::ostream& out, std::ostream& err) {
    const PipelineConfig cfg = resolve_config(o);
    const std::string hash = config_hash(cfg);
    std::ifstream in(cfg.paths.raw_corpus);
    if (!in) throw IoError("corpus not found: " + cfg.paths.raw_corpus.string());

    json report = {{"items", 0}, {"screened_out", json::object()}, {"not_multipart", 0},
                   {"malformed_lines", json::array()}, {"pairs", 0}, {"annotator_failures", 0}};
    std::vector<ProblemPair> pairs;
    std::map<std::string, std::optional<std::string>> solutions;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        std::string id;
        std::string text;
        try {
            j = json::parse(line);
            id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            text = j.at("text").get<std::string>();
        } catch (const json::exception&) {
            report["malformed_lines"].push_back(no);
            continue;
        }
        report["items"] = report["items"].get<int>() + 1;
        const ScreenResult screen = screen_problem(text);
        if (!screen.accepted) {
            auto& bucket = report["screened_out"][screen.reason];
            bucket = bucket.is_null() ? 1 : bucket.get<int>() + 1;
            continue;
        }
        try {
            auto q = split_multipart(text, id);
            std::optional<std::string> solution;
            if (j.contains("solution") && j["solution"].is_string()) solution = j["solution"].get<std::string>();
            for (auto& p : make_pairs(q)) {
                solutions[p.pair_id] = solution;
                pairs.push_back(std::move(p));
            }
        } catch (const ParameterError&) {
            report["not_multipart"] = report["not_multipart"].get<int>() + 1;
        }
    }
    report["pairs"] = pairs.size();
    log(o, err, "requesting design rationales for " + std::to_string(pairs.size()) + " pairs");

    ChatClient annotator(cfg.annotator);
    std::map<std::string, std::string> cots;
    std::mutex mu;
    std::size_t failures = 0;
    parallel_for(pairs.size(), cfg.workers, [&](std::size_t i) {
        const auto& p = pairs[i];
        try {
            auto text = annotator.complete(render_design_prompt(p, solutions[p.pair_id]),
                                           SamplingParams::evaluation()).at(0);
            std::lock_guard lock(mu);
            cots[p.pair_id] = std::move(text);
        } catch (const Error& e) {
            std::lock_guard lock(mu);
            ++failures;
            log(o, err, "pair " + p.pair_id + ": " + e.what());
        }
    });
    report["annotator_failures"] = failures;

    const auto assembly = assemble_sft_records(pairs, cots);
    {
        auto f = open_out(cfg.paths.sft_output);
        for (const auto& r : assembly.records) {
            f << json{{"schema_version", kSchemaVersion}, {"config_hash", hash}, {"input", r.input},
                      {"target", r.target}, {"pair_id", r.pair_id}, {"source_id", r.source_id}}
                     .dump()
              << '\n';
        }
    }
    report["records"] = assembly.records.size();
    report["dropped"] = assembly.dropped;
    report["config_hash"] = hash;
    out << report.dump() << '\n';
    return 0;
}

int cmd_report(const Options& o, std::ostream& out) {
    const PipelineConfig cfg = resolve_config(o);
    if (!std::filesystem::exists(cfg.paths.records)) {
        throw IoError("records not found: " + cfg.paths.records.string());
    }
    RecordStore store(cfg.paths.records);
    const auto records = store.all();
    std::vector<AccuracyPair> pairs;
    std::size_t valid = 0;
    std::size_t kept = 0;
    std::size_t inconsistent = 0;
    double reward = 0.0;
    for (const auto& r : records) {
        valid += r.reward.valid ? 1 : 0;
        kept += r.kept ? 1 : 0;
        reward += r.reward.r_gen;
        if (r.reward.pair) pairs.push_back(*r.reward.pair);
        const auto again = recompute_reward(r);
        if (again.r_gen != r.reward.r_gen || again.valid != r.reward.valid) ++inconsistent;
    }
    json summary = {{"records", records.size()}, {"valid", valid}, {"kept", kept},
                    {"reward_mismatches", inconsistent},
                    {"mean_r_gen", records.empty() ? 0.0 : reward / static_cast<double>(records.size())}};
    if (!pairs.empty()) {
        const auto m = dynamics_metrics(pairs);
        summary["flip_success_rate"] = m.flip_success_rate;
        summary["mean_difficulty_change"] = m.mean_difficulty_change;
    }
    if (!o.csv.empty()) {
        auto f = open_out(o.csv);
        f << "# schema_version=" << kSchemaVersion << " config_hash=" << config_hash(cfg) << '\n'
          << "seed_id,valid,a_ori,a_new,r_acc,r_format,r_gen,kept\n"
          << std::setprecision(17);
        for (const auto& r : records) {
            f << r.seed.id << ',' << r.reward.valid << ',' << r.a_ori << ',';
            if (r.estimate) f << r.estimate->a_hat;
            f << ',' << r.reward.r_acc << ',' << r.reward.r_format << ',' << r.reward.r_gen << ',' << r.kept
              << '\n';
        }
    }
    out << summary.dump() << '\n';
    return inconsistent == 0 ? 0 : 1;
}

void error_line(std::ostream& err, const char* kind, const std::string& message) {
    err << json{{"error", message}, {"kind", kind}}.dump() << '\n';
}

}  // namespace

void RunManifest::validate() const {
    if (!(kept <= valid && valid <= seeds)) {
        throw ParameterError("manifest counts violate kept <= valid <= seeds");
    }
}

json RunManifest::to_json() const {
    return {{"schema_version", kSchemaVersion},
            {"command", command},
            {"config_hash", config_hash},
            {"engine_version", engine_version.empty() ? std::string(POSER_VERSION) : engine_version},
            {"started_at", started_at},
            {"finished_at", finished_at},
            {"counts",
             {{"seeds", seeds}, {"valid", valid}, {"kept", kept}, {"failed", failed},
              {"training_set", training_set}}}};
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Solver-adaptive problem synthesis engine", "poser"};
    app.set_version_flag("--version", std::string(POSER_VERSION));
    app.require_subcommand(1);
    app.add_option("--config", o.config_path, "INI configuration file");
    app.add_option("--seed", o.seed, "RNG seed override");
    app.add_flag("-v,--verbose", o.verbose, "Log progress to stderr");

    auto* synth = app.add_subcommand("synthesize", "Synthesize, label and filter problems from seeds");
    synth->add_option("--seeds", o.seeds, "Seed problems JSONL");
    synth->add_option("--records", o.records, "Record store JSONL");
    synth->add_option("--training-set", o.training_set, "Output training set JSONL");
    synth->add_option("--manifest", o.manifest, "Output manifest JSON");

    auto* grade = app.add_subcommand("grade", "Score boxed answers against labels");
    grade->add_option("answers", o.answers, "JSONL of {id, response}")->required();
    grade->add_option("labels", o.labels, "JSONL of {id, answer}")->required();

    auto* simulate = app.add_subcommand("simulate", "Run the closed-loop simulation");
    simulate->add_option("--reward-mode", o.reward_mode, "full | boundary_only | inversion_only");
    simulate->add_option("--steps", o.steps, "Training steps per iteration");
    simulate->add_option("--iterations", o.iterations, "Co-evolution iterations");
    simulate->add_option("--csv", o.csv, "Episode CSV path");
    simulate->add_option("--jsonl", o.jsonl, "Episode JSONL path");

    auto* corpus = app.add_subcommand("corpus", "Build the cold-start SFT corpus");
    corpus->add_option("--input", o.corpus_in, "Raw problems JSONL {id, text, solution?}");
    corpus->add_option("--output", o.corpus_out, "SFT records JSONL");

    auto* report = app.add_subcommand("report", "Summarize a record store");
    report->add_option("--records", o.records, "Record store JSONL");
    report->add_option("--csv", o.csv, "Per-record CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << POSER_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        error_line(err, "usage", e.what());
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synthesize(o, out, err);
        if (grade->parsed()) return cmd_grade(o, out);
        if (simulate->parsed()) return cmd_simulate(o, out, err);
        if (corpus->parsed()) return cmd_corpus(o, out, err);
        if (report->parsed()) return cmd_report(o, out);
    } catch (const IoError& e) {
        error_line(err, "io", e.what());
        return 2;
    } catch (const ParseError& e) {
        error_line(err, "parse", e.what());
        return 2;
    } catch (const ParameterError& e) {
        error_line(err, "usage", e.what());
        return 2;
    } catch (const std::exception& e) {
        error_line(err, "internal", e.what());
        return 1;
    }
    return 2;
}

}  // namespace poser
