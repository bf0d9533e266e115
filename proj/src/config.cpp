#include "poser/config.hpp"

#include <array>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "poser/error.hpp"

namespace poser {
namespace {

namespace pt = boost::property_tree;

std::string fmt_double(double v) {
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.17g", v);
    return buf.data();
}

template <typename T>
T convert(const std::string& section, const std::string& key, const std::string& raw) {
    std::istringstream in(raw);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof()) {
        throw ParseError("config " + section + "." + key + ": cannot parse '" + raw + "'");
    }
    return value;
}

InferenceEndpoint default_endpoint(const char* model) {
    InferenceEndpoint e;
    e.base_url = "http://127.0.0.1:8000/v1";
    e.model_name = model;
    return e;
}

void apply_endpoint(InferenceEndpoint& e, const std::string& section, const std::string& key,
                    const std::string& v) {
    if (key == "base_url") {
        e.base_url = v;
    } else if (key == "model") {
        e.model_name = v;
    } else if (key == "api_key_env") {
        if (const char* k = std::getenv(v.c_str())) {
            e.api_key = std::string(k);
        } else {
            throw ParseError("config " + section + ".api_key_env: variable " + v + " is not set");
        }
    } else if (key == "timeout_ms") {
        e.timeout = std::chrono::milliseconds(convert<long long>(section, key, v));
    } else if (key == "max_retries") {
        e.max_retries = convert<int>(section, key, v);
    } else if (key == "concurrency") {
        e.concurrency_limit = convert<std::size_t>(section, key, v);
    } else if (key == "backoff_ms") {
        e.backoff_base = std::chrono::milliseconds(convert<long long>(section, key, v));
    } else {
        throw ParseError("config: unknown key " + section + "." + key);
    }
}

void apply(PipelineConfig& c, const std::string& section, const std::string& key, const std::string& v) {
    auto unknown = [&] { throw ParseError("config: unknown key " + section + "." + key); };
    if (section == "run") {
        if (key == "seed") c.rng_seed = convert<std::uint64_t>(section, key, v);
        else if (key == "m") c.m = convert<std::size_t>(section, key, v);
        else if (key == "group_size") c.group_size = convert<std::size_t>(section, key, v);
        else if (key == "annotator_votes") c.annotator_votes = convert<std::size_t>(section, key, v);
        else if (key == "workers") c.workers = convert<std::size_t>(section, key, v);
        else if (key == "prompt_kind") c.prompt_kind = parse_prompt_kind(v);
        else unknown();
    } else if (section == "clip") {
        if (key == "eps_low") c.clip.eps_low = convert<double>(section, key, v);
        else if (key == "eps_high") c.clip.eps_high = convert<double>(section, key, v);
        else if (key == "kl_coeff") c.clip.kl_coeff = convert<double>(section, key, v);
        else if (key == "eps_std") c.clip.eps_std = convert<double>(section, key, v);
        else unknown();
    } else if (section == "generator") {
        apply_endpoint(c.generator, section, key, v);
    } else if (section == "solver") {
        apply_endpoint(c.solver, section, key, v);
    } else if (section == "annotator") {
        apply_endpoint(c.annotator, section, key, v);
    } else if (section == "paths") {
        if (key == "seeds") c.paths.seeds = v;
        else if (key == "records") c.paths.records = v;
        else if (key == "training_set") c.paths.training_set = v;
        else if (key == "manifest") c.paths.manifest = v;
        else if (key == "raw_corpus") c.paths.raw_corpus = v;
        else if (key == "sft_output") c.paths.sft_output = v;
        else if (key == "sim_csv") c.paths.sim_csv = v;
        else unknown();
    } else if (section == "sim") {
        auto& s = c.sim;
        if (key == "steps") s.steps = convert<std::size_t>(section, key, v);
        else if (key == "iterations") s.iterations = convert<std::size_t>(section, key, v);
        else if (key == "reward_mode") c.reward_mode = parse_reward_mode(v);
        else if (key == "seeds_per_step") s.seeds_per_step = convert<std::size_t>(section, key, v);
        else if (key == "seed_pool") s.seed_pool = convert<std::size_t>(section, key, v);
        else if (key == "seed_spread") s.seed_spread = convert<double>(section, key, v);
        else if (key == "learning_rate") s.learning_rate = convert<double>(section, key, v);
        else if (key == "edit_prior") s.edit_prior = convert<double>(section, key, v);
        else if (key == "updates_per_batch") s.updates_per_batch = convert<std::size_t>(section, key, v);
        else if (key == "competence_gain") s.competence_gain = convert<double>(section, key, v);
        else if (key == "competence") s.solver.competence = convert<double>(section, key, v);
        else if (key == "slope") s.solver.slope = convert<double>(section, key, v);
        else if (key == "answer_space") s.solver.answer_space = convert<std::size_t>(section, key, v);
        else unknown();
    } else {
        throw ParseError("config: unknown section [" + section + "]");
    }
}

}  // namespace

void sync_derived(PipelineConfig& c) {
    c.sim.m = c.m;
    c.sim.group_size = c.group_size;
    c.sim.clip = c.clip;
    c.sim.seed = c.rng_seed;
    c.sim.solver.rng_seed = c.rng_seed;
}

namespace {

void dump_endpoint(std::ostringstream& out, const char* name, const InferenceEndpoint& e) {
    out << name << ".base_url=" << e.base_url << '\n'
        << name << ".model=" << e.model_name << '\n'
        << name << ".timeout_ms=" << e.timeout.count() << '\n'
        << name << ".max_retries=" << e.max_retries << '\n'
        << name << ".concurrency=" << e.concurrency_limit << '\n'
        << name << ".backoff_ms=" << e.backoff_base.count() << '\n';
}

}  // namespace

void PipelineConfig::validate() const {
    if (m == 0) throw ParameterError("m must be >= 1");
    if (group_size < 2) throw ParameterError("group_size must be >= 2");
    if (annotator_votes == 0) throw ParameterError("annotator_votes must be >= 1");
    if (workers == 0) throw ParameterError("workers must be >= 1");
    clip.validate();
    generator.validate();
    solver.validate();
    annotator.validate();
    sim.validate();
    std::set<std::string> seen;
    for (const auto* p : {&paths.seeds, &paths.records, &paths.training_set, &paths.manifest,
                          &paths.raw_corpus, &paths.sft_output, &paths.sim_csv}) {
        if (!seen.insert(p->lexically_normal().string()).second) {
            throw ParameterError("config paths must be distinct: " + p->string());
        }
    }
}

PipelineConfig default_config() {
    PipelineConfig c;
    c.generator = default_endpoint("generator");
    c.solver = default_endpoint("solver");
    c.annotator = default_endpoint("annotator");
    sync_derived(c);
    return c;
}

std::string interpolate_env(std::string_view value) {
    std::string out;
    std::size_t i = 0;
    while (i < value.size()) {
        if (value.substr(i, 2) == "${") {
            std::size_t close = value.find('}', i + 2);
            if (close == std::string_view::npos) throw ParseError("unterminated ${ in config value");
            std::string name(value.substr(i + 2, close - i - 2));
            const char* v = std::getenv(name.c_str());
            if (!v) throw ParseError("environment variable " + name + " is not set");
            out += v;
            i = close + 1;
        } else {
            out.push_back(value[i++]);
        }
    }
    return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config not found: " + path.string());
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    PipelineConfig c = default_config();
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ParseError("config: key outside a section: " + section);
        for (const auto& [key, leaf] : body) apply(c, section, key, interpolate_env(leaf.data()));
    }
    sync_derived(c);
    c.validate();
    return c;
}

std::string canonical_config(const PipelineConfig& c) {
    std::ostringstream out;
    out << "run.seed=" << c.rng_seed << '\n'
        << "run.m=" << c.m << '\n'
        << "run.group_size=" << c.group_size << '\n'
        << "run.annotator_votes=" << c.annotator_votes << '\n'
        << "run.prompt_kind=" << prompt_kind_name(c.prompt_kind) << '\n'
        << "clip.eps_low=" << fmt_double(c.clip.eps_low) << '\n'
        << "clip.eps_high=" << fmt_double(c.clip.eps_high) << '\n'
        << "clip.kl_coeff=" << fmt_double(c.clip.kl_coeff) << '\n'
        << "clip.eps_std=" << fmt_double(c.clip.eps_std) << '\n';
    dump_endpoint(out, "generator", c.generator);
    dump_endpoint(out, "solver", c.solver);
    dump_endpoint(out, "annotator", c.annotator);
    const auto& s = c.sim;
    out << "sim.steps=" << s.steps << '\n'
        << "sim.iterations=" << s.iterations << '\n'
        << "sim.reward_mode=" << reward_mode_name(c.reward_mode) << '\n'
        << "sim.seeds_per_step=" << s.seeds_per_step << '\n'
        << "sim.seed_pool=" << s.seed_pool << '\n'
        << "sim.seed_spread=" << fmt_double(s.seed_spread) << '\n'
        << "sim.learning_rate=" << fmt_double(s.learning_rate) << '\n'
        << "sim.edit_prior=" << fmt_double(s.edit_prior) << '\n'
        << "sim.updates_per_batch=" << s.updates_per_batch << '\n'
        << "sim.competence_gain=" << fmt_double(s.competence_gain) << '\n'
        << "sim.competence=" << fmt_double(s.solver.competence) << '\n'
        << "sim.slope=" << fmt_double(s.solver.slope) << '\n'
        << "sim.answer_space=" << s.solver.answer_space << '\n';
    return out.str();
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string config_hash(const PipelineConfig& c) { return sha256_hex(canonical_config(c)); }

}  // namespace poser
