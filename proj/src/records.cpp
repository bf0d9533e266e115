#include "poser/records.hpp"

#include <fstream>

#include "poser/error.hpp"

namespace poser {

using nlohmann::json;

namespace {

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

json to_json(const ConsistencyEstimate& e) {
    return {{"pseudo_label", e.pseudo_label ? to_json(*e.pseudo_label) : json(nullptr)},
            {"a_hat", e.a_hat},
            {"m", e.m}};
}

ConsistencyEstimate estimate_from_json(const json& j) {
    ConsistencyEstimate e;
    if (j.contains("pseudo_label") && !j.at("pseudo_label").is_null()) {
        e.pseudo_label = answer_from_json(j.at("pseudo_label"));
    }
    e.a_hat = j.at("a_hat").get<double>();
    e.m = j.at("m").get<std::size_t>();
    return e;
}

json to_json(const RewardBreakdown& r) {
    json out = {{"valid", r.valid}, {"r_acc", r.r_acc}, {"r_format", r.r_format}, {"r_gen", r.r_gen}};
    if (r.pair) {
        out["a_ori"] = r.pair->a_ori();
        out["a_new"] = r.pair->a_new();
    }
    return out;
}

RewardBreakdown reward_from_json(const json& j) {
    RewardBreakdown r;
    r.valid = j.at("valid").get<bool>();
    r.r_acc = j.at("r_acc").get<double>();
    r.r_format = j.at("r_format").get<int>();
    r.r_gen = j.at("r_gen").get<double>();
    if (j.contains("a_ori") && j.contains("a_new")) {
        r.pair = AccuracyPair(j.at("a_ori").get<double>(), j.at("a_new").get<double>());
    }
    return r;
}

}  // namespace

json to_json(const Problem& p) {
    json out = {{"id", p.id}, {"question", p.question}};
    if (p.answer) out["answer"] = *p.answer;
    if (p.parent_id) out["parent_id"] = *p.parent_id;
    return out;
}

Problem problem_from_json(const json& j) {
    Problem p;
    p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    p.question = j.at("question").get<std::string>();
    if (j.contains("answer") && !j.at("answer").is_null()) {
        p.answer = j.at("answer").is_string() ? j.at("answer").get<std::string>() : j.at("answer").dump();
    }
    p.parent_id = opt<std::string>(j, "parent_id");
    return p;
}

json to_json(const NormalizedAnswer& a) {
    json out = {{"text", a.canonical_text}};
    out["numeric"] = a.numeric_value ? json(a.numeric_value->str()) : json(nullptr);
    return out;
}

NormalizedAnswer answer_from_json(const json& j) {
    NormalizedAnswer a;
    a.canonical_text = j.at("text").get<std::string>();
    if (auto n = opt<std::string>(j, "numeric")) a.numeric_value = Rational(*n);
    return a;
}

json to_json(const SynthesisRecord& r) {
    return {{"schema_version", kSchemaVersion},
            {"seed", to_json(r.seed)},
            {"a_ori", r.a_ori},
            {"generator_raw", r.generator_raw},
            {"question", r.question ? json(*r.question) : json(nullptr)},
            {"estimate", r.estimate ? to_json(*r.estimate) : json(nullptr)},
            {"reward", to_json(r.reward)},
            {"label", r.label ? to_json(*r.label) : json(nullptr)},
            {"kept", r.kept},
            {"stage", r.stage},
            {"config_hash", r.config_hash}};
}

SynthesisRecord record_from_json(const json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion) {
        throw ParseError("unsupported record schema_version");
    }
    SynthesisRecord r;
    r.seed = problem_from_json(j.at("seed"));
    r.a_ori = j.at("a_ori").get<double>();
    r.generator_raw = j.at("generator_raw").get<std::string>();
    r.question = opt<std::string>(j, "question");
    if (j.contains("estimate") && !j.at("estimate").is_null()) {
        r.estimate = estimate_from_json(j.at("estimate"));
    }
    r.reward = reward_from_json(j.at("reward"));
    if (j.contains("label") && !j.at("label").is_null()) r.label = answer_from_json(j.at("label"));
    r.kept = j.at("kept").get<bool>();
    r.stage = j.value("stage", std::string("synthesized"));
    r.config_hash = j.value("config_hash", std::string());
    return r;
}

std::vector<Problem> read_problems_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("seeds not found");
    std::vector<Problem> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(problem_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_problems_jsonl(const std::filesystem::path& path, const std::vector<Problem>& problems) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& p : problems) out << to_json(p).dump() << '\n';
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        SynthesisRecord r;
        try {
            r = record_from_json(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        const std::string id = r.seed.id;
        if (latest_.insert_or_assign(id, std::move(r)).second) order_.push_back(id);
    }
}

std::optional<SynthesisRecord> RecordStore::find(const std::string& seed_id) const {
    std::lock_guard lock(mu_);
    auto it = latest_.find(seed_id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

void RecordStore::append(const SynthesisRecord& record) {
    if (record.error) throw ParameterError("failed records are not persisted");
    const std::string line = to_json(record).dump() + "\n";
    std::lock_guard lock(mu_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw IoError("cannot append to " + path_.string());
    out << line;
    out.flush();
    if (!out) throw IoError("write failed for " + path_.string());
    if (latest_.insert_or_assign(record.seed.id, record).second) order_.push_back(record.seed.id);
}

std::vector<SynthesisRecord> RecordStore::all() const {
    std::lock_guard lock(mu_);
    std::vector<SynthesisRecord> out;
    out.reserve(order_.size());
    for (const auto& id : order_) out.push_back(latest_.at(id));
    return out;
}

std::size_t RecordStore::size() const {
    std::lock_guard lock(mu_);
    return latest_.size();
}

}  // namespace poser
