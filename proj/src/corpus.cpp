#include "poser/corpus.hpp"

#include <algorithm>
#include <cctype>

#include "poser/error.hpp"
#include "poser/reward.hpp"

namespace poser {
namespace {

enum class Family { paren_number, paren_letter, dot_number };

struct Marker {
    std::size_t begin;
    std::size_t end;
    int value;
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

bool at_boundary(std::string_view text, std::size_t pos) {
    std::size_t i = pos;
    bool saw_space = false;
    while (i > 0 && (text[i - 1] == ' ' || text[i - 1] == '\t')) {
        --i;
        saw_space = true;
    }
    if (i == 0) return true;
    char prev = text[i - 1];
    if (prev == '\n' || prev == '\r') return true;
    return saw_space && (prev == '.' || prev == '?' || prev == '!' || prev == ':' || prev == ';');
}

std::optional<Marker> read_marker(std::string_view text, std::size_t pos, Family family) {
    std::size_t i = pos;
    int value = 0;
    if (family == Family::dot_number) {
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])) && i - start < 3) {
            value = value * 10 + (text[i] - '0');
            ++i;
        }
        if (i == start || i >= text.size() || text[i] != '.') return std::nullopt;
        ++i;
        if (i < text.size() && !is_space(text[i])) return std::nullopt;
        return Marker{pos, i, value};
    }
    if (text[i] != '(') return std::nullopt;
    ++i;
    if (family == Family::paren_number) {
        std::size_t start = i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])) && i - start < 3) {
            value = value * 10 + (text[i] - '0');
            ++i;
        }
        if (i == start) return std::nullopt;
    } else {
        if (i >= text.size() || text[i] < 'a' || text[i] > 'z') return std::nullopt;
        value = text[i] - 'a' + 1;
        ++i;
    }
    if (i >= text.size() || text[i] != ')') return std::nullopt;
    return Marker{pos, i + 1, value};
}

std::vector<Marker> chain(std::string_view text, Family family) {
    std::vector<Marker> out;
    int expected = 1;
    for (std::size_t pos = 0; pos < text.size(); ++pos) {
        if (!at_boundary(text, pos) || is_space(text[pos])) continue;
        auto m = read_marker(text, pos, family);
        if (!m || m->value != expected) continue;
        out.push_back(*m);
        ++expected;
        pos = m->end - 1;
    }
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    auto it = std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(),
                          [](char a, char b) {
                              return std::tolower(static_cast<unsigned char>(a)) ==
                                     std::tolower(static_cast<unsigned char>(b));
                          });
    return it != haystack.end();
}

std::string join_stem(const std::string& stem, const std::string& part) {
    return stem.empty() ? part : stem + " " + part;
}

}  // namespace

MultiPartQuestion split_multipart(std::string_view raw, std::string source_id) {
    std::vector<Marker> best;
    for (Family f : {Family::paren_number, Family::paren_letter, Family::dot_number}) {
        auto c = chain(raw, f);
        if (c.size() > best.size() || (c.size() == best.size() && !c.empty() && c[0].begin < best[0].begin)) {
            best = std::move(c);
        }
    }
    if (best.size() < 2) throw ParameterError("not multi-part");

    MultiPartQuestion q;
    q.source_id = std::move(source_id);
    q.stem = trim(raw.substr(0, best[0].begin));
    for (std::size_t k = 0; k < best.size(); ++k) {
        std::size_t end = k + 1 < best.size() ? best[k + 1].begin : raw.size();
        q.markers.emplace_back(raw.substr(best[k].begin, best[k].end - best[k].begin));
        q.parts.push_back(trim(raw.substr(best[k].end, end - best[k].end)));
    }
    if (std::any_of(q.parts.begin(), q.parts.end(), [](const std::string& p) { return p.empty(); })) {
        throw ParameterError("not multi-part");
    }
    return q;
}

ScreenResult screen_problem(std::string_view text, std::size_t min_length) {
    for (std::string_view word : {"prove", "show that", "verify"}) {
        if (contains_ci(text, word)) return {false, "blocklisted phrase: " + std::string(word)};
    }
    if (text.size() < min_length) return {false, "shorter than " + std::to_string(min_length) + " bytes"};
    return {};
}

std::vector<ProblemPair> make_pairs(const MultiPartQuestion& q) {
    if (q.parts.size() < 2) throw ParameterError("not multi-part");
    std::vector<ProblemPair> out;
    for (std::size_t k = 0; k + 1 < q.parts.size(); ++k) {
        ProblemPair p{join_stem(q.stem, q.parts[k]), join_stem(q.stem, q.parts[k + 1]),
                      q.source_id + "#" + std::to_string(k + 1), q.source_id};
        if (p.problem1 != p.problem2) out.push_back(std::move(p));
    }
    return out;
}

std::vector<Message> render_design_prompt(const ProblemPair& pair,
                                          const std::optional<std::string>& solution1) {
    if (pair.problem2.empty()) throw ParameterError("missing prompt slot: Problem 2");
    Slots slots{{"Problem 1", pair.problem1}, {"Problem 2", pair.problem2}};
    if (solution1) slots["Solution 1"] = *solution1;
    return render_prompt(PromptKind::design_cot, slots);
}

SftAssembly assemble_sft_records(const std::vector<ProblemPair>& pairs,
                                 const std::map<std::string, std::string>& cots) {
    SftAssembly out;
    for (const auto& pair : pairs) {
        auto it = cots.find(pair.pair_id);
        if (it == cots.end()) {
            ++out.dropped;
            continue;
        }
        std::string target = "<think>" + it->second + "</think><question>" + pair.problem2 + "</question>";
        FormatCheck fmt = check_format(target);
        if (!fmt.valid || fmt.r_format != 1 || fmt.question != trim(pair.problem2)) {
            ++out.dropped;
            continue;
        }
        std::string input =
            render_prompt(PromptKind::self_instruct, {{"Seed Question", pair.problem1}}).at(0).content;
        out.records.push_back({std::move(input), std::move(target), pair.pair_id, pair.source_id});
    }
    return out;
}

}  // namespace poser
