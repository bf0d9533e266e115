#include "poser/answer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <vector>

#include "poser/error.hpp"

namespace poser {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Index one past the '}' matching the '{' at `open`, or npos. Escaped braces
// (`\{`, `\}`) do not count.
std::size_t match_brace(std::string_view s, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
            ++i;
            continue;
        }
        if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::string strip_outer(std::string s) {
    for (;;) {
        std::string t = trim(s);
        while (!t.empty() && t.back() == '.') t.pop_back();
        t = trim(t);
        if (t == s) return t;
        s = std::move(t);
    }
}

// Removes `\left` / `\right` unless they are the prefix of a longer macro
// such as `\rightarrow`.
std::string drop_delimiter_sizing(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        bool dropped = false;
        for (std::string_view cmd : {std::string_view("\\left"), std::string_view("\\right")}) {
            if (s.substr(i, cmd.size()) == cmd) {
                std::size_t next = i + cmd.size();
                if (next >= s.size() || !is_alpha(s[next])) {
                    i = next;
                    dropped = true;
                    break;
                }
            }
        }
        if (!dropped) out.push_back(s[i++]);
    }
    return out;
}

// One argument of a macro: a balanced `{...}` group or a single character.
std::optional<std::pair<std::string, std::size_t>> read_argument(std::string_view s,
                                                                  std::size_t pos) {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    if (pos >= s.size()) return std::nullopt;
    if (s[pos] == '{') {
        std::size_t end = match_brace(s, pos);
        if (end == std::string_view::npos) return std::nullopt;
        return std::make_pair(std::string(s.substr(pos + 1, end - pos - 2)), end);
    }
    if (s[pos] == '}' || s[pos] == '\\') return std::nullopt;
    return std::make_pair(std::string(1, s[pos]), pos + 1);
}

// A fraction operand needs no parentheses when it has no top-level operator
// (a single leading minus is allowed).
bool is_atomic(std::string_view s) {
    if (s.empty()) return false;
    int depth = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '{' || c == '(' || c == '[') ++depth;
        if (c == '}' || c == ')' || c == ']') --depth;
        if (depth != 0) continue;
        if (c == '-' && i == 0) continue;
        if (c == '+' || c == '-' || c == '*' || c == '/' || c == ',' || c == '=' || is_space(c)) {
            return false;
        }
    }
    return true;
}

std::string rewrite_fractions(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] != '\\') {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t name_end = i + 1;
        while (name_end < s.size() && is_alpha(s[name_end])) ++name_end;
        std::string_view name = s.substr(i + 1, name_end - i - 1);
        if (name != "frac" && name != "dfrac") {
            out.append(s.substr(i, name_end - i));
            if (name_end == i + 1 && name_end < s.size()) out.push_back(s[name_end++]);
            i = name_end;
            continue;
        }
        auto num = read_argument(s, name_end);
        auto den = num ? read_argument(s, num->second) : std::nullopt;
        if (!num || !den) {
            out.append(s.substr(i, name_end - i));
            i = name_end;
            continue;
        }
        std::string a = trim(rewrite_fractions(num->first));
        std::string b = trim(rewrite_fractions(den->first));
        out += is_atomic(a) ? a : "(" + a + ")";
        out += '/';
        out += is_atomic(b) ? b : "(" + b + ")";
        i = den->second;
    }
    return out;
}

std::string unwrap_text(std::string_view s) {
    static constexpr std::string_view kText = "\\text";
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (s.substr(i, kText.size()) == kText) {
            std::size_t p = i + kText.size();
            while (p < s.size() && is_space(s[p])) ++p;
            if (p < s.size() && s[p] == '{') {
                std::size_t end = match_brace(s, p);
                if (end != std::string_view::npos) {
                    out.append(s.substr(p + 1, end - p - 2));
                    i = end;
                    continue;
                }
            }
        }
        out.push_back(s[i++]);
    }
    return out;
}

void erase_all(std::string& s, std::string_view token) {
    for (std::size_t pos = s.find(token); pos != std::string::npos; pos = s.find(token, pos)) {
        s.erase(pos, token.size());
    }
}

std::string drop_units(std::string s) {
    erase_all(s, "^{\\circ}");
    erase_all(s, "^\\circ");
    erase_all(s, "\xC2\xB0");  // degree sign
    erase_all(s, "\\%");
    erase_all(s, "%");
    static const std::regex degrees_word(R"(\bdegrees\b)");
    return std::regex_replace(s, degrees_word, "");
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

std::string drop_thousands_separators(std::string s) {
    static const std::regex grouped(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$)");
    if (std::regex_match(s, grouped)) erase_all(s, ",");
    return s;
}

std::string lowercase_choice(std::string s) {
    if (s.size() == 1 && is_alpha(s[0])) {
        s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    }
    return s;
}

std::string apply_rules(std::string_view raw) {
    std::string s = strip_outer(std::string(raw));
    s = drop_delimiter_sizing(s);
    s = rewrite_fractions(s);
    s = unwrap_text(s);
    s = drop_units(std::move(s));
    s = collapse_whitespace(s);
    s = strip_outer(std::move(s));
    s = drop_thousands_separators(std::move(s));
    return lowercase_choice(std::move(s));
}

// cpp_int's string constructor treats a leading 0 as an octal prefix.
boost::multiprecision::cpp_int decimal_int(const std::string& digits) {
    const std::size_t nz = digits.find_first_not_of('0');
    if (nz == std::string::npos) return 0;
    return boost::multiprecision::cpp_int(digits.substr(nz));
}

std::optional<Rational> parse_rational(const std::string& s) {
    static const std::regex integer(R"(^([+-]?)(\d+)$)");
    static const std::regex decimal(R"(^([+-]?)(\d*)\.(\d+)$)");
    static const std::regex fraction(R"(^([+-]?)(\d+)/(\d+)$)");
    using boost::multiprecision::cpp_int;
    std::smatch m;
    if (std::regex_match(s, m, integer)) {
        Rational v{decimal_int(m[2].str())};
        return m[1] == "-" ? Rational(-v) : v;
    }
    if (std::regex_match(s, m, decimal)) {
        std::string digits = m[2].str() + m[3].str();
        cpp_int scale = 1;
        for (long i = 0; i < m[3].length(); ++i) scale *= 10;
        Rational v(decimal_int(digits), scale);
        return m[1] == "-" ? Rational(-v) : v;
    }
    if (std::regex_match(s, m, fraction)) {
        cpp_int den = decimal_int(m[3].str());
        if (den == 0) return std::nullopt;
        Rational v(decimal_int(m[2].str()), den);
        return m[1] == "-" ? Rational(-v) : v;
    }
    return std::nullopt;
}

}  // namespace

NormalizedAnswer normalize_answer(std::string_view raw) {
    std::string current(raw);
    // The rule list is not confluent in a single pass (e.g. unwrapping
    // `\text{.}` exposes a trailing period), so iterate to a fixed point.
    for (int pass = 0; pass < 16; ++pass) {
        std::string next = apply_rules(current);
        if (next == current) break;
        current = std::move(next);
    }
    if (current.empty()) throw ExtractionError("empty answer");
    NormalizedAnswer out;
    out.numeric_value = parse_rational(current);
    out.canonical_text = std::move(current);
    return out;
}

NormalizedAnswer extract_boxed(std::string_view response) {
    static constexpr std::string_view kBoxed = "\\boxed";
    std::optional<std::string_view> last;
    for (std::size_t pos = response.find(kBoxed); pos != std::string_view::npos;
         pos = response.find(kBoxed, pos + 1)) {
        std::size_t p = pos + kBoxed.size();
        while (p < response.size() && is_space(response[p])) ++p;
        if (p >= response.size() || response[p] != '{') continue;
        std::size_t end = match_brace(response, p);
        if (end == std::string_view::npos) continue;
        last = response.substr(p + 1, end - p - 2);
    }
    if (!last) throw ExtractionError("no boxed answer");
    return normalize_answer(*last);
}

std::optional<NormalizedAnswer> try_extract_boxed(std::string_view response) noexcept {
    try {
        return extract_boxed(response);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

bool answers_match(const NormalizedAnswer& a, const NormalizedAnswer& b) {
    if (a.numeric_value && b.numeric_value) return *a.numeric_value == *b.numeric_value;
    return a.canonical_text == b.canonical_text;
}

int verifiable_reward(std::string_view response, std::string_view label) noexcept {
    try {
        auto extracted = try_extract_boxed(response);
        if (!extracted) return 0;
        return answers_match(*extracted, normalize_answer(label)) ? 1 : 0;
    } catch (const std::exception&) {
        return 0;
    }
}

std::string equivalence_key(const NormalizedAnswer& answer) {
    if (answer.numeric_value) return "#" + answer.numeric_value->str();
    return "$" + answer.canonical_text;
}

}  // namespace poser
