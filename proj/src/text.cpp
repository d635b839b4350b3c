#include "tableqa/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <unordered_map>

namespace tqa::text {

namespace {

bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }

} // namespace

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_space_byte(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space_byte(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> tokenize_cased(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

namespace {

// One leading currency marker; the multi-byte ones are matched as UTF-8.
std::string_view strip_currency(std::string_view s) {
    static constexpr std::array<std::string_view, 5> symbols = {
        "$", "€", "£", "¥", "￥"};
    for (auto sym : symbols) {
        if (s.size() >= sym.size() && s.substr(0, sym.size()) == sym)
            return s.substr(sym.size());
    }
    return s;
}

// digits with optional comma grouping (groups of three) and decimals/exponent
bool matches_number_shape(std::string_view s, std::string& digits_out) {
    digits_out.clear();
    size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
        digits_out.push_back(s[i]);
        ++i;
    }
    size_t int_start = i;
    bool saw_digit = false;
    bool saw_comma = false;
    size_t group_len = 0;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            saw_digit = true;
            ++group_len;
            digits_out.push_back(c);
            if (saw_comma && group_len > 3) return false;
        } else if (c == ',') {
            if (!saw_digit) return false;
            if (saw_comma && group_len != 3) return false;
            if (!saw_comma && (group_len < 1 || group_len > 3)) return false;
            saw_comma = true;
            group_len = 0;
        } else {
            break;
        }
    }
    if (saw_comma && group_len != 3) return false;
    if (i == int_start && !(i < s.size() && s[i] == '.')) return false;
    if (i < s.size() && s[i] == '.') {
        digits_out.push_back('.');
        ++i;
        size_t frac = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            digits_out.push_back(s[i]);
            ++i;
            ++frac;
        }
        if (frac == 0 && !saw_digit) return false;
        saw_digit = saw_digit || frac > 0;
    }
    if (!saw_digit) return false;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        if (saw_comma) return false; // no grouping with exponents
        digits_out.push_back('e');
        ++i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) {
            digits_out.push_back(s[i]);
            ++i;
        }
        size_t exp_digits = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            digits_out.push_back(s[i]);
            ++i;
            ++exp_digits;
        }
        if (exp_digits == 0) return false;
    }
    return i == s.size();
}

} // namespace

std::optional<double> parse_number(std::string_view raw) {
    std::string t = trim(raw);
    if (t.empty()) return std::nullopt;
    bool negative = false;
    std::string_view s = t;
    if (s.front() == '(' && s.back() == ')' && s.size() >= 3) {
        negative = true;
        s = s.substr(1, s.size() - 2);
        std::string inner = trim(s);
        t = inner;
        s = t;
        if (s.empty()) return std::nullopt;
    }
    std::string after_cur{strip_currency(s)};
    std::string stripped = trim(after_cur);
    std::string digits;
    if (!matches_number_shape(stripped, digits)) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(digits.c_str(), &end);
    if (end == digits.c_str() || *end != '\0') return std::nullopt;
    if (errno == ERANGE) return std::nullopt;
    return negative ? -v : v;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    double r = std::round(v);
    if (r == v && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        double back = std::strtod(buf, nullptr);
        if (back == v) break;
    }
    return buf;
}

std::vector<double> extract_numbers(std::string_view s) {
    std::vector<double> out;
    size_t i = 0;
    auto is_num_char = [](char c) {
        return (c >= '0' && c <= '9') || c == ',' || c == '.' || c == '-' || c == '+';
    };
    while (i < s.size()) {
        if (s[i] >= '0' && s[i] <= '9') {
            size_t b = i;
            if (b > 0 && (s[b - 1] == '-' || s[b - 1] == '+')) --b;
            size_t e = i;
            while (e < s.size() && is_num_char(s[e])) ++e;
            // peel trailing punctuation that is not part of the literal
            std::string_view cand = s.substr(b, e - b);
            while (!cand.empty() && (cand.back() == '.' || cand.back() == ',' ||
                                     cand.back() == '-' || cand.back() == '+'))
                cand.remove_suffix(1);
            if (auto v = parse_number(cand)) out.push_back(*v);
            i = e;
        } else {
            ++i;
        }
    }
    return out;
}

namespace {

const std::array<std::string_view, 12> kMonAbbr = {
    "Jan", "Feb", "Mar", "Apr", "May", "Jun",
    "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

const std::array<std::string_view, 12> kMonFull = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

int month_from_name(std::string_view name) {
    std::string low = to_lower(name);
    for (int m = 0; m < 12; ++m) {
        if (low == to_lower(kMonAbbr[static_cast<size_t>(m)])) return m + 1;
        if (low == kMonFull[static_cast<size_t>(m)]) return m + 1;
    }
    return 0;
}

int days_in_month(int year, int month) {
    static constexpr int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2) {
        bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
        return leap ? 29 : 28;
    }
    return d[month - 1];
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return c >= '0' && c <= '9';
    });
}

std::optional<int> to_int(std::string_view s) {
    if (!all_digits(s)) return std::nullopt;
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<Date> make_date(int y, int m, int d) {
    if (y < 1 || m < 1 || m > 12 || d < 1) return std::nullopt;
    if (d > days_in_month(y, m)) return std::nullopt;
    return Date{y, m, d};
}

std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

} // namespace

std::optional<Date> parse_date(std::string_view raw) {
    std::string t = trim(raw);
    if (t.empty() || t.size() > 40) return std::nullopt;

    // YYYY-MM-DD
    {
        auto parts = split_on(t, '-');
        if (parts.size() == 3 && parts[0].size() == 4 && all_digits(parts[0])) {
            auto y = to_int(parts[0]);
            auto m = to_int(parts[1]);
            auto d = to_int(parts[2]);
            if (y && m && d) return make_date(*y, *m, *d);
        }
        // D-Mon-YYYY / DD-Mon-YYYY
        if (parts.size() == 3 && parts[2].size() == 4 && all_digits(parts[2])) {
            auto d = to_int(parts[0]);
            int m = month_from_name(parts[1]);
            auto y = to_int(parts[2]);
            if (d && m && y && parts[0].size() <= 2) return make_date(*y, m, *d);
        }
    }
    // Mon DD YYYY / Mon DD, YYYY
    {
        std::string cleaned;
        cleaned.reserve(t.size());
        for (char c : t) cleaned.push_back(c == ',' ? ' ' : c);
        std::vector<std::string> words;
        std::string cur;
        for (char c : cleaned) {
            if (c == ' ' || c == '\t') {
                if (!cur.empty()) {
                    words.push_back(cur);
                    cur.clear();
                }
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) words.push_back(cur);
        if (words.size() == 3) {
            int m = month_from_name(words[0]);
            auto d = to_int(words[1]);
            auto y = to_int(words[2]);
            if (m && d && y && words[1].size() <= 2 && words[2].size() == 4)
                return make_date(*y, m, *d);
        }
    }
    return std::nullopt;
}

std::string format_date_label(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s_%02d_%04d",
                  std::string(kMonAbbr[static_cast<size_t>(d.month - 1)]).c_str(), d.day,
                  d.year);
    return buf;
}

std::string format_date_iso(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

std::optional<Date> parse_date_iso(std::string_view s) {
    std::string t = trim(s);
    auto parts = split_on(t, '-');
    if (parts.size() != 3) return std::nullopt;
    auto y = to_int(parts[0]);
    auto m = to_int(parts[1]);
    auto d = to_int(parts[2]);
    if (!y || !m || !d) return std::nullopt;
    return make_date(*y, *m, *d);
}

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (size_t i = 0; i < s.size(); ++i) {
        cur.push_back(s[i]);
        if ((s[i] == '.' || s[i] == '!' || s[i] == '?') &&
            (i + 1 >= s.size() || is_space_byte(static_cast<unsigned char>(s[i + 1])))) {
            std::string sentence = trim(cur);
            if (!sentence.empty()) out.push_back(sentence);
            cur.clear();
        }
    }
    std::string tail = trim(cur);
    if (!tail.empty()) out.push_back(tail);
    return out;
}

double token_f1(std::string_view a, std::string_view b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;
    std::map<std::string, int> ca;
    for (auto& t : ta) ++ca[t];
    int overlap = 0;
    for (auto& t : tb) {
        auto it = ca.find(t);
        if (it != ca.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(tb.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(ta.size());
    return 2.0 * precision * recall / (precision + recall);
}

bool starts_with_upper(std::string_view token) {
    return !token.empty() && token[0] >= 'A' && token[0] <= 'Z';
}

} // namespace tqa::text
