#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tqa::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercased alphanumeric word tokens; everything else separates.
std::vector<std::string> tokenize(std::string_view s);

// Tokens keeping original case (used for proper-noun detection).
std::vector<std::string> tokenize_cased(std::string_view s);

// Lenient numeric literal parser used for cell typing and standardization.
// Accepts optional sign, thousands separators ("4,444"), one leading
// currency symbol ($ € £ ¥ ￥), parenthesized negatives ("(1,200)"),
// and plain/scientific notation.
std::optional<double> parse_number(std::string_view s);

inline bool is_numeric(std::string_view s) { return parse_number(s).has_value(); }

// Deterministic rendering: integers without a decimal point, no thousands
// separators, shortest round-trip form otherwise.
std::string format_number(double v);

// All numbers appearing as tokens inside free text, comma grouping included.
std::vector<double> extract_numbers(std::string_view s);

struct Date {
    int year = 0;
    int month = 0; // 1..12
    int day = 0;   // 1..31

    bool operator==(const Date&) const = default;
    auto operator<=>(const Date&) const = default;
};

// Recognized label formats: DD-Mon-YYYY, D-Mon-YYYY, "Mon DD YYYY",
// "Mon DD, YYYY" (full month names accepted), and YYYY-MM-DD.
std::optional<Date> parse_date(std::string_view s);

// Mon_DD_YYYY with a zero-padded day, e.g. Apr_14_2025.
std::string format_date_label(const Date& d);

// ISO-8601 date used in time ranges and config, e.g. 2025-01-06.
std::string format_date_iso(const Date& d);
std::optional<Date> parse_date_iso(std::string_view s);

// Sentence splitting for attribution metrics: [.!?] followed by whitespace.
std::vector<std::string> split_sentences(std::string_view s);

// Token-level F1 over lowercased word multisets.
double token_f1(std::string_view a, std::string_view b);

bool starts_with_upper(std::string_view token);

} // namespace tqa::text
