#pragma once

#include "tableqa/text.hpp"

#include <cmath>
#include <string>
#include <variant>

namespace tqa {

// Relational cell value: null, number, or string.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }
inline bool is_number(const Value& v) { return std::holds_alternative<double>(v); }
inline bool is_string(const Value& v) { return std::holds_alternative<std::string>(v); }

inline double as_number(const Value& v) { return std::get<double>(v); }
inline const std::string& as_string(const Value& v) { return std::get<std::string>(v); }

inline bool value_equal(const Value& a, const Value& b) {
    if (a.index() != b.index()) return false;
    if (is_null(a)) return true;
    if (is_number(a)) return as_number(a) == as_number(b);
    return as_string(a) == as_string(b);
}

// Total order used for ORDER BY and MIN/MAX: null < number < string.
inline int value_compare(const Value& a, const Value& b) {
    if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
    if (is_null(a)) return 0;
    if (is_number(a)) {
        double x = as_number(a), y = as_number(b);
        if (x < y) return -1;
        if (x > y) return 1;
        return 0;
    }
    int c = as_string(a).compare(as_string(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

inline std::string value_to_display(const Value& v) {
    if (is_null(v)) return "";
    if (is_number(v)) return text::format_number(as_number(v));
    return as_string(v);
}

} // namespace tqa
