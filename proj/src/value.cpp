#include "blockwhisker/value.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace bw {

double parseLeadingNumber(const std::string& s, double fallback) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) return fallback;
    if (std::isnan(v) || std::isinf(v)) return fallback;
    return v;
}

bool strictlyNumeric(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || std::isnan(v) || std::isinf(v)) return false;
    while (*end != '\0') {
        if (!std::isspace(static_cast<unsigned char>(*end))) return false;
        ++end;
    }
    out = v;
    return true;
}

double Value::asNumber() const {
    switch (kind_) {
    case Kind::Number: return num_;
    case Kind::Bool: return boolean_ ? 1.0 : 0.0;
    case Kind::Text: return parseLeadingNumber(text_, 0.0);
    }
    return 0.0;
}

bool Value::asBool() const {
    switch (kind_) {
    case Kind::Number: return num_ != 0.0;
    case Kind::Bool: return boolean_;
    case Kind::Text: {
        std::string lower = text_;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lower == "true") return true;
        if (lower == "false" || lower.empty()) return false;
        double v = 0.0;
        if (strictlyNumeric(text_, v)) return v != 0.0;
        return true;
    }
    }
    return false;
}

std::string Value::numberToText(double n) {
    if (std::isnan(n)) return "NaN";
    if (std::isinf(n)) return n > 0 ? "Infinity" : "-Infinity";
    if (n == 0.0) return "0";
    if (n == std::floor(n) && std::fabs(n) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", n);
        return buf;
    }
    // Shortest representation that round-trips.
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, n);
        if (std::strtod(buf, nullptr) == n) break;
    }
    return buf;
}

std::string Value::asText() const {
    switch (kind_) {
    case Kind::Number: return numberToText(num_);
    case Kind::Bool: return boolean_ ? "true" : "false";
    case Kind::Text: return text_;
    }
    return {};
}

int Value::compare(const Value& a, const Value& b) {
    double na = 0.0;
    double nb = 0.0;
    const bool aNum = a.isNumber() ? (na = a.num_, true)
                                   : (a.isBool() ? (na = a.boolean_ ? 1 : 0, true)
                                                 : strictlyNumeric(a.text_, na));
    const bool bNum = b.isNumber() ? (nb = b.num_, true)
                                   : (b.isBool() ? (nb = b.boolean_ ? 1 : 0, true)
                                                 : strictlyNumeric(b.text_, nb));
    if (aNum && bNum) {
        if (na < nb) return -1;
        if (na > nb) return 1;
        return 0;
    }
    std::string ta = a.asText();
    std::string tb = b.asText();
    std::transform(ta.begin(), ta.end(), ta.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::transform(tb.begin(), tb.end(), tb.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ta.compare(tb);
}

} // namespace bw
