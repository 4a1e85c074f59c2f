#pragma once

#include <string>

namespace bw {

// Scratch-like untyped value. Everything can be read as text, number or
// boolean; numeric contexts parse a leading numeral and fall back to 0,
// boolean contexts treat "true"/non-zero as true.
class Value {
public:
    Value() : kind_(Kind::Text) {}
    Value(double n) : kind_(Kind::Number), num_(n) {}
    Value(int n) : kind_(Kind::Number), num_(n) {}
    Value(bool b) : kind_(Kind::Bool), boolean_(b) {}
    Value(std::string s) : kind_(Kind::Text), text_(std::move(s)) {}
    Value(const char* s) : kind_(Kind::Text), text_(s) {}

    static Value number(double n) { return Value(n); }
    static Value text(std::string s) { return Value(std::move(s)); }
    static Value boolean(bool b) { return Value(b); }

    bool isNumber() const { return kind_ == Kind::Number; }
    bool isBool() const { return kind_ == Kind::Bool; }
    bool isText() const { return kind_ == Kind::Text; }

    double asNumber() const;
    bool asBool() const;
    std::string asText() const;

    // Scratch comparison: numeric when both sides parse fully as numbers,
    // otherwise case-insensitive text. Returns <0, 0, >0.
    static int compare(const Value& a, const Value& b);

    bool operator==(const Value& other) const { return compare(*this, other) == 0; }

    // Canonical text used for serialization and variable snapshots.
    static std::string numberToText(double n);

private:
    enum class Kind { Number, Text, Bool };
    Kind kind_;
    double num_ = 0.0;
    bool boolean_ = false;
    std::string text_;
};

// Parses a leading numeral ("12.5abc" -> 12.5); returns fallback when no
// prefix parses. strictlyNumeric() requires the whole string to parse.
double parseLeadingNumber(const std::string& s, double fallback = 0.0);
bool strictlyNumeric(const std::string& s, double& out);

} // namespace bw
