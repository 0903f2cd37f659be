#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pdfmidas {

//! Exact rational time stamp.
//!
//! Mixed-frequency lag positions (t - h - i/m) must compare exactly; float
//! keys drift after a few thousand periods. Stored as a normalized fraction
//! with positive denominator.
class TimeIndex {
public:
  constexpr TimeIndex() = default;

  constexpr TimeIndex(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
    if (den_ == 0) throw std::invalid_argument("TimeIndex: zero denominator");
    normalize();
  }

  constexpr std::int64_t num() const { return num_; }
  constexpr std::int64_t den() const { return den_; }

  constexpr double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  //! Parse "n" or "n/d".
  static TimeIndex parse(const std::string& text) {
    const auto slash = text.find('/');
    try {
      if (slash == std::string::npos) return TimeIndex(std::stoll(text));
      return TimeIndex(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
    } catch (const std::exception&) {
      throw std::invalid_argument("TimeIndex: cannot parse '" + text + "'");
    }
  }

  friend constexpr TimeIndex operator+(TimeIndex a, TimeIndex b) {
    return TimeIndex(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
  }
  friend constexpr TimeIndex operator-(TimeIndex a, TimeIndex b) {
    return TimeIndex(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
  }

  friend constexpr bool operator==(TimeIndex a, TimeIndex b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend constexpr bool operator<(TimeIndex a, TimeIndex b) {
    // denominators are positive after normalization
    return a.num_ * b.den_ < b.num_ * a.den_;
  }
  friend constexpr bool operator<=(TimeIndex a, TimeIndex b) { return a == b || a < b; }
  friend constexpr bool operator>(TimeIndex a, TimeIndex b) { return b < a; }
  friend constexpr bool operator>=(TimeIndex a, TimeIndex b) { return b <= a; }
  friend constexpr bool operator!=(TimeIndex a, TimeIndex b) { return !(a == b); }

private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;

  constexpr void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
    if (num_ == 0) den_ = 1;
  }
};

struct TimeIndexHash {
  std::size_t operator()(const TimeIndex& t) const {
    const std::size_t hn = std::hash<std::int64_t>{}(t.num());
    const std::size_t hd = std::hash<std::int64_t>{}(t.den());
    return hn ^ (hd + 0x9e3779b97f4a7c15ULL + (hn << 6) + (hn >> 2));
  }
};

}  // namespace pdfmidas
