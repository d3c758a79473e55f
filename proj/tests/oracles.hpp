#pragma once

// Independent reference implementations used as test oracles. Everything in
// this header is deliberately written from the definitions, not by calling
// the library code it checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "evscore/rng.hpp"

namespace oracles {

// Glob semantics spelled out recursively: '*' matches any run (including
// empty), '?' exactly one character.
inline bool ref_glob_match(std::string_view pattern, std::string_view text) {
  if (pattern.empty()) return text.empty();
  if (pattern[0] == '*') {
    for (std::size_t skip = 0; skip <= text.size(); ++skip)
      if (ref_glob_match(pattern.substr(1), text.substr(skip))) return true;
    return false;
  }
  if (text.empty()) return false;
  if (pattern[0] == '?' || pattern[0] == text[0])
    return ref_glob_match(pattern.substr(1), text.substr(1));
  return false;
}

// Character-class splitter: assigns each character a class (letter, digit,
// other) and emits maximal single-class runs of letters or digits.
inline std::vector<std::string> ref_grammar_tokens(std::string_view text, bool strip_numbers) {
  enum class Cls { letter, digit, other };
  auto cls = [](char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return Cls::letter;
    if (c >= '0' && c <= '9') return Cls::digit;
    return Cls::other;
  };
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const Cls c = cls(text[i]);
    std::size_t j = i;
    while (j < text.size() && cls(text[j]) == c) ++j;
    if (c != Cls::other && !(strip_numbers && c == Cls::digit))
      tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

// O(n^2) pairwise AUROC: wins plus half-ties over all anomalous/nominal pairs.
inline double pairwise_auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double numerator = 0;
  std::uint64_t pairs = 0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (std::size_t n = 0; n < scores.size(); ++n) {
      if (labels[n]) continue;
      ++pairs;
      if (scores[a] > scores[n])
        numerator += 1.0;
      else if (scores[a] == scores[n])
        numerator += 0.5;
    }
  }
  return numerator / static_cast<double>(pairs);
}

// Central finite difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Mixed absolute/relative discrepancy: relative for magnitudes above 1,
// absolute below. Near-zero components cannot be certified in a purely
// relative sense by central differences (the h-scaled roundoff floor
// dominates), so unit scale is the natural denominator floor here.
inline double relative_error(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
  return std::fabs(a - b) / scale;
}

// Random channel names conforming to the SysSubSys:DeviceID[-SubDevice]:Signal
// convention: device never ends in a digit, device instances carry no leading
// zero, signals avoid the forbidden characters, and a trailing underscore
// marks a private signal.
struct NameGen {
  evscore::Rng rng;

  explicit NameGen(std::uint64_t seed) : rng(seed) {}

  std::string letters(std::size_t lo, std::size_t hi) {
    static constexpr char alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    const std::size_t n = lo + rng.below(hi - lo + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng.below(sizeof(alphabet) - 1)];
    return s;
  }

  std::string sys_subsys() {
    std::string s = letters(2, 5);
    if (rng.below(3) == 0) s += std::to_string(rng.below(100));  // e.g. FE08BL3-style digits
    if (rng.below(4) == 0) s += letters(1, 2);
    return s;
  }

  std::string next() {
    std::string name = sys_subsys();
    name += ':';
    name += letters(2, 6);  // device: ends in a letter by construction
    if (rng.below(2) == 0) name += std::to_string(rng.below(50));  // DI, no leading zeros
    if (rng.below(4) == 0) {
      name += '-';
      name += letters(1, 4);
      if (rng.below(2) == 0) name += std::to_string(rng.below(9) + 1);
    }
    name += ':';
    std::string signal = letters(2, 7);
    if (rng.below(3) == 0) {
      signal += '_';
      signal += letters(1, 4);
    }
    if (rng.below(5) == 0) {
      signal += ':';
      signal += letters(1, 4);
    }
    name += signal;
    if (rng.below(6) == 0) name += '_';  // private signal marker
    return name;
  }
};

}  // namespace oracles
