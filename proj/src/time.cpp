#include "cbn/time.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace cbn {

namespace {

constexpr std::array<std::pair<std::string_view, std::int64_t>, 5> kUnits{{
    {"s", 1'000'000'000'000},
    {"ms", 1'000'000'000},
    {"us", 1'000'000},
    {"ns", 1'000},
    {"ps", 1},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Picoseconds parse_time(std::string_view text) {
  auto s = trim(text);
  std::size_t split = s.size();
  while (split > 0 && std::isalpha(static_cast<unsigned char>(s[split - 1]))) --split;
  auto number = trim(s.substr(0, split));
  auto unit = s.substr(split);
  if (number.empty()) throw std::invalid_argument("invalid time '" + std::string(text) + "'");

  std::int64_t scale = 1;
  if (!unit.empty()) {
    bool found = false;
    for (auto [name, factor] : kUnits) {
      if (unit == name) {
        scale = factor;
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown time unit '" + std::string(unit) + "'");
  }

  std::int64_t whole = 0;
  auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), whole);
  if (ec == std::errc() && ptr == number.data() + number.size()) return Picoseconds{whole * scale};

  double value = 0;
  auto [dptr, dec] = std::from_chars(number.data(), number.data() + number.size(), value);
  if (dec != std::errc() || dptr != number.data() + number.size())
    throw std::invalid_argument("invalid time '" + std::string(text) + "'");
  double ps = value * static_cast<double>(scale);
  double rounded = std::round(ps);
  if (std::abs(ps - rounded) > 1e-6 * std::max(1.0, std::abs(ps)))
    throw std::invalid_argument("time '" + std::string(text) + "' is not a whole number of picoseconds");
  return Picoseconds{static_cast<std::int64_t>(rounded)};
}

std::string format_time(Picoseconds t) {
  auto v = t.count();
  if (v == 0) return "0ps";
  for (auto [name, factor] : kUnits) {
    if (v % factor == 0) return std::to_string(v / factor) + std::string(name);
  }
  return std::to_string(v) + "ps";
}

}  // namespace cbn
