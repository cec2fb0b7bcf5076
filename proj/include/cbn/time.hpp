#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace cbn {

// Model time is an integer count of picoseconds everywhere outside the integrator.
using Picoseconds = std::chrono::duration<std::int64_t, std::pico>;

inline double to_seconds(Picoseconds t) { return static_cast<double>(t.count()) * 1e-12; }

// Parses "24ns", "1ms", "0.5 ms", "1500" (bare numbers are picoseconds).
// Throws std::invalid_argument on malformed input or non-integral picosecond values.
Picoseconds parse_time(std::string_view text);

// Shortest exact rendering using the largest unit that divides the value.
std::string format_time(Picoseconds t);

}  // namespace cbn
