#pragma once

#include <stdexcept>
#include <string>

namespace cbn {

// Invalid configuration value; the message names the violated invariant.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// step_exact_linear was asked to integrate across a diode or rail transition.
class RegimeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite state or similar internal inconsistency. Never clamped away.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoSteadyStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScheduleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cbn
