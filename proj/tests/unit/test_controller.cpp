#include <vector>

#include "cbn/controller.hpp"
#include "cbn/errors.hpp"
#include "doctest.h"

using namespace cbn;

namespace {

constexpr Picoseconds kNs{1'000};

// Feeds a pattern of active/inactive samples and returns the reset duration
// issued at each one (0 when none).
std::vector<std::int64_t> drive(const ControllerMode& m, const std::vector<bool>& active) {
  auto st = ControllerState::initial(m);
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < active.size(); ++i) {
    AerSample s{Picoseconds{static_cast<std::int64_t>(i) * 1'000'000'000}, 0, 0, active[i]};
    auto step = on_sample(st, s);
    st = step.state;
    out.push_back(step.command ? step.command->duration.count() / 1'000 : 0);
    if (step.command) CHECK(step.command->issue_time == s.time);
  }
  return out;
}

}  // namespace

TEST_CASE("tonic resets every active sample") {
  CHECK(drive(Tonic{}, {true, false, true, true}) == std::vector<std::int64_t>{24, 0, 24, 24});
}

TEST_CASE("burst resets after N consecutive active samples") {
  Burst b{5, 24 * kNs};
  CHECK(drive(b, std::vector<bool>(11, true)) == std::vector<std::int64_t>{0, 0, 0, 0, 24, 0, 0, 0, 0, 24, 0});
  // An inactive sample restarts the count.
  CHECK(drive(b, {true, true, true, false, true, true, true, true, true}) ==
        std::vector<std::int64_t>{0, 0, 0, 0, 0, 0, 0, 0, 24});
  CHECK(drive(Burst{1, 8 * kNs}, {true, true}) == std::vector<std::int64_t>{8, 8});
}

TEST_CASE("adaptation lengthens resets up to the cap") {
  Adaptation a{3 * kNs, 3 * kNs, 32 * kNs, 0};
  CHECK(drive(a, std::vector<bool>(12, true)) ==
        std::vector<std::int64_t>{3, 6, 9, 12, 15, 18, 21, 24, 27, 30, 32, 32});
  // Without decay, inactivity does not reset the staircase.
  CHECK(drive(a, {true, true, false, false, false, true}) == std::vector<std::int64_t>{3, 6, 0, 0, 0, 9});
}

TEST_CASE("adaptation decay returns to the initial duration") {
  Adaptation a{3 * kNs, 3 * kNs, 32 * kNs, 2};
  CHECK(drive(a, {true, true, false, true, false, false, true}) ==
        std::vector<std::int64_t>{3, 6, 0, 9, 0, 0, 3});
}

TEST_CASE("passive never resets") {
  CHECK(drive(Passive{}, {true, true, true}) == std::vector<std::int64_t>{0, 0, 0});
}

TEST_CASE("mode validation") {
  CHECK_THROWS_AS(validate(Tonic{Picoseconds{0}}), ConfigError);
  CHECK_THROWS_AS(validate(Burst{0, kNs}), ConfigError);
  CHECK_THROWS_AS(validate(Adaptation{10 * kNs, kNs, 5 * kNs, 0}), ConfigError);
  CHECK_NOTHROW(validate(Adaptation{}));
  CHECK(std::string(mode_name(Burst{})) == "burst");
}

TEST_CASE("commands become reset events after the feedback latency") {
  ResetCommand c{7, Picoseconds{2'000'000'000}, 24 * kNs};
  auto e0 = command_to_event(c, Picoseconds{0});
  CHECK(e0.time == c.issue_time);
  CHECK(e0.kind == SpikeKind::reset);
  CHECK(e0.neuron_id == 7);
  CHECK(e0.duration == 24 * kNs);
  CHECK(command_to_event(c, 100 * kNs).time == c.issue_time + 100 * kNs);
}
