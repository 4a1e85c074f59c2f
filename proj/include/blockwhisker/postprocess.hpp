#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blockwhisker/fitness.hpp"
#include "blockwhisker/search.hpp"

namespace bw {

enum class AssertionKind {
    Backdrop,
    CloneCount,
    Costume,
    Direction,
    Layer,
    ListLength,
    Position,
    Say,
    Size,
    Touching,
    TouchingEdge,
    Variable,
    Visibility,
    Volume,
};

const char* assertionKindName(AssertionKind kind);
std::optional<AssertionKind> assertionKindFromName(const std::string& name);

// A single expected-state check evaluated right after one event. Tolerances:
// Position within 5 px per axis, Direction within 1 degree (circular), all
// other kinds exact.
struct Assertion {
    AssertionKind kind = AssertionKind::Variable;
    std::string target;      // runtime key; sprite name for CloneCount; "" for Backdrop
    std::string name;        // variable/list name, Touching partner, Say bubble kind
    std::string expectText;  // textual expectation (variable value, backdrop, say text)
    double expectX = 0.0;    // scalar slot (position x, direction, size, count, ...)
    double expectY = 0.0;    // position y
    bool expectBool = false; // visibility, touching, touching-edge
};

struct AnnotatedTest {
    std::vector<ResolvedEvent> events;
    // One list per event: assertions[i] holds the checks emitted right after
    // events[i]. The post-green-flag state is the diff baseline.
    std::vector<std::vector<Assertion>> assertions;
    std::vector<std::string> goalIds;  // goals this test is retained for
    std::uint64_t seed = 0;
};

// Executes an event list on a fresh VM and packages the outcome like a
// decoded test (genotype left empty).
TestCase runEvents(const Project& project, const FitnessEngine& engine,
                   const VmConfig& vmCfg, const std::vector<ResolvedEvent>& events);

// Drops events (scanning last to first, repeated until a fixpoint) as long as
// the fitness of every retained goal does not get worse. The result is
// 1-minimal: removing any single remaining event worsens some retained goal.
std::vector<ResolvedEvent> minimizeEvents(const Project& project, const FitnessEngine& engine,
                                          const VmConfig& vmCfg,
                                          const std::vector<ResolvedEvent>& events,
                                          const std::vector<int>& retainedGoals);

// Replays the events and emits an assertion for every observable property
// whose value changed since the previous event's snapshot. Clones are only
// compared when they exist in both snapshots.
std::vector<std::vector<Assertion>> generateAssertions(const Project& project,
                                                       const VmConfig& vmCfg,
                                                       const std::vector<ResolvedEvent>& events);

bool assertionHolds(const Assertion& a, const VmSnapshot& snapshot);

struct ReplayResult {
    int totalAssertions = 0;
    int failedAssertions = 0;
    bool crashed = false;
    bool capExceeded = false;
    long long vmSteps = 0;
    std::set<std::string> covered;
    std::vector<std::string> failures;  // human-readable, one per failed assertion
};

// Replays an annotated test; maxSteps 0 means uncapped. Assertions are
// evaluated on the live state right after their event.
ReplayResult replayTest(const Project& project, const VmConfig& vmCfg,
                        const AnnotatedTest& test, long long maxSteps = 0);

}  // namespace bw
