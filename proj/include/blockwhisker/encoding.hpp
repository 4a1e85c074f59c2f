#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "blockwhisker/events.hpp"
#include "blockwhisker/rng.hpp"
#include "blockwhisker/vm.hpp"

namespace bw {

// Grammatical-evolution style codon string. Codons are grouped with a fixed
// stride: one codon selects the event, the rest feed its open parameters.
struct Genotype {
    std::vector<std::uint32_t> codons;
};

struct EncodingConfig {
    int groupSize = 2;  // 1 + max open parameter count over the static events
    int minGroups = 2;
    int maxGroups = 20;
    std::uint32_t codonMax = 65536;  // codons live in [0, codonMax)
    double gaussianSigma = 10.0;
};

int groupSizeFor(const EventContext& ctx);

int groupCount(const Genotype& g, const EncodingConfig& cfg);
std::vector<std::uint32_t> groupAt(const Genotype& g, const EncodingConfig& cfg, int index);

Genotype randomGenotype(Rng& rng, const EncodingConfig& cfg);
std::vector<std::uint32_t> randomGroup(Rng& rng, const EncodingConfig& cfg);

// Per-group mutation with rate 1/n_g: insert a fresh group before, nudge each
// codon with wrapped gaussian noise, or drop the group (kept at or above
// minGroups).
Genotype mutate(const Genotype& g, Rng& rng, const EncodingConfig& cfg);

// Single-point crossover at a shared relative cut. Children inherit a prefix
// of one parent and a suffix of the other; degenerate cuts are retried a few
// times before the parents are returned unchanged.
std::pair<Genotype, Genotype> crossover(const Genotype& a, const Genotype& b, Rng& rng,
                                        const EncodingConfig& cfg);

// Crossover at an explicit relative cut psi in [0, 1).
std::pair<Genotype, Genotype> crossoverAt(const Genotype& a, const Genotype& b, double psi,
                                          const EncodingConfig& cfg);

struct DecodedTest {
    std::vector<ResolvedEvent> events;
    ExecutionTrace trace;
    long long vmSteps = 0;         // steps consumed by this execution
    int lastImprovingGroup = 0;    // 1-based index; 0 when no group helped
    int groupsExecuted = 0;        // < groupCount when the program stopped early
    bool activeAtEnd = false;      // scripts still running or halted when done
};

// Replays a genotype against a fresh VM: green flag first, then one event per
// codon group, re-extracting the available events before each pick.
DecodedTest decodeAndExecute(const Project& project, const EventContext& ctx,
                             const Genotype& g, const EncodingConfig& ecfg,
                             const VmConfig& vmCfg);

}  // namespace bw
