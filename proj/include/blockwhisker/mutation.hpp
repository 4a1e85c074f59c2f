#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "blockwhisker/postprocess.hpp"
#include "blockwhisker/project.hpp"

namespace bw {

// First-order mutant: the project differs from the original at exactly one
// block locus.
struct Mutant {
    std::string op;           // KRM, SBD, SDM, AOR, LOR, ROR, NCM, VRM
    std::string locus;        // block id the change anchors to
    std::string description;  // human-readable replacement summary
    Project project;
};

// Deterministic for a fixed (project, seed); the seed only drives the random
// replacement choices of KRM and VRM.
std::vector<Mutant> generateMutants(const Project& project, std::uint64_t seed);

struct OperatorStats {
    int generated = 0;
    int killed = 0;
    int survived = 0;
};

struct MutationReport {
    std::map<std::string, OperatorStats> perOperator;
    int excludedTests = 0;  // suite tests already failing on the original
    int totalTests = 0;
    std::vector<std::string> log;

    int generated() const;
    int killed() const;
    double score() const;
};

// Replays the suite on the original first (excluding failing tests), then on
// every mutant. A mutant is killed by any assertion failure or VM crash; runs
// past 10x the original step count are aborted and logged as not killed.
// Mutants fan out over `workers` threads; the merged report is independent of
// the schedule.
MutationReport analyzeMutants(const Project& original, const std::vector<AnnotatedTest>& suite,
                              const std::vector<Mutant>& mutants, const VmConfig& vmCfg,
                              int workers = 1);

// CSV rows: operator, generated, killed, excluded, score.
std::string mutationCsv(const MutationReport& report);

}  // namespace bw
