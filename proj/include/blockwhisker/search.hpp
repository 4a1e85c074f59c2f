#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "blockwhisker/encoding.hpp"
#include "blockwhisker/events.hpp"
#include "blockwhisker/fitness.hpp"
#include "blockwhisker/rng.hpp"

namespace bw {

enum class BudgetMode { Steps, Executions, Seconds };
enum class Algorithm { Random, Mosa, Mio };

struct SearchConfig {
    Algorithm algorithm = Algorithm::Mosa;
    BudgetMode budgetMode = BudgetMode::Steps;
    long long budget = 20000;

    int populationSize = 30;
    double crossoverProb = 0.70;
    double localSearchProb = 0.30;
    double newEventProbability = 0.5;

    double mioF = 1.0;
    int mioN0 = 10;
    int mioNf = 1;
    double mioR0 = 0.90;
    double mioRf = 0.0;
    int mioM0 = 1;
    int mioMf = 10;

    std::uint64_t seed = 0;
    EncodingConfig encoding;
    VmConfig vm;
};

struct TestCase {
    Genotype genotype;
    std::vector<ResolvedEvent> events;
    ExecutionTrace trace;
    std::vector<double> fitness;  // parallel to FitnessEngine::goals()
    int lastImprovingGroup = 0;
    int groupsExecuted = 0;
    bool activeAtEnd = false;
    long long vmSteps = 0;

    int groups(const EncodingConfig& cfg) const { return groupCount(genotype, cfg); }
};

struct CoveragePoint {
    long long executionIndex = 0;  // 1-based
    long long vmStepsUsed = 0;     // cumulative
    int coveredBlocks = 0;
    int totalBlocks = 0;
};

struct GeneratedSuite {
    std::vector<TestCase> tests;
    // goal node -> index into tests; one entry per covered goal
    std::map<int, int> goalToTest;
    std::vector<CoveragePoint> timeline;
    long long executions = 0;
    long long vmSteps = 0;

    std::set<int> coveredGoals() const;
    double coverage(int totalGoals) const;
};

double dynamicParameter(double x0, double xf, double budgetFraction, double focus);

GeneratedSuite runSearch(const Project& project, const EventContext& ctx,
                         const FitnessEngine& engine, const SearchConfig& config);

// Exposed for unit tests and for the CLI minimize/replay paths.
TestCase executeGenotype(const Project& project, const EventContext& ctx,
                         const FitnessEngine& engine, const SearchConfig& config,
                         const Genotype& g);

TestCase reductionLocalSearch(const TestCase& test, const EncodingConfig& cfg);

struct ExtensionResult {
    TestCase test;
    bool replaced = false;
    long long vmSteps = 0;  // steps consumed by the re-execution, 0 when skipped
};

ExtensionResult extensionLocalSearch(const TestCase& test, const Project& project,
                                     const EventContext& ctx, const FitnessEngine& engine,
                                     const SearchConfig& config, Rng& rng);

}  // namespace bw
