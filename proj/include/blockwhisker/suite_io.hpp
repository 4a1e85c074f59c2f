#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockwhisker/postprocess.hpp"
#include "blockwhisker/search.hpp"

namespace bw {

const char* algorithmName(Algorithm a);
Algorithm algorithmFromName(const std::string& name);
const char* budgetModeName(BudgetMode m);
BudgetMode budgetModeFromName(const std::string& name);

// On-disk suite document. The payload is a pure function of (project, config):
// anything environment-specific belongs in a sidecar metadata file.
struct SuiteDocument {
    int version = 1;
    std::string projectName;
    SearchConfig config;
    int totalGoals = 0;
    std::vector<std::string> coveredGoals;  // sorted CFG goal node ids
    std::vector<AnnotatedTest> tests;
};

std::string suiteToJson(const SuiteDocument& doc);
SuiteDocument suiteFromJson(const std::string& text);  // throws std::runtime_error

std::string coverageCsv(const std::vector<CoveragePoint>& timeline);

// Sidecar for environment facts (tool version, host, wall-clock). Kept out of
// the canonical payload so suite files stay byte-reproducible.
std::string sidecarMetadata(const std::string& toolVersion);

std::uint64_t fnv1a(const std::string& data);

}  // namespace bw
