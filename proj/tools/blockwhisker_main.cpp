#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blockwhisker/brute.hpp"
#include "blockwhisker/encoding.hpp"
#include "blockwhisker/events.hpp"
#include "blockwhisker/fitness.hpp"
#include "blockwhisker/graphs.hpp"
#include "blockwhisker/loader.hpp"
#include "blockwhisker/mutation.hpp"
#include "blockwhisker/postprocess.hpp"
#include "blockwhisker/search.hpp"
#include "blockwhisker/suite_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct Options {
    std::string projectPath;
    std::string suitePath;
    std::string outDir = ".";
    std::string algorithm = "mosa";
    std::uint64_t seed = 0;
    bool seedGiven = false;
    long long budgetExecutions = 0;
    long long budgetSteps = 0;
    double budgetSeconds = 0;
    int acceleration = 1;
    int population = 30;
    double crossoverProb = 0.70;
    double localSearchProb = 0.30;
    double mioFocus = 1.0;
    int mioN0 = 10, mioNf = 1;
    double mioR0 = 0.90, mioRf = 0.0;
    int mioM0 = 1, mioMf = 10;
    int maxCodonLength = 0;
    int maxLen = 3;
};

int envWorkers() {
    const char* env = std::getenv("BLOCKWHISKER_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n < 1 ? 1 : n;
}

bw::LoadResult loadOrExit(const std::string& path) {
    try {
        return bw::loadProjectFile(path);
    } catch (const bw::LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(2);
    } catch (const std::exception& e) {
        std::cerr << "error: cannot read " << path << ": " << e.what() << "\n";
        std::exit(2);
    }
}

void writeFile(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "error: cannot write " << path.string() << "\n";
        std::exit(2);
    }
    out << content;
}

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << path << "\n";
        std::exit(2);
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bw::SearchConfig makeSearchConfig(const Options& opt, const bw::EventContext& ctx) {
    bw::SearchConfig cfg;
    cfg.algorithm = bw::algorithmFromName(opt.algorithm);
    if (opt.budgetExecutions > 0) {
        cfg.budgetMode = bw::BudgetMode::Executions;
        cfg.budget = opt.budgetExecutions;
    } else if (opt.budgetSeconds > 0) {
        cfg.budgetMode = bw::BudgetMode::Seconds;
        cfg.budget = static_cast<long long>(opt.budgetSeconds);
    } else {
        cfg.budgetMode = bw::BudgetMode::Steps;
        cfg.budget = opt.budgetSteps > 0 ? opt.budgetSteps : 20000;
    }
    cfg.populationSize = opt.population;
    cfg.crossoverProb = opt.crossoverProb;
    cfg.localSearchProb = opt.localSearchProb;
    cfg.mioF = opt.mioFocus;
    cfg.mioN0 = opt.mioN0;
    cfg.mioNf = opt.mioNf;
    cfg.mioR0 = opt.mioR0;
    cfg.mioRf = opt.mioRf;
    cfg.mioM0 = opt.mioM0;
    cfg.mioMf = opt.mioMf;
    cfg.seed = opt.seed;
    cfg.vm.acceleration = opt.acceleration;
    cfg.vm.seed = opt.seed;
    cfg.encoding.groupSize = bw::groupSizeFor(ctx);
    if (opt.maxCodonLength > 0) {
        const int groups = opt.maxCodonLength / cfg.encoding.groupSize;
        cfg.encoding.maxGroups = std::max(cfg.encoding.minGroups, groups);
    }
    return cfg;
}

// Builds the on-disk suite from raw search output: minimize each archived
// test against the goals it is retained for, then attach assertions.
bw::SuiteDocument buildSuiteDocument(const bw::Project& project, const bw::FitnessEngine& engine,
                                     const bw::SearchConfig& cfg,
                                     const bw::GeneratedSuite& generated) {
    bw::SuiteDocument doc;
    doc.projectName = project.name;
    doc.config = cfg;
    doc.totalGoals = engine.goalCount();

    std::map<int, std::vector<int>> testGoals;  // test index -> retained goals
    for (const auto& [goal, testIdx] : generated.goalToTest) {
        testGoals[testIdx].push_back(goal);
    }
    std::set<std::string> covered;
    for (const auto& [testIdx, goals] : testGoals) {
        const bw::TestCase& test = generated.tests[static_cast<size_t>(testIdx)];
        bw::AnnotatedTest at;
        at.seed = cfg.seed;
        at.events = bw::minimizeEvents(project, engine, cfg.vm, test.events, goals);
        at.assertions = bw::generateAssertions(project, cfg.vm, at.events);
        for (int g : goals) {
            at.goalIds.push_back(engine.goalId(g));
            covered.insert(engine.goalId(g));
        }
        std::sort(at.goalIds.begin(), at.goalIds.end());
        doc.tests.push_back(std::move(at));
    }
    doc.coveredGoals.assign(covered.begin(), covered.end());
    return doc;
}

int cmdGenerate(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    const bw::Project& project = loaded.project;
    const bw::EventContext ctx = bw::EventContext::build(project, opt.seed);
    const bw::SearchConfig cfg = makeSearchConfig(opt, ctx);
    const bw::FitnessEngine engine(project);

    const bw::GeneratedSuite generated = bw::runSearch(project, ctx, engine, cfg);
    const bw::SuiteDocument doc = buildSuiteDocument(project, engine, cfg, generated);

    fs::create_directories(opt.outDir);
    writeFile(fs::path(opt.outDir) / "suite.json", bw::suiteToJson(doc));
    writeFile(fs::path(opt.outDir) / "coverage.csv", bw::coverageCsv(generated.timeline));
    writeFile(fs::path(opt.outDir) / "metadata.json", bw::sidecarMetadata(kToolVersion));

    std::cout << "covered " << doc.coveredGoals.size() << "/" << doc.totalGoals
              << " goals with " << doc.tests.size() << " tests ("
              << generated.executions << " executions, " << generated.vmSteps
              << " vm steps)\n";
    return 0;
}

int cmdReplay(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    const bw::Project& project = loaded.project;
    bw::SuiteDocument doc;
    try {
        doc = bw::suiteFromJson(readFile(opt.suitePath));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    for (const bw::AnnotatedTest& t : doc.tests) {
        for (const bw::ResolvedEvent& ev : t.events) {
            if (!ev.spec.sprite.empty() && !project.findActor(ev.spec.sprite)) {
                std::cerr << "error: suite references unknown sprite '" << ev.spec.sprite
                          << "'\n";
                return 2;
            }
        }
    }

    bw::VmConfig vmCfg = doc.config.vm;
    if (opt.seedGiven && opt.seed != doc.config.seed) {
        std::cout << "note: replay seed " << opt.seed << " differs from stored seed "
                  << doc.config.seed << "; results are advisory, not canonical\n";
        vmCfg.seed = opt.seed;
    }

    int failedTests = 0;
    for (size_t i = 0; i < doc.tests.size(); ++i) {
        const bw::ReplayResult r = bw::replayTest(project, vmCfg, doc.tests[i]);
        const bool ok = !r.crashed && r.failedAssertions == 0;
        std::cout << "test " << i << ": " << (ok ? "pass" : "FAIL") << " ("
                  << (r.totalAssertions - r.failedAssertions) << "/" << r.totalAssertions
                  << " assertions, " << r.covered.size() << " blocks covered";
        if (r.crashed) std::cout << ", crashed";
        std::cout << ")\n";
        for (const std::string& f : r.failures) std::cout << "  " << f << "\n";
        if (!ok) ++failedTests;
    }
    std::cout << (failedTests == 0 ? "all tests pass" : "failures: " + std::to_string(failedTests))
              << "\n";
    return failedTests == 0 ? 0 : 1;
}

int cmdMinimize(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    const bw::Project& project = loaded.project;
    bw::SuiteDocument doc;
    try {
        doc = bw::suiteFromJson(readFile(opt.suitePath));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const bw::FitnessEngine engine(project);

    std::map<std::string, int> goalIndex;
    for (int g = 0; g < engine.goalCount(); ++g) goalIndex[engine.goalId(g)] = g;

    size_t before = 0, after = 0;
    for (bw::AnnotatedTest& t : doc.tests) {
        std::vector<int> goals;
        for (const std::string& id : t.goalIds) {
            const auto it = goalIndex.find(id);
            if (it != goalIndex.end()) goals.push_back(it->second);
        }
        before += t.events.size();
        t.events = bw::minimizeEvents(project, engine, doc.config.vm, t.events, goals);
        t.assertions = bw::generateAssertions(project, doc.config.vm, t.events);
        after += t.events.size();
    }

    fs::create_directories(opt.outDir);
    writeFile(fs::path(opt.outDir) / "suite.min.json", bw::suiteToJson(doc));
    writeFile(fs::path(opt.outDir) / "metadata.json", bw::sidecarMetadata(kToolVersion));
    std::cout << "minimized " << before << " events to " << after << "\n";
    return 0;
}

int cmdMutate(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    const bw::Project& project = loaded.project;
    bw::SuiteDocument doc;
    try {
        doc = bw::suiteFromJson(readFile(opt.suitePath));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    const std::uint64_t mutantSeed = opt.seedGiven ? opt.seed : doc.config.seed + 1;
    const std::vector<bw::Mutant> mutants = bw::generateMutants(project, mutantSeed);
    const bw::MutationReport report =
        bw::analyzeMutants(project, doc.tests, mutants, doc.config.vm, envWorkers());

    fs::create_directories(opt.outDir);
    writeFile(fs::path(opt.outDir) / "mutation.csv", bw::mutationCsv(report));
    std::ostringstream logText;
    for (const std::string& line : report.log) logText << line << "\n";
    writeFile(fs::path(opt.outDir) / "mutation.log", logText.str());
    writeFile(fs::path(opt.outDir) / "metadata.json", bw::sidecarMetadata(kToolVersion));
    std::cout << "mutants " << report.generated() << ", killed " << report.killed()
              << ", score " << report.score() << " (excluded tests " << report.excludedTests
              << ")\n";
    return 0;
}

int cmdGraphDump(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    const bw::FitnessEngine engine(loaded.project);
    fs::create_directories(opt.outDir);
    writeFile(fs::path(opt.outDir) / "cfg.dot", engine.cfg().toDot());
    writeFile(fs::path(opt.outDir) / "cdg.dot", engine.cdg().toDot());
    std::cout << "wrote cfg.dot and cdg.dot (" << engine.cfg().nodes.size() << " nodes)\n";
    return 0;
}

int cmdBruteForce(const Options& opt) {
    const bw::LoadResult loaded = loadOrExit(opt.projectPath);
    const bw::Project& project = loaded.project;
    const bw::EventContext ctx = bw::EventContext::build(project, opt.seed);
    const bw::BruteForceResult result = bw::bruteForce(project, ctx, opt.maxLen, opt.acceleration);
    if (result.refused) {
        std::cerr << "refused: about " << result.estimatedExecutions
                  << " executions exceed the bound of " << result.bound << "\n";
        return 3;
    }
    std::cout << "executions " << result.executions << ", reachable blocks "
              << result.covered.size() << "/" << result.totalBlocks << "\n";
    for (const std::string& id : result.covered) std::cout << id << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"search-based test generation for block programs"};
    app.require_subcommand(1);
    Options opt;

    const auto addCommon = [&](CLI::App* cmd, bool needsSuite) {
        cmd->add_option("--project", opt.projectPath, "project document (JSON)")->required();
        if (needsSuite) {
            cmd->add_option("--suite", opt.suitePath, "suite file (JSON)")->required();
        }
        auto* seedOpt = cmd->add_option("--seed", opt.seed, "random seed");
        cmd->callback([&opt, seedOpt] { opt.seedGiven = seedOpt->count() > 0; });
        cmd->add_option("--out-dir", opt.outDir, "output directory");
    };

    CLI::App* gen = app.add_subcommand("generate", "generate a test suite");
    addCommon(gen, false);
    gen->add_option("--algorithm", opt.algorithm, "random | mosa | mio")
        ->check(CLI::IsMember({"random", "mosa", "mio"}));
    gen->add_option("--budget-executions", opt.budgetExecutions, "execution-count budget");
    gen->add_option("--budget-steps", opt.budgetSteps, "vm-step budget (default 20000)");
    gen->add_option("--budget-seconds", opt.budgetSeconds, "wall-clock budget");
    gen->add_option("--acceleration", opt.acceleration, "vm acceleration factor")
        ->check(CLI::PositiveNumber);
    gen->add_option("--population", opt.population, "MOSA population size");
    gen->add_option("--crossover-prob", opt.crossoverProb, "MOSA crossover probability");
    gen->add_option("--local-search-prob", opt.localSearchProb, "local search probability");
    gen->add_option("--mio-focus", opt.mioFocus, "MIO focus point F");
    gen->add_option("--mio-n0", opt.mioN0, "MIO initial population cap");
    gen->add_option("--mio-nf", opt.mioNf, "MIO focused population cap");
    gen->add_option("--mio-r0", opt.mioR0, "MIO initial random probability");
    gen->add_option("--mio-rf", opt.mioRf, "MIO focused random probability");
    gen->add_option("--mio-m0", opt.mioM0, "MIO initial mutation count");
    gen->add_option("--mio-mf", opt.mioMf, "MIO focused mutation count");
    gen->add_option("--max-codon-length", opt.maxCodonLength, "genotype codon cap");

    CLI::App* rep = app.add_subcommand("replay", "replay a suite and check assertions");
    addCommon(rep, true);

    CLI::App* min = app.add_subcommand("minimize", "re-minimize every test in a suite");
    addCommon(min, true);

    CLI::App* mut = app.add_subcommand("mutate", "mutation analysis of a suite");
    addCommon(mut, true);

    CLI::App* dump = app.add_subcommand("graph-dump", "write CFG/CDG as graphviz dot");
    addCommon(dump, false);

    CLI::App* brute = app.add_subcommand("brute-force", "exhaustive coverage oracle");
    addCommon(brute, false);
    brute->add_option("--max-len", opt.maxLen, "max event sequence length (<= 5)")
        ->check(CLI::Range(0, 5));
    brute->add_option("--acceleration", opt.acceleration, "vm acceleration factor")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) return cmdGenerate(opt);
    if (rep->parsed()) return cmdReplay(opt);
    if (min->parsed()) return cmdMinimize(opt);
    if (mut->parsed()) return cmdMutate(opt);
    if (dump->parsed()) return cmdGraphDump(opt);
    if (brute->parsed()) return cmdBruteForce(opt);
    return 1;
}
