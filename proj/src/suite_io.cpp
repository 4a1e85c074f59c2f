#include "blockwhisker/suite_io.hpp"

#include <chrono>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace bw {

namespace {

using Json = nlohmann::ordered_json;

const EventKind kKinds[] = {
    EventKind::Wait,      EventKind::KeyPress,  EventKind::ClickSprite,
    EventKind::ClickStage, EventKind::TypeText, EventKind::TypeNumber,
    EventKind::MouseDown, EventKind::MouseMove, EventKind::MouseMoveTo,
    EventKind::DragSprite, EventKind::Sound,
};

EventKind eventKindFromName(const std::string& name) {
    for (EventKind k : kKinds) {
        if (name == eventKindName(k)) return k;
    }
    throw std::runtime_error("unknown event kind: " + name);
}

Json eventToJson(const ResolvedEvent& ev) {
    Json j;
    j["kind"] = eventKindName(ev.spec.kind);
    switch (ev.spec.kind) {
    case EventKind::Wait:
        j["duration"] = ev.duration;
        break;
    case EventKind::KeyPress:
        j["key"] = ev.spec.key;
        j["duration"] = ev.duration;
        break;
    case EventKind::ClickSprite:
        j["sprite"] = ev.spec.sprite;
        break;
    case EventKind::ClickStage:
        break;
    case EventKind::TypeText:
        j["text"] = ev.text;
        break;
    case EventKind::TypeNumber:
        j["number"] = ev.number;
        break;
    case EventKind::MouseDown:
        j["press"] = ev.spec.press;
        break;
    case EventKind::MouseMove:
        j["x"] = ev.x;
        j["y"] = ev.y;
        break;
    case EventKind::MouseMoveTo:
        j["sprite"] = ev.spec.sprite;
        break;
    case EventKind::DragSprite:
        j["sprite"] = ev.spec.sprite;
        j["dragTarget"] = ev.spec.dragTarget;
        j["angle"] = ev.angle;
        break;
    case EventKind::Sound:
        j["volume"] = ev.spec.volume;
        break;
    }
    return j;
}

ResolvedEvent eventFromJson(const Json& j) {
    ResolvedEvent ev;
    ev.spec.kind = eventKindFromName(j.at("kind").get<std::string>());
    switch (ev.spec.kind) {
    case EventKind::Wait:
        ev.duration = j.at("duration").get<long long>();
        break;
    case EventKind::KeyPress:
        ev.spec.key = j.at("key").get<std::string>();
        ev.duration = j.at("duration").get<long long>();
        break;
    case EventKind::ClickSprite:
        ev.spec.sprite = j.at("sprite").get<std::string>();
        break;
    case EventKind::ClickStage:
        break;
    case EventKind::TypeText:
        ev.text = j.at("text").get<std::string>();
        break;
    case EventKind::TypeNumber:
        ev.number = j.at("number").get<double>();
        break;
    case EventKind::MouseDown:
        ev.spec.press = j.at("press").get<bool>();
        break;
    case EventKind::MouseMove:
        ev.x = j.at("x").get<double>();
        ev.y = j.at("y").get<double>();
        break;
    case EventKind::MouseMoveTo:
        ev.spec.sprite = j.at("sprite").get<std::string>();
        break;
    case EventKind::DragSprite:
        ev.spec.sprite = j.at("sprite").get<std::string>();
        ev.spec.dragTarget = j.at("dragTarget").get<std::string>();
        ev.angle = j.at("angle").get<long long>();
        break;
    case EventKind::Sound:
        ev.spec.volume = j.at("volume").get<double>();
        break;
    }
    return ev;
}

Json assertionToJson(const Assertion& a) {
    Json j;
    j["kind"] = assertionKindName(a.kind);
    if (!a.target.empty()) j["target"] = a.target;
    if (!a.name.empty()) j["name"] = a.name;
    switch (a.kind) {
    case AssertionKind::Backdrop:
    case AssertionKind::Say:
    case AssertionKind::Variable:
        j["expect"] = a.expectText;
        break;
    case AssertionKind::Position:
        j["x"] = a.expectX;
        j["y"] = a.expectY;
        break;
    case AssertionKind::Visibility:
    case AssertionKind::Touching:
    case AssertionKind::TouchingEdge:
        j["expect"] = a.expectBool;
        break;
    default:
        j["expect"] = a.expectX;
        break;
    }
    return j;
}

Assertion assertionFromJson(const Json& j) {
    Assertion a;
    const auto kind = assertionKindFromName(j.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("unknown assertion kind");
    a.kind = *kind;
    if (j.contains("target")) a.target = j.at("target").get<std::string>();
    if (j.contains("name")) a.name = j.at("name").get<std::string>();
    switch (a.kind) {
    case AssertionKind::Backdrop:
    case AssertionKind::Say:
    case AssertionKind::Variable:
        a.expectText = j.at("expect").get<std::string>();
        break;
    case AssertionKind::Position:
        a.expectX = j.at("x").get<double>();
        a.expectY = j.at("y").get<double>();
        break;
    case AssertionKind::Visibility:
    case AssertionKind::Touching:
    case AssertionKind::TouchingEdge:
        a.expectBool = j.at("expect").get<bool>();
        break;
    default:
        a.expectX = j.at("expect").get<double>();
        break;
    }
    return a;
}

Json configToJson(const SearchConfig& c) {
    Json j;
    j["algorithm"] = algorithmName(c.algorithm);
    j["budgetMode"] = budgetModeName(c.budgetMode);
    j["budget"] = c.budget;
    j["populationSize"] = c.populationSize;
    j["crossoverProb"] = c.crossoverProb;
    j["localSearchProb"] = c.localSearchProb;
    j["newEventProbability"] = c.newEventProbability;
    j["mioF"] = c.mioF;
    j["mioN0"] = c.mioN0;
    j["mioNf"] = c.mioNf;
    j["mioR0"] = c.mioR0;
    j["mioRf"] = c.mioRf;
    j["mioM0"] = c.mioM0;
    j["mioMf"] = c.mioMf;
    j["seed"] = c.seed;
    j["minGroups"] = c.encoding.minGroups;
    j["maxGroups"] = c.encoding.maxGroups;
    j["codonMax"] = c.encoding.codonMax;
    j["stepTimeMs"] = c.vm.stepTimeMs;
    j["acceleration"] = c.vm.acceleration;
    j["cloneLimit"] = c.vm.cloneLimit;
    return j;
}

SearchConfig configFromJson(const Json& j) {
    SearchConfig c;
    c.algorithm = algorithmFromName(j.at("algorithm").get<std::string>());
    c.budgetMode = budgetModeFromName(j.at("budgetMode").get<std::string>());
    c.budget = j.at("budget").get<long long>();
    c.populationSize = j.at("populationSize").get<int>();
    c.crossoverProb = j.at("crossoverProb").get<double>();
    c.localSearchProb = j.at("localSearchProb").get<double>();
    c.newEventProbability = j.at("newEventProbability").get<double>();
    c.mioF = j.at("mioF").get<double>();
    c.mioN0 = j.at("mioN0").get<int>();
    c.mioNf = j.at("mioNf").get<int>();
    c.mioR0 = j.at("mioR0").get<double>();
    c.mioRf = j.at("mioRf").get<double>();
    c.mioM0 = j.at("mioM0").get<int>();
    c.mioMf = j.at("mioMf").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.encoding.minGroups = j.at("minGroups").get<int>();
    c.encoding.maxGroups = j.at("maxGroups").get<int>();
    c.encoding.codonMax = j.at("codonMax").get<std::uint32_t>();
    c.vm.stepTimeMs = j.at("stepTimeMs").get<int>();
    c.vm.acceleration = j.at("acceleration").get<int>();
    c.vm.cloneLimit = j.at("cloneLimit").get<int>();
    c.vm.seed = c.seed;
    return c;
}

}  // namespace

const char* algorithmName(Algorithm a) {
    switch (a) {
    case Algorithm::Random: return "random";
    case Algorithm::Mosa: return "mosa";
    case Algorithm::Mio: return "mio";
    }
    return "mosa";
}

Algorithm algorithmFromName(const std::string& name) {
    if (name == "random") return Algorithm::Random;
    if (name == "mosa") return Algorithm::Mosa;
    if (name == "mio") return Algorithm::Mio;
    throw std::runtime_error("unknown algorithm: " + name);
}

const char* budgetModeName(BudgetMode m) {
    switch (m) {
    case BudgetMode::Steps: return "steps";
    case BudgetMode::Executions: return "executions";
    case BudgetMode::Seconds: return "seconds";
    }
    return "steps";
}

BudgetMode budgetModeFromName(const std::string& name) {
    if (name == "steps") return BudgetMode::Steps;
    if (name == "executions") return BudgetMode::Executions;
    if (name == "seconds") return BudgetMode::Seconds;
    throw std::runtime_error("unknown budget mode: " + name);
}

std::string suiteToJson(const SuiteDocument& doc) {
    Json j;
    j["version"] = doc.version;
    j["project"] = doc.projectName;
    j["config"] = configToJson(doc.config);
    j["totalGoals"] = doc.totalGoals;
    j["coveredGoals"] = doc.coveredGoals;
    Json tests = Json::array();
    for (const AnnotatedTest& t : doc.tests) {
        Json jt;
        jt["seed"] = t.seed;
        jt["goals"] = t.goalIds;
        Json events = Json::array();
        for (const ResolvedEvent& ev : t.events) events.push_back(eventToJson(ev));
        jt["events"] = std::move(events);
        Json asserts = Json::array();
        for (const auto& list : t.assertions) {
            Json one = Json::array();
            for (const Assertion& a : list) one.push_back(assertionToJson(a));
            asserts.push_back(std::move(one));
        }
        jt["assertions"] = std::move(asserts);
        tests.push_back(std::move(jt));
    }
    j["tests"] = std::move(tests);
    return j.dump(2) + "\n";
}

SuiteDocument suiteFromJson(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("suite parse error: ") + e.what());
    }
    SuiteDocument doc;
    doc.version = j.at("version").get<int>();
    if (doc.version != 1) {
        throw std::runtime_error("unsupported suite version " + std::to_string(doc.version));
    }
    doc.projectName = j.at("project").get<std::string>();
    doc.config = configFromJson(j.at("config"));
    doc.totalGoals = j.at("totalGoals").get<int>();
    doc.coveredGoals = j.at("coveredGoals").get<std::vector<std::string>>();
    for (const Json& jt : j.at("tests")) {
        AnnotatedTest t;
        t.seed = jt.at("seed").get<std::uint64_t>();
        t.goalIds = jt.at("goals").get<std::vector<std::string>>();
        for (const Json& je : jt.at("events")) t.events.push_back(eventFromJson(je));
        for (const Json& jl : jt.at("assertions")) {
            std::vector<Assertion> list;
            for (const Json& ja : jl) list.push_back(assertionFromJson(ja));
            t.assertions.push_back(std::move(list));
        }
        doc.tests.push_back(std::move(t));
    }
    return doc;
}

std::string coverageCsv(const std::vector<CoveragePoint>& timeline) {
    std::ostringstream os;
    os << "executionIndex,vmStepsUsed,coveredBlocks,totalBlocks\n";
    for (const CoveragePoint& p : timeline) {
        os << p.executionIndex << "," << p.vmStepsUsed << "," << p.coveredBlocks << ","
           << p.totalBlocks << "\n";
    }
    return os.str();
}

std::string sidecarMetadata(const std::string& toolVersion) {
    Json j;
    j["tool"] = "blockwhisker";
    j["toolVersion"] = toolVersion;
    j["generatedAtUnixMs"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    return j.dump(2) + "\n";
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace bw
