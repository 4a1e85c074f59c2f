#include "blockwhisker/loader.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace bw {

using nlohmann::json;

namespace {

// Expected argument count per opcode; -1 means the opcode takes none.
int expectedArity(Opcode op) {
    switch (op) {
    case Opcode::Greenflag:
    case Opcode::SpriteClicked:
    case Opcode::StageClicked:
    case Opcode::StartAsClone:
    case Opcode::Forever:
    case Opcode::StopAll:
    case Opcode::StopScript:
    case Opcode::DeleteClone:
    case Opcode::NextCostume:
    case Opcode::NextBackdrop:
    case Opcode::Show:
    case Opcode::Hide:
    case Opcode::TouchingEdge:
    case Opcode::TouchingMousePointer:
    case Opcode::MouseDown:
    case Opcode::MouseX:
    case Opcode::MouseY:
    case Opcode::Answer:
    case Opcode::Timer:
    case Opcode::ResetTimer:
    case Opcode::Loudness:
        return 0;
    case Opcode::KeyPressedHat:
    case Opcode::BroadcastReceived:
    case Opcode::BackdropSwitched:
    case Opcode::LoudnessGreaterThan:
    case Opcode::ProcedureDefinition:
    case Opcode::If:
    case Opcode::IfElse:
    case Opcode::RepeatTimes:
    case Opcode::RepeatUntil:
    case Opcode::WaitSeconds:
    case Opcode::WaitUntil:
    case Opcode::CreateClone:
    case Opcode::Broadcast:
    case Opcode::BroadcastAndWait:
    case Opcode::Call:
    case Opcode::MoveSteps:
    case Opcode::PointTowards:
    case Opcode::Say:
    case Opcode::Think:
    case Opcode::SwitchCostume:
    case Opcode::SwitchBackdrop:
    case Opcode::SetSize:
    case Opcode::PlaySoundUntilDone:
    case Opcode::TouchingSprite:
    case Opcode::KeyPressedQ:
    case Opcode::DistanceTo:
    case Opcode::AskAndWait:
    case Opcode::LengthOfList:
    case Opcode::Not:
    case Opcode::Round:
        return 1;
    case Opcode::GotoXY:
    case Opcode::ChangeXY:
    case Opcode::SayForSecs:
    case Opcode::ThinkForSecs:
    case Opcode::SetVariable:
    case Opcode::ChangeVariable:
    case Opcode::AddToList:
    case Opcode::ItemOfList:
    case Opcode::Add:
    case Opcode::Subtract:
    case Opcode::Multiply:
    case Opcode::Divide:
    case Opcode::LessThan:
    case Opcode::GreaterThan:
    case Opcode::Equals:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Random:
    case Opcode::Join:
    case Opcode::Mod:
        return 2;
    case Opcode::GlideSecsTo:
        return 3;
    }
    return 0;
}

struct LoadContext {
    std::unordered_set<std::string> blockIds;
    std::vector<std::string> warnings;
    int autoId = 0;
};

Block parseBlock(const json& j, LoadContext& ctx);

BlockArg parseArg(const json& j, LoadContext& ctx) {
    if (j.is_number()) return Value(j.get<double>());
    if (j.is_boolean()) return Value(j.get<bool>());
    if (j.is_string()) return Value(j.get<std::string>());
    if (j.is_object()) {
        if (j.contains("var")) {
            if (!j["var"].is_string()) throw LoadError("variable reference must name a variable");
            return j["var"].get<std::string>();
        }
        if (j.contains("opcode")) {
            Block sub = parseBlock(j, ctx);
            if (!isReporter(sub.opcode)) {
                throw LoadError("block '" + sub.id + "': statement opcode '" +
                                opcodeName(sub.opcode) + "' used as an argument");
            }
            return std::make_unique<Block>(std::move(sub));
        }
    }
    throw LoadError("unsupported argument literal: " + j.dump());
}

Block parseBlock(const json& j, LoadContext& ctx) {
    if (!j.is_object()) throw LoadError("block must be an object: " + j.dump());
    Block b;
    if (j.contains("id")) {
        if (!j["id"].is_string()) throw LoadError("block id must be a string");
        b.id = j["id"].get<std::string>();
    } else {
        b.id = "auto:" + std::to_string(ctx.autoId++);
    }
    if (!ctx.blockIds.insert(b.id).second) throw LoadError("duplicate block id '" + b.id + "'");
    if (!j.contains("opcode") || !j["opcode"].is_string()) {
        throw LoadError("block '" + b.id + "': missing opcode");
    }
    const std::string opName = j["opcode"].get<std::string>();
    const auto op = opcodeFromName(opName);
    if (!op) throw LoadError("block '" + b.id + "': unknown opcode '" + opName + "'");
    b.opcode = *op;

    const json args = j.value("args", json::array());
    if (!args.is_array()) throw LoadError("block '" + b.id + "': args must be an array");
    if (static_cast<int>(args.size()) != expectedArity(b.opcode)) {
        throw LoadError("block '" + b.id + "': opcode '" + opName + "' expects " +
                        std::to_string(expectedArity(b.opcode)) + " args, got " +
                        std::to_string(args.size()));
    }
    for (const auto& a : args) b.args.push_back(parseArg(a, ctx));

    const json children = j.value("children", json::array());
    if (!children.is_array()) throw LoadError("block '" + b.id + "': children must be an array");
    if (static_cast<int>(children.size()) != branchCount(b.opcode)) {
        throw LoadError("block '" + b.id + "': opcode '" + opName + "' expects " +
                        std::to_string(branchCount(b.opcode)) + " branches, got " +
                        std::to_string(children.size()));
    }
    for (const auto& branch : children) {
        if (!branch.is_array()) throw LoadError("block '" + b.id + "': branch must be an array");
        std::vector<Block> seq;
        for (const auto& cb : branch) {
            Block child = parseBlock(cb, ctx);
            if (isHat(child.opcode)) {
                throw LoadError("block '" + child.id + "': hat opcode inside a branch");
            }
            if (isReporter(child.opcode)) {
                throw LoadError("block '" + child.id + "': reporter used as a statement");
            }
            seq.push_back(std::move(child));
        }
        b.children.push_back(std::move(seq));
    }
    return b;
}

Script parseScript(const json& j, LoadContext& ctx, bool customBlock) {
    if (!j.is_object()) throw LoadError("script must be an object");
    Script s;
    if (j.contains("hat") && !j["hat"].is_null()) {
        Block hat = parseBlock(j["hat"], ctx);
        if (!isHat(hat.opcode)) {
            throw LoadError("block '" + hat.id + "': '" + opcodeName(hat.opcode) +
                            "' is not a hat opcode");
        }
        if (customBlock && hat.opcode != Opcode::ProcedureDefinition) {
            throw LoadError("custom block must start with procedureDefinition");
        }
        if (!customBlock && hat.opcode == Opcode::ProcedureDefinition) {
            throw LoadError("procedureDefinition belongs in customBlocks");
        }
        s.hat = std::move(hat);
    } else if (customBlock) {
        throw LoadError("custom block requires a procedureDefinition hat");
    }
    const json body = j.value("body", json::array());
    if (!body.is_array()) throw LoadError("script body must be an array");
    for (const auto& bj : body) {
        Block b = parseBlock(bj, ctx);
        if (isHat(b.opcode)) throw LoadError("block '" + b.id + "': hat opcode inside a body");
        if (isReporter(b.opcode)) {
            throw LoadError("block '" + b.id + "': reporter used as a statement");
        }
        s.body.push_back(std::move(b));
    }
    return s;
}

Value parseValueLiteral(const json& j) {
    if (j.is_number()) return Value(j.get<double>());
    if (j.is_boolean()) return Value(j.get<bool>());
    if (j.is_string()) return Value(j.get<std::string>());
    throw LoadError("unsupported value literal: " + j.dump());
}

Actor parseActor(const json& j, LoadContext& ctx) {
    if (!j.is_object()) throw LoadError("actor must be an object");
    Actor a;
    if (!j.contains("name") || !j["name"].is_string()) throw LoadError("actor missing name");
    a.name = j["name"].get<std::string>();
    a.isStage = j.value("isStage", false);
    for (const auto& cj : j.value("costumes", json::array())) {
        Costume c;
        c.name = cj.value("name", std::string("costume"));
        c.width = cj.value("width", 32.0);
        c.height = cj.value("height", 32.0);
        a.costumes.push_back(std::move(c));
    }
    if (a.costumes.empty()) a.costumes.push_back({"costume1", 32.0, 32.0});
    for (const auto& sj : j.value("sounds", json::array())) {
        Sound snd;
        snd.name = sj.value("name", std::string("sound"));
        snd.durationSeconds = sj.value("durationSeconds", 0.5);
        a.sounds.push_back(std::move(snd));
    }
    for (const auto& [key, value] : j.value("variables", json::object()).items()) {
        a.variables.push_back({key, parseValueLiteral(value)});
    }
    for (const auto& [key, value] : j.value("lists", json::object()).items()) {
        ListDef def;
        def.name = key;
        if (!value.is_array()) throw LoadError("list '" + key + "' initial must be an array");
        for (const auto& item : value) def.initial.push_back(parseValueLiteral(item));
        a.lists.push_back(std::move(def));
    }
    a.x = j.value("x", 0.0);
    a.y = j.value("y", 0.0);
    a.direction = j.value("direction", 90.0);
    a.size = j.value("size", 100.0);
    a.visible = j.value("visible", true);
    a.currentCostume = j.value("currentCostume", 0);
    if (a.currentCostume < 0 || a.currentCostume >= static_cast<int>(a.costumes.size())) {
        a.currentCostume = 0;
    }
    a.volume = j.value("volume", 100.0);
    for (const auto& sj : j.value("scripts", json::array())) {
        a.scripts.push_back(parseScript(sj, ctx, false));
    }
    for (const auto& sj : j.value("customBlocks", json::array())) {
        a.customBlocks.push_back(parseScript(sj, ctx, true));
    }
    return a;
}

void crossValidate(const Project& p, std::vector<std::string>& warnings) {
    std::set<std::string> broadcastsSent;
    std::set<std::string> broadcastsReceived;
    std::set<std::string> backdropNames;
    if (const Actor* stage = p.stageActor()) {
        for (const auto& c : stage->costumes) backdropNames.insert(c.name);
    }

    auto literalArg = [](const Block& b, size_t idx) -> std::optional<std::string> {
        if (idx >= b.args.size()) return std::nullopt;
        if (const auto* v = std::get_if<Value>(&b.args[idx])) return v->asText();
        return std::nullopt;
    };

    for (const auto& actor : p.actors) {
        std::set<std::string> procNames;
        for (const auto& def : actor.customBlocks) {
            if (def.hat) {
                if (const auto* v = std::get_if<Value>(&def.hat->args[0])) {
                    procNames.insert(v->asText());
                }
            }
        }
        auto visitScript = [&](const Script& script) {
            if (script.hat && script.hat->opcode == Opcode::BroadcastReceived) {
                if (const auto name = literalArg(*script.hat, 0)) broadcastsReceived.insert(*name);
            }
            forEachBlock(script.body, [&](const Block& b) {
                switch (b.opcode) {
                case Opcode::Broadcast:
                case Opcode::BroadcastAndWait:
                    if (const auto name = literalArg(b, 0)) broadcastsSent.insert(*name);
                    break;
                case Opcode::CreateClone: {
                    const auto target = literalArg(b, 0);
                    if (target && *target != "myself" && !p.findActor(*target)) {
                        warnings.push_back("block '" + b.id + "': clone target '" + *target +
                                           "' does not name a sprite");
                    }
                    break;
                }
                case Opcode::SwitchBackdrop: {
                    const auto name = literalArg(b, 0);
                    if (name && !backdropNames.count(*name)) {
                        warnings.push_back("block '" + b.id + "': backdrop '" + *name +
                                           "' is not a stage costume");
                    }
                    break;
                }
                case Opcode::TouchingSprite:
                case Opcode::DistanceTo:
                case Opcode::PointTowards: {
                    const auto target = literalArg(b, 0);
                    if (target && *target != "mouse" && !p.findActor(*target)) {
                        warnings.push_back("block '" + b.id + "': target '" + *target +
                                           "' does not name a sprite");
                    }
                    break;
                }
                case Opcode::PlaySoundUntilDone: {
                    const auto name = literalArg(b, 0);
                    if (name) {
                        bool found = false;
                        for (const auto& snd : actor.sounds) found |= snd.name == *name;
                        if (!found) {
                            warnings.push_back("block '" + b.id + "': sound '" + *name +
                                               "' is not in this actor's sound list");
                        }
                    }
                    break;
                }
                case Opcode::Call: {
                    const auto name = literalArg(b, 0);
                    if (!name || !procNames.count(*name)) {
                        throw LoadError("block '" + b.id + "': call targets unknown custom block");
                    }
                    break;
                }
                default:
                    break;
                }
            });
        };
        for (const auto& s : actor.scripts) {
            visitScript(s);
            if (!s.hat) warnings.push_back("actor '" + actor.name + "': script without a hat is never scheduled");
        }
        for (const auto& s : actor.customBlocks) visitScript(s);
    }
    for (const auto& msg : broadcastsSent) {
        if (!broadcastsReceived.count(msg)) {
            warnings.push_back("broadcast '" + msg + "' has no receiver");
        }
    }
    for (const auto& msg : broadcastsReceived) {
        if (!broadcastsSent.count(msg)) {
            warnings.push_back("broadcast receiver '" + msg + "' is never sent");
        }
    }
}

json blockToJson(const Block& b);

json argToJson(const BlockArg& arg) {
    if (const auto* v = std::get_if<Value>(&arg)) {
        if (v->isNumber()) return v->asNumber();
        if (v->isBool()) return v->asBool();
        return v->asText();
    }
    if (const auto* ref = std::get_if<std::string>(&arg)) return json{{"var", *ref}};
    const auto& sub = std::get<std::unique_ptr<Block>>(arg);
    return sub ? blockToJson(*sub) : json();
}

json blockToJson(const Block& b) {
    json j;
    j["id"] = b.id;
    j["opcode"] = opcodeName(b.opcode);
    json args = json::array();
    for (const auto& a : b.args) args.push_back(argToJson(a));
    if (!args.empty()) j["args"] = args;
    if (!b.children.empty()) {
        json children = json::array();
        for (const auto& branch : b.children) {
            json seq = json::array();
            for (const auto& cb : branch) seq.push_back(blockToJson(cb));
            children.push_back(seq);
        }
        j["children"] = children;
    }
    return j;
}

json scriptToJson(const Script& s) {
    json j;
    if (s.hat) j["hat"] = blockToJson(*s.hat);
    json body = json::array();
    for (const auto& b : s.body) body.push_back(blockToJson(b));
    j["body"] = body;
    return j;
}

} // namespace

LoadResult loadProject(const std::string& jsonText) {
    json doc;
    try {
        doc = json::parse(jsonText);
    } catch (const json::parse_error& e) {
        throw LoadError(std::string("document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw LoadError("document root must be an object");

    LoadContext ctx;
    LoadResult result;
    Project& p = result.project;
    p.name = doc.value("name", std::string("project"));
    const json stage = doc.value("stage", json::object());
    p.stage.width = stage.value("width", 480.0);
    p.stage.height = stage.value("height", 360.0);
    if (p.stage.width <= 0 || p.stage.height <= 0) throw LoadError("stage dimensions must be positive");

    if (!doc.contains("actors") || !doc["actors"].is_array()) {
        throw LoadError("document must contain an actors array");
    }
    std::unordered_set<std::string> actorNames;
    for (const auto& aj : doc["actors"]) {
        Actor a = parseActor(aj, ctx);
        if (!actorNames.insert(a.name).second) {
            throw LoadError("duplicate actor name '" + a.name + "'");
        }
        p.actors.push_back(std::move(a));
    }
    int stageCount = 0;
    for (const auto& a : p.actors) stageCount += a.isStage ? 1 : 0;
    if (stageCount != 1) throw LoadError("project must contain exactly one stage actor");

    result.warnings = std::move(ctx.warnings);
    crossValidate(p, result.warnings);
    return result;
}

LoadResult loadProjectFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open project file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return loadProject(buf.str());
}

std::string serializeProject(const Project& p) {
    json doc;
    doc["name"] = p.name;
    doc["stage"] = {{"width", p.stage.width}, {"height", p.stage.height}};
    json actors = json::array();
    for (const auto& a : p.actors) {
        json aj;
        aj["name"] = a.name;
        aj["isStage"] = a.isStage;
        json costumes = json::array();
        for (const auto& c : a.costumes) {
            costumes.push_back({{"name", c.name}, {"width", c.width}, {"height", c.height}});
        }
        aj["costumes"] = costumes;
        if (!a.sounds.empty()) {
            json sounds = json::array();
            for (const auto& s : a.sounds) {
                sounds.push_back({{"name", s.name}, {"durationSeconds", s.durationSeconds}});
            }
            aj["sounds"] = sounds;
        }
        if (!a.variables.empty()) {
            json vars = json::object();
            for (const auto& v : a.variables) vars[v.name] = argToJson(BlockArg(v.initial));
            aj["variables"] = vars;
        }
        if (!a.lists.empty()) {
            json lists = json::object();
            for (const auto& l : a.lists) {
                json items = json::array();
                for (const auto& item : l.initial) items.push_back(argToJson(BlockArg(item)));
                lists[l.name] = items;
            }
            aj["lists"] = lists;
        }
        aj["x"] = a.x;
        aj["y"] = a.y;
        aj["direction"] = a.direction;
        aj["size"] = a.size;
        aj["visible"] = a.visible;
        aj["currentCostume"] = a.currentCostume;
        aj["volume"] = a.volume;
        json scripts = json::array();
        for (const auto& s : a.scripts) scripts.push_back(scriptToJson(s));
        aj["scripts"] = scripts;
        if (!a.customBlocks.empty()) {
            json customs = json::array();
            for (const auto& s : a.customBlocks) customs.push_back(scriptToJson(s));
            aj["customBlocks"] = customs;
        }
        actors.push_back(aj);
    }
    doc["actors"] = actors;
    return doc.dump(2);
}

} // namespace bw
