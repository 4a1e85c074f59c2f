#include "blockwhisker/project.hpp"

#include <unordered_map>

namespace bw {

namespace {

struct OpInfo {
    Opcode op;
    const char* name;
};

constexpr OpInfo kOps[] = {
    {Opcode::Greenflag, "greenflag"},
    {Opcode::KeyPressedHat, "keyPressed"},
    {Opcode::SpriteClicked, "spriteClicked"},
    {Opcode::StageClicked, "stageClicked"},
    {Opcode::BroadcastReceived, "broadcastReceived"},
    {Opcode::StartAsClone, "startAsClone"},
    {Opcode::BackdropSwitched, "backdropSwitched"},
    {Opcode::LoudnessGreaterThan, "loudnessGreaterThan"},
    {Opcode::ProcedureDefinition, "procedureDefinition"},
    {Opcode::If, "if"},
    {Opcode::IfElse, "ifElse"},
    {Opcode::RepeatTimes, "repeatTimes"},
    {Opcode::RepeatUntil, "repeatUntil"},
    {Opcode::Forever, "forever"},
    {Opcode::WaitSeconds, "waitSeconds"},
    {Opcode::WaitUntil, "waitUntil"},
    {Opcode::StopAll, "stopAll"},
    {Opcode::StopScript, "stopScript"},
    {Opcode::CreateClone, "createClone"},
    {Opcode::DeleteClone, "deleteClone"},
    {Opcode::Broadcast, "broadcast"},
    {Opcode::BroadcastAndWait, "broadcastAndWait"},
    {Opcode::Call, "call"},
    {Opcode::GotoXY, "gotoXY"},
    {Opcode::ChangeXY, "changeXY"},
    {Opcode::MoveSteps, "moveSteps"},
    {Opcode::PointTowards, "pointTowards"},
    {Opcode::GlideSecsTo, "glideSecsTo"},
    {Opcode::Say, "say"},
    {Opcode::SayForSecs, "sayForSecs"},
    {Opcode::Think, "think"},
    {Opcode::ThinkForSecs, "thinkForSecs"},
    {Opcode::SwitchCostume, "switchCostume"},
    {Opcode::NextCostume, "nextCostume"},
    {Opcode::SwitchBackdrop, "switchBackdrop"},
    {Opcode::NextBackdrop, "nextBackdrop"},
    {Opcode::Show, "show"},
    {Opcode::Hide, "hide"},
    {Opcode::SetSize, "setSize"},
    {Opcode::PlaySoundUntilDone, "playSoundUntilDone"},
    {Opcode::TouchingSprite, "touchingSprite"},
    {Opcode::TouchingEdge, "touchingEdge"},
    {Opcode::TouchingMousePointer, "touchingMousePointer"},
    {Opcode::KeyPressedQ, "keyPressedQ"},
    {Opcode::MouseDown, "mouseDown"},
    {Opcode::MouseX, "mouseX"},
    {Opcode::MouseY, "mouseY"},
    {Opcode::DistanceTo, "distanceTo"},
    {Opcode::AskAndWait, "askAndWait"},
    {Opcode::Answer, "answer"},
    {Opcode::Timer, "timer"},
    {Opcode::ResetTimer, "resetTimer"},
    {Opcode::Loudness, "loudness"},
    {Opcode::SetVariable, "setVariable"},
    {Opcode::ChangeVariable, "changeVariable"},
    {Opcode::AddToList, "addToList"},
    {Opcode::LengthOfList, "lengthOfList"},
    {Opcode::ItemOfList, "itemOfList"},
    {Opcode::Add, "add"},
    {Opcode::Subtract, "subtract"},
    {Opcode::Multiply, "multiply"},
    {Opcode::Divide, "divide"},
    {Opcode::LessThan, "lessThan"},
    {Opcode::GreaterThan, "greaterThan"},
    {Opcode::Equals, "equals"},
    {Opcode::And, "and"},
    {Opcode::Or, "or"},
    {Opcode::Not, "not"},
    {Opcode::Random, "random"},
    {Opcode::Join, "join"},
    {Opcode::Mod, "mod"},
    {Opcode::Round, "round"},
};

const std::unordered_map<std::string, Opcode>& nameMap() {
    static const std::unordered_map<std::string, Opcode> map = [] {
        std::unordered_map<std::string, Opcode> m;
        for (const auto& info : kOps) m.emplace(info.name, info.op);
        return m;
    }();
    return map;
}

} // namespace

const char* opcodeName(Opcode op) {
    for (const auto& info : kOps) {
        if (info.op == op) return info.name;
    }
    return "?";
}

std::optional<Opcode> opcodeFromName(const std::string& name) {
    auto it = nameMap().find(name);
    if (it == nameMap().end()) return std::nullopt;
    return it->second;
}

bool isHat(Opcode op) {
    switch (op) {
    case Opcode::Greenflag:
    case Opcode::KeyPressedHat:
    case Opcode::SpriteClicked:
    case Opcode::StageClicked:
    case Opcode::BroadcastReceived:
    case Opcode::StartAsClone:
    case Opcode::BackdropSwitched:
    case Opcode::LoudnessGreaterThan:
    case Opcode::ProcedureDefinition:
        return true;
    default:
        return false;
    }
}

bool isReporter(Opcode op) {
    switch (op) {
    case Opcode::TouchingSprite:
    case Opcode::TouchingEdge:
    case Opcode::TouchingMousePointer:
    case Opcode::KeyPressedQ:
    case Opcode::MouseDown:
    case Opcode::MouseX:
    case Opcode::MouseY:
    case Opcode::DistanceTo:
    case Opcode::Answer:
    case Opcode::Timer:
    case Opcode::Loudness:
    case Opcode::LengthOfList:
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
    case Opcode::Not:
    case Opcode::Random:
    case Opcode::Join:
    case Opcode::Mod:
    case Opcode::Round:
        return true;
    default:
        return false;
    }
}

bool isBooleanReporter(Opcode op) {
    switch (op) {
    case Opcode::TouchingSprite:
    case Opcode::TouchingEdge:
    case Opcode::TouchingMousePointer:
    case Opcode::KeyPressedQ:
    case Opcode::MouseDown:
    case Opcode::LessThan:
    case Opcode::GreaterThan:
    case Opcode::Equals:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Not:
        return true;
    default:
        return false;
    }
}

bool isBranching(Opcode op) {
    switch (op) {
    case Opcode::If:
    case Opcode::IfElse:
    case Opcode::RepeatTimes:
    case Opcode::RepeatUntil:
    case Opcode::WaitUntil:
        return true;
    default:
        return false;
    }
}

bool isTimeDependent(Opcode op) {
    switch (op) {
    case Opcode::WaitSeconds:
    case Opcode::SayForSecs:
    case Opcode::ThinkForSecs:
    case Opcode::GlideSecsTo:
    case Opcode::PlaySoundUntilDone:
        return true;
    default:
        return false;
    }
}

bool isCap(Opcode op) {
    switch (op) {
    case Opcode::StopAll:
    case Opcode::StopScript:
    case Opcode::DeleteClone:
    case Opcode::Forever:
        return true;
    default:
        return false;
    }
}

int branchCount(Opcode op) {
    switch (op) {
    case Opcode::If:
    case Opcode::RepeatTimes:
    case Opcode::RepeatUntil:
    case Opcode::Forever:
        return 1;
    case Opcode::IfElse:
        return 2;
    default:
        return 0;
    }
}

Block Block::clone() const {
    Block out;
    out.id = id;
    out.opcode = opcode;
    out.args.reserve(args.size());
    for (const auto& arg : args) {
        if (const auto* v = std::get_if<Value>(&arg)) {
            out.args.emplace_back(*v);
        } else if (const auto* ref = std::get_if<std::string>(&arg)) {
            out.args.emplace_back(*ref);
        } else {
            const auto& sub = std::get<std::unique_ptr<Block>>(arg);
            out.args.emplace_back(sub ? std::make_unique<Block>(sub->clone()) : nullptr);
        }
    }
    out.children.reserve(children.size());
    for (const auto& branch : children) {
        std::vector<Block> copy;
        copy.reserve(branch.size());
        for (const Block& b : branch) copy.push_back(b.clone());
        out.children.push_back(std::move(copy));
    }
    return out;
}

const Actor* Project::stageActor() const {
    for (const auto& a : actors) {
        if (a.isStage) return &a;
    }
    return nullptr;
}

const Actor* Project::findActor(const std::string& name) const {
    for (const auto& a : actors) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

int Project::actorIndex(const std::string& name) const {
    for (size_t i = 0; i < actors.size(); ++i) {
        if (actors[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

} // namespace bw
