#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blockwhisker/project.hpp"
#include "blockwhisker/vm.hpp"

namespace bw {

enum class EventKind {
    Wait,
    KeyPress,
    ClickSprite,
    ClickStage,
    TypeText,
    TypeNumber,
    MouseDown,
    MouseMove,
    MouseMoveTo,
    DragSprite,
    Sound,
};

const char* eventKindName(EventKind k);
int openParamCount(EventKind k);

// One extractable input event with its inferred parameters fixed.
struct EventSpec {
    EventKind kind = EventKind::Wait;
    std::string key;        // KeyPress
    std::string sprite;     // ClickSprite target, MouseMoveTo sprite, DragSprite dragged sprite
    std::string dragTarget; // DragSprite: sprite name or "edge"
    bool press = true;      // MouseDown status to set
    double volume = 50.0;   // Sound

    // Stable identity string; sets are duplicate-free under it and it doubles
    // as the serialized form.
    std::string identity() const;
    bool operator==(const EventSpec& other) const { return identity() == other.identity(); }
};

// Per-project extraction context: ask classification, the TypeText answer
// pool, the fixed parameter-codon count, and decode bounds.
struct EventContext {
    const Project* project = nullptr;
    std::map<std::string, EventKind> askKinds; // askAndWait block id -> TypeText/TypeNumber
    std::vector<std::string> textPool;
    int numParameterCodons = 1;
    int waitDurationBound = 50;
    int keyPressDurationBound = 50;
    long long soundDurationSteps = 10;

    static EventContext build(const Project& project, std::uint64_t seed);
};

std::vector<EventSpec> staticExtract(const EventContext& ctx);
std::vector<EventSpec> dynamicExtract(const EventContext& ctx, const Vm& vm);

// An event with its open parameters filled in from codons.
struct ResolvedEvent {
    EventSpec spec;
    long long duration = 0; // Wait, KeyPress
    double x = 0, y = 0;    // MouseMove
    double number = 0;      // TypeNumber
    std::string text;       // TypeText
    long long angle = 0;    // DragSprite

    std::string describe() const;
};

// Fills open parameters of events[selector mod events.size()] from the
// remaining codons of one group.
ResolvedEvent resolveEvent(const EventContext& ctx, const std::vector<EventSpec>& events,
                           const std::vector<std::uint32_t>& group);

void applyEvent(Vm& vm, const ResolvedEvent& ev);

// Greenflag step followed by the events; afterEach(i) runs after event i.
void runEventSequence(Vm& vm, const std::vector<ResolvedEvent>& events,
                      const std::function<void(std::size_t)>& afterEach = {});

} // namespace bw
