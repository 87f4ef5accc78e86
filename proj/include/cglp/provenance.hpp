#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cglp/errors.hpp"

namespace cglp {

enum class EntityKind { Process, File, Socket };

const char* kind_word(EntityKind k);
EntityKind kind_from_word(const std::string& w);

struct Entity {
    std::string id;
    EntityKind kind = EntityKind::Process;
    std::string attribute;  // command line / file path / ip:port
};

// Rendered form "<kind-word>: <attribute>", e.g. "socket: 127.0.0.1:0".
std::string node_attribute_text(const Entity& e);

enum class ActionKind {
    Read, Write, Execute, Fork, Open, Close, Delete, Connect, Send, Receive
};
inline constexpr int kActionCount = 10;

const char* action_name(ActionKind a);
// Throws ValidationError on an unknown verb.
ActionKind action_from_name(const std::string& name);
bool try_action_from_name(const std::string& name, ActionKind& out);

struct Event {
    std::string subject;  // always a Process entity
    ActionKind action = ActionKind::Read;
    std::string object;
    int64_t timestamp = 0;  // epoch nanoseconds
};

// Immutable once built; events are kept sorted by (timestamp, input order).
class ProvenanceGraph {
public:
    ProvenanceGraph() = default;
    ProvenanceGraph(std::map<std::string, Entity> entities, std::vector<Event> events);

    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::vector<Event>& events() const { return events_; }
    size_t node_count() const { return entities_.size(); }
    size_t edge_count() const { return events_.size(); }

    bool has_entity(const std::string& id) const { return entities_.count(id) != 0; }
    const Entity& entity(const std::string& id) const;

    // Union of in- and out-neighbors, sorted by id. Throws NotFoundError on an
    // unknown id.
    const std::vector<std::string>& neighbors(const std::string& id) const;

private:
    std::map<std::string, Entity> entities_;
    std::vector<Event> events_;
    std::map<std::string, std::vector<std::string>> adjacency_;
};

enum class UnknownVerbPolicy { Reject, CoerceToOpen };

struct IngestOptions {
    bool dedup = false;  // drop exact duplicate (subject, action, object, ts) records
    UnknownVerbPolicy unknown_verb = UnknownVerbPolicy::Reject;
};

// Parse audit JSONL into a graph. Malformed records raise ParseError with the
// line number; a non-process subject raises ValidationError. Attribute
// conflicts for one id keep the first value and append a warning.
ProvenanceGraph ingest_audit_log(std::istream& in, const IngestOptions& opts = {},
                                 std::vector<std::string>* warnings = nullptr);

// Byte-stable graph JSON: entities sorted by id, events by (ts, input order).
std::string serialize_graph(const ProvenanceGraph& g);
ProvenanceGraph parse_graph(const std::string& json_text);

// FNV-1a 64 over the canonical serialization, as 16 hex chars.
std::string graph_digest(const ProvenanceGraph& g);

uint64_t fnv1a64(const std::string& s);
std::string to_hex(uint64_t v);

}  // namespace cglp
