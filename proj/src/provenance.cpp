#include "cglp/provenance.hpp"

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cglp {

using nlohmann::json;

const char* kind_word(EntityKind k) {
    switch (k) {
        case EntityKind::Process: return "process";
        case EntityKind::File: return "file";
        case EntityKind::Socket: return "socket";
    }
    return "?";
}

EntityKind kind_from_word(const std::string& w) {
    if (w == "process") return EntityKind::Process;
    if (w == "file") return EntityKind::File;
    if (w == "socket") return EntityKind::Socket;
    throw ValidationError("unknown entity kind: " + w);
}

std::string node_attribute_text(const Entity& e) {
    return std::string(kind_word(e.kind)) + ": " + e.attribute;
}

static const char* kActionNames[kActionCount] = {
    "read", "write", "execute", "fork", "open",
    "close", "delete", "connect", "send", "receive"};

const char* action_name(ActionKind a) { return kActionNames[static_cast<int>(a)]; }

bool try_action_from_name(const std::string& name, ActionKind& out) {
    for (int i = 0; i < kActionCount; ++i)
        if (name == kActionNames[i]) {
            out = static_cast<ActionKind>(i);
            return true;
        }
    return false;
}

ActionKind action_from_name(const std::string& name) {
    ActionKind a;
    if (!try_action_from_name(name, a)) throw ValidationError("unknown action verb: " + name);
    return a;
}

ProvenanceGraph::ProvenanceGraph(std::map<std::string, Entity> entities,
                                 std::vector<Event> events)
    : entities_(std::move(entities)), events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    std::map<std::string, std::set<std::string>> adj;
    for (const auto& ev : events_) {
        if (!entities_.count(ev.subject) || !entities_.count(ev.object))
            throw ValidationError("event references unknown entity");
        if (entities_.at(ev.subject).kind != EntityKind::Process)
            throw ValidationError("event subject is not a process: " + ev.subject);
        adj[ev.subject].insert(ev.object);
        adj[ev.object].insert(ev.subject);
    }
    for (auto& [id, nbrs] : adj)
        adjacency_[id] = std::vector<std::string>(nbrs.begin(), nbrs.end());
}

const Entity& ProvenanceGraph::entity(const std::string& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw NotFoundError("unknown entity id: " + id);
    return it->second;
}

const std::vector<std::string>& ProvenanceGraph::neighbors(const std::string& id) const {
    if (!entities_.count(id)) throw NotFoundError("unknown entity id: " + id);
    static const std::vector<std::string> kEmpty;
    auto it = adjacency_.find(id);
    return it == adjacency_.end() ? kEmpty : it->second;
}

namespace {

Entity parse_endpoint(const json& j, size_t line_no) {
    if (!j.is_object() || !j.contains("id") || !j.contains("kind") || !j.contains("attr"))
        throw ParseError(line_no, "endpoint must have id/kind/attr");
    Entity e;
    e.id = j.at("id").get<std::string>();
    e.kind = kind_from_word(j.at("kind").get<std::string>());
    e.attribute = j.at("attr").get<std::string>();
    if (e.attribute.empty()) throw ParseError(line_no, "empty attribute for entity " + e.id);
    return e;
}

void admit_entity(std::map<std::string, Entity>& entities, const Entity& e,
                  std::vector<std::string>* warnings) {
    auto [it, inserted] = entities.emplace(e.id, e);
    if (!inserted && (it->second.attribute != e.attribute || it->second.kind != e.kind)) {
        if (warnings)
            warnings->push_back("entity " + e.id + ": attribute conflict, keeping first value");
    }
}

}  // namespace

ProvenanceGraph ingest_audit_log(std::istream& in, const IngestOptions& opts,
                                 std::vector<std::string>* warnings) {
    std::map<std::string, Entity> entities;
    std::vector<Event> events;
    std::set<std::tuple<std::string, int, std::string, int64_t>> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, std::string("bad JSON: ") + e.what());
        }
        try {
            if (!rec.contains("ts") || !rec.contains("subject") || !rec.contains("action") ||
                !rec.contains("object"))
                throw ValidationError("record must have ts/subject/action/object");
            Entity subj = parse_endpoint(rec.at("subject"), line_no);
            if (subj.kind != EntityKind::Process)
                throw ValidationError("subject must be a process entity");
            Entity obj = parse_endpoint(rec.at("object"), line_no);
            std::string verb = rec.at("action").get<std::string>();
            ActionKind action;
            if (!try_action_from_name(verb, action)) {
                if (opts.unknown_verb == UnknownVerbPolicy::Reject)
                    throw ValidationError("unknown action verb: " + verb);
                action = ActionKind::Open;
                if (warnings)
                    warnings->push_back("line " + std::to_string(line_no) + ": verb '" + verb +
                                        "' coerced to open");
            }
            int64_t ts = rec.at("ts").get<int64_t>();
            if (ts < 0) throw ValidationError("negative timestamp");
            if (opts.dedup &&
                !seen.emplace(subj.id, static_cast<int>(action), obj.id, ts).second) {
                admit_entity(entities, subj, warnings);
                admit_entity(entities, obj, warnings);
                continue;
            }
            admit_entity(entities, subj, warnings);
            admit_entity(entities, obj, warnings);
            events.push_back(Event{subj.id, action, obj.id, ts});
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return ProvenanceGraph(std::move(entities), std::move(events));
}

std::string serialize_graph(const ProvenanceGraph& g) {
    json out;
    out["entities"] = json::array();
    for (const auto& [id, e] : g.entities())
        out["entities"].push_back(
            {{"id", e.id}, {"kind", kind_word(e.kind)}, {"attr", e.attribute}});
    out["events"] = json::array();
    for (const auto& ev : g.events())
        out["events"].push_back({{"ts", ev.timestamp},
                                 {"subject", ev.subject},
                                 {"action", action_name(ev.action)},
                                 {"object", ev.object}});
    return out.dump();
}

ProvenanceGraph parse_graph(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad graph JSON: ") + e.what());
    }
    std::map<std::string, Entity> entities;
    for (const auto& je : j.at("entities")) {
        Entity e;
        e.id = je.at("id").get<std::string>();
        e.kind = kind_from_word(je.at("kind").get<std::string>());
        e.attribute = je.at("attr").get<std::string>();
        if (e.attribute.empty()) throw ValidationError("empty attribute for entity " + e.id);
        entities[e.id] = e;
    }
    std::vector<Event> events;
    for (const auto& je : j.at("events"))
        events.push_back(Event{je.at("subject").get<std::string>(),
                               action_from_name(je.at("action").get<std::string>()),
                               je.at("object").get<std::string>(),
                               je.at("ts").get<int64_t>()});
    return ProvenanceGraph(std::move(entities), std::move(events));
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string graph_digest(const ProvenanceGraph& g) { return to_hex(fnv1a64(serialize_graph(g))); }

}  // namespace cglp
