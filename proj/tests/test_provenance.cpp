#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "cglp/provenance.hpp"

using namespace cglp;

namespace {

std::string rec(const std::string& subj_id, const std::string& subj_attr, const std::string& verb,
                const std::string& obj_id, const std::string& obj_kind,
                const std::string& obj_attr, int64_t ts) {
    std::ostringstream out;
    out << R"({"ts": )" << ts << R"(, "subject": {"id": ")" << subj_id
        << R"(", "kind": "process", "attr": ")" << subj_attr << R"("}, "action": ")" << verb
        << R"(", "object": {"id": ")" << obj_id << R"(", "kind": ")" << obj_kind
        << R"(", "attr": ")" << obj_attr << R"("}})";
    return out.str();
}

ProvenanceGraph ingest(const std::string& text, IngestOptions opts = {},
                       std::vector<std::string>* warnings = nullptr) {
    std::istringstream in(text);
    return ingest_audit_log(in, opts, warnings);
}

}  // namespace

TEST_CASE("attribute rendering follows the kind-word format") {
    CHECK(node_attribute_text({"p1", EntityKind::Process, "movingonup.exe fun.com 81"}) ==
          "process: movingonup.exe fun.com 81");
    CHECK(node_attribute_text({"f1", EntityKind::File, "/142.20.61.135/share"}) ==
          "file: /142.20.61.135/share");
    CHECK(node_attribute_text({"s1", EntityKind::Socket, "127.0.0.1:0"}) == "socket: 127.0.0.1:0");
}

TEST_CASE("action names round-trip and unknown verbs reject") {
    for (int a = 0; a < kActionCount; ++a)
        CHECK(action_from_name(action_name(static_cast<ActionKind>(a))) ==
              static_cast<ActionKind>(a));
    CHECK_THROWS_AS(action_from_name("teleport"), ValidationError);
}

TEST_CASE("ingest builds entities, events, and adjacency") {
    std::string log = rec("p1", "bash", "read", "f1", "file", "/etc/passwd", 5) + "\n" +
                      rec("p1", "bash", "connect", "s1", "socket", "10.0.0.1:80", 3) + "\n" +
                      rec("p2", "curl", "write", "f1", "file", "/etc/passwd", 9) + "\n";
    ProvenanceGraph g = ingest(log);
    CHECK(g.node_count() == 4);
    CHECK(g.edge_count() == 3);
    // Events sorted by timestamp.
    CHECK(g.events()[0].timestamp == 3);
    CHECK(g.events()[0].action == ActionKind::Connect);
    CHECK(g.events()[2].subject == "p2");
    // Adjacency is the sorted union of both directions.
    auto nb = g.neighbors("f1");
    CHECK(nb == std::vector<std::string>{"p1", "p2"});
    CHECK(g.neighbors("p1") == std::vector<std::string>{"f1", "s1"});
}

TEST_CASE("malformed records raise ParseError with the line number") {
    std::string log = rec("p1", "bash", "read", "f1", "file", "/a", 1) + "\nnot json\n";
    CHECK_THROWS_WITH_AS(ingest(log), doctest::Contains("line 2"), ParseError);

    std::string missing = R"({"ts": 1, "subject": {"id": "p", "kind": "process", "attr": "x"}})";
    CHECK_THROWS_AS(ingest(missing), ParseError);
}

TEST_CASE("non-process subjects are rejected") {
    std::string log =
        R"({"ts": 1, "subject": {"id": "f1", "kind": "file", "attr": "/x"}, "action": "read", "object": {"id": "f2", "kind": "file", "attr": "/y"}})";
    CHECK_THROWS_AS(ingest(log), ParseError);
}

TEST_CASE("unknown verb policy: reject vs coerce to open") {
    std::string log = rec("p1", "bash", "mmap", "f1", "file", "/a", 1);
    CHECK_THROWS_AS(ingest(log), ParseError);
    IngestOptions opts;
    opts.unknown_verb = UnknownVerbPolicy::CoerceToOpen;
    std::vector<std::string> warnings;
    ProvenanceGraph g = ingest(log, opts, &warnings);
    CHECK(g.events()[0].action == ActionKind::Open);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("coerced") != std::string::npos);
}

TEST_CASE("dedup drops exact duplicates only") {
    std::string one = rec("p1", "bash", "read", "f1", "file", "/a", 7);
    std::string log = one + "\n" + one + "\n" + rec("p1", "bash", "read", "f1", "file", "/a", 8);
    CHECK(ingest(log).edge_count() == 3);
    IngestOptions opts;
    opts.dedup = true;
    CHECK(ingest(log, opts).edge_count() == 2);
}

TEST_CASE("attribute conflicts keep the first value and warn") {
    std::string log = rec("p1", "bash", "read", "f1", "file", "/a", 1) + "\n" +
                      rec("p1", "zsh", "read", "f1", "file", "/a", 2);
    std::vector<std::string> warnings;
    ProvenanceGraph g = ingest(log, {}, &warnings);
    CHECK(g.entity("p1").attribute == "bash");
    REQUIRE(!warnings.empty());
    CHECK(warnings[0].find("conflict") != std::string::npos);
}

TEST_CASE("serialization round-trips byte-stably") {
    std::string log = rec("p2", "curl", "send", "s1", "socket", "1.2.3.4:443", 10) + "\n" +
                      rec("p1", "bash", "fork", "p2", "process", "curl", 4);
    ProvenanceGraph g = ingest(log);
    std::string ser = serialize_graph(g);
    ProvenanceGraph g2 = parse_graph(ser);
    CHECK(serialize_graph(g2) == ser);
    CHECK(graph_digest(g2) == graph_digest(g));
}

TEST_CASE("fnv1a64 matches known reference values") {
    // Published FNV-1a test vectors.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(to_hex(0x85944171f73967e8ULL) == "85944171f73967e8");
}

TEST_CASE("events referencing unknown entities are rejected at construction") {
    std::map<std::string, Entity> ents;
    ents["p1"] = {"p1", EntityKind::Process, "bash"};
    std::vector<Event> evs{{"p1", ActionKind::Read, "ghost", 1}};
    CHECK_THROWS_AS(ProvenanceGraph(ents, evs), ValidationError);
}
