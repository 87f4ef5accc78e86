#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cglp/provenance.hpp"
#include "cglp/rng.hpp"

namespace cglp {

struct SamplingConfig {
    size_t min_nodes = 10;
    size_t max_nodes = 20;
    uint64_t rng_seed = 0;
    bool dedup_by_node_set = false;

    void validate() const {
        if (min_nodes < 1 || min_nodes > max_nodes)
            throw ValidationError("sampling config requires 1 <= min_nodes <= max_nodes");
    }
};

// Induced subgraph plus its provenance: the seed it grew from and the digest
// of the parent graph.
struct Subgraph {
    ProvenanceGraph graph;
    std::string seed_id;
    std::string parent_digest;
};

struct SamplingStats {
    size_t seeds = 0;
    size_t emitted = 0;
    size_t dropped_size = 0;   // outside [min_nodes, max_nodes] after layer 3
    size_t dropped_kinds = 0;  // missing an entity kind
    size_t dropped_dup = 0;
};

// Three-layer BFS expansion from every socket node: layer 1 samples process
// neighbors, layer 2 type-balanced neighbors, layer 3 fills only when the
// candidate is still under min_nodes. Candidates failing the size or
// kind-coverage validation are dropped (counted in stats).
std::vector<Subgraph> sample_activity_subgraphs(const ProvenanceGraph& g,
                                                const SamplingConfig& cfg,
                                                SamplingStats* stats = nullptr);

// At most `budget` ids with per-kind counts differing by at most one where
// availability permits.
std::vector<std::string> type_balanced_sample(const std::vector<std::string>& candidates,
                                              const ProvenanceGraph& g, size_t budget, Rng& rng);

// Seed-anchored test subgraph: seeds plus process nodes within `hops`
// process-steps of any seed (non-process intermediates do not consume a hop).
Subgraph extract_seeded_subgraph(const ProvenanceGraph& g,
                                 const std::vector<std::string>& seeds, int hops);

// Subgraph JSON: graph schema plus "parent_digest" and "seed_id".
std::string serialize_subgraph(const Subgraph& sg);
Subgraph parse_subgraph(const std::string& json_text);

}  // namespace cglp
