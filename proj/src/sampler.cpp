#include "cglp/sampler.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include <json.hpp>

namespace cglp {

namespace {

// Induce the event set over a node subset and package it as a Subgraph.
Subgraph induce(const ProvenanceGraph& parent, const std::set<std::string>& nodes,
                std::string seed_id, const std::string& parent_digest) {
    std::map<std::string, Entity> entities;
    for (const auto& id : nodes) entities[id] = parent.entity(id);
    std::vector<Event> events;
    for (const auto& ev : parent.events())
        if (nodes.count(ev.subject) && nodes.count(ev.object)) events.push_back(ev);
    Subgraph sg;
    sg.graph = ProvenanceGraph(std::move(entities), std::move(events));
    sg.seed_id = std::move(seed_id);
    sg.parent_digest = parent_digest;
    return sg;
}

std::vector<std::string> frontier_of(const ProvenanceGraph& g,
                                     const std::vector<std::string>& from,
                                     const std::set<std::string>& exclude) {
    std::set<std::string> out;
    for (const auto& id : from)
        for (const auto& nbr : g.neighbors(id))
            if (!exclude.count(nbr)) out.insert(nbr);
    return {out.begin(), out.end()};
}

std::vector<std::string> pick(const std::vector<std::string>& pool, size_t k, Rng& rng) {
    auto idx = rng.sample_without_replacement(pool.size(), k);
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(pool[i]);
    return out;
}

}  // namespace

std::vector<std::string> type_balanced_sample(const std::vector<std::string>& candidates,
                                              const ProvenanceGraph& g, size_t budget, Rng& rng) {
    if (budget == 0 || candidates.empty()) return {};
    // Per-kind pools in fixed kind order, each pre-shuffled.
    std::vector<std::vector<std::string>> pools(3);
    for (const auto& id : candidates)
        pools[static_cast<int>(g.entity(id).kind)].push_back(id);
    for (auto& pool : pools) pool = pick(pool, pool.size(), rng);
    std::vector<std::string> out;
    std::vector<size_t> taken(3, 0);
    while (out.size() < budget) {
        bool progress = false;
        for (int k = 0; k < 3 && out.size() < budget; ++k) {
            if (taken[k] < pools[k].size()) {
                out.push_back(pools[k][taken[k]++]);
                progress = true;
            }
        }
        if (!progress) break;
    }
    return out;
}

std::vector<Subgraph> sample_activity_subgraphs(const ProvenanceGraph& g,
                                                const SamplingConfig& cfg, SamplingStats* stats) {
    cfg.validate();
    SamplingStats local;
    const std::string parent_digest = graph_digest(g);
    Rng base(cfg.rng_seed);

    std::vector<std::string> seeds;
    for (const auto& [id, e] : g.entities())
        if (e.kind == EntityKind::Socket) seeds.push_back(id);
    local.seeds = seeds.size();

    std::vector<Subgraph> out;
    std::set<uint64_t> seen_node_sets;
    for (const auto& seed : seeds) {
        Rng rng = base.fork(fnv1a64(seed));
        std::set<std::string> sg{seed};

        // Layer 1: up to 3 process neighbors of the seed.
        std::vector<std::string> procs;
        for (const auto& nbr : g.neighbors(seed))
            if (g.entity(nbr).kind == EntityKind::Process) procs.push_back(nbr);
        std::vector<std::string> layer1 = pick(procs, std::min<size_t>(procs.size(), 3), rng);
        sg.insert(layer1.begin(), layer1.end());

        // Layer 2: type-balanced expansion of the layer-1 frontier.
        std::vector<std::string> frontier2 = frontier_of(g, layer1, sg);
        size_t budget = cfg.max_nodes > sg.size() ? cfg.max_nodes - sg.size() : 0;
        std::vector<std::string> layer2 = type_balanced_sample(frontier2, g, budget, rng);
        sg.insert(layer2.begin(), layer2.end());

        // Layer 3: fill only when still under the minimum.
        if (sg.size() < cfg.min_nodes) {
            std::vector<std::string> frontier3 = frontier_of(g, layer2, sg);
            size_t lo = cfg.min_nodes - sg.size();
            size_t hi = cfg.max_nodes - sg.size();
            size_t want = lo + static_cast<size_t>(rng.next_below(hi - lo + 1));
            auto layer3 = pick(frontier3, std::min(want, frontier3.size()), rng);
            sg.insert(layer3.begin(), layer3.end());
        }

        if (sg.size() < cfg.min_nodes || sg.size() > cfg.max_nodes) {
            ++local.dropped_size;
            continue;
        }
        bool has[3] = {false, false, false};
        for (const auto& id : sg) has[static_cast<int>(g.entity(id).kind)] = true;
        if (!(has[0] && has[1] && has[2])) {
            ++local.dropped_kinds;
            continue;
        }
        if (cfg.dedup_by_node_set) {
            std::string key;
            for (const auto& id : sg) {
                key += id;
                key += '\n';
            }
            if (!seen_node_sets.insert(fnv1a64(key)).second) {
                ++local.dropped_dup;
                continue;
            }
        }
        out.push_back(induce(g, sg, seed, parent_digest));
        ++local.emitted;
    }
    if (stats) *stats = local;
    return out;
}

Subgraph extract_seeded_subgraph(const ProvenanceGraph& g,
                                 const std::vector<std::string>& seeds, int hops) {
    if (hops != 2 && hops != 3) throw ValidationError("hops must be 2 or 3");
    if (seeds.empty()) throw ValidationError("at least one seed required");
    std::set<std::string> seed_set;
    for (const auto& s : seeds) {
        if (!g.has_entity(s)) throw NotFoundError("unknown seed id: " + s);
        seed_set.insert(s);
    }

    // 0-1 BFS: entering a process node costs one hop, other intermediates are
    // free, so hop count tracks process steps from the nearest seed.
    std::map<std::string, int> cost;
    std::deque<std::string> dq;
    for (const auto& s : seed_set) {
        cost[s] = 0;
        dq.push_back(s);
    }
    while (!dq.empty()) {
        std::string u = dq.front();
        dq.pop_front();
        int cu = cost[u];
        for (const auto& v : g.neighbors(u)) {
            int w = g.entity(v).kind == EntityKind::Process ? 1 : 0;
            int cv = cu + w;
            if (cv > hops) continue;
            auto it = cost.find(v);
            if (it != cost.end() && it->second <= cv) continue;
            cost[v] = cv;
            if (w == 0)
                dq.push_front(v);
            else
                dq.push_back(v);
        }
    }

    std::set<std::string> nodes;
    for (const auto& [id, c] : cost)
        if (seed_set.count(id) || g.entity(id).kind == EntityKind::Process) nodes.insert(id);

    std::string seed_label;
    for (const auto& s : seed_set) {
        if (!seed_label.empty()) seed_label += ",";
        seed_label += s;
    }
    return induce(g, nodes, seed_label, graph_digest(g));
}

std::string serialize_subgraph(const Subgraph& sg) {
    nlohmann::json j = nlohmann::json::parse(serialize_graph(sg.graph));
    j["parent_digest"] = sg.parent_digest;
    j["seed_id"] = sg.seed_id;
    return j.dump();
}

Subgraph parse_subgraph(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad subgraph JSON: ") + e.what());
    }
    Subgraph sg;
    sg.graph = parse_graph(json_text);
    sg.parent_digest = j.value("parent_digest", "");
    sg.seed_id = j.value("seed_id", "");
    return sg;
}

}  // namespace cglp
