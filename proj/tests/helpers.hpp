#pragma once

// Shared fixtures for the test suites: synthetic provenance graphs and a
// central-finite-difference gradient checker.

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "cglp/model.hpp"
#include "cglp/provenance.hpp"
#include "cglp/rng.hpp"

namespace testutil {

// Random heterogeneous graph: every socket touches 1–4 processes, every
// process touches several files, and some processes fork others. Node ids are
// zero-padded so map order is stable and readable.
inline cglp::ProvenanceGraph make_synthetic_graph(size_t n_process, size_t n_file,
                                                  size_t n_socket, uint64_t seed) {
    using namespace cglp;
    Rng rng(seed);
    std::map<std::string, Entity> entities;
    std::vector<std::string> procs, files, socks;
    auto pad = [](size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%04zu", i);
        return std::string(buf);
    };
    for (size_t i = 0; i < n_process; ++i) {
        std::string id = "p" + pad(i);
        entities[id] = {id, EntityKind::Process, "proc" + pad(i) + ".exe host" + pad(i % 7)};
        procs.push_back(id);
    }
    for (size_t i = 0; i < n_file; ++i) {
        std::string id = "f" + pad(i);
        entities[id] = {id, EntityKind::File, "/data/dir" + pad(i % 13) + "/file" + pad(i)};
        files.push_back(id);
    }
    for (size_t i = 0; i < n_socket; ++i) {
        std::string id = "s" + pad(i);
        entities[id] = {id, EntityKind::Socket,
                        "10.0." + std::to_string(i % 250) + ".7:" + std::to_string(1024 + i)};
        socks.push_back(id);
    }

    std::vector<Event> events;
    int64_t ts = 0;
    auto any = [&](const std::vector<std::string>& pool) {
        return pool[rng.next_below(pool.size())];
    };
    for (const auto& s : socks) {
        size_t fan = 1 + rng.next_below(4);
        for (size_t i = 0; i < fan; ++i) {
            std::string p = any(procs);
            events.push_back({p, ActionKind::Connect, s, ++ts});
            events.push_back({p, rng.next_below(2) ? ActionKind::Send : ActionKind::Receive, s,
                              ++ts});
        }
    }
    for (const auto& p : procs) {
        size_t fan = 2 + rng.next_below(5);
        for (size_t i = 0; i < fan; ++i) {
            std::string f = any(files);
            events.push_back({p, rng.next_below(2) ? ActionKind::Read : ActionKind::Write, f,
                              ++ts});
        }
        if (rng.next_below(3) == 0) events.push_back({p, ActionKind::Fork, any(procs), ++ts});
    }
    return ProvenanceGraph(std::move(entities), std::move(events));
}

struct GradCheckStats {
    size_t checked = 0;
    size_t passed = 0;
    double worst_rel = 0.0;
    struct Failure {
        std::string param;
        double analytic, numeric, rel;
    };
    std::vector<Failure> failures;
};

// Central finite differences (step h) on `count` randomly chosen parameter
// scalars vs the analytic gradient. `loss_fn` must rebuild the whole loss on
// a fresh tape from the current parameter values.
template <class LossFn>
GradCheckStats grad_check(cglp::Model<double>& model, LossFn loss_fn, size_t count,
                          uint64_t seed, double h = 1e-5, double tol = 1e-4) {
    using namespace cglp;
    model.params().zero_grads();
    {
        Tape<double> tape;
        auto fwd = model.forward(tape);
        auto loss = loss_fn(fwd);
        tape.backward(loss);
        fwd.harvest();
    }
    auto eval = [&]() {
        Tape<double> tape;
        auto fwd = model.forward(tape);
        return tape.val(loss_fn(fwd))(0, 0);
    };

    Rng rng(seed);
    auto& entries = model.params().entries;
    GradCheckStats stats;
    for (size_t trial = 0; trial < count; ++trial) {
        size_t e = rng.next_below(entries.size());
        size_t i = rng.next_below(entries[e].value.size());
        double orig = entries[e].value.data()[i];
        entries[e].value.data()[i] = orig + h;
        double up = eval();
        entries[e].value.data()[i] = orig - h;
        double down = eval();
        entries[e].value.data()[i] = orig;
        double numeric = (up - down) / (2.0 * h);
        double analytic = entries[e].grad.data()[i];
        double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        double rel = std::abs(numeric - analytic) / denom;
        ++stats.checked;
        if (rel <= tol)
            ++stats.passed;
        else
            stats.failures.push_back({entries[e].name, analytic, numeric, rel});
        stats.worst_rel = std::max(stats.worst_rel, rel);
    }
    return stats;
}

}  // namespace testutil
