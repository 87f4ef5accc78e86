#include "cglp/training.hpp"

#include <cstdio>

#include "cglp/tokenizer.hpp"

namespace cglp {

double lr_at(double epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw ValidationError("epoch must be non-negative");
    if (cfg.warmup_epochs > 0 && epoch < cfg.warmup_epochs)
        return cfg.learning_rate * epoch / cfg.warmup_epochs;
    double total = static_cast<double>(cfg.epochs);
    if (total <= cfg.warmup_epochs) return cfg.learning_rate;
    double progress = std::min(1.0, (epoch - cfg.warmup_epochs) / (total - cfg.warmup_epochs));
    double cosine = 0.5 * (1.0 + std::cos(progress * 3.14159265358979323846));
    return cfg.min_lr + (cfg.learning_rate - cfg.min_lr) * cosine;
}

MaskedTokens mask_tokens(const std::vector<int>& ids, double ratio, Rng& rng) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("mask_ratio must be in (0, 1)");
    std::vector<int> candidates;
    for (size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != Tokenizer::kCls && ids[i] != Tokenizer::kPad)
            candidates.push_back(static_cast<int>(i));
    MaskedTokens out;
    out.ids = ids;
    if (candidates.empty()) return out;
    size_t n = std::max<size_t>(
        1, static_cast<size_t>(std::llround(ratio * static_cast<double>(candidates.size()))));
    n = std::min(n, candidates.size());
    auto picks = rng.sample_without_replacement(candidates.size(), n);
    for (size_t p : picks) out.positions.push_back(candidates[p]);
    std::sort(out.positions.begin(), out.positions.end());
    for (int pos : out.positions) out.ids[pos] = Tokenizer::kMask;
    return out;
}

int mask_node(size_t node_count, Rng& rng) {
    if (node_count == 0) throw ValidationError("cannot mask a node in an empty graph");
    return static_cast<int>(rng.next_below(node_count));
}

std::string format_loss_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,gtc,gtm,mlm,mgm,total,lr\n";
    char buf[256];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                      e.losses.gtc, e.losses.gtm, e.losses.mlm, e.losses.mgm, e.total, e.lr);
        out += buf;
    }
    return out;
}

}  // namespace cglp
