#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "cglp/model.hpp"
#include "cglp/synth.hpp"

namespace cglp {

struct TrainConfig {
    size_t batch_size = 8;
    double alpha = 0.7;  // loss-balancing weight on the contrastive term
    double learning_rate = 2e-4;
    double weight_decay = 0.01;
    size_t epochs = 100;
    double warmup_epochs = 7;
    double min_lr = 1e-5;
    double mask_ratio = 0.15;
    size_t nodes_masked_per_graph = 1;
    uint64_t rng_seed = 0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    size_t checkpoint_every = 1;  // epochs; 0 disables periodic checkpoints

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
        if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
            throw ValidationError("mask_ratio must be in (0, 1)");
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (epochs < 1) throw ValidationError("epochs must be >= 1");
        if (warmup_epochs < 0 || warmup_epochs > static_cast<double>(epochs))
            throw ValidationError("warmup_epochs must lie within [0, epochs]");
        if (min_lr > learning_rate) throw ValidationError("min_lr must not exceed learning_rate");
    }
};

// Linear warmup to learning_rate, then cosine decay to min_lr at the final
// epoch. `epoch` may be fractional (steps within an epoch).
double lr_at(double epoch, const TrainConfig& cfg);

struct MaskedTokens {
    std::vector<int> ids;        // with [MASK] substitutions
    std::vector<int> positions;  // masked slots, ascending
};

// Masks exactly max(1, round(ratio * maskable)) positions; [CLS] and [PAD]
// are never candidates. Returns empty positions when nothing is maskable.
MaskedTokens mask_tokens(const std::vector<int>& ids, double ratio, Rng& rng);

// Uniform choice of the node whose input feature is replaced.
int mask_node(size_t node_count, Rng& rng);

// Row-softmax pair-probability matrix p[i][j] = exp(zg_i.zt_j / tau) / sum_k.
template <class T>
Matrix<T> similarity_probs(const Matrix<T>& zg, const Matrix<T>& zt, T tau) {
    if (tau <= T(0)) throw ValidationError("temperature must be positive");
    if (zg.rows() != zt.rows() || zg.cols() != zt.cols())
        throw ShapeError("similarity_probs: shape mismatch");
    if (!zg.all_finite() || !zt.all_finite())
        throw NumericError("non-finite embedding in similarity matrix");
    Matrix<T> p(zg.rows(), zt.rows());
    for (size_t i = 0; i < zg.rows(); ++i) {
        for (size_t j = 0; j < zt.rows(); ++j)
            p(i, j) = kernels::dot(zg.row(i), zt.row(j), zg.cols()) / tau;
        kernels::softmax_inplace(p.row(i), p.cols());
    }
    return p;
}

struct HardNegatives {
    std::vector<int> text_for_graph;   // negative text index for each graph i
    std::vector<int> graph_for_text;   // negative graph index for each text i
};

// Sample one negative per pair, proportional to the off-diagonal row
// probabilities; never the positive itself. Requires B >= 2.
template <class T>
HardNegatives mine_hard_negatives(const Matrix<T>& p_g2t, const Matrix<T>& p_t2g, Rng& rng) {
    const size_t b = p_g2t.rows();
    if (b < 2) throw ValidationError("hard negatives require batch size >= 2");
    auto draw_row = [&](const Matrix<T>& p, size_t i) {
        double total = 0;
        for (size_t j = 0; j < b; ++j)
            if (j != i) total += static_cast<double>(p(i, j));
        double u = rng.next_double() * total;
        double acc = 0;
        int last = -1;
        for (size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            acc += static_cast<double>(p(i, j));
            last = static_cast<int>(j);
            if (u < acc) return last;
        }
        return last;
    };
    HardNegatives out;
    out.text_for_graph.resize(b);
    out.graph_for_text.resize(b);
    for (size_t i = 0; i < b; ++i) out.text_for_graph[i] = draw_row(p_g2t, i);
    for (size_t i = 0; i < b; ++i) out.graph_for_text[i] = draw_row(p_t2g, i);
    return out;
}

struct LossComponents {
    double gtc = 0, gtm = 0, mlm = 0, mgm = 0;
};

inline double total_loss(const LossComponents& c, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    return alpha * c.gtc + (1.0 - alpha) * (c.gtm + c.mlm + c.mgm);
}

// Pre-tokenized sample ready for the encoders.
struct PreparedSample {
    EncodedGraph graph;
    std::vector<int> report_ids;
};

template <class T>
std::vector<PreparedSample> prepare_dataset(const std::vector<PairedSample>& dataset,
                                            const Tokenizer& tok, Model<T>& model) {
    model.set_tokenizer(tok);
    std::vector<PreparedSample> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset)
        out.push_back({encode_graph_structure(s.graph.graph, tok), tok.encode(s.report)});
    return out;
}

// Batch loss graph on a fresh tape. Skips GTM/MLM/MGM pieces that are not
// applicable (B==1, nothing maskable), recording a notice.
template <class T>
struct BatchLoss {
    typename Tape<T>::Var total = -1;
    LossComponents values;
    std::vector<std::string> notices;
};

// Stop-gradient quantities of one batch: the mined hard negatives and the
// detached node-reconstruction targets. A finite-difference gradient check
// must hold these fixed across evaluations (the analytic gradient treats them
// as constants), so build_batch_loss can capture them on a first call and
// reuse them afterwards.
template <class T>
struct BatchFrozen {
    bool valid = false;
    HardNegatives negatives;
    std::vector<Matrix<T>> mgm_targets;  // one row vector per batch element
};

template <class T>
BatchLoss<T> build_batch_loss(Model<T>& model, typename Model<T>::Forward& fwd,
                              const std::vector<PreparedSample>& samples,
                              const std::vector<size_t>& batch, const TrainConfig& cfg,
                              Rng& mask_rng, Rng& neg_rng, BatchFrozen<T>* frozen = nullptr) {
    using Var = typename Tape<T>::Var;
    Tape<T>& tape = fwd.tape;
    const size_t b = batch.size();
    if (b == 0) throw ValidationError("empty batch");
    const bool norm = model.config().normalize_embeddings;

    // Unimodal encodes, shared across objectives.
    std::vector<Var> text_states(b), text_cls(b), node_states(b), graph_pooled(b), node_feats(b);
    for (size_t i = 0; i < b; ++i) {
        const auto& s = samples[batch[i]];
        auto te = model.text_encode(fwd, s.report_ids);
        text_states[i] = te.states;
        text_cls[i] = te.cls;
        auto ge = model.graph_encode(fwd, s.graph);
        node_states[i] = ge.node_states;
        graph_pooled[i] = ge.pooled;
        node_feats[i] = ge.node_features;
    }

    Var zg = tape.concat_rows(graph_pooled);
    Var zt = tape.concat_rows(text_cls);
    if (norm) {
        zg = tape.l2_normalize_rows(zg);
        zt = tape.l2_normalize_rows(zt);
    }
    Var tau = model.temperature(fwd);
    Var inv_tau = tape.reciprocal(tau);
    Var sims = tape.scale_by(tape.matmul(zg, tape.transpose(zt)), inv_tau);

    std::vector<int> diag(b);
    for (size_t i = 0; i < b; ++i) diag[i] = static_cast<int>(i);
    Var gtc = tape.scale(
        tape.add(tape.ce_mean(sims, diag), tape.ce_mean(tape.transpose(sims), diag)), T(0.5));

    BatchLoss<T> out;
    std::vector<Var> terms;
    // total = alpha * gtc + (1 - alpha) * (gtm + mlm + mgm)
    Var total = tape.scale(gtc, static_cast<T>(cfg.alpha));
    out.values.gtc = static_cast<double>(tape.val(gtc)(0, 0));

    // --- GTM with hard negatives ---
    if (b >= 2) {
        // Mining uses detached similarity values.
        Matrix<T> zg_v = tape.val(zg), zt_v = tape.val(zt);
        T tau_v = tape.val(tau)(0, 0);
        Matrix<T> p_g2t = similarity_probs(zg_v, zt_v, tau_v);
        Matrix<T> p_t2g = similarity_probs(zt_v, zg_v, tau_v);
        HardNegatives negs = mine_hard_negatives(p_g2t, p_t2g, neg_rng);
        if (frozen && frozen->valid)
            negs = frozen->negatives;
        else if (frozen)
            frozen->negatives = negs;

        std::vector<Var> logit_rows;
        std::vector<int> labels;
        auto match_logits = [&](size_t gi, size_t ti) {
            auto joint = model.multimodal_encode(fwd, text_states[ti], node_states[gi]);
            return model.gtm_logits(fwd, joint.pooled);
        };
        for (size_t i = 0; i < b; ++i) {
            logit_rows.push_back(match_logits(i, i));
            labels.push_back(1);
        }
        for (size_t i = 0; i < b; ++i) {
            logit_rows.push_back(match_logits(i, negs.text_for_graph[i]));
            labels.push_back(0);
        }
        for (size_t i = 0; i < b; ++i) {
            logit_rows.push_back(match_logits(negs.graph_for_text[i], i));
            labels.push_back(0);
        }
        Var gtm = tape.ce_mean(tape.concat_rows(logit_rows), labels);
        out.values.gtm = static_cast<double>(tape.val(gtm)(0, 0));
        total = tape.add(total, tape.scale(gtm, static_cast<T>(1.0 - cfg.alpha)));
    } else {
        out.notices.push_back("gtm skipped: batch size < 2");
    }

    // --- MLM: recover masked tokens with graph context ---
    {
        std::vector<Var> logit_rows;
        std::vector<int> targets;
        for (size_t i = 0; i < b; ++i) {
            const auto& ids = samples[batch[i]].report_ids;
            MaskedTokens masked = mask_tokens(ids, cfg.mask_ratio, mask_rng);
            if (masked.positions.empty()) {
                out.notices.push_back("mlm skipped for sample " +
                                      std::to_string(batch[i]) + ": nothing maskable");
                continue;
            }
            auto te = model.text_encode(fwd, masked.ids);
            auto joint = model.multimodal_encode(fwd, te.states, node_states[i]);
            logit_rows.push_back(model.mlm_logits(fwd, joint.states, masked.positions));
            for (int pos : masked.positions) targets.push_back(ids[pos]);
        }
        if (!logit_rows.empty()) {
            Var mlm = tape.ce_mean(tape.concat_rows(logit_rows), targets);
            out.values.mlm = static_cast<double>(tape.val(mlm)(0, 0));
            total = tape.add(total, tape.scale(mlm, static_cast<T>(1.0 - cfg.alpha)));
        }
    }

    // --- MGM: reconstruct one masked node per graph ---
    {
        Var acc = -1;
        for (size_t i = 0; i < b; ++i) {
            EncodedGraph masked_graph = samples[batch[i]].graph;
            masked_graph.mask_index = mask_node(masked_graph.node_count(), mask_rng);
            auto ge = model.graph_encode(fwd, masked_graph);
            auto joint = model.multimodal_encode(fwd, ge.node_states, text_states[i]);
            Var pred = model.mgm_predict(fwd, joint.states, masked_graph.mask_index);
            // Target: the node's original input feature, detached.
            Matrix<T> target_v(1, tape.val(node_feats[i]).cols());
            std::copy(tape.val(node_feats[i]).row(masked_graph.mask_index),
                      tape.val(node_feats[i]).row(masked_graph.mask_index) + target_v.cols(),
                      target_v.data());
            if (frozen && frozen->valid)
                target_v = frozen->mgm_targets[i];
            else if (frozen)
                frozen->mgm_targets.push_back(target_v);
            Var target = tape.constant(std::move(target_v));
            Var sq = tape.sum_sq(tape.sub(pred, target));
            acc = acc < 0 ? sq : tape.add(acc, sq);
        }
        Var mgm = tape.scale(acc, T(1) / static_cast<T>(b));
        out.values.mgm = static_cast<double>(tape.val(mgm)(0, 0));
        total = tape.add(total, tape.scale(mgm, static_cast<T>(1.0 - cfg.alpha)));
    }

    if (frozen) frozen->valid = true;
    out.total = total;
    if (!std::isfinite(static_cast<double>(tape.val(total)(0, 0))))
        throw NumericError("non-finite batch loss");
    return out;
}

// Decoupled-weight-decay adaptive-moment update. Decay applies to weight
// matrices only (rows > 1 and cols > 1), not biases, gains, or scalars.
template <class T>
void adamw_step(ParamStore<T>& params, double lr, const TrainConfig& cfg, size_t step) {
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (auto& e : params.entries) {
        const bool decay = e.value.rows() > 1 && e.value.cols() > 1;
        for (size_t i = 0; i < e.value.size(); ++i) {
            double g = static_cast<double>(e.grad.data()[i]);
            double m = b1 * static_cast<double>(e.m.data()[i]) + (1.0 - b1) * g;
            double v = b2 * static_cast<double>(e.v.data()[i]) + (1.0 - b2) * g * g;
            e.m.data()[i] = static_cast<T>(m);
            e.v.data()[i] = static_cast<T>(v);
            double update = (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
            double w = static_cast<double>(e.value.data()[i]);
            if (decay) w -= lr * cfg.weight_decay * w;
            w -= lr * update;
            e.value.data()[i] = static_cast<T>(w);
        }
    }
}

struct EpochLog {
    size_t epoch;
    LossComponents losses;
    double total;
    double lr;
};

std::string format_loss_csv(const std::vector<EpochLog>& log);

struct TrainResult {
    std::vector<EpochLog> log;
    std::vector<std::string> notices;
};

// Full training loop. Deterministic given cfg.rng_seed; per-epoch callbacks
// receive the epoch log (for CSV streaming / checkpointing).
template <class T>
TrainResult train(Model<T>& model, const std::vector<PreparedSample>& samples,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    if (samples.empty()) throw ValidationError("empty training dataset");
    TrainResult result;
    Rng epoch_rng(cfg.rng_seed);
    size_t step = 0;
    const size_t steps_per_epoch =
        (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng = epoch_rng.fork(epoch * 4 + 0);
        Rng mask_rng = epoch_rng.fork(epoch * 4 + 1);
        Rng neg_rng = epoch_rng.fork(epoch * 4 + 2);
        Rng drop_rng = epoch_rng.fork(epoch * 4 + 3);
        std::vector<size_t> order = shuffle_rng.sample_without_replacement(samples.size(),
                                                                           samples.size());
        LossComponents sums;
        double total_sum = 0;
        size_t batches = 0;
        double lr = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::vector<size_t> batch(
                order.begin() + start,
                order.begin() + std::min(order.size(), start + cfg.batch_size));
            double frac_epoch = static_cast<double>(epoch) +
                                static_cast<double>(batches) / static_cast<double>(steps_per_epoch);
            lr = lr_at(frac_epoch, cfg);
            Tape<T> tape;
            auto fwd = model.forward(tape, model.config().dropout > 0 ? &drop_rng : nullptr);
            BatchLoss<T> loss;
            try {
                loss = build_batch_loss(model, fwd, samples, batch, cfg, mask_rng, neg_rng);
            } catch (const NumericError& e) {
                std::string diag = "batch [";
                for (size_t i : batch) diag += std::to_string(i) + ",";
                diag += "]";
                throw NumericError(std::string(e.what()) + " at epoch " +
                                   std::to_string(epoch) + ", " + diag);
            }
            model.params().zero_grads();
            tape.backward(loss.total);
            fwd.harvest();
            for (const auto& n : loss.notices) result.notices.push_back(n);
            sums.gtc += loss.values.gtc;
            sums.gtm += loss.values.gtm;
            sums.mlm += loss.values.mlm;
            sums.mgm += loss.values.mgm;
            total_sum += static_cast<double>(tape.val(loss.total)(0, 0));
            ++batches;
            ++step;
            adamw_step(model.params(), lr, cfg, step);
        }
        EpochLog entry{epoch,
                       {sums.gtc / batches, sums.gtm / batches, sums.mlm / batches,
                        sums.mgm / batches},
                       total_sum / batches,
                       lr};
        result.log.push_back(entry);
        if (on_epoch) on_epoch(entry);
    }
    return result;
}

}  // namespace cglp
