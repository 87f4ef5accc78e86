#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cglp/autodiff.hpp"
#include "cglp/provenance.hpp"
#include "cglp/sampler.hpp"
#include "cglp/tokenizer.hpp"

namespace cglp {

struct ModelConfig {
    size_t d = 64;
    size_t text_layers = 2;
    size_t mm_layers = 2;
    size_t gin_layers = 3;
    size_t heads = 4;
    size_t max_len = 256;
    size_t ffn_mult = 2;  // feed-forward hidden = ffn_mult * d
    double dropout = 0.1;
    bool normalize_embeddings = true;
    double tau_init = 0.07;
    uint64_t init_seed = 42;

    void validate() const {
        if (d == 0 || d % heads != 0) throw ValidationError("d must be a positive multiple of heads");
        if (text_layers == 0 || mm_layers == 0 || gin_layers == 0)
            throw ValidationError("layer counts must be positive");
    }
};

// Named parameter tensors with gradient and optimizer-state slots.
template <class T>
struct ParamStore {
    struct Entry {
        std::string name;
        Matrix<T> value, grad, m, v;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, int> index;

    int add(const std::string& name, Matrix<T> init) {
        Entry e;
        e.name = name;
        e.grad = Matrix<T>::zeros_like(init);
        e.m = Matrix<T>::zeros_like(init);
        e.v = Matrix<T>::zeros_like(init);
        e.value = std::move(init);
        entries.push_back(std::move(e));
        index[name] = static_cast<int>(entries.size() - 1);
        return index[name];
    }

    Entry& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw NotFoundError("no parameter named " + name);
        return entries[it->second];
    }
    const Entry& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }

    void zero_grads() {
        for (auto& e : entries) e.grad.fill(T(0));
    }

    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& e : entries) n += e.value.size();
        return n;
    }
};

// Graph structure pre-flattened for the GIN layers: each event contributes a
// message in both directions, carrying the action's text embedding as the
// edge feature.
struct EncodedGraph {
    std::vector<std::string> node_ids;           // sorted by id
    std::vector<std::vector<int>> node_tokens;   // tokenized attribute text per node
    std::vector<int> msg_src, msg_dst;           // node indices, 2 per event
    std::vector<int> msg_action;                 // ActionKind per message
    int mask_index = -1;                         // node whose input feature is masked

    size_t node_count() const { return node_ids.size(); }
};

EncodedGraph encode_graph_structure(const ProvenanceGraph& g, const Tokenizer& tok);

// Encoders, heads, and the learnable temperature. Instantiated with float for
// training and double for gradient-check suites.
template <class T>
class Model {
public:
    using Var = typename Tape<T>::Var;

    Model(ModelConfig cfg, size_t vocab_size) : cfg_(cfg), vocab_size_(vocab_size) {
        cfg_.validate();
        Rng rng(cfg_.init_seed);
        const size_t d = cfg_.d, h = d * cfg_.ffn_mult;

        add_uniform("text.tok_emb", vocab_size, d, d, rng);
        add_uniform("text.pos_emb", cfg_.max_len, d, d, rng);
        for (size_t l = 0; l < cfg_.text_layers; ++l)
            add_attention_block("text." + std::to_string(l), /*cross=*/false, rng);
        add_layernorm("text.ln_f");

        for (size_t l = 0; l < cfg_.gin_layers; ++l) {
            std::string p = "gin." + std::to_string(l) + ".";
            add_uniform(p + "msg_w", 2 * d, d, 2 * d, rng);
            add_zeros(p + "msg_b", 1, d);
            add_uniform(p + "mlp_w1", d, h, d, rng);
            add_zeros(p + "mlp_b1", 1, h);
            add_uniform(p + "mlp_w2", h, d, h, rng);
            add_zeros(p + "mlp_b2", 1, d);
            add_zeros(p + "eps", 1, 1);
        }
        add_uniform("pool.w", d, d, d, rng);
        add_zeros("pool.b", 1, d);
        add_uniform("pool.u", d, 1, d, rng);
        add_uniform("pool.proj_w", d, d, d, rng);
        add_zeros("pool.proj_b", 1, d);
        add_uniform("graph.mask_vec", 1, d, d, rng);

        for (size_t l = 0; l < cfg_.mm_layers; ++l)
            add_attention_block("mm." + std::to_string(l), /*cross=*/true, rng);
        add_layernorm("mm.ln_f");

        add_uniform("gtm.w1", d, d, d, rng);
        add_zeros("gtm.b1", 1, d);
        add_uniform("gtm.w2", d, 2, d, rng);
        add_zeros("gtm.b2", 1, 2);
        add_uniform("mlm.w", d, vocab_size, d, rng);
        add_zeros("mlm.b", 1, vocab_size);
        add_uniform("mgm.w", d, d, d, rng);
        add_zeros("mgm.b", 1, d);

        Matrix<T> log_tau(1, 1);
        log_tau(0, 0) = static_cast<T>(std::log(cfg_.tau_init));
        params_.add("temp.log_tau", std::move(log_tau));
    }

    const ModelConfig& config() const { return cfg_; }
    size_t vocab_size() const { return vocab_size_; }
    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }

    // One forward/backward pass context: binds parameters lazily as tape
    // leaves and harvests their gradients afterwards.
    struct Forward {
        Model& model;
        Tape<T>& tape;
        Rng* dropout_rng = nullptr;  // non-null enables dropout (training mode)

        Forward(Model& m, Tape<T>& t, Rng* rng = nullptr)
            : model(m), tape(t), dropout_rng(rng) {}

        Var p(const std::string& name) {
            int idx = model.params_.index.count(name) ? model.params_.index.at(name) : -1;
            if (idx < 0) throw NotFoundError("no parameter named " + name);
            if (bound_.size() < model.params_.entries.size())
                bound_.assign(model.params_.entries.size(), -1);
            if (bound_[idx] < 0) bound_[idx] = tape.leaf(model.params_.entries[idx].value);
            return bound_[idx];
        }

        Var maybe_dropout(Var x) {
            if (!dropout_rng || model.cfg_.dropout <= 0) return x;
            return tape.dropout(x, static_cast<T>(model.cfg_.dropout), *dropout_rng);
        }

        // Accumulate tape gradients into the parameter store.
        void harvest() {
            for (size_t i = 0; i < bound_.size(); ++i)
                if (bound_[i] >= 0)
                    model.params_.entries[i].grad.add_inplace(tape.grad(bound_[i]));
        }

    private:
        friend class Model;
        std::vector<int> bound_;
    };

    Forward forward(Tape<T>& tape, Rng* dropout_rng = nullptr) {
        return Forward(*this, tape, dropout_rng);
    }

    struct TextEncoding {
        Var states;  // n x d, one row per input id
        Var cls;     // 1 x d
    };

    TextEncoding text_encode(Forward& f, const std::vector<int>& ids) const {
        if (ids.empty() || ids[0] != Tokenizer::kCls)
            throw ValidationError("text_encode expects ids starting with [CLS]");
        for (int id : ids)
            if (id < 0 || static_cast<size_t>(id) >= vocab_size_)
                throw ValidationError("token id out of range: " + std::to_string(id));
        if (ids.size() > cfg_.max_len) throw ValidationError("sequence longer than max_len");
        Tape<T>& t = f.tape;
        const size_t n = ids.size();

        std::vector<uint8_t> allowed(n);
        for (size_t i = 0; i < n; ++i) allowed[i] = ids[i] != Tokenizer::kPad;

        Var x = t.add(t.gather_rows(f.p("text.tok_emb"), {ids.begin(), ids.end()}),
                      t.slice_rows(f.p("text.pos_emb"), 0, n));
        for (size_t l = 0; l < cfg_.text_layers; ++l)
            x = transformer_block(f, "text." + std::to_string(l), x, x, allowed, false);
        x = layer_norm(f, "text.ln_f", x);
        return {x, t.slice_rows(x, 0, 1)};
    }

    struct GraphEncoding {
        Var node_states;   // n x d (Eq.-1 style per-node embeddings)
        Var pooled;        // 1 x d (attention-pooled z_G)
        Var node_features; // n x d initial features (MGM targets)
        Var alpha;         // 1 x n pooling weights
    };

    GraphEncoding graph_encode(Forward& f, const EncodedGraph& eg) const {
        if (eg.node_count() == 0) throw ValidationError("cannot encode an empty graph");
        Tape<T>& t = f.tape;
        const size_t n = eg.node_count();

        // Initial node features: text encoding of each attribute rendering.
        std::vector<Var> rows;
        rows.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            if (static_cast<int>(i) == eg.mask_index)
                rows.push_back(f.p("graph.mask_vec"));
            else
                rows.push_back(text_encode(f, eg.node_tokens[i]).cls);
        }
        Var feats = t.concat_rows(rows);

        // Edge features: text encoding of each distinct action name in use.
        Var msg_edge_feats = -1;
        std::vector<int> msg_action_row;
        if (!eg.msg_action.empty()) {
            std::map<int, int> action_row;
            std::vector<Var> act_rows;
            for (int a : eg.msg_action)
                if (!action_row.count(a)) {
                    action_row[a] = static_cast<int>(act_rows.size());
                    act_rows.push_back(
                        text_encode(f, action_token_ids(a)).cls);
                }
            Var actions = t.concat_rows(act_rows);
            msg_action_row.reserve(eg.msg_action.size());
            for (int a : eg.msg_action) msg_action_row.push_back(action_row.at(a));
            msg_edge_feats = t.gather_rows(actions, msg_action_row);
        }

        Var h = feats;
        for (size_t l = 0; l < cfg_.gin_layers; ++l) {
            std::string p = "gin." + std::to_string(l) + ".";
            Var one_plus_eps = t.add(t.constant(Matrix<T>(1, 1, T(1))), f.p(p + "eps"));
            Var s = t.scale_by(h, one_plus_eps);
            if (!eg.msg_src.empty()) {
                Var msg_in = t.concat_cols(t.gather_rows(h, eg.msg_src), msg_edge_feats);
                Var msg = t.add_rowvec(t.matmul(msg_in, f.p(p + "msg_w")), f.p(p + "msg_b"));
                s = t.add(s, t.scatter_add_rows(msg, eg.msg_dst, n));
            }
            Var hidden = t.relu(t.add_rowvec(t.matmul(s, f.p(p + "mlp_w1")), f.p(p + "mlp_b1")));
            h = t.add_rowvec(t.matmul(hidden, f.p(p + "mlp_w2")), f.p(p + "mlp_b2"));
        }

        // Attention pooling: alpha = softmax(u . tanh(W h + b)).
        Var scores = t.matmul(
            t.tanh_(t.add_rowvec(t.matmul(h, f.p("pool.w")), f.p("pool.b"))), f.p("pool.u"));
        Var alpha = t.softmax_rows(t.transpose(scores));
        Var pooled = t.add_rowvec(t.matmul(t.matmul(alpha, h), f.p("pool.proj_w")),
                                  f.p("pool.proj_b"));
        return {h, pooled, feats, alpha};
    }

    struct JointEncoding {
        Var states;  // one row per query position
        Var pooled;  // 1 x d, row 0 of states
    };

    // Cross-modal fusion: self-attention over the query states, cross-attention
    // against the context states, feed-forward. Text states as queries yield
    // z_m / GTM / MLM; node states as queries yield the MGM path.
    JointEncoding multimodal_encode(Forward& f, Var queries, Var context,
                                    std::vector<uint8_t> query_mask = {}) const {
        Tape<T>& t = f.tape;
        if (t.val(queries).rows() == 0 || t.val(context).rows() == 0)
            throw ValidationError("multimodal_encode requires non-empty inputs");
        if (t.val(queries).cols() != cfg_.d || t.val(context).cols() != cfg_.d)
            throw ShapeError("multimodal_encode: dimension mismatch");
        Var x = queries;
        for (size_t l = 0; l < cfg_.mm_layers; ++l) {
            std::string p = "mm." + std::to_string(l);
            x = transformer_block(f, p, x, x, query_mask, false);
            x = transformer_block(f, p, x, context, {}, true);
            x = ffn_block(f, p, x);
        }
        x = layer_norm(f, "mm.ln_f", x);
        return {x, t.slice_rows(x, 0, 1)};
    }

    Var gtm_logits(Forward& f, Var z_m) const {
        Tape<T>& t = f.tape;
        Var hidden = t.relu(t.add_rowvec(t.matmul(z_m, f.p("gtm.w1")), f.p("gtm.b1")));
        return t.add_rowvec(t.matmul(hidden, f.p("gtm.w2")), f.p("gtm.b2"));
    }

    Var mlm_logits(Forward& f, Var joint_states, const std::vector<int>& positions) const {
        Tape<T>& t = f.tape;
        return t.add_rowvec(t.matmul(t.gather_rows(joint_states, positions), f.p("mlm.w")),
                            f.p("mlm.b"));
    }

    Var mgm_predict(Forward& f, Var joint_node_states, int node_index) const {
        Tape<T>& t = f.tape;
        Var slot = t.slice_rows(joint_node_states, node_index, node_index + 1);
        return t.add_rowvec(t.matmul(slot, f.p("mgm.w")), f.p("mgm.b"));
    }

    // Clamped learnable temperature (trained in log space).
    Var temperature(Forward& f) const {
        return f.tape.exp_clamp(f.p("temp.log_tau"), T(0.01), T(1.0));
    }

    std::vector<int> action_token_ids(int action) const {
        auto it = action_tokens_.find(action);
        if (it != action_tokens_.end()) return it->second;
        throw ValidationError("action tokens not initialized; call set_tokenizer()");
    }

    // Pre-tokenize the action vocabulary so graph encoding does not need the
    // tokenizer at forward time.
    void set_tokenizer(const Tokenizer& tok) {
        action_tokens_.clear();
        for (int a = 0; a < kActionCount; ++a)
            action_tokens_[a] = tok.encode(action_name(static_cast<ActionKind>(a)));
    }

    template <class U>
    Model<U> cast() const {
        Model<U> out(cfg_, vocab_size_);
        for (const auto& e : params_.entries)
            out.params().at(e.name).value = e.value.template cast<U>();
        out.copy_action_tokens(action_tokens_);
        return out;
    }

    void copy_action_tokens(const std::map<int, std::vector<int>>& toks) {
        action_tokens_ = toks;
    }
    const std::map<int, std::vector<int>>& action_tokens() const { return action_tokens_; }

private:
    void add_uniform(const std::string& name, size_t r, size_t c, size_t fan_in, Rng& rng) {
        T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(fan_in)));
        params_.add(name, Matrix<T>::uniform(r, c, bound, rng));
    }
    void add_zeros(const std::string& name, size_t r, size_t c) {
        params_.add(name, Matrix<T>(r, c));
    }
    void add_layernorm(const std::string& prefix) {
        params_.add(prefix + ".gain", Matrix<T>(1, cfg_.d, T(1)));
        params_.add(prefix + ".bias", Matrix<T>(1, cfg_.d));
    }
    void add_attention_block(const std::string& prefix, bool cross, Rng& rng) {
        const size_t d = cfg_.d, h = d * cfg_.ffn_mult;
        auto add_attn = [&](const std::string& ap) {
            for (const char* w : {"wq", "wk", "wv", "wo"}) add_uniform(ap + w, d, d, d, rng);
            for (const char* b : {"bq", "bk", "bv", "bo"}) add_zeros(ap + b, 1, d);
        };
        add_attn(prefix + ".attn.");
        add_layernorm(prefix + ".ln1");
        if (cross) {
            add_attn(prefix + ".xattn.");
            add_layernorm(prefix + ".lnx");
        }
        add_uniform(prefix + ".ffn.w1", d, h, d, rng);
        add_zeros(prefix + ".ffn.b1", 1, h);
        add_uniform(prefix + ".ffn.w2", h, d, h, rng);
        add_zeros(prefix + ".ffn.b2", 1, d);
        add_layernorm(prefix + ".ln2");
    }

    Var layer_norm(Forward& f, const std::string& prefix, Var x) const {
        return f.tape.layer_norm_rows(x, f.p(prefix + ".gain"), f.p(prefix + ".bias"));
    }

    // Multi-head attention with residual; `key_mask` hides padded key columns.
    Var attention(Forward& f, const std::string& ap, Var x_norm, Var kv,
                  const std::vector<uint8_t>& key_mask) const {
        Tape<T>& t = f.tape;
        const size_t d = cfg_.d, nh = cfg_.heads, dh = d / nh;
        Var q = t.add_rowvec(t.matmul(x_norm, f.p(ap + "wq")), f.p(ap + "bq"));
        Var k = t.add_rowvec(t.matmul(kv, f.p(ap + "wk")), f.p(ap + "bk"));
        Var v = t.add_rowvec(t.matmul(kv, f.p(ap + "wv")), f.p(ap + "bv"));
        T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        Var heads_out = -1;
        for (size_t hd = 0; hd < nh; ++hd) {
            Var qh = t.slice_cols(q, hd * dh, (hd + 1) * dh);
            Var kh = t.slice_cols(k, hd * dh, (hd + 1) * dh);
            Var vh = t.slice_cols(v, hd * dh, (hd + 1) * dh);
            Var scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
            Var attn = t.softmax_rows(scores, key_mask);
            Var oh = t.matmul(attn, vh);
            heads_out = hd == 0 ? oh : t.concat_cols(heads_out, oh);
        }
        Var out = t.add_rowvec(t.matmul(heads_out, f.p(ap + "wo")), f.p(ap + "bo"));
        return f.maybe_dropout(out);
    }

    // Pre-LN residual block. With cross==false this is self-attention + FFN;
    // with cross==true it is the cross-attention sub-block only (FFN applied
    // separately by the caller).
    Var transformer_block(Forward& f, const std::string& prefix, Var x, Var kv,
                          const std::vector<uint8_t>& key_mask, bool cross) const {
        Tape<T>& t = f.tape;
        if (cross) {
            Var normed = layer_norm(f, prefix + ".lnx", x);
            return t.add(x, attention(f, prefix + ".xattn.", normed, kv, key_mask));
        }
        Var normed = layer_norm(f, prefix + ".ln1", x);
        Var y = t.add(x, attention(f, prefix + ".attn.", normed, kv == x ? normed : kv, key_mask));
        if (prefix.rfind("mm.", 0) == 0) return y;  // mm blocks run their FFN separately
        return ffn_block(f, prefix, y);
    }

    Var ffn_block(Forward& f, const std::string& prefix, Var x) const {
        Tape<T>& t = f.tape;
        Var normed = layer_norm(f, prefix + ".ln2", x);
        Var hidden =
            t.relu(t.add_rowvec(t.matmul(normed, f.p(prefix + ".ffn.w1")), f.p(prefix + ".ffn.b1")));
        Var out = t.add_rowvec(t.matmul(hidden, f.p(prefix + ".ffn.w2")), f.p(prefix + ".ffn.b2"));
        return t.add(x, f.maybe_dropout(out));
    }

    ModelConfig cfg_;
    size_t vocab_size_;
    ParamStore<T> params_;
    std::map<int, std::vector<int>> action_tokens_;

    template <class U>
    friend class Model;
};

// Checkpoint I/O: header {magic "CGLP", version, d, vocab digest, layer
// counts} followed by named little-endian float32 sections.
void save_checkpoint(const Model<float>& model, uint64_t vocab_digest, const std::string& path);
Model<float> load_checkpoint(const std::string& path, uint64_t* vocab_digest_out = nullptr);

}  // namespace cglp
