#include "cglp/model.hpp"

#include <cstring>
#include <fstream>

namespace cglp {

EncodedGraph encode_graph_structure(const ProvenanceGraph& g, const Tokenizer& tok) {
    EncodedGraph eg;
    std::map<std::string, int> node_index;
    for (const auto& [id, e] : g.entities()) {
        node_index[id] = static_cast<int>(eg.node_ids.size());
        eg.node_ids.push_back(id);
        eg.node_tokens.push_back(tok.encode(node_attribute_text(e)));
    }
    for (const auto& ev : g.events()) {
        int s = node_index.at(ev.subject), o = node_index.at(ev.object);
        int a = static_cast<int>(ev.action);
        // Message in both directions so each endpoint aggregates the event.
        eg.msg_src.push_back(s);
        eg.msg_dst.push_back(o);
        eg.msg_action.push_back(a);
        eg.msg_src.push_back(o);
        eg.msg_dst.push_back(s);
        eg.msg_action.push_back(a);
    }
    return eg;
}

namespace {

constexpr char kMagic[4] = {'C', 'G', 'L', 'P'};
constexpr uint32_t kVersion = 1;

template <class V>
void write_pod(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class V>
V read_pod(std::istream& in) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ValidationError("truncated checkpoint file");
    return v;
}

}  // namespace

void save_checkpoint(const Model<float>& model, uint64_t vocab_digest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write checkpoint: " + path);
    const auto& cfg = model.config();
    out.write(kMagic, 4);
    write_pod<uint32_t>(out, kVersion);
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.d));
    write_pod<uint64_t>(out, vocab_digest);
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.text_layers));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.mm_layers));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.gin_layers));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.heads));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.max_len));
    write_pod<uint32_t>(out, static_cast<uint32_t>(cfg.ffn_mult));
    write_pod<uint32_t>(out, static_cast<uint32_t>(model.vocab_size()));
    write_pod<uint8_t>(out, cfg.normalize_embeddings ? 1 : 0);
    write_pod<double>(out, cfg.dropout);
    write_pod<double>(out, cfg.tau_init);
    write_pod<uint64_t>(out, cfg.init_seed);

    const auto& entries = model.params().entries;
    write_pod<uint32_t>(out, static_cast<uint32_t>(entries.size()));
    for (const auto& e : entries) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod<uint32_t>(out, static_cast<uint32_t>(e.value.rows()));
        write_pod<uint32_t>(out, static_cast<uint32_t>(e.value.cols()));
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(e.value.size() * sizeof(float)));
    }
    if (!out) throw RuntimeError("checkpoint write failed: " + path);
}

Model<float> load_checkpoint(const std::string& path, uint64_t* vocab_digest_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw ValidationError("not a CGLP checkpoint: " + path);
    uint32_t version = read_pod<uint32_t>(in);
    if (version != kVersion)
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    ModelConfig cfg;
    cfg.d = read_pod<uint32_t>(in);
    uint64_t digest = read_pod<uint64_t>(in);
    cfg.text_layers = read_pod<uint32_t>(in);
    cfg.mm_layers = read_pod<uint32_t>(in);
    cfg.gin_layers = read_pod<uint32_t>(in);
    cfg.heads = read_pod<uint32_t>(in);
    cfg.max_len = read_pod<uint32_t>(in);
    cfg.ffn_mult = read_pod<uint32_t>(in);
    uint32_t vocab_size = read_pod<uint32_t>(in);
    cfg.normalize_embeddings = read_pod<uint8_t>(in) != 0;
    cfg.dropout = read_pod<double>(in);
    cfg.tau_init = read_pod<double>(in);
    cfg.init_seed = read_pod<uint64_t>(in);
    if (vocab_digest_out) *vocab_digest_out = digest;

    Model<float> model(cfg, vocab_size);
    uint32_t count = read_pod<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        uint32_t rows = read_pod<uint32_t>(in);
        uint32_t cols = read_pod<uint32_t>(in);
        auto& entry = model.params().at(name);
        if (entry.value.rows() != rows || entry.value.cols() != cols)
            throw ValidationError("checkpoint shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(entry.value.data()),
                static_cast<std::streamsize>(entry.value.size() * sizeof(float)));
        if (!in) throw ValidationError("truncated checkpoint section: " + name);
    }
    return model;
}

}  // namespace cglp
