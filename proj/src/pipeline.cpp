#include "cglp/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cglp/provenance.hpp"  // fnv1a64 / to_hex

namespace cglp {

namespace {

using nlohmann::json;

template <class V>
void maybe_get(const json& j, const char* key, V& out) {
    if (j.contains(key)) out = j.at(key).get<V>();
}

void parse_section(const json& j, const char* key, SamplingConfig& c) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    maybe_get(s, "min_nodes", c.min_nodes);
    maybe_get(s, "max_nodes", c.max_nodes);
    maybe_get(s, "rng_seed", c.rng_seed);
    maybe_get(s, "dedup_by_node_set", c.dedup_by_node_set);
}

void parse_section(const json& j, const char* key, TrainConfig& c) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    maybe_get(s, "batch_size", c.batch_size);
    maybe_get(s, "alpha", c.alpha);
    maybe_get(s, "learning_rate", c.learning_rate);
    maybe_get(s, "weight_decay", c.weight_decay);
    maybe_get(s, "epochs", c.epochs);
    maybe_get(s, "warmup_epochs", c.warmup_epochs);
    maybe_get(s, "min_lr", c.min_lr);
    maybe_get(s, "mask_ratio", c.mask_ratio);
    maybe_get(s, "rng_seed", c.rng_seed);
    maybe_get(s, "checkpoint_every", c.checkpoint_every);
}

void parse_section(const json& j, const char* key, RetrievalConfig& c) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    maybe_get(s, "k", c.k);
    maybe_get(s, "lambda", c.lambda);
}

void parse_section(const json& j, const char* key, ModelConfig& c) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    maybe_get(s, "d", c.d);
    maybe_get(s, "text_layers", c.text_layers);
    maybe_get(s, "mm_layers", c.mm_layers);
    maybe_get(s, "gin_layers", c.gin_layers);
    maybe_get(s, "heads", c.heads);
    maybe_get(s, "max_len", c.max_len);
    maybe_get(s, "ffn_mult", c.ffn_mult);
    maybe_get(s, "dropout", c.dropout);
    maybe_get(s, "normalize_embeddings", c.normalize_embeddings);
    maybe_get(s, "tau_init", c.tau_init);
    maybe_get(s, "init_seed", c.init_seed);
}

void parse_section(const json& j, const char* key, LlmSettings& c) {
    if (!j.contains(key)) return;
    const json& s = j.at(key);
    maybe_get(s, "url", c.url);
    maybe_get(s, "key", c.key);
    maybe_get(s, "model", c.model);
    maybe_get(s, "temperature", c.temperature);
    maybe_get(s, "timeout_seconds", c.timeout_seconds);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad pipeline config: ") + e.what());
    }
    PipelineConfig c;
    try {
        maybe_get(j, "workdir", c.workdir);
        maybe_get(j, "seed", c.seed);
        maybe_get(j, "offline", c.offline);
        parse_section(j, "sampling", c.sampling);
        parse_section(j, "train", c.train);
        parse_section(j, "retrieval", c.retrieval);
        parse_section(j, "model", c.model);
        parse_section(j, "llm", c.llm);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad pipeline config: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string PipelineConfig::to_json() const {
    json j;
    j["workdir"] = workdir;
    j["seed"] = seed;
    j["offline"] = offline;
    j["sampling"] = {{"min_nodes", sampling.min_nodes},
                     {"max_nodes", sampling.max_nodes},
                     {"rng_seed", sampling.rng_seed},
                     {"dedup_by_node_set", sampling.dedup_by_node_set}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"alpha", train.alpha},
                  {"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"epochs", train.epochs},
                  {"warmup_epochs", train.warmup_epochs},
                  {"min_lr", train.min_lr},
                  {"mask_ratio", train.mask_ratio},
                  {"rng_seed", train.rng_seed},
                  {"checkpoint_every", train.checkpoint_every}};
    j["retrieval"] = {{"k", retrieval.k}, {"lambda", retrieval.lambda}};
    j["model"] = {{"d", model.d},
                  {"text_layers", model.text_layers},
                  {"mm_layers", model.mm_layers},
                  {"gin_layers", model.gin_layers},
                  {"heads", model.heads},
                  {"max_len", model.max_len},
                  {"ffn_mult", model.ffn_mult},
                  {"dropout", model.dropout},
                  {"normalize_embeddings", model.normalize_embeddings},
                  {"tau_init", model.tau_init},
                  {"init_seed", model.init_seed}};
    j["llm"] = {{"url", llm.url},
                {"model", llm.model},
                {"temperature", llm.temperature},
                {"timeout_seconds", llm.timeout_seconds}};
    return j.dump(2);
}

std::string RunManifest::to_json() const {
    json j;
    j["stage"] = stage;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["config_digest"] = config_digest;
    j["inputs"] = input_digests;
    j["outputs"] = output_digests;
    return j.dump(2);
}

RunManifest RunManifest::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
        RunManifest m;
        m.stage = j.at("stage").get<std::string>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.seed = j.at("seed").get<uint64_t>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.input_digests = j.at("inputs").get<std::map<std::string, std::string>>();
        m.output_digests = j.at("outputs").get<std::map<std::string, std::string>>();
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad manifest: ") + e.what());
    }
}

void RunManifest::write(const std::string& workdir) const {
    std::filesystem::path p = std::filesystem::path(workdir) / ("manifest-" + stage + ".json");
    std::ofstream out(p, std::ios::binary);
    if (!out) throw RuntimeError("cannot write manifest: " + p.string());
    out << to_json() << '\n';
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return to_hex(fnv1a64(buf.str()));
}

WorkdirLock::WorkdirLock(const std::string& workdir) {
    std::filesystem::create_directories(workdir);
    path_ = (std::filesystem::path(workdir) / ".cglp.lock").string();
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        path_.clear();
        throw ValidationError("workdir is locked by another run: " + workdir);
    }
    ::close(fd);
}

WorkdirLock::~WorkdirLock() {
    if (!path_.empty()) std::filesystem::remove(path_);
}

}  // namespace cglp
