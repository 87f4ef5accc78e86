#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cglp/denoiser.hpp"
#include "cglp/hunting.hpp"
#include "cglp/pipeline.hpp"
#include "cglp/synth.hpp"

namespace {

using namespace cglp;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write file: " + path);
    out << content;
    if (!out) throw RuntimeError("write failed: " + path);
}

struct GlobalOpts {
    std::string config_path;
    std::string workdir;
    std::optional<uint64_t> seed;
    bool offline = false;

    PipelineConfig load() const {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = PipelineConfig::from_json_file(config_path);
        if (!workdir.empty()) cfg.workdir = workdir;
        if (seed) {
            cfg.seed = *seed;
            cfg.sampling.rng_seed = *seed;
            cfg.train.rng_seed = *seed;
        }
        if (offline) cfg.offline = true;
        cfg.validate();
        return cfg;
    }
};

// Lock the workdir (when set) and record a stage manifest on completion.
struct Stage {
    Stage(const PipelineConfig& cfg, std::string name) : cfg_(cfg) {
        manifest_.stage = std::move(name);
        manifest_.seed = cfg.seed;
        manifest_.config_digest = to_hex(fnv1a64(cfg.to_json()));
        if (!cfg.workdir.empty()) lock_ = std::make_unique<WorkdirLock>(cfg.workdir);
    }
    void input(const std::string& path) { manifest_.input_digests[path] = file_digest(path); }
    void output(const std::string& path) { manifest_.output_digests[path] = file_digest(path); }
    void finish() {
        if (!cfg_.workdir.empty()) manifest_.write(cfg_.workdir);
    }

    const PipelineConfig& cfg_;
    RunManifest manifest_;
    std::unique_ptr<WorkdirLock> lock_;
};

std::vector<Subgraph> load_subgraphs(const std::string& path) {
    std::vector<Subgraph> out;
    for (const auto& line : read_lines(path)) out.push_back(parse_subgraph(line));
    if (out.empty()) throw ValidationError("no subgraphs in " + path);
    return out;
}

// Denoised-corpus JSONL: {"id", "body"} per line.
void load_reports(const std::string& path, std::vector<std::string>& ids,
                  std::vector<std::string>& texts) {
    for (const auto& line : read_lines(path)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            ids.push_back(j.at("id").get<std::string>());
            texts.push_back(j.at("body").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("bad report line: ") + e.what());
        }
    }
    if (ids.empty()) throw ValidationError("no reports in " + path);
}

GroundTruth load_truth(const std::string& path) {
    GroundTruth truth;
    for (const auto& line : read_lines(path)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const auto& p = j.at("paired_report");
            truth[j.at("graph_id").get<std::string>()] =
                p.is_null() ? std::optional<std::string>{} : p.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("bad truth line: ") + e.what());
        }
    }
    if (truth.empty()) throw ValidationError("no truth entries in " + path);
    return truth;
}

Tokenizer build_training_tokenizer(const std::vector<PairedSample>& pairs, size_t max_len) {
    std::vector<std::string> corpus;
    for (const auto& p : pairs) {
        corpus.push_back(p.report);
        for (const auto& [id, e] : p.graph.graph.entities())
            corpus.push_back(node_attribute_text(e));
    }
    for (int a = 0; a < kActionCount; ++a)
        corpus.push_back(action_name(static_cast<ActionKind>(a)));
    return Tokenizer::build(corpus, max_len);
}

struct HuntContext {
    Model<float> model;
    Tokenizer tok;
    VectorIndex index;
    std::unordered_map<std::string, std::string> report_texts;
};

HuntContext load_hunt_context(const std::string& checkpoint_path, const std::string& tok_path,
                              const std::string& index_path, const std::string& reports_path) {
    uint64_t digest = 0;
    HuntContext ctx{load_checkpoint(checkpoint_path, &digest), Tokenizer::load(tok_path),
                    VectorIndex::load(index_path), {}};
    if (digest != ctx.tok.digest())
        throw ValidationError("checkpoint was trained with a different tokenizer");
    ctx.model.set_tokenizer(ctx.tok);
    std::vector<std::string> ids, texts;
    load_reports(reports_path, ids, texts);
    for (size_t i = 0; i < ids.size(); ++i) ctx.report_texts[ids[i]] = texts[i];
    return ctx;
}

int run_ingest(const GlobalOpts& g, const std::string& input, const std::string& output,
               bool dedup, bool coerce) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "ingest");
    stage.input(input);
    IngestOptions opts;
    opts.dedup = dedup;
    opts.unknown_verb = coerce ? UnknownVerbPolicy::CoerceToOpen : UnknownVerbPolicy::Reject;
    std::ifstream in(input, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + input);
    std::vector<std::string> warnings;
    ProvenanceGraph graph = ingest_audit_log(in, opts, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    write_file(output, serialize_graph(graph) + "\n");
    std::cerr << "ingested " << graph.node_count() << " entities, " << graph.edge_count()
              << " events\n";
    stage.output(output);
    stage.finish();
    return 0;
}

int run_sample(const GlobalOpts& g, const std::string& graph_path, const std::string& output) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "sample");
    stage.input(graph_path);
    ProvenanceGraph graph = parse_graph(read_file(graph_path));
    SamplingStats stats;
    auto subgraphs = sample_activity_subgraphs(graph, cfg.sampling, &stats);
    std::string out;
    for (const auto& sg : subgraphs) out += serialize_subgraph(sg) + "\n";
    write_file(output, out);
    std::cerr << "seeds " << stats.seeds << ", emitted " << stats.emitted << ", dropped (size "
              << stats.dropped_size << ", kinds " << stats.dropped_kinds << ", dup "
              << stats.dropped_dup << ")\n";
    stage.output(output);
    stage.finish();
    return 0;
}

int run_synth(const GlobalOpts& g, const std::string& subgraphs_path, const std::string& output) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "synth");
    stage.input(subgraphs_path);
    std::unique_ptr<LlmClient> client;
    if (!cfg.offline) {
        if (!cfg.llm.url.empty())
            client = make_http_llm_client(cfg.llm);
        else
            client = make_llm_client_from_env();
    }
    std::string out;
    size_t fallbacks = 0;
    for (const auto& sg : load_subgraphs(subgraphs_path)) {
        std::string warning;
        PairedSample pair = synthesize_pair(sg, client.get(), &warning);
        if (!warning.empty()) {
            std::cerr << "warning: " << warning << '\n';
            ++fallbacks;
        }
        out += serialize_paired_sample(pair) + "\n";
    }
    write_file(output, out);
    if (fallbacks) std::cerr << fallbacks << " report(s) used the template fallback\n";
    stage.output(output);
    stage.finish();
    return 0;
}

int run_denoise(const GlobalOpts& g, const std::string& input, const std::string& output,
                const std::string& rules_path, bool keep_all) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "denoise");
    stage.input(input);
    std::vector<RawCti> raws;
    for (const auto& line : read_lines(input)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            raws.emplace_back(j.at("id").get<std::string>(),
                              j.value("source", std::string{}),
                              j.at("body").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("bad raw CTI line: ") + e.what());
        }
    }
    if (raws.empty()) throw ValidationError("no raw CTI entries in " + input);
    if (!keep_all) {
        FilterRules rules =
            rules_path.empty() ? FilterRules::defaults() : FilterRules::from_file(rules_path);
        size_t before = raws.size();
        raws = filter_corpus(raws, rules);
        std::cerr << "kept " << raws.size() << " of " << before << " reports\n";
    }
    std::unique_ptr<LlmClient> client;
    if (!cfg.offline) {
        if (!cfg.llm.url.empty())
            client = make_http_llm_client(cfg.llm);
        else
            client = make_llm_client_from_env();
    }
    std::string out;
    for (const auto& raw : raws) {
        std::string warning;
        DenoisedCti clean = denoise(raw, client.get(), &warning);
        if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
        nlohmann::json j;
        j["id"] = clean.id;
        j["body"] = clean.body;
        out += j.dump() + "\n";
    }
    write_file(output, out);
    stage.output(output);
    stage.finish();
    return 0;
}

int run_train(const GlobalOpts& g, const std::string& pairs_path, const std::string& out_dir) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "train");
    stage.input(pairs_path);
    std::vector<PairedSample> pairs;
    for (const auto& line : read_lines(pairs_path)) pairs.push_back(parse_paired_sample(line));
    if (pairs.empty()) throw ValidationError("no training pairs in " + pairs_path);

    std::filesystem::create_directories(out_dir);
    Tokenizer tok = build_training_tokenizer(pairs, cfg.model.max_len);
    Model<float> model(cfg.model, tok.vocab_size());
    auto prepared = prepare_dataset(pairs, tok, model);

    std::filesystem::path dir(out_dir);
    std::string tok_path = (dir / "tokenizer.json").string();
    std::string ckpt_path = (dir / "checkpoint.bin").string();
    std::string log_path = (dir / "loss.csv").string();
    tok.save(tok_path);

    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw RuntimeError("cannot write loss log: " + log_path);
    log << "epoch,gtc,gtm,mlm,mgm,total,lr\n";
    TrainResult result = train(model, prepared, cfg.train, [&](const EpochLog& e) {
        log << format_loss_csv({e}).substr(std::string("epoch,gtc,gtm,mlm,mgm,total,lr\n").size());
        log.flush();
        if (cfg.train.checkpoint_every && (e.epoch + 1) % cfg.train.checkpoint_every == 0)
            save_checkpoint(model, tok.digest(), ckpt_path);
        std::cerr << "epoch " << e.epoch << " total " << e.total << " lr " << e.lr << '\n';
    });
    save_checkpoint(model, tok.digest(), ckpt_path);
    for (const auto& n : result.notices) std::cerr << "notice: " << n << '\n';
    stage.output(tok_path);
    stage.output(ckpt_path);
    stage.output(log_path);
    stage.finish();
    return 0;
}

int run_index(const GlobalOpts& g, const std::string& checkpoint_path, const std::string& tok_path,
              const std::string& reports_path, const std::string& output) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "index");
    stage.input(checkpoint_path);
    stage.input(reports_path);
    uint64_t digest = 0;
    Model<float> model = load_checkpoint(checkpoint_path, &digest);
    Tokenizer tok = Tokenizer::load(tok_path);
    if (digest != tok.digest())
        throw ValidationError("checkpoint was trained with a different tokenizer");
    std::vector<std::string> ids, texts;
    load_reports(reports_path, ids, texts);
    VectorIndex index = build_index(model, tok, ids, texts);
    index.save(output);
    std::cerr << "indexed " << index.size() << " reports at d=" << index.dim() << '\n';
    stage.output(output);
    stage.finish();
    return 0;
}

int run_hunt(const GlobalOpts& g, const std::string& index_path, const std::string& graphs_path,
             const std::string& checkpoint_path, const std::string& tok_path,
             const std::string& reports_path, const std::string& output,
             std::optional<size_t> k, std::optional<double> lambda) {
    PipelineConfig cfg = g.load();
    if (k) cfg.retrieval.k = *k;
    if (lambda) cfg.retrieval.lambda = *lambda;
    cfg.retrieval.validate();
    Stage stage(cfg, "hunt");
    stage.input(index_path);
    stage.input(graphs_path);
    HuntContext ctx = load_hunt_context(checkpoint_path, tok_path, index_path, reports_path);
    std::string out;
    for (const auto& sg : load_subgraphs(graphs_path)) {
        EncodedGraph eg = encode_graph_structure(sg.graph, ctx.tok);
        MatchDecision d = hunt(ctx.model, ctx.tok, ctx.index, ctx.report_texts, eg,
                               graph_digest(sg.graph), cfg.retrieval);
        out += decision_to_jsonl(d) + "\n";
    }
    if (output.empty()) {
        std::cout << out;
    } else {
        write_file(output, out);
        stage.output(output);
    }
    stage.finish();
    return 0;
}

int run_eval(const GlobalOpts& g, const std::string& decisions_path, const std::string& truth_path,
             const std::string& output) {
    PipelineConfig cfg = g.load();
    Stage stage(cfg, "eval");
    stage.input(decisions_path);
    stage.input(truth_path);
    std::vector<MatchDecision> decisions;
    for (const auto& line : read_lines(decisions_path))
        decisions.push_back(decision_from_jsonl(line));
    GroundTruth truth = load_truth(truth_path);
    ConfusionCounts counts = classify(decisions, truth);
    std::string json_text = metrics_to_json(compute_metrics(counts), counts) + "\n";
    if (output.empty()) {
        std::cout << json_text;
    } else {
        write_file(output, json_text);
        stage.output(output);
    }
    stage.finish();
    return 0;
}

int run_validate_alerts(const GlobalOpts& g, const std::string& alerts_path,
                        const std::string& truth_path, const std::string& index_path,
                        const std::string& checkpoint_path, const std::string& tok_path,
                        const std::string& reports_path, const std::string& output,
                        std::optional<size_t> k, std::optional<double> lambda) {
    PipelineConfig cfg = g.load();
    if (k) cfg.retrieval.k = *k;
    if (lambda) cfg.retrieval.lambda = *lambda;
    cfg.retrieval.validate();
    Stage stage(cfg, "validate-alerts");
    stage.input(alerts_path);
    stage.input(truth_path);
    HuntContext ctx = load_hunt_context(checkpoint_path, tok_path, index_path, reports_path);
    GroundTruth truth = load_truth(truth_path);
    std::vector<MatchDecision> decisions;
    std::string verdicts;
    for (const auto& sg : load_subgraphs(alerts_path)) {
        EncodedGraph eg = encode_graph_structure(sg.graph, ctx.tok);
        MatchDecision d = hunt(ctx.model, ctx.tok, ctx.index, ctx.report_texts, eg,
                               graph_digest(sg.graph), cfg.retrieval);
        verdicts += decision_to_jsonl(d) + "\n";
        decisions.push_back(std::move(d));
    }
    AlertValidationMetrics alerts = compute_afr_trr(decisions, truth);
    ConfusionCounts counts = classify(decisions, truth);
    std::cout << metrics_to_json(compute_metrics(counts), counts, &alerts) << '\n';
    if (!output.empty()) {
        write_file(output, verdicts);
        stage.output(output);
    }
    stage.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-modal provenance threat hunting pipeline"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline config JSON file");
    app.add_option("--workdir", g.workdir, "working directory (lock + manifests)");
    uint64_t seed_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override all RNG seeds");
    app.add_flag("--offline", g.offline, "never call the LLM endpoint");

    std::string input, output, graph_path, subgraphs_path, rules_path, pairs_path, out_dir;
    std::string checkpoint_path, tok_path, reports_path, index_path, graphs_path;
    std::string decisions_path, truth_path, alerts_path;
    bool dedup = false, coerce = false, keep_all = false;
    size_t k_val = 0;
    double lambda_val = 0;

    auto* ingest = app.add_subcommand("ingest", "build a provenance graph from audit JSONL");
    ingest->add_option("--input", input, "audit JSONL")->required();
    ingest->add_option("--output", output, "graph JSON")->required();
    ingest->add_flag("--dedup", dedup, "drop exact duplicate events");
    ingest->add_flag("--coerce-unknown-verbs", coerce, "map unknown verbs to open");

    auto* sample = app.add_subcommand("sample", "sample activity subgraphs from socket seeds");
    sample->add_option("--graph", graph_path, "graph JSON")->required();
    sample->add_option("--output", output, "subgraph JSONL")->required();

    auto* synth = app.add_subcommand("synth", "generate paired reports for subgraphs");
    synth->add_option("--subgraphs", subgraphs_path, "subgraph JSONL")->required();
    synth->add_option("--output", output, "paired-sample JSONL")->required();

    auto* denoise_cmd = app.add_subcommand("denoise", "filter and denoise a raw CTI corpus");
    denoise_cmd->add_option("--input", input, "raw CTI JSONL")->required();
    denoise_cmd->add_option("--output", output, "denoised JSONL")->required();
    denoise_cmd->add_option("--rules", rules_path, "IoC/TTP pattern file");
    denoise_cmd->add_flag("--keep-all", keep_all, "skip relevance filtering");

    auto* train_cmd = app.add_subcommand("train", "train the multimodal model");
    train_cmd->add_option("--pairs", pairs_path, "paired-sample JSONL")->required();
    train_cmd->add_option("--output-dir", out_dir, "artifact directory")->required();

    auto* index_cmd = app.add_subcommand("index", "embed reports into a vector index");
    index_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    index_cmd->add_option("--tokenizer", tok_path, "tokenizer JSON")->required();
    index_cmd->add_option("--reports", reports_path, "report JSONL")->required();
    index_cmd->add_option("--output", output, "index file")->required();

    auto* hunt_cmd = app.add_subcommand("hunt", "two-stage retrieval per subgraph");
    hunt_cmd->add_option("--index", index_path, "index file")->required();
    hunt_cmd->add_option("--graphs", graphs_path, "subgraph JSONL")->required();
    hunt_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    hunt_cmd->add_option("--tokenizer", tok_path, "tokenizer JSON")->required();
    hunt_cmd->add_option("--reports", reports_path, "report JSONL")->required();
    hunt_cmd->add_option("--output", output, "hunt-report JSONL (default stdout)");
    auto* k_opt = hunt_cmd->add_option("--k", k_val, "coarse candidates");
    auto* l_opt = hunt_cmd->add_option("--lambda", lambda_val, "similarity threshold");

    auto* eval_cmd = app.add_subcommand("eval", "score hunt decisions against ground truth");
    eval_cmd->add_option("--decisions", decisions_path, "hunt-report JSONL")->required();
    eval_cmd->add_option("--truth", truth_path, "ground-truth JSONL")->required();
    eval_cmd->add_option("--output", output, "metrics JSON (default stdout)");

    auto* va_cmd = app.add_subcommand("validate-alerts", "filter detector alerts, report AFR/TRR");
    va_cmd->add_option("--alerts", alerts_path, "alert subgraph JSONL")->required();
    va_cmd->add_option("--truth", truth_path, "ground-truth JSONL")->required();
    va_cmd->add_option("--index", index_path, "index file")->required();
    va_cmd->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    va_cmd->add_option("--tokenizer", tok_path, "tokenizer JSON")->required();
    va_cmd->add_option("--reports", reports_path, "report JSONL")->required();
    va_cmd->add_option("--output", output, "per-alert verdict JSONL");
    auto* va_k_opt = va_cmd->add_option("--k", k_val, "coarse candidates");
    auto* va_l_opt = va_cmd->add_option("--lambda", lambda_val, "similarity threshold");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (seed_opt->count()) g.seed = seed_val;

    try {
        if (ingest->parsed()) return run_ingest(g, input, output, dedup, coerce);
        if (sample->parsed()) return run_sample(g, graph_path, output);
        if (synth->parsed()) return run_synth(g, subgraphs_path, output);
        if (denoise_cmd->parsed()) return run_denoise(g, input, output, rules_path, keep_all);
        if (train_cmd->parsed()) return run_train(g, pairs_path, out_dir);
        if (index_cmd->parsed())
            return run_index(g, checkpoint_path, tok_path, reports_path, output);
        if (hunt_cmd->parsed())
            return run_hunt(g, index_path, graphs_path, checkpoint_path, tok_path, reports_path,
                            output, k_opt->count() ? std::optional<size_t>(k_val) : std::nullopt,
                            l_opt->count() ? std::optional<double>(lambda_val) : std::nullopt);
        if (eval_cmd->parsed()) return run_eval(g, decisions_path, truth_path, output);
        if (va_cmd->parsed())
            return run_validate_alerts(
                g, alerts_path, truth_path, index_path, checkpoint_path, tok_path, reports_path,
                output, va_k_opt->count() ? std::optional<size_t>(k_val) : std::nullopt,
                va_l_opt->count() ? std::optional<double>(lambda_val) : std::nullopt);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return 2;
    }
}
