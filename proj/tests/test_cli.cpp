// Drives the command-line binary end to end as a subprocess. The binary path
// arrives as the first program argument.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "cglp/provenance.hpp"
#include "cglp/sampler.hpp"
#include "helpers.hpp"

namespace {

std::string g_cli;

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    fs::path out_file = scratch / "stdout.tmp";
    fs::path err_file = scratch / "stderr.tmp";
    std::string cmd = g_cli + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Render a synthetic provenance graph back into the audit-record JSONL the
// ingest stage consumes.
std::string audit_jsonl(const cglp::ProvenanceGraph& g) {
    using nlohmann::json;
    std::string out;
    auto endpoint = [&](const std::string& id) {
        const cglp::Entity& e = g.entities().at(id);
        return json{{"id", e.id}, {"kind", cglp::kind_word(e.kind)}, {"attr", e.attribute}};
    };
    for (const auto& ev : g.events()) {
        json rec{{"ts", ev.timestamp},
                 {"subject", endpoint(ev.subject)},
                 {"action", cglp::action_name(ev.action)},
                 {"object", endpoint(ev.object)}};
        out += rec.dump() + "\n";
    }
    return out;
}

// Pipeline config kept tiny so the train stage finishes in seconds.
std::string tiny_config_json() {
    nlohmann::json j;
    j["model"] = {{"d", 16},       {"heads", 2},   {"text_layers", 1}, {"mm_layers", 1},
                  {"gin_layers", 1}, {"max_len", 128}, {"ffn_mult", 2},  {"dropout", 0.0}};
    j["train"] = {{"batch_size", 4}, {"epochs", 8},      {"warmup_epochs", 2},
                  {"learning_rate", 2e-3}, {"min_lr", 2e-4}, {"checkpoint_every", 0}};
    j["sampling"] = {{"min_nodes", 10}, {"max_nodes", 20}};
    j["retrieval"] = {{"k", 3}, {"lambda", 0.0}};
    return j.dump(2);
}

struct PipelineArtifacts {
    fs::path dir;
    fs::path graph, subgraphs, pairs, reports, truth, model_dir, index, decisions;
};

// Runs ingest -> sample -> synth -> train -> index -> hunt in `dir`.
PipelineArtifacts run_pipeline(const fs::path& dir, uint64_t seed) {
    fs::create_directories(dir);
    PipelineArtifacts a;
    a.dir = dir;
    a.graph = dir / "graph.json";
    a.subgraphs = dir / "subgraphs.jsonl";
    a.pairs = dir / "pairs.jsonl";
    a.reports = dir / "reports.jsonl";
    a.truth = dir / "truth.jsonl";
    a.model_dir = dir / "model";
    a.index = dir / "reports.idx";
    a.decisions = dir / "decisions.jsonl";

    cglp::ProvenanceGraph g = testutil::make_synthetic_graph(30, 30, 10, 99);
    spit(dir / "audit.jsonl", audit_jsonl(g));
    spit(dir / "config.json", tiny_config_json());
    std::string base = "--config " + (dir / "config.json").string() + " --seed " +
                       std::to_string(seed) + " --offline ";

    RunResult r = run_cli(base + "ingest --input " + (dir / "audit.jsonl").string() +
                              " --output " + a.graph.string(),
                          dir);
    REQUIRE(r.exit_code == 0);

    r = run_cli(base + "sample --graph " + a.graph.string() + " --output " + a.subgraphs.string(),
                dir);
    REQUIRE(r.exit_code == 0);

    r = run_cli(base + "synth --subgraphs " + a.subgraphs.string() + " --output " +
                    a.pairs.string(),
                dir);
    REQUIRE(r.exit_code == 0);

    // Derive the report corpus and ground truth from the paired samples.
    {
        std::string reports, truth;
        std::istringstream pairs_in(slurp(a.pairs));
        std::istringstream subs_in(slurp(a.subgraphs));
        std::string pline, sline;
        int i = 0;
        while (std::getline(pairs_in, pline) && std::getline(subs_in, sline)) {
            if (pline.empty()) continue;
            auto pj = nlohmann::json::parse(pline);
            std::string rid = "r" + std::to_string(i++);
            reports += nlohmann::json{{"id", rid}, {"body", pj.at("report")}}.dump() + "\n";
            cglp::Subgraph sg = cglp::parse_subgraph(sline);
            truth += nlohmann::json{{"graph_id", cglp::graph_digest(sg.graph)},
                                    {"paired_report", rid}}
                         .dump() +
                     "\n";
        }
        spit(a.reports, reports);
        spit(a.truth, truth);
    }

    r = run_cli(base + "train --pairs " + a.pairs.string() + " --output-dir " +
                    a.model_dir.string(),
                dir);
    REQUIRE(r.exit_code == 0);

    std::string ckpt = (a.model_dir / "checkpoint.bin").string();
    std::string tok = (a.model_dir / "tokenizer.json").string();
    r = run_cli(base + "index --checkpoint " + ckpt + " --tokenizer " + tok + " --reports " +
                    a.reports.string() + " --output " + a.index.string(),
                dir);
    REQUIRE(r.exit_code == 0);

    r = run_cli(base + "hunt --index " + a.index.string() + " --graphs " + a.subgraphs.string() +
                    " --checkpoint " + ckpt + " --tokenizer " + tok + " --reports " +
                    a.reports.string() + " --output " + a.decisions.string(),
                dir);
    REQUIRE(r.exit_code == 0);
    return a;
}

size_t count_lines(const std::string& text) {
    size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("full offline pipeline produces schema-valid artifacts") {
    fs::path dir = fs::temp_directory_path() / "cglp_cli_e2e";
    fs::remove_all(dir);
    PipelineArtifacts a = run_pipeline(dir, 17);

    // Graph JSON parses and is non-trivial.
    cglp::ProvenanceGraph g = cglp::parse_graph(slurp(a.graph));
    CHECK(g.node_count() > 20);
    CHECK(g.edge_count() > 20);

    size_t n_sub = count_lines(slurp(a.subgraphs));
    CHECK(n_sub >= 2);
    CHECK(count_lines(slurp(a.pairs)) == n_sub);

    // Loss log: header plus one row per epoch, strictly increasing epochs.
    std::string loss = slurp(a.model_dir / "loss.csv");
    REQUIRE(count_lines(loss) == 1 + 8);
    CHECK(loss.rfind("epoch,gtc,gtm,mlm,mgm,total,lr\n", 0) == 0);

    // Hunt decisions: one JSON line per subgraph, each with a verdict.
    std::string decisions = slurp(a.decisions);
    REQUIRE(count_lines(decisions) == n_sub);
    std::istringstream din(decisions);
    std::string line;
    while (std::getline(din, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.contains("graph_id"));
        CHECK(j.contains("matches"));
        CHECK((j.at("verdict") == "matched" || j.at("verdict") == "unmatched"));
    }

    // Eval produces metrics JSON on stdout with counts conserved.
    RunResult ev = run_cli("eval --decisions " + a.decisions.string() + " --truth " +
                               a.truth.string(),
                           dir);
    REQUIRE(ev.exit_code == 0);
    auto m = nlohmann::json::parse(ev.out);
    CHECK(m.contains("recall"));
    CHECK(m.contains("precision"));
    CHECK(m.contains("accuracy"));
    CHECK(m.contains("fpr"));
    CHECK(m.contains("f1"));
    auto c = m.at("counts");
    CHECK(c.at("tp").get<int>() + c.at("fp").get<int>() + c.at("tn").get<int>() +
              c.at("fn").get<int>() ==
          static_cast<int>(n_sub));

    // Manifests were written for stages run with --workdir (none here), but the
    // validate-alerts path works end to end and reports AFR/TRR.
    RunResult va = run_cli(
        "--config " + (dir / "config.json").string() + " --offline validate-alerts --alerts " +
            a.subgraphs.string() + " --truth " + a.truth.string() + " --index " +
            a.index.string() + " --checkpoint " + (a.model_dir / "checkpoint.bin").string() +
            " --tokenizer " + (a.model_dir / "tokenizer.json").string() + " --reports " +
            a.reports.string(),
        dir);
    REQUIRE(va.exit_code == 0);
    auto vm = nlohmann::json::parse(va.out);
    CHECK(vm.contains("afr"));
    CHECK(vm.contains("trr"));
    CHECK(vm.contains("alert_counts"));
    fs::remove_all(dir);
}

TEST_CASE("identical seeds give byte-identical artifacts") {
    fs::path da = fs::temp_directory_path() / "cglp_cli_det_a";
    fs::path db = fs::temp_directory_path() / "cglp_cli_det_b";
    fs::remove_all(da);
    fs::remove_all(db);
    PipelineArtifacts a = run_pipeline(da, 23);
    PipelineArtifacts b = run_pipeline(db, 23);
    CHECK(slurp(a.graph) == slurp(b.graph));
    CHECK(slurp(a.subgraphs) == slurp(b.subgraphs));
    CHECK(slurp(a.pairs) == slurp(b.pairs));
    CHECK(slurp(a.model_dir / "loss.csv") == slurp(b.model_dir / "loss.csv"));
    CHECK(slurp(a.model_dir / "checkpoint.bin") == slurp(b.model_dir / "checkpoint.bin"));
    CHECK(slurp(a.index) == slurp(b.index));
    CHECK(slurp(a.decisions) == slurp(b.decisions));

    // A different seed changes the trained artifacts.
    fs::path dc = fs::temp_directory_path() / "cglp_cli_det_c";
    fs::remove_all(dc);
    PipelineArtifacts c = run_pipeline(dc, 24);
    CHECK(slurp(a.model_dir / "checkpoint.bin") != slurp(c.model_dir / "checkpoint.bin"));
    fs::remove_all(da);
    fs::remove_all(db);
    fs::remove_all(dc);
}

TEST_CASE("exit codes distinguish usage, validation, and success") {
    fs::path dir = fs::temp_directory_path() / "cglp_cli_codes";
    fs::create_directories(dir);
    CHECK(run_cli("--help", dir).exit_code == 0);
    CHECK(run_cli("no-such-subcommand", dir).exit_code == 1);
    CHECK(run_cli("ingest --bogus-flag x", dir).exit_code == 1);
    RunResult missing =
        run_cli("ingest --input /nonexistent/audit.jsonl --output " + (dir / "g.json").string(),
                dir);
    CHECK(missing.exit_code == 1);
    CHECK(missing.err.find("error:") != std::string::npos);

    // Malformed audit input is a validation failure, not a crash.
    spit(dir / "bad.jsonl", "{\"ts\": 1}\n");
    RunResult bad = run_cli(
        "ingest --input " + (dir / "bad.jsonl").string() + " --output " + (dir / "g.json").string(),
        dir);
    CHECK(bad.exit_code == 1);
    fs::remove_all(dir);
}

TEST_CASE("workdir locking blocks concurrent stages and writes manifests") {
    fs::path dir = fs::temp_directory_path() / "cglp_cli_lock";
    fs::remove_all(dir);
    fs::create_directories(dir);
    cglp::ProvenanceGraph g = testutil::make_synthetic_graph(5, 5, 2, 7);
    spit(dir / "audit.jsonl", audit_jsonl(g));

    fs::path wd = dir / "work";
    std::string cmd = "--workdir " + wd.string() + " ingest --input " +
                      (dir / "audit.jsonl").string() + " --output " + (dir / "g.json").string();
    RunResult ok = run_cli(cmd, dir);
    REQUIRE(ok.exit_code == 0);
    CHECK(fs::exists(wd / "manifest-ingest.json"));
    CHECK(!fs::exists(wd / ".cglp.lock"));  // released on exit
    auto mj = nlohmann::json::parse(slurp(wd / "manifest-ingest.json"));
    CHECK(mj.at("stage") == "ingest");
    CHECK(mj.at("outputs").size() == 1);

    // A stale lock blocks the next run.
    spit(wd / ".cglp.lock", "");
    RunResult blocked = run_cli(cmd, dir);
    CHECK(blocked.exit_code == 1);
    CHECK(blocked.err.find("locked") != std::string::npos);
    fs::remove_all(dir);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-cli-binary> [doctest args]\n");
        return 1;
    }
    g_cli = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
