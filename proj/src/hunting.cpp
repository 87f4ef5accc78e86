#include "cglp/hunting.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace cglp {

VectorIndex VectorIndex::build(std::vector<std::string> ids, Matrix<float> embeddings) {
    if (ids.empty()) throw ValidationError("cannot build an empty index");
    if (ids.size() != embeddings.rows()) throw ShapeError("index: id/row count mismatch");
    if (!embeddings.all_finite()) throw NumericError("non-finite embedding in index build");
    VectorIndex idx;
    idx.ids_ = std::move(ids);
    idx.rows_ = std::move(embeddings);
    idx.norms_.resize(idx.rows_.rows());
    for (size_t i = 0; i < idx.rows_.rows(); ++i)
        idx.norms_[i] = std::sqrt(kernels::sum_sq(idx.rows_.row(i), idx.rows_.cols()));
    return idx;
}

std::vector<Candidate> VectorIndex::coarse_retrieve(const std::vector<float>& query,
                                                    size_t k) const {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (ids_.empty()) throw ValidationError("coarse_retrieve on an empty index");
    if (query.size() != dim()) throw ShapeError("query dimension mismatch");
    float qn = std::sqrt(kernels::sum_sq(query.data(), query.size()));
    std::vector<Candidate> all(ids_.size());
    for (size_t i = 0; i < ids_.size(); ++i) {
        float denom = qn * norms_[i];
        double sim = denom > 0
                         ? static_cast<double>(kernels::dot(query.data(), rows_.row(i), dim())) /
                               static_cast<double>(denom)
                         : 0.0;
        all[i] = {ids_[i], sim};
    }
    auto cmp = [](const Candidate& a, const Candidate& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.report_id < b.report_id;
    };
    size_t take = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + take, all.end(), cmp);
    all.resize(take);
    return all;
}

namespace {

constexpr char kIdxMagic[7] = {'C', 'G', 'L', 'P', 'I', 'D', 'X'};

template <class V>
void write_pod(std::ostream& out, V v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class V>
V read_pod(std::istream& in) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ValidationError("truncated index file");
    return v;
}

}  // namespace

void VectorIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write index file: " + path);
    out.write(kIdxMagic, sizeof(kIdxMagic));
    write_pod<uint64_t>(out, ids_.size());
    write_pod<uint32_t>(out, static_cast<uint32_t>(dim()));
    for (const auto& id : ids_) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    out.write(reinterpret_cast<const char*>(rows_.data()),
              static_cast<std::streamsize>(rows_.size() * sizeof(float)));
    if (!out) throw RuntimeError("index write failed: " + path);
}

VectorIndex VectorIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open index file: " + path);
    char magic[sizeof(kIdxMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kIdxMagic, sizeof(magic)) != 0)
        throw ValidationError("not a CGLPIDX index file: " + path);
    uint64_t n = read_pod<uint64_t>(in);
    uint32_t d = read_pod<uint32_t>(in);
    std::vector<std::string> ids(n);
    for (auto& id : ids) {
        uint32_t len = read_pod<uint32_t>(in);
        id.assign(len, '\0');
        in.read(id.data(), len);
        if (!in) throw ValidationError("truncated index id table");
    }
    Matrix<float> rows(n, d);
    in.read(reinterpret_cast<char*>(rows.data()),
            static_cast<std::streamsize>(rows.size() * sizeof(float)));
    if (!in) throw ValidationError("truncated index rows");
    return build(std::move(ids), std::move(rows));
}

namespace {

std::vector<float> to_vec(const Matrix<float>& row) {
    return {row.data(), row.data() + row.size()};
}

}  // namespace

std::vector<float> embed_report(Model<float>& model, const std::vector<int>& report_ids) {
    Tape<float> tape;
    auto fwd = model.forward(tape);
    auto te = model.text_encode(fwd, report_ids);
    Tape<float>::Var z = te.cls;
    if (model.config().normalize_embeddings) z = tape.l2_normalize_rows(z);
    return to_vec(tape.val(z));
}

std::vector<float> embed_graph(Model<float>& model, const EncodedGraph& eg) {
    Tape<float> tape;
    auto fwd = model.forward(tape);
    auto ge = model.graph_encode(fwd, eg);
    Tape<float>::Var z = ge.pooled;
    if (model.config().normalize_embeddings) z = tape.l2_normalize_rows(z);
    return to_vec(tape.val(z));
}

double gtm_match_probability(Model<float>& model, const EncodedGraph& eg,
                             const std::vector<int>& report_ids) {
    Tape<float> tape;
    auto fwd = model.forward(tape);
    auto te = model.text_encode(fwd, report_ids);
    auto ge = model.graph_encode(fwd, eg);
    auto joint = model.multimodal_encode(fwd, te.states, ge.node_states);
    const auto& logits = tape.val(model.gtm_logits(fwd, joint.pooled));
    double l0 = logits(0, 0), l1 = logits(0, 1);
    double m = std::max(l0, l1);
    double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    return e1 / (e0 + e1);
}

VectorIndex build_index(Model<float>& model, const Tokenizer& tok,
                        const std::vector<std::string>& report_ids,
                        const std::vector<std::string>& report_texts) {
    if (report_ids.empty()) throw ValidationError("cannot index an empty report corpus");
    if (report_ids.size() != report_texts.size())
        throw ValidationError("report id/text count mismatch");
    model.set_tokenizer(tok);
    Matrix<float> rows(report_ids.size(), model.config().d);
    for (size_t i = 0; i < report_texts.size(); ++i) {
        auto z = embed_report(model, tok.encode(report_texts[i]));
        std::copy(z.begin(), z.end(), rows.row(i));
    }
    return VectorIndex::build(report_ids, std::move(rows));
}

MatchDecision fine_match(Model<float>& model, const Tokenizer& tok, const EncodedGraph& eg,
                         const std::string& graph_id, const std::vector<Candidate>& candidates,
                         const std::unordered_map<std::string, std::string>& report_texts,
                         double lambda) {
    MatchDecision d;
    d.graph_id = graph_id;
    for (const auto& c : candidates) {
        auto it = report_texts.find(c.report_id);
        if (it == report_texts.end())
            throw NotFoundError("no report text for candidate " + c.report_id);
        double prob = gtm_match_probability(model, eg, tok.encode(it->second));
        MatchEntry entry{c.report_id, c.similarity, prob};
        d.candidates_scored.push_back(entry);
        if (c.similarity > lambda && prob > 0.5) d.matches.push_back(entry);
    }
    return d;
}

MatchDecision hunt(Model<float>& model, const Tokenizer& tok, const VectorIndex& index,
                   const std::unordered_map<std::string, std::string>& report_texts,
                   const EncodedGraph& eg, const std::string& graph_id,
                   const RetrievalConfig& cfg) {
    cfg.validate();
    model.set_tokenizer(tok);
    auto candidates = index.coarse_retrieve(embed_graph(model, eg), cfg.k);
    return fine_match(model, tok, eg, graph_id, candidates, report_texts, cfg.lambda);
}

ConfusionCounts classify(const std::vector<MatchDecision>& decisions, const GroundTruth& truth) {
    ConfusionCounts c;
    for (const auto& d : decisions) {
        auto it = truth.find(d.graph_id);
        if (it == truth.end()) throw ValidationError("no ground truth for graph " + d.graph_id);
        if (it->second.has_value()) {
            if (d.matches.size() == 1 && d.matches[0].report_id == *it->second)
                ++c.tp;
            else if (d.matches.empty())
                ++c.fn;
            else
                ++c.fp;  // spurious or non-exclusive matches on a malicious graph
        } else {
            if (d.matches.empty())
                ++c.tn;
            else
                ++c.fp;
        }
    }
    return c;
}

namespace {

MetricValue ratio(size_t num, size_t denom, const std::string& denom_desc) {
    if (denom == 0) return {std::nullopt, denom_desc + " is zero"};
    return {static_cast<double>(num) / static_cast<double>(denom), {}};
}

}  // namespace

Metrics compute_metrics(const ConfusionCounts& c) {
    Metrics m;
    m.recall = ratio(c.tp, c.tp + c.fn, "tp+fn");
    m.precision = ratio(c.tp, c.tp + c.fp, "tp+fp");
    m.accuracy = ratio(c.tp + c.tn, c.total(), "total");
    m.fpr = ratio(c.fp, c.fp + c.tn, "fp+tn");
    if (m.precision.value && m.recall.value) {
        double p = *m.precision.value, r = *m.recall.value;
        if (p + r > 0)
            m.f1 = {2.0 * p * r / (p + r), {}};
        else
            m.f1 = {std::nullopt, "precision+recall is zero"};
    } else {
        m.f1 = {std::nullopt, "precision or recall undefined"};
    }
    return m;
}

AlertValidationMetrics compute_afr_trr(const std::vector<MatchDecision>& decisions,
                                       const GroundTruth& truth) {
    AlertValidationMetrics out;
    for (const auto& d : decisions) {
        auto it = truth.find(d.graph_id);
        if (it == truth.end()) throw ValidationError("no ground truth for alert " + d.graph_id);
        ++out.total_alerts;
        bool filtered = d.matches.empty();
        if (filtered) ++out.filtered_alerts;
        if (it->second.has_value()) {
            ++out.true_alerts;
            if (!filtered) ++out.retained_true_alerts;
        }
    }
    out.afr = ratio(out.filtered_alerts, out.total_alerts, "total alerts");
    out.trr = ratio(out.retained_true_alerts, out.true_alerts, "true alerts");
    return out;
}

std::string decision_to_jsonl(const MatchDecision& d) {
    nlohmann::json j;
    j["graph_id"] = d.graph_id;
    j["matches"] = nlohmann::json::array();
    for (const auto& m : d.matches)
        j["matches"].push_back(
            {{"report_id", m.report_id}, {"similarity", m.similarity}, {"prob", m.prob}});
    j["candidates"] = nlohmann::json::array();
    for (const auto& m : d.candidates_scored)
        j["candidates"].push_back(
            {{"report_id", m.report_id}, {"similarity", m.similarity}, {"prob", m.prob}});
    j["verdict"] = d.matched() ? "matched" : "unmatched";
    return j.dump();
}

MatchDecision decision_from_jsonl(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad hunt-report line: ") + e.what());
    }
    MatchDecision d;
    try {
        d.graph_id = j.at("graph_id").get<std::string>();
        for (const auto& m : j.at("matches"))
            d.matches.push_back({m.at("report_id").get<std::string>(),
                                 m.at("similarity").get<double>(), m.at("prob").get<double>()});
        if (j.contains("candidates"))
            for (const auto& m : j.at("candidates"))
                d.candidates_scored.push_back({m.at("report_id").get<std::string>(),
                                               m.at("similarity").get<double>(),
                                               m.at("prob").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad hunt-report line: ") + e.what());
    }
    return d;
}

namespace {

nlohmann::json metric_json(const MetricValue& v) {
    if (v.value) return *v.value;
    return nullptr;
}

void add_reason(nlohmann::json& reasons, const char* name, const MetricValue& v) {
    if (!v.value) reasons[name] = v.reason;
}

}  // namespace

std::string metrics_to_json(const Metrics& m, const ConfusionCounts& counts,
                            const AlertValidationMetrics* alerts) {
    nlohmann::json j;
    j["recall"] = metric_json(m.recall);
    j["precision"] = metric_json(m.precision);
    j["accuracy"] = metric_json(m.accuracy);
    j["fpr"] = metric_json(m.fpr);
    j["f1"] = metric_json(m.f1);
    j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}};
    nlohmann::json reasons = nlohmann::json::object();
    add_reason(reasons, "recall", m.recall);
    add_reason(reasons, "precision", m.precision);
    add_reason(reasons, "accuracy", m.accuracy);
    add_reason(reasons, "fpr", m.fpr);
    add_reason(reasons, "f1", m.f1);
    if (alerts) {
        j["afr"] = metric_json(alerts->afr);
        j["trr"] = metric_json(alerts->trr);
        j["alert_counts"] = {{"total", alerts->total_alerts},
                             {"filtered", alerts->filtered_alerts},
                             {"true_alerts", alerts->true_alerts},
                             {"retained", alerts->retained_true_alerts}};
        add_reason(reasons, "afr", alerts->afr);
        add_reason(reasons, "trr", alerts->trr);
    }
    if (!reasons.empty()) j["reasons"] = reasons;
    return j.dump(2);
}

}  // namespace cglp
