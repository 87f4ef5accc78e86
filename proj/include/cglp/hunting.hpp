#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cglp/model.hpp"

namespace cglp {

struct RetrievalConfig {
    size_t k = 10;
    double lambda = 0.5;

    void validate() const {
        if (k < 1) throw ValidationError("k must be >= 1");
        if (lambda < 0.0 || lambda > 1.0) throw ValidationError("lambda must lie in [0, 1]");
    }
};

struct Candidate {
    std::string report_id;
    double similarity;
};

struct MatchEntry {
    std::string report_id;
    double similarity;
    double prob;
};

struct MatchDecision {
    std::string graph_id;
    std::vector<MatchEntry> matches;  // reports passing both decision conditions
    std::vector<MatchEntry> candidates_scored;  // every fine-stage candidate, for re-binning

    bool matched() const { return !matches.empty(); }
};

// Flat exact-search index over report embeddings; norms cached at build.
class VectorIndex {
public:
    VectorIndex() = default;

    static VectorIndex build(std::vector<std::string> ids, Matrix<float> embeddings);

    size_t size() const { return ids_.size(); }
    size_t dim() const { return rows_.cols(); }
    const std::string& id(size_t i) const { return ids_[i]; }
    const float* row(size_t i) const { return rows_.row(i); }

    // Exact top-k by cosine similarity; ties broken by ascending report id.
    // Returns min(k, n) candidates in descending-similarity order.
    std::vector<Candidate> coarse_retrieve(const std::vector<float>& query, size_t k) const;

    void save(const std::string& path) const;
    static VectorIndex load(const std::string& path);

private:
    std::vector<std::string> ids_;
    Matrix<float> rows_;
    std::vector<float> norms_;
};

// Inference-mode (no dropout) encoders on top of a trained model.
std::vector<float> embed_report(Model<float>& model, const std::vector<int>& report_ids);
std::vector<float> embed_graph(Model<float>& model, const EncodedGraph& eg);
// Softmax probability of the match class from the cross-modal matching head.
double gtm_match_probability(Model<float>& model, const EncodedGraph& eg,
                             const std::vector<int>& report_ids);

// One embedding row per report, in input order.
VectorIndex build_index(Model<float>& model, const Tokenizer& tok,
                        const std::vector<std::string>& report_ids,
                        const std::vector<std::string>& report_texts);

// Fine stage: a candidate matches iff similarity > lambda (strict) and the
// match probability exceeds 0.5. All scored candidates are retained in the
// decision so alternative tallies stay recomputable.
MatchDecision fine_match(Model<float>& model, const Tokenizer& tok, const EncodedGraph& eg,
                         const std::string& graph_id, const std::vector<Candidate>& candidates,
                         const std::unordered_map<std::string, std::string>& report_texts,
                         double lambda);

MatchDecision hunt(Model<float>& model, const Tokenizer& tok, const VectorIndex& index,
                   const std::unordered_map<std::string, std::string>& report_texts,
                   const EncodedGraph& eg, const std::string& graph_id,
                   const RetrievalConfig& cfg);

struct ConfusionCounts {
    size_t tp = 0, fp = 0, tn = 0, fn = 0;
    size_t total() const { return tp + fp + tn + fn; }
};

// Ground truth per graph id: the paired report id for malicious graphs,
// nullopt for benign ones.
using GroundTruth = std::unordered_map<std::string, std::optional<std::string>>;

// Exclusive-match binning: a malicious graph is TP only when its matched set
// is exactly its paired report; any other non-empty matched set counts as one
// FP event; an empty matched set is FN. Benign graphs are TN when unmatched,
// FP otherwise. One count per graph.
ConfusionCounts classify(const std::vector<MatchDecision>& decisions, const GroundTruth& truth);

struct MetricValue {
    std::optional<double> value;
    std::string reason;  // set when value is null (zero denominator)
};

struct Metrics {
    MetricValue recall, precision, accuracy, fpr, f1;
};

Metrics compute_metrics(const ConfusionCounts& counts);

struct AlertValidationMetrics {
    MetricValue afr, trr;
    size_t total_alerts = 0, filtered_alerts = 0;
    size_t true_alerts = 0, retained_true_alerts = 0;
};

// An alert is filtered iff its matched set is empty; a true alert is retained
// iff it is not filtered.
AlertValidationMetrics compute_afr_trr(const std::vector<MatchDecision>& decisions,
                                       const GroundTruth& truth);

// JSONL line `{"graph_id", "matches": [...], "verdict"}` and its inverse.
std::string decision_to_jsonl(const MatchDecision& d);
MatchDecision decision_from_jsonl(const std::string& line);

// Metrics JSON: the five classification metrics (null with a reason on zero
// denominators), the confusion counts, and AFR/TRR when supplied.
std::string metrics_to_json(const Metrics& m, const ConfusionCounts& counts,
                            const AlertValidationMetrics* alerts = nullptr);

}  // namespace cglp
