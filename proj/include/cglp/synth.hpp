#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cglp/llm_client.hpp"
#include "cglp/provenance.hpp"
#include "cglp/sampler.hpp"

namespace cglp {

// One interaction step: ⟨subject, action, object⟩ at a timestamp. Labels are
// short forms of the endpoint attributes (executable token, file basename,
// ip:port).
struct Triplet {
    std::string subject_label;
    ActionKind action = ActionKind::Read;
    std::string object_label;
    int64_t timestamp = 0;
};

inline constexpr int kInContextExampleCount = 5;

struct GenerationPrompt {
    std::string task_description;
    std::string example_triplets;
    std::string example_report;
    std::vector<Triplet> input_triplets;  // timestamp-ordered
};

enum class ReportProvenance { Llm, Template };

struct PairedSample {
    Subgraph graph;
    std::string report;
    ReportProvenance provenance = ReportProvenance::Template;
};

// Short display label for a triplet endpoint (drops the Table-style kind
// prefix; processes reduce to the executable token, files to the basename).
std::string entity_short_label(const Entity& e);

// One triplet per induced event, ascending by timestamp.
std::vector<Triplet> graph_to_triplets(const Subgraph& sg);

// "step N: <subj, verb, obj>"; steps are relative indices, not wall-clock.
std::string render_triplet_lines(const std::vector<Triplet>& triplets);

// Three-part prompt: task description, one of the bundled in-context
// examples (example_id in [0, 5)), and the input triplets.
GenerationPrompt build_generation_prompt(const std::vector<Triplet>& triplets, int example_id);
std::string render_prompt(const GenerationPrompt& prompt);

// Deterministic narrative: one clause per triplet in time order, verbs mapped
// through the fixed phrase table. extra_process_labels are appended to the
// participant sentence so every process of the source graph is mentioned.
std::string template_synthesize(const std::vector<Triplet>& triplets,
                                const std::vector<std::string>& extra_process_labels = {});

const char* verb_phrase(ActionKind a);
extern const char* const kVerbPhraseTableVersion;

struct GeneratedReport {
    std::string text;
    ReportProvenance provenance;
    std::string warning;  // non-empty when an LLM call failed and we fell back
};

GeneratedReport generate_report(const std::vector<Triplet>& triplets, LlmClient* client,
                                const std::vector<std::string>& extra_process_labels = {});

// Full pipeline step for one subgraph.
PairedSample synthesize_pair(const Subgraph& sg, LlmClient* client,
                             std::string* warning = nullptr);

std::string serialize_paired_sample(const PairedSample& s);
PairedSample parse_paired_sample(const std::string& json_line);

}  // namespace cglp
