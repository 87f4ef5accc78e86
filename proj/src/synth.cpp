#include "cglp/synth.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cglp {

std::string entity_short_label(const Entity& e) {
    switch (e.kind) {
        case EntityKind::Process: {
            auto sp = e.attribute.find_first_of(" \t");
            return sp == std::string::npos ? e.attribute : e.attribute.substr(0, sp);
        }
        case EntityKind::File: {
            auto slash = e.attribute.find_last_of("/\\");
            std::string base =
                slash == std::string::npos ? e.attribute : e.attribute.substr(slash + 1);
            return base.empty() ? e.attribute : base;
        }
        case EntityKind::Socket:
            return e.attribute;
    }
    return e.attribute;
}

std::vector<Triplet> graph_to_triplets(const Subgraph& sg) {
    std::vector<Triplet> out;
    out.reserve(sg.graph.events().size());
    for (const auto& ev : sg.graph.events())
        out.push_back(Triplet{entity_short_label(sg.graph.entity(ev.subject)), ev.action,
                              entity_short_label(sg.graph.entity(ev.object)), ev.timestamp});
    // Parent events are already time-sorted; keep the guarantee local anyway.
    std::stable_sort(out.begin(), out.end(),
                     [](const Triplet& a, const Triplet& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::string render_triplet_lines(const std::vector<Triplet>& triplets) {
    std::ostringstream os;
    for (size_t i = 0; i < triplets.size(); ++i)
        os << "step " << (i + 1) << ": <" << triplets[i].subject_label << ", "
           << action_name(triplets[i].action) << ", " << triplets[i].object_label << ">\n";
    return os.str();
}

namespace {

const char* kTaskDescription =
    "You are a cyber threat intelligence analyst. Convert the ordered system "
    "interaction triplets below into a concise CTI report that narrates the "
    "attack campaign they describe. Mention every process, keep the temporal "
    "order, and write in the style of a vendor threat report.";

struct Demo {
    const char* triplets;
    const char* report;
};

const Demo kDemos[kInContextExampleCount] = {
    {"step 1: <word.exe, read, payroll.docx>\n"
     "step 2: <word.exe, connect, 203.0.113.7:443>\n"
     "step 3: <word.exe, send, 203.0.113.7:443>\n",
     "The campaign began when word.exe accessed the sensitive document "
     "payroll.docx. The process then established an outbound channel to "
     "203.0.113.7:443 and exfiltrated the collected data over that "
     "connection."},
    {"step 1: <powershell.exe, open, dropper.ps1>\n"
     "step 2: <powershell.exe, execute, dropper.ps1>\n"
     "step 3: <powershell.exe, write, implant.dll>\n"
     "step 4: <powershell.exe, fork, rundll32.exe>\n",
     "An attacker staged a PowerShell dropper: powershell.exe opened and "
     "executed dropper.ps1, wrote the payload implant.dll to disk, and "
     "spawned rundll32.exe to run it, establishing persistence."},
    {"step 1: <nginx, receive, 198.51.100.2:8080>\n"
     "step 2: <nginx, fork, sh>\n"
     "step 3: <sh, execute, netrecon>\n",
     "A web-facing nginx worker received crafted input from "
     "198.51.100.2:8080, forked a shell, and the shell executed the "
     "reconnaissance utility netrecon, indicating a remote exploitation "
     "chain."},
    {"step 1: <update.exe, connect, 192.0.2.9:80>\n"
     "step 2: <update.exe, receive, 192.0.2.9:80>\n"
     "step 3: <update.exe, write, stage2.bin>\n"
     "step 4: <update.exe, delete, update.log>\n",
     "Posing as a software updater, update.exe contacted 192.0.2.9:80, "
     "downloaded the second-stage payload stage2.bin, and deleted its own "
     "log file update.log to cover its tracks."},
    {"step 1: <sshd, fork, bash>\n"
     "step 2: <bash, read, id_rsa>\n"
     "step 3: <bash, send, 203.0.113.99:22>\n",
     "Following a compromised SSH session, sshd forked an interactive bash "
     "shell which read the private key id_rsa and transmitted it to the "
     "attacker-controlled host 203.0.113.99:22, completing credential "
     "theft."},
};

}  // namespace

GenerationPrompt build_generation_prompt(const std::vector<Triplet>& triplets, int example_id) {
    if (triplets.empty()) throw ValidationError("cannot build a prompt from zero triplets");
    if (example_id < 0 || example_id >= kInContextExampleCount)
        throw ValidationError("example_id out of range [0, 5)");
    GenerationPrompt p;
    p.task_description = kTaskDescription;
    p.example_triplets = kDemos[example_id].triplets;
    p.example_report = kDemos[example_id].report;
    p.input_triplets = triplets;
    std::stable_sort(p.input_triplets.begin(), p.input_triplets.end(),
                     [](const Triplet& a, const Triplet& b) { return a.timestamp < b.timestamp; });
    return p;
}

std::string render_prompt(const GenerationPrompt& prompt) {
    std::ostringstream os;
    os << "### Task\n" << prompt.task_description << "\n\n";
    os << "### Example\nTriplets:\n" << prompt.example_triplets << "Report:\n"
       << prompt.example_report << "\n\n";
    os << "### Input\nTriplets:\n" << render_triplet_lines(prompt.input_triplets) << "Report:\n";
    return os.str();
}

const char* const kVerbPhraseTableVersion = "1";

const char* verb_phrase(ActionKind a) {
    switch (a) {
        case ActionKind::Read: return "read data from";
        case ActionKind::Write: return "wrote data to";
        case ActionKind::Execute: return "executed";
        case ActionKind::Fork: return "spawned the process";
        case ActionKind::Open: return "opened";
        case ActionKind::Close: return "closed";
        case ActionKind::Delete: return "deleted";
        case ActionKind::Connect: return "established a connection to";
        case ActionKind::Send: return "sent data to";
        case ActionKind::Receive: return "received data from";
    }
    return "interacted with";
}

std::string template_synthesize(const std::vector<Triplet>& triplets,
                                const std::vector<std::string>& extra_process_labels) {
    std::ostringstream os;
    os << "Observed activity chain with " << triplets.size() << " recorded interactions.";
    for (size_t i = 0; i < triplets.size(); ++i) {
        const auto& t = triplets[i];
        os << " Step " << (i + 1) << ": " << t.subject_label << " " << verb_phrase(t.action)
           << " " << t.object_label << ".";
    }
    std::set<std::string> procs(extra_process_labels.begin(), extra_process_labels.end());
    for (const auto& t : triplets) procs.insert(t.subject_label);
    os << " Processes involved:";
    bool first = true;
    for (const auto& p : procs) {
        os << (first ? " " : ", ") << p;
        first = false;
    }
    os << ".";
    return os.str();
}

GeneratedReport generate_report(const std::vector<Triplet>& triplets, LlmClient* client,
                                const std::vector<std::string>& extra_process_labels) {
    GeneratedReport out;
    if (client && !triplets.empty()) {
        int example_id =
            static_cast<int>(fnv1a64(render_triplet_lines(triplets)) % kInContextExampleCount);
        auto prompt = build_generation_prompt(triplets, example_id);
        auto completion = client->complete(prompt.task_description, render_prompt(prompt));
        if (completion && !completion->empty()) {
            out.text = *completion;
            out.provenance = ReportProvenance::Llm;
            return out;
        }
        out.warning = "llm completion failed; using template fallback";
    }
    out.text = template_synthesize(triplets, extra_process_labels);
    out.provenance = ReportProvenance::Template;
    return out;
}

PairedSample synthesize_pair(const Subgraph& sg, LlmClient* client, std::string* warning) {
    std::vector<std::string> proc_labels;
    for (const auto& [id, e] : sg.graph.entities())
        if (e.kind == EntityKind::Process) proc_labels.push_back(entity_short_label(e));
    auto report = generate_report(graph_to_triplets(sg), client, proc_labels);
    if (warning && !report.warning.empty()) *warning = report.warning;
    PairedSample out;
    out.graph = sg;
    out.report = report.text;
    out.provenance = report.provenance;
    return out;
}

std::string serialize_paired_sample(const PairedSample& s) {
    nlohmann::json j;
    j["graph"] = nlohmann::json::parse(serialize_subgraph(s.graph));
    j["report"] = s.report;
    j["provenance"] = s.provenance == ReportProvenance::Llm ? "llm" : "template";
    return j.dump();
}

PairedSample parse_paired_sample(const std::string& json_line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad paired-sample JSON: ") + e.what());
    }
    PairedSample s;
    s.graph = parse_subgraph(j.at("graph").dump());
    s.report = j.at("report").get<std::string>();
    if (s.report.empty()) throw ValidationError("paired sample with empty report");
    s.provenance = j.value("provenance", "template") == "llm" ? ReportProvenance::Llm
                                                              : ReportProvenance::Template;
    return s;
}

}  // namespace cglp
