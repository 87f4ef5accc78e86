#pragma once

#include <map>
#include <string>

#include "cglp/hunting.hpp"
#include "cglp/llm_client.hpp"
#include "cglp/sampler.hpp"
#include "cglp/training.hpp"

namespace cglp {

inline constexpr const char* kToolVersion = "cglp 0.1.0";

// Whole-pipeline settings, loadable from a JSON file; unset keys keep the
// module defaults. Command-line flags override file values.
struct PipelineConfig {
    std::string workdir;
    uint64_t seed = 0;
    bool offline = false;
    SamplingConfig sampling;
    TrainConfig train;
    RetrievalConfig retrieval;
    ModelConfig model;
    LlmSettings llm;

    static PipelineConfig from_json(const std::string& text);
    static PipelineConfig from_json_file(const std::string& path);
    std::string to_json() const;

    void validate() const {
        sampling.validate();
        train.validate();
        retrieval.validate();
        model.validate();
    }
};

// Reproducibility record for one pipeline stage.
struct RunManifest {
    std::string stage;
    std::string tool_version = kToolVersion;
    uint64_t seed = 0;
    std::string config_digest;
    std::map<std::string, std::string> input_digests;   // path -> fnv64 hex
    std::map<std::string, std::string> output_digests;  // path -> fnv64 hex

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    // Writes manifest-<stage>.json under workdir.
    void write(const std::string& workdir) const;
};

// FNV-1a 64 over file bytes, as 16 hex chars.
std::string file_digest(const std::string& path);

// Exclusive advisory lock on a working directory (lock file created with
// O_EXCL, removed on release). Throws when the directory is already locked.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::string& workdir);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::string path_;
};

}  // namespace cglp
