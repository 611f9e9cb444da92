#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "snp/backend.hpp"
#include "snp/real_adapter.hpp"
#include "snp/wcm.hpp"

namespace snp {

// Experiment configuration, read from a line-oriented sectioned
// `key = value` text format:
//
//   # full-line comments and blank lines are ignored
//   [section]
//   key = value
//
// Values are taken verbatim after trimming, so '#' inside a value is kept.
// Unknown sections or keys are parse errors with line diagnostics.
// Serialization (canonical_text) emits sections and keys in a fixed order
// with shortest round-trip number formatting, so equal configs produce
// byte-equal text; the run id is a hash of that text.

struct BackendSection {
    std::string kind = "toy";  // toy | real
    ToyBackendSpec toy;
    RealBackendConfig real;
};

struct GuidanceSection {
    double scale = 7.5;
    double lambda_t = 0.3;
    bool use_negative_control = false;
    // "pose" | "all" | "none" | explicit comma-separated site indices
    std::string routing = "pose";
};

struct WcmSection {
    bool enabled = false;
    WcmConfig params;
};

struct RunSection {
    uint64_t seed = 1;
    int steps = 20;
    int batch = 1;
    std::string out = "out";
};

// Extra run description recorded in manifests so a run can be replayed
// from the manifest file alone.
struct ManifestSection {
    std::string prompt;
    std::string negative_prompt;
    std::string depth;
    std::string cell;
    std::string runid;  // recorded, never hashed
};

struct ExperimentConfig {
    BackendSection backend;
    GuidanceSection guidance;
    WcmSection wcm;
    RunSection run;
    // [routing] section: backend id -> comma-separated site indices ("" = empty mask)
    std::map<std::string, std::string> routing_entries;
    ManifestSection manifest;

    static ExperimentConfig parse_file(const std::filesystem::path& path);
    static ExperimentConfig parse_text(std::string_view text, const std::string& source_name);

    // Applies one "section.key=value" assignment; throws ConfigError for
    // unknown paths or unparseable values. `line` feeds diagnostics.
    void set_path(const std::string& dotted_path, const std::string& value, int line = 0);

    void validate() const;

    // Fixed-order serialization. The [manifest] section (without cell and
    // runid) is included when with_manifest is set; run ids hash this text.
    std::string canonical_text(bool with_manifest) const;

    std::string run_id() const;  // fnv1a64 of canonical_text(true), 16 hex chars
};

// Shortest round-trip decimal text for a double (std::to_chars).
std::string format_double(double v);

}  // namespace snp
