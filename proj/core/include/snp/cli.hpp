#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snp/config.hpp"
#include "snp/control_router.hpp"
#include "snp/guidance.hpp"

namespace snp::cli {

// Stable exit codes (documented in the README).
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;   // unparseable config / bad inputs
inline constexpr int kExitBackend = 3;  // backend unavailable or failed
inline constexpr int kExitDataset = 4;  // dataset layout violations

struct GenerateOptions {
    std::optional<std::string> config_path;
    std::optional<std::string> depth_path;
    std::optional<std::string> prompt;
    std::optional<std::string> negative_prompt;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> sets;  // repeated --set section.key=value
};

struct AblateOptions {
    GenerateOptions base;
    std::vector<std::string> sweeps;  // repeated --sweep path=v1,v2 | path=a:b:c
};

struct EvalOptions {
    std::string dataset;
    std::string mode = "full";  // pose | clip | fid | full
    std::optional<std::string> ref_dir;
    std::optional<std::string> prompt_feat;
    std::optional<std::string> out;
    int bin_width = 30;
};

int run_generate(const GenerateOptions& options, std::ostream& log);
int run_ablate(const AblateOptions& options, std::ostream& log);
int run_eval(const EvalOptions& options, std::ostream& log);

// Shared plumbing, exposed for tests.

// Config resolution order: built-in defaults, then the config file, then
// repeated --set overrides, then the --seed/--out shorthands. The
// SNP_BACKEND environment variable ("toy" or "real") force-selects the
// backend last.
ExperimentConfig resolve_config(const GenerateOptions& options);

std::unique_ptr<DenoiserBackend> build_backend(const ExperimentConfig& config);

RoutingTable routing_table_for(const ExperimentConfig& config, const DenoiserBackend& backend);

// "pose" | "all" | "none" | explicit indices -> mask.
RoutingMask resolve_routing(const std::string& routing, const RoutingTable& table,
                            const DenoiserBackend& backend);

GuidanceConfig guidance_from(const ExperimentConfig& config, const RoutingMask& mask);

struct RunOutcome {
    std::string runid;
    std::filesystem::path cell_dir;
    std::vector<std::filesystem::path> latents;
    std::filesystem::path manifest;
    double latent_mean = 0.0;
    double latent_std = 0.0;
};

// Runs sample() for every batch element of a fully resolved config and
// writes `<out>/<runid>/<cell>/<index>.lat` plus the manifest.
RunOutcome execute_run(const ExperimentConfig& resolved, const std::string& cell_key,
                       const std::string& runid);

}  // namespace snp::cli
