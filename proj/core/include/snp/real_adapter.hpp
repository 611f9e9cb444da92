#pragma once

#include <memory>
#include <string>

#include "snp/backend.hpp"

namespace snp {

// Configuration for a real latent-diffusion + control-encoder stack. The
// repository ships the adapter seam, not an inference runtime: wire a
// DenoiserBackend subclass to your runtime following docs/real_backend.md,
// then register it in make_real_backend.
struct RealBackendConfig {
    std::string model = "";        // base model identifier
    std::string control_model = "";  // control encoder identifier
    std::string weights_dir = "";  // directory holding downloaded weights
    std::string device = "cpu";

    // True when a weights directory is configured and exists on disk.
    bool weights_present() const;
};

// Returns the wired real backend, or throws BackendError explaining what
// is missing (no weights, or no runtime adapter compiled in). The CLI maps
// this to exit code 3; the integration smoke test skips instead.
std::unique_ptr<DenoiserBackend> make_real_backend(const RealBackendConfig& config);

}  // namespace snp
