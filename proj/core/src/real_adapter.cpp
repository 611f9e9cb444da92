#include "snp/real_adapter.hpp"

#include <filesystem>

#include "snp/errors.hpp"

namespace snp {

bool RealBackendConfig::weights_present() const {
    return !weights_dir.empty() && std::filesystem::exists(weights_dir);
}

std::unique_ptr<DenoiserBackend> make_real_backend(const RealBackendConfig& config) {
    if (!config.weights_present())
        throw BackendError("real backend unavailable: weights_dir '" + config.weights_dir +
                           "' is not set or does not exist");
    // Weights are present but no runtime adapter is registered in this
    // build. docs/real_backend.md describes the subclass contract: expose
    // the 12 encoder-skip residual sites plus the middle-block site, declare
    // the site -> decoder-block map, and route predict/control_encode/
    // scheduler_update to the runtime.
    throw BackendError("real backend unavailable: no runtime adapter registered for model '" +
                       config.model + "'; see docs/real_backend.md");
}

}  // namespace snp
