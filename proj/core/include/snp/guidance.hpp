#pragma once

#include <optional>
#include <vector>

#include "snp/backend.hpp"
#include "snp/control_router.hpp"
#include "snp/tensor.hpp"
#include "snp/wcm.hpp"

namespace snp {

// Noisy latent plus its position in the sampling schedule. step_index 0 is
// the noisiest (first) step.
struct LatentState {
    Tensor4f latent;
    int step_index = 0;
    int total_steps = 1;

    void validate() const;
};

// Positive / negative prompt embeddings; shapes must match.
struct PromptPair {
    std::vector<float> positive;
    std::vector<float> negative;

    void validate() const;
};

struct GuidanceConfig {
    double scale_s = 7.5;
    double lambda_t = 0.3;
    bool use_negative_control = false;
    RoutingMask routing_mask;
    std::optional<WcmConfig> wcm;

    void validate(int site_count) const;
};

// Classifier-free guidance combine: eps_neg + s * (eps_pos - eps_neg).
// s = 1 collapses to eps_pos and is returned exactly.
NoisePrediction cfg_combine(const NoisePrediction& eps_pos, const NoisePrediction& eps_neg,
                            double s);

// Time-step gate: control features are used while sampling progress
// step_index / total_steps is strictly below lambda_t. lambda_t = 1 keeps
// control on for every step, lambda_t = 0 for none.
bool control_active(int step_index, int total_steps, double lambda_t);

// One combined noise prediction under the configured regime:
//   gate active, use_negative_control = false (default):
//       positive branch with routed+weighted control features,
//       negative branch with no control encoder at all
//   gate active, use_negative_control = true:
//       both branches with control features
//   gate inactive: plain CFG, no control on either branch
// precomputed_weights, when given, skips rebuilding the WCM maps; callers
// looping over steps should build them once.
NoisePrediction snp_step(const LatentState& state, const PromptPair& prompts,
                         const DepthCondition& condition, const GuidanceConfig& config,
                         const DenoiserBackend& backend,
                         const WeightMaps* precomputed_weights = nullptr);

// Full deterministic sampling loop: snp_step followed by the backend's
// scheduler update for step_index = 0..N-1. Throws NumericalError naming
// the step if the latent leaves the finite domain.
Tensor4f sample(const LatentState& initial_noise, const PromptPair& prompts,
                const DepthCondition& condition, const GuidanceConfig& config,
                const DenoiserBackend& backend);

}  // namespace snp
