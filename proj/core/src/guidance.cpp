#include "snp/guidance.hpp"

#include <string>

#include "snp/errors.hpp"

namespace snp {

void LatentState::validate() const {
    if (total_steps < 1)
        throw ContractViolation("total_steps must be >= 1, got " + std::to_string(total_steps));
    if (step_index < 0 || step_index >= total_steps)
        throw ContractViolation("step_index " + std::to_string(step_index) +
                                " out of [0," + std::to_string(total_steps) + ")");
    if (latent.empty()) throw ContractViolation("latent is empty");
    if (!latent.all_finite())
        throw ContractViolation("latent contains non-finite values at step " +
                                std::to_string(step_index));
}

void PromptPair::validate() const {
    if (positive.empty() || positive.size() != negative.size())
        throw ContractViolation("prompt embeddings must be non-empty and the same shape (" +
                                std::to_string(positive.size()) + " vs " +
                                std::to_string(negative.size()) + ")");
}

void GuidanceConfig::validate(int site_count) const {
    if (!(scale_s > 0.0)) throw ContractViolation("guidance scale s must be > 0");
    if (!(lambda_t >= 0.0 && lambda_t <= 1.0))
        throw ContractViolation("lambda_t must be within [0,1], got " + std::to_string(lambda_t));
    routing_mask.validate(site_count);
    if (wcm) wcm->validate();
}

NoisePrediction cfg_combine(const NoisePrediction& eps_pos, const NoisePrediction& eps_neg,
                            double s) {
    if (!eps_pos.eps.same_shape(eps_neg.eps))
        throw ContractViolation("cfg_combine: eps_pos " + eps_pos.eps.shape.str() +
                                " vs eps_neg " + eps_neg.eps.shape.str());
    if (!(s > 0.0)) throw ContractViolation("cfg_combine: s must be > 0");
    if (s == 1.0) return eps_pos;  // exact collapse

    NoisePrediction out;
    out.eps = Tensor4f(eps_pos.eps.shape);
    const float sf = static_cast<float>(s);
    for (size_t i = 0; i < out.eps.data.size(); ++i) {
        const float p = eps_pos.eps.data[i];
        const float n = eps_neg.eps.data[i];
        out.eps.data[i] = n + sf * (p - n);
    }
    return out;
}

bool control_active(int step_index, int total_steps, double lambda_t) {
    if (total_steps < 1 || step_index < 0 || step_index >= total_steps)
        throw ContractViolation("control_active: step " + std::to_string(step_index) + " of " +
                                std::to_string(total_steps));
    if (!(lambda_t >= 0.0 && lambda_t <= 1.0))
        throw ContractViolation("control_active: lambda_t out of [0,1]");
    const double progress = static_cast<double>(step_index) / static_cast<double>(total_steps);
    return progress < lambda_t;
}

NoisePrediction snp_step(const LatentState& state, const PromptPair& prompts,
                         const DepthCondition& condition, const GuidanceConfig& config,
                         const DenoiserBackend& backend, const WeightMaps* precomputed_weights) {
    state.validate();
    prompts.validate();
    config.validate(backend.site_count());
    if (state.latent.shape.c != backend.latent_shape(1).c ||
        state.latent.shape.h != backend.latent_shape(1).h ||
        state.latent.shape.w != backend.latent_shape(1).w)
        throw ContractViolation("latent shape " + state.latent.shape.str() +
                                " not accepted by backend (expects " +
                                backend.latent_shape(state.latent.shape.n).str() + ")");

    const bool active = control_active(state.step_index, state.total_steps, config.lambda_t);

    NoisePrediction eps_pos, eps_neg;
    try {
        if (!active) {
            eps_pos = backend.predict(state.latent, state.step_index, prompts.positive, nullptr);
            eps_neg = backend.predict(state.latent, state.step_index, prompts.negative, nullptr);
        } else {
            if (condition.resolution() != backend.condition_resolution())
                throw ContractViolation("condition resolution " + condition.resolution().str() +
                                        " does not match backend " +
                                        backend.condition_resolution().str());
            WeightMaps local;
            const WeightMaps* weights = precomputed_weights;
            if (config.wcm && weights == nullptr) {
                local = build_weight_maps(condition, backend.site_resolutions(), *config.wcm);
                weights = &local;
            }
            ControlFeatureSet pos_feats = route_features(
                backend.control_encode(state.latent, state.step_index, prompts.positive, condition),
                config.routing_mask, weights);
            eps_pos = backend.predict(state.latent, state.step_index, prompts.positive, &pos_feats);

            if (config.use_negative_control) {
                ControlFeatureSet neg_feats = route_features(
                    backend.control_encode(state.latent, state.step_index, prompts.negative,
                                           condition),
                    config.routing_mask, weights);
                eps_neg = backend.predict(state.latent, state.step_index, prompts.negative,
                                          &neg_feats);
            } else {
                // Negative branch never touches the control encoder.
                eps_neg = backend.predict(state.latent, state.step_index, prompts.negative, nullptr);
            }
        }
    } catch (const ContractViolation&) {
        throw;
    } catch (const Error& e) {
        throw BackendError("step " + std::to_string(state.step_index) + ": " + e.what());
    }
    return cfg_combine(eps_pos, eps_neg, config.scale_s);
}

Tensor4f sample(const LatentState& initial_noise, const PromptPair& prompts,
                const DepthCondition& condition, const GuidanceConfig& config,
                const DenoiserBackend& backend) {
    initial_noise.validate();
    if (initial_noise.step_index != 0)
        throw ContractViolation("sample: initial state must start at step 0");

    // The WCM maps depend only on the condition and config; build once.
    WeightMaps weights;
    const WeightMaps* weights_ptr = nullptr;
    if (config.wcm) {
        weights = build_weight_maps(condition, backend.site_resolutions(), *config.wcm);
        weights_ptr = &weights;
    }

    const int n = initial_noise.total_steps;
    LatentState state = initial_noise;
    for (int i = 0; i < n; ++i) {
        state.step_index = i;
        NoisePrediction eps = snp_step(state, prompts, condition, config, backend, weights_ptr);
        state.latent = backend.scheduler_update(state.latent, eps, i, n);
        if (!state.latent.all_finite())
            throw NumericalError("sample: non-finite latent after step " + std::to_string(i));
    }
    return state.latent;
}

}  // namespace snp
