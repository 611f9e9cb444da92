#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "snp/control_router.hpp"
#include "snp/tensor.hpp"
#include "snp/wcm.hpp"

namespace snp {

// Noise prediction for one latent; same shape as the latent it was
// predicted for.
struct NoisePrediction {
    Tensor4f eps;
};

// Contract every denoiser stack must satisfy. A backend owns the model
// math and the scheduler; the guidance layer only composes calls.
// Implementations must be safe for concurrent read-only use once built.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::string id() const = 0;

    // Injection-site layout. site_to_decoder_block()[i] gives the decoder
    // block fed by site i (1 = deepest), with the middle-block site mapped
    // to 0 and also reported by middle_site().
    virtual int site_count() const = 0;
    virtual const std::vector<Resolution>& site_resolutions() const = 0;
    virtual const std::vector<int>& site_to_decoder_block() const = 0;
    virtual int middle_site() const = 0;

    virtual Shape4 latent_shape(int batch) const = 0;
    virtual Resolution condition_resolution() const = 0;

    virtual std::vector<float> embed_prompt(const std::string& text) const = 0;

    // Predict noise for z. When control is non-null, each present feature
    // is added to the corresponding internal skip/middle feature before
    // decoding; an all-zero set must give the same result as nullptr.
    virtual NoisePrediction predict(const Tensor4f& z, int step_index,
                                    const std::vector<float>& prompt_embedding,
                                    const ControlFeatureSet* control) const = 0;

    // Run the control encoder over (z, prompt, depth); returns one feature
    // per declared site at the declared resolutions.
    virtual ControlFeatureSet control_encode(const Tensor4f& z, int step_index,
                                             const std::vector<float>& prompt_embedding,
                                             const DepthCondition& depth) const = 0;

    // Deterministic scheduler step from step_index to step_index + 1.
    virtual Tensor4f scheduler_update(const Tensor4f& z, const NoisePrediction& eps,
                                      int step_index, int total_steps) const = 0;
};

// Spec for the seeded toy backend. Identical specs produce bit-identical
// parameters on any platform (see backend_toy.cpp for the stream layout).
struct ToyBackendSpec {
    uint64_t seed = 42;
    int channels = 4;
    int height = 32;
    int width = 32;
    int site_count = 13;                          // 3 skips per level + middle
    std::vector<int> hidden_widths = {6, 8, 10, 12};  // one per resolution level
    int embed_dim = 8;

    int levels() const { return (site_count - 1) / 3; }
    void validate() const;
    bool operator==(const ToyBackendSpec&) const = default;
};

// Small deterministic denoiser exposing the same 13 injection sites as an
// SD-1.5-style ControlNet stack: a downsample/upsample stack of seeded
// affine channel maps with additive skip injection. All parameters come
// from a SplitMix64 stream, so the guidance algebra is bit-exactly
// testable without model weights.
class ToyBackend final : public DenoiserBackend {
public:
    explicit ToyBackend(ToyBackendSpec spec);

    std::string id() const override;
    int site_count() const override { return spec_.site_count; }
    const std::vector<Resolution>& site_resolutions() const override { return site_resolutions_; }
    const std::vector<int>& site_to_decoder_block() const override { return site_to_block_; }
    int middle_site() const override { return spec_.site_count - 1; }
    Shape4 latent_shape(int batch) const override {
        return {batch, spec_.channels, spec_.height, spec_.width};
    }
    Resolution condition_resolution() const override { return {spec_.height, spec_.width}; }

    std::vector<float> embed_prompt(const std::string& text) const override;

    NoisePrediction predict(const Tensor4f& z, int step_index,
                            const std::vector<float>& prompt_embedding,
                            const ControlFeatureSet* control) const override;

    ControlFeatureSet control_encode(const Tensor4f& z, int step_index,
                                     const std::vector<float>& prompt_embedding,
                                     const DepthCondition& depth) const override;

    // Euler step over a linear sigma schedule: z - (sigma_i - sigma_{i+1}) * eps
    // with sigma_i = 1 - i/N.
    Tensor4f scheduler_update(const Tensor4f& z, const NoisePrediction& eps,
                              int step_index, int total_steps) const override;

    const ToyBackendSpec& spec() const { return spec_; }

    // Full parameter block in generation order; the checksum over its
    // little-endian float32 bytes is the cross-implementation fingerprint.
    std::span<const float> parameter_block() const { return params_; }
    uint64_t parameter_checksum() const;

private:
    struct Affine {  // y = W x + b, W row-major [out][in]
        int out = 0, in = 0;
        size_t w = 0, b = 0;  // offsets into params_
    };
    struct Block {  // y = W x + b + U e + tau * v
        Affine mix;
        size_t u = 0, v = 0;
    };

    void apply_affine(const Affine& a, const Tensor4f& in, Tensor4f& out) const;
    void apply_block(const Block& blk, const Tensor4f& in, Tensor4f& out,
                     const std::vector<float>& emb, float tau) const;

    void check_latent(const Tensor4f& z) const;
    void check_embedding(const std::vector<float>& emb) const;

    ToyBackendSpec spec_;
    std::vector<Resolution> site_resolutions_;
    std::vector<int> site_to_block_;

    std::vector<float> params_;

    // Denoiser.
    std::vector<Block> enc_;          // levels * 3, in declaration order
    std::vector<Affine> enc_down_;    // levels - 1
    Block mid_{};
    std::vector<Block> dec_;          // levels * 3, deepest level first
    std::vector<Affine> dec_up_;      // levels - 1, deepest first
    Affine out_proj_{};

    // Control encoder.
    Affine cond_proj_{};
    std::vector<Block> ctrl_enc_;
    std::vector<Affine> ctrl_down_;
    Block ctrl_mid_{};
    std::vector<Affine> site_proj_;   // one per site
};

// Standard-normal initial latent, deterministic for a given seed.
Tensor4f gaussian_latent(Shape4 shape, uint64_t seed);

}  // namespace snp
