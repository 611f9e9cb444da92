#include "snp/backend.hpp"

#include <cmath>

#include "snp/errors.hpp"
#include "snp/splitmix.hpp"

// Toy backend parameter stream
// ----------------------------
// Every parameter is drawn, in a fixed order, from one SplitMix64 stream
// seeded with ToyBackendSpec.seed and mapped to float32 via
//
//   f = float( -0.1 + 0.2 * ((next() >> 11) * 2^-53) )
//
// With L = (site_count - 1) / 3 resolution levels, w[l] = hidden_widths[l],
// C = channels and E = embed_dim, the stream is consumed as:
//
//   A. denoiser encoder: for l = 0..L-1, b = 0..2:
//        W  (w[l] x in, row-major), in = C for (l,b) = (0,0) else w[l]
//        bias (w[l]);  U (w[l] x E);  v (w[l])
//      after each level l < L-1: down-remap W (w[l+1] x w[l]), bias (w[l+1])
//   B. denoiser middle block: W (w[L-1]^2), bias, U, v
//   C. denoiser decoder: for l = L-1 down to 0, b = 0..2:
//        W (w[l]^2), bias, U, v
//      after each level l > 0: up-remap W (w[l-1] x w[l]), bias (w[l-1])
//   D. output projection: W (C x w[0]), bias (C)
//   E. condition projection: W (w[0] x 1), bias (w[0])
//   F. control encoder: same shapes and order as A
//   G. control middle block: same shapes as B
//   H. site projections, i = 0..site_count-1:
//        W (w[lvl(i)]^2), bias (w[lvl(i)]), lvl(i) = min(i / 3, L - 1)
//
// The FNV-1a64 checksum over the little-endian float32 bytes of this block
// is the cross-implementation fingerprint (see parameter_checksum()).
//
// Forward pass, per batch element (blocks are pointwise channel maps,
// y = W x + bias + U e + tau * v with tau = 1 / (1 + step_index)):
//
//   encoder: 3 blocks per level, each output pushed as skip site l*3+b;
//            2x2 average pool + down-remap between levels
//   middle block, then control middle feature added if present
//   decoder: per level l = L-1..0, blocks b = 0..2 consume skips LIFO
//            (site l*3 + (2-b)): h += skip (+ control feature), then block;
//            nearest-neighbor 2x upsample + up-remap between levels
//   output projection gives eps
//
// The control encoder mirrors the encoder with its own parameters, adds
// cond_proj(depth) after block (0,0), and taps each block output (and the
// middle output) through its site projection.

namespace snp {

namespace {
constexpr double kWeightLo = -0.1;
constexpr double kWeightHi = 0.1;
}  // namespace

void ToyBackendSpec::validate() const {
    if (channels <= 0 || height <= 0 || width <= 0)
        throw ContractViolation("toy spec: latent dims must be positive");
    if (site_count < 4 || (site_count - 1) % 3 != 0)
        throw ContractViolation("toy spec: site_count must be 3*levels + 1, got " +
                                std::to_string(site_count));
    int l = levels();
    if (static_cast<int>(hidden_widths.size()) != l)
        throw ContractViolation("toy spec: need " + std::to_string(l) + " hidden widths, got " +
                                std::to_string(hidden_widths.size()));
    for (int w : hidden_widths)
        if (w <= 0) throw ContractViolation("toy spec: hidden widths must be positive");
    int div = 1 << (l - 1);
    if (height % div != 0 || width % div != 0)
        throw ContractViolation("toy spec: latent " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by " + std::to_string(div));
    if (embed_dim <= 0) throw ContractViolation("toy spec: embed_dim must be positive");
}

ToyBackend::ToyBackend(ToyBackendSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const int L = spec_.levels();
    const auto& w = spec_.hidden_widths;

    site_resolutions_.reserve(spec_.site_count);
    site_to_block_.reserve(spec_.site_count);
    for (int i = 0; i < spec_.site_count - 1; ++i) {
        int l = i / 3;
        site_resolutions_.push_back({spec_.height >> l, spec_.width >> l});
        site_to_block_.push_back(L - l);  // earliest skips feed the last decoder block
    }
    site_resolutions_.push_back({spec_.height >> (L - 1), spec_.width >> (L - 1)});
    site_to_block_.push_back(0);  // middle

    SplitMix64 rng(spec_.seed);
    auto draw = [&](size_t count) {
        for (size_t i = 0; i < count; ++i) params_.push_back(rng.next_in(kWeightLo, kWeightHi));
    };
    auto gen_affine = [&](int out, int in) {
        Affine a;
        a.out = out;
        a.in = in;
        a.w = params_.size();
        draw(static_cast<size_t>(out) * in);
        a.b = params_.size();
        draw(static_cast<size_t>(out));
        return a;
    };
    auto gen_block = [&](int out, int in) {
        Block blk;
        blk.mix = gen_affine(out, in);
        blk.u = params_.size();
        draw(static_cast<size_t>(out) * spec_.embed_dim);
        blk.v = params_.size();
        draw(static_cast<size_t>(out));
        return blk;
    };

    // A: encoder
    for (int l = 0; l < L; ++l) {
        for (int b = 0; b < 3; ++b) {
            int in = (l == 0 && b == 0) ? spec_.channels : w[l];
            enc_.push_back(gen_block(w[l], in));
        }
        if (l < L - 1) enc_down_.push_back(gen_affine(w[l + 1], w[l]));
    }
    // B: middle
    mid_ = gen_block(w[L - 1], w[L - 1]);
    // C: decoder
    for (int l = L - 1; l >= 0; --l) {
        for (int b = 0; b < 3; ++b) dec_.push_back(gen_block(w[l], w[l]));
        if (l > 0) dec_up_.push_back(gen_affine(w[l - 1], w[l]));
    }
    // D: output projection
    out_proj_ = gen_affine(spec_.channels, w[0]);
    // E: condition projection
    cond_proj_ = gen_affine(w[0], 1);
    // F: control encoder
    for (int l = 0; l < L; ++l) {
        for (int b = 0; b < 3; ++b) {
            int in = (l == 0 && b == 0) ? spec_.channels : w[l];
            ctrl_enc_.push_back(gen_block(w[l], in));
        }
        if (l < L - 1) ctrl_down_.push_back(gen_affine(w[l + 1], w[l]));
    }
    // G: control middle
    ctrl_mid_ = gen_block(w[L - 1], w[L - 1]);
    // H: site projections
    for (int i = 0; i < spec_.site_count; ++i) {
        int lvl = std::min(i / 3, L - 1);
        site_proj_.push_back(gen_affine(w[lvl], w[lvl]));
    }
}

std::string ToyBackend::id() const {
    return "toy-" + std::to_string(spec_.site_count) + "site";
}

uint64_t ToyBackend::parameter_checksum() const {
    Fnv1a64 h;
    for (float f : params_) h.update_f32_le(f);
    return h.hash;
}

std::vector<float> ToyBackend::embed_prompt(const std::string& text) const {
    SplitMix64 rng(fnv1a64(text));
    std::vector<float> e(static_cast<size_t>(spec_.embed_dim));
    for (float& v : e) v = rng.next_in(-1.0, 1.0);
    return e;
}

void ToyBackend::check_latent(const Tensor4f& z) const {
    if (z.shape.n < 1 || z.shape.c != spec_.channels || z.shape.h != spec_.height ||
        z.shape.w != spec_.width)
        throw ContractViolation("latent shape " + z.shape.str() + " does not match backend " +
                                latent_shape(1).str() + " (any batch)");
}

void ToyBackend::check_embedding(const std::vector<float>& emb) const {
    if (static_cast<int>(emb.size()) != spec_.embed_dim)
        throw ContractViolation("prompt embedding size " + std::to_string(emb.size()) +
                                ", backend expects " + std::to_string(spec_.embed_dim));
}

void ToyBackend::apply_affine(const Affine& a, const Tensor4f& in, Tensor4f& out) const {
    out = Tensor4f({in.shape.n, a.out, in.shape.h, in.shape.w});
    const float* W = params_.data() + a.w;
    const float* B = params_.data() + a.b;
    const int hw = in.shape.h * in.shape.w;
    for (int n = 0; n < in.shape.n; ++n) {
        const float* src = in.data.data() + static_cast<size_t>(n) * a.in * hw;
        float* dst = out.data.data() + static_cast<size_t>(n) * a.out * hw;
        for (int co = 0; co < a.out; ++co) {
            const float* wr = W + static_cast<size_t>(co) * a.in;
            float* od = dst + static_cast<size_t>(co) * hw;
            for (int p = 0; p < hw; ++p) od[p] = B[co];
            for (int ci = 0; ci < a.in; ++ci) {
                const float wv = wr[ci];
                const float* id = src + static_cast<size_t>(ci) * hw;
                for (int p = 0; p < hw; ++p) od[p] += wv * id[p];
            }
        }
    }
}

void ToyBackend::apply_block(const Block& blk, const Tensor4f& in, Tensor4f& out,
                             const std::vector<float>& emb, float tau) const {
    apply_affine(blk.mix, in, out);
    const float* U = params_.data() + blk.u;
    const float* V = params_.data() + blk.v;
    const int hw = in.shape.h * in.shape.w;
    for (int co = 0; co < blk.mix.out; ++co) {
        float extra = tau * V[co];
        const float* ur = U + static_cast<size_t>(co) * spec_.embed_dim;
        for (int k = 0; k < spec_.embed_dim; ++k) extra += ur[k] * emb[k];
        for (int n = 0; n < out.shape.n; ++n) {
            float* od = out.data.data() + (static_cast<size_t>(n) * blk.mix.out + co) * hw;
            for (int p = 0; p < hw; ++p) od[p] += extra;
        }
    }
}

namespace {

Tensor4f avgpool2(const Tensor4f& in) {
    Tensor4f out({in.shape.n, in.shape.c, in.shape.h / 2, in.shape.w / 2});
    for (int n = 0; n < in.shape.n; ++n)
        for (int c = 0; c < in.shape.c; ++c)
            for (int y = 0; y < out.shape.h; ++y)
                for (int x = 0; x < out.shape.w; ++x)
                    out.at(n, c, y, x) = 0.25f * (in.at(n, c, 2 * y, 2 * x) +
                                                  in.at(n, c, 2 * y, 2 * x + 1) +
                                                  in.at(n, c, 2 * y + 1, 2 * x) +
                                                  in.at(n, c, 2 * y + 1, 2 * x + 1));
    return out;
}

Tensor4f upsample2(const Tensor4f& in) {
    Tensor4f out({in.shape.n, in.shape.c, in.shape.h * 2, in.shape.w * 2});
    for (int n = 0; n < in.shape.n; ++n)
        for (int c = 0; c < in.shape.c; ++c)
            for (int y = 0; y < out.shape.h; ++y)
                for (int x = 0; x < out.shape.w; ++x)
                    out.at(n, c, y, x) = in.at(n, c, y / 2, x / 2);
    return out;
}

}  // namespace

NoisePrediction ToyBackend::predict(const Tensor4f& z, int step_index,
                                    const std::vector<float>& prompt_embedding,
                                    const ControlFeatureSet* control) const {
    check_latent(z);
    check_embedding(prompt_embedding);
    if (step_index < 0) throw ContractViolation("step_index must be >= 0");
    if (control != nullptr) {
        control->validate();
        if (control->site_count() != spec_.site_count)
            throw ContractViolation("control set has " + std::to_string(control->site_count()) +
                                    " sites, backend declares " + std::to_string(spec_.site_count));
        for (int i = 0; i < control->site_count(); ++i) {
            const Tensor4f& f = control->features[i];
            if (f.empty()) continue;
            int lvl = std::min(i / 3, spec_.levels() - 1);
            if (f.shape.n != z.shape.n || f.shape.c != spec_.hidden_widths[lvl])
                throw ContractViolation("control feature at site " + std::to_string(i) +
                                        " has shape " + f.shape.str());
        }
    }

    const int L = spec_.levels();
    const float tau = 1.0f / (1.0f + static_cast<float>(step_index));

    Tensor4f h = z, tmp;
    std::vector<Tensor4f> skips;
    skips.reserve(static_cast<size_t>(L) * 3);
    for (int l = 0; l < L; ++l) {
        for (int b = 0; b < 3; ++b) {
            apply_block(enc_[static_cast<size_t>(l) * 3 + b], h, tmp, prompt_embedding, tau);
            h = tmp;
            skips.push_back(h);
        }
        if (l < L - 1) {
            Tensor4f pooled = avgpool2(h);
            apply_affine(enc_down_[l], pooled, h);
        }
    }
    apply_block(mid_, h, tmp, prompt_embedding, tau);
    h = tmp;
    if (control != nullptr && !control->features[middle_site()].empty())
        add_inplace(h, control->features[middle_site()]);

    for (int l = L - 1; l >= 0; --l) {
        for (int b = 0; b < 3; ++b) {
            int site = l * 3 + (2 - b);
            Tensor4f skip = skips[site];
            if (control != nullptr && !control->features[site].empty())
                add_inplace(skip, control->features[site]);
            add_inplace(h, skip);
            apply_block(dec_[static_cast<size_t>(L - 1 - l) * 3 + b], h, tmp, prompt_embedding, tau);
            h = tmp;
        }
        if (l > 0) {
            Tensor4f up = upsample2(h);
            apply_affine(dec_up_[L - 1 - l], up, h);
        }
    }
    NoisePrediction out;
    apply_affine(out_proj_, h, out.eps);
    return out;
}

ControlFeatureSet ToyBackend::control_encode(const Tensor4f& z, int step_index,
                                             const std::vector<float>& prompt_embedding,
                                             const DepthCondition& depth) const {
    check_latent(z);
    check_embedding(prompt_embedding);
    if (step_index < 0) throw ContractViolation("step_index must be >= 0");
    depth.validate();
    if (depth.depth.h != spec_.height || depth.depth.w != spec_.width)
        throw ContractViolation("condition resolution " + depth.resolution().str() +
                                " does not match backend " + condition_resolution().str());

    const int L = spec_.levels();
    const float tau = 1.0f / (1.0f + static_cast<float>(step_index));
    const float* cw = params_.data() + cond_proj_.w;
    const float* cb = params_.data() + cond_proj_.b;

    ControlFeatureSet out;
    out.site_resolutions = site_resolutions_;
    out.features.resize(spec_.site_count);

    Tensor4f g = z, tmp;
    for (int l = 0; l < L; ++l) {
        for (int b = 0; b < 3; ++b) {
            int site = l * 3 + b;
            apply_block(ctrl_enc_[static_cast<size_t>(site)], g, tmp, prompt_embedding, tau);
            g = tmp;
            if (l == 0 && b == 0) {
                // Inject the condition: per-channel affine image of the depth map.
                for (int n = 0; n < g.shape.n; ++n)
                    for (int c = 0; c < g.shape.c; ++c)
                        for (int y = 0; y < g.shape.h; ++y)
                            for (int x = 0; x < g.shape.w; ++x)
                                g.at(n, c, y, x) += cw[c] * depth.depth.at(y, x) + cb[c];
            }
            apply_affine(site_proj_[site], g, out.features[site]);
        }
        if (l < L - 1) {
            Tensor4f pooled = avgpool2(g);
            apply_affine(ctrl_down_[l], pooled, g);
        }
    }
    apply_block(ctrl_mid_, g, tmp, prompt_embedding, tau);
    g = tmp;
    apply_affine(site_proj_[middle_site()], g, out.features[middle_site()]);
    return out;
}

Tensor4f ToyBackend::scheduler_update(const Tensor4f& z, const NoisePrediction& eps,
                                      int step_index, int total_steps) const {
    if (!z.same_shape(eps.eps))
        throw ContractViolation("scheduler_update: latent " + z.shape.str() + " vs eps " +
                                eps.eps.shape.str());
    if (total_steps < 1 || step_index < 0 || step_index >= total_steps)
        throw ContractViolation("scheduler_update: step " + std::to_string(step_index) + " of " +
                                std::to_string(total_steps));
    const double n = total_steps;
    const double sigma_i = 1.0 - step_index / n;
    const double sigma_next = 1.0 - (step_index + 1) / n;
    const float delta = static_cast<float>(sigma_i - sigma_next);

    Tensor4f out(z.shape);
    for (size_t i = 0; i < z.data.size(); ++i) out.data[i] = z.data[i] - delta * eps.eps.data[i];
    return out;
}

Tensor4f gaussian_latent(Shape4 shape, uint64_t seed) {
    Tensor4f t(shape);
    GaussianStream g(seed);
    for (float& v : t.data) v = g.next();
    return t;
}

}  // namespace snp
