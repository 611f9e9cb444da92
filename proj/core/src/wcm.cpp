#include "snp/wcm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>

#include "snp/errors.hpp"

namespace snp {

void DepthCondition::validate() const {
    if (depth.h <= 0 || depth.w <= 0)
        throw ContractViolation("depth condition is degenerate: " +
                                std::to_string(depth.h) + "x" + std::to_string(depth.w));
    for (float v : depth.v) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
            throw ContractViolation("depth values must be finite and within [0,1], got " +
                                    std::to_string(v));
    }
}

void WcmConfig::validate() const {
    if (!(canny_low < canny_high))
        throw ContractViolation("canny_low must be < canny_high (" +
                                std::to_string(canny_low) + " vs " + std::to_string(canny_high) + ")");
    if (dilation_radius < 0)
        throw ContractViolation("dilation_radius must be >= 0");
    if (!(w_floor >= 0.0f && w_floor <= 1.0f))
        throw ContractViolation("w_floor must be within [0,1]");
}

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// tan(22.5 deg) and tan(67.5 deg), nearest doubles; used for integer-exact
// gradient sector selection (gradients are integers, so no boundary ties).
constexpr double kTanLo = 0.41421356237309503;
constexpr double kTanHi = 2.414213562373095;

}  // namespace

BinaryMap detect_edges(const DepthCondition& depth, float low, float high) {
    depth.validate();
    if (!(low < high))
        throw ContractViolation("canny thresholds: low must be < high");

    const Gray& d = depth.depth;
    const int h = d.h, w = d.w;

    // Stage 1: quantize to the [0,255] scale. depth is float32, so the
    // double product is exact and the rounding is reproducible.
    std::vector<int> q(static_cast<size_t>(h) * w);
    for (size_t i = 0; i < q.size(); ++i)
        q[i] = static_cast<int>(std::floor(static_cast<double>(d.v[i]) * 255.0 + 0.5));

    auto qat = [&](int y, int x) -> int64_t {
        return q[static_cast<size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)];
    };

    // Stage 2: 5x5 binomial smoothing ([1,4,6,4,1]/16 per axis, the
    // discrete sigma-1.0 Gaussian), replicate borders, rounding divide.
    // Integer throughout, so every implementation gets identical pixels.
    static constexpr int64_t kKernel[5] = {1, 4, 6, 4, 1};
    std::vector<int> smooth(q.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int64_t acc = 0;
            for (int ky = -2; ky <= 2; ++ky)
                for (int kx = -2; kx <= 2; ++kx)
                    acc += kKernel[ky + 2] * kKernel[kx + 2] * qat(y + ky, x + kx);
            smooth[static_cast<size_t>(y) * w + x] = static_cast<int>((acc + 128) >> 8);
        }
    }
    auto sat = [&](int y, int x) -> int64_t {
        return smooth[static_cast<size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)];
    };

    // Stage 3: Sobel gradient (replicate borders). Squared magnitude stays
    // integer; thresholds compare against their squares.
    std::vector<int64_t> gx(q.size()), gy(q.size()), m2(q.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            gx[i] = (sat(y - 1, x + 1) + 2 * sat(y, x + 1) + sat(y + 1, x + 1)) -
                    (sat(y - 1, x - 1) + 2 * sat(y, x - 1) + sat(y + 1, x - 1));
            gy[i] = (sat(y + 1, x - 1) + 2 * sat(y + 1, x) + sat(y + 1, x + 1)) -
                    (sat(y - 1, x - 1) + 2 * sat(y - 1, x) + sat(y - 1, x + 1));
            m2[i] = gx[i] * gx[i] + gy[i] * gy[i];
        }
    }
    const double low2 = static_cast<double>(low) * low;
    const double high2 = static_cast<double>(high) * high;

    auto m2_at = [&](int y, int x) -> int64_t {
        if (y < 0 || y >= h || x < 0 || x >= w) return 0;
        return m2[static_cast<size_t>(y) * w + x];
    };

    // Stage 4: non-maximum suppression. Direction folded to [0,180) and
    // quantized to 4 sectors; keep iff m2 >= m2[p-d] and m2 > m2[p+d].
    // Stage 5 below: double-threshold hysteresis, 8-connected.
    std::vector<uint8_t> cls(q.size(), 0);  // 0 none, 1 weak, 2 strong
    std::deque<std::pair<int, int>> frontier;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (static_cast<double>(m2[i]) < low2) continue;
            int64_t fx = gx[i], fy = gy[i];
            if (fy < 0 || (fy == 0 && fx < 0)) {  // fold direction
                fx = -fx;
                fy = -fy;
            }
            const double ax = static_cast<double>(fx < 0 ? -fx : fx);
            int dx, dy;
            if (static_cast<double>(fy) <= kTanLo * ax) {
                dx = 1; dy = 0;
            } else if (static_cast<double>(fy) >= kTanHi * ax) {
                dx = 0; dy = 1;
            } else if (fx > 0) {
                dx = 1; dy = 1;
            } else {
                dx = -1; dy = 1;
            }
            if (!(m2[i] >= m2_at(y - dy, x - dx) && m2[i] > m2_at(y + dy, x + dx))) continue;
            if (static_cast<double>(m2[i]) >= high2) {
                cls[i] = 2;
                frontier.emplace_back(y, x);
            } else {
                cls[i] = 1;
            }
        }
    }
    BinaryMap out(h, w);
    while (!frontier.empty()) {
        auto [y, x] = frontier.front();
        frontier.pop_front();
        out.at(y, x) = 1;
        for (int ny = -1; ny <= 1; ++ny) {
            for (int nx = -1; nx <= 1; ++nx) {
                const int yy = y + ny, xx = x + nx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                const size_t j = static_cast<size_t>(yy) * w + xx;
                if (cls[j] == 1) {
                    cls[j] = 2;
                    frontier.emplace_back(yy, xx);
                }
            }
        }
    }
    return out;
}

BinaryMap dilate(const BinaryMap& edges, int radius) {
    if (radius < 0) throw ContractViolation("dilation radius must be >= 0");
    if (radius == 0) return edges;
    BinaryMap out(edges.h, edges.w);
    for (int y = 0; y < edges.h; ++y) {
        for (int x = 0; x < edges.w; ++x) {
            if (!edges.at(y, x)) continue;
            int y0 = std::max(0, y - radius), y1 = std::min(edges.h - 1, y + radius);
            int x0 = std::max(0, x - radius), x1 = std::min(edges.w - 1, x + radius);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) out.at(yy, xx) = 1;
        }
    }
    return out;
}

Gray invert_mask(const BinaryMap& mask) {
    Gray out(mask.h, mask.w);
    for (size_t i = 0; i < mask.v.size(); ++i) out.v[i] = mask.v[i] ? 0.0f : 1.0f;
    return out;
}

Gray resize_bilinear(const Gray& src, int out_h, int out_w) {
    if (src.h <= 0 || src.w <= 0 || out_h <= 0 || out_w <= 0)
        throw ContractViolation("resize_bilinear: degenerate size");
    Gray out(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(src.h - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.h - 1);
        double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(src.w - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.w - 1);
            double wx = fx - x0;
            double v = (1.0 - wy) * ((1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1)) +
                       wy * ((1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1));
            out.at(y, x) = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
        }
    }
    return out;
}

WeightMaps build_weight_maps(const DepthCondition& depth,
                             const std::vector<Resolution>& site_resolutions,
                             const WcmConfig& config) {
    config.validate();
    if (site_resolutions.empty())
        throw ContractViolation("build_weight_maps: site_resolutions must be non-empty");

    BinaryMap edges = detect_edges(depth, config.canny_low, config.canny_high);
    Gray keep = invert_mask(dilate(edges, config.dilation_radius));

    WeightMaps out;
    out.w_floor = config.w_floor;
    for (size_t i = 0; i < site_resolutions.size(); ++i) {
        const Resolution& r = site_resolutions[i];
        Gray m = resize_bilinear(keep, r.h, r.w);
        // w_floor + (1 - w_floor) * m, evaluated so both ends are exact.
        for (float& v : m.v) v = config.w_floor * (1.0f - v) + v;
        out.maps.emplace(static_cast<int>(i), std::move(m));
    }
    return out;
}

}  // namespace snp
