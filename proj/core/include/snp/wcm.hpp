#pragma once

#include <map>
#include <vector>

#include "snp/tensor.hpp"

namespace snp {

// Depth condition, values in [0,1], larger = closer.
struct DepthCondition {
    Gray depth;

    void validate() const;
    Resolution resolution() const { return {depth.h, depth.w}; }
};

struct WcmConfig {
    // Hysteresis thresholds on the [0,255] gradient scale.
    float canny_low = 50.0f;
    float canny_high = 150.0f;
    int dilation_radius = 2;
    float w_floor = 0.5f;

    void validate() const;
};

// Per-site spatial multipliers in [w_floor, 1], keyed by site index.
struct WeightMaps {
    std::map<int, Gray> maps;
    float w_floor = 0.5f;

    const Gray* find(int site) const {
        auto it = maps.find(site);
        return it == maps.end() ? nullptr : &it->second;
    }
};

// Canny edge detection on the depth values scaled to [0,255].
//
// The pipeline is pinned to integer arithmetic so any faithful
// implementation reproduces the binary output bit for bit:
//   1. quantize: q = floor(d * 255 + 0.5), integers in 0..255
//   2. smooth: 5x5 binomial kernel [1,4,6,4,1]/16 per axis (the discrete
//      sigma-1.0 Gaussian), replicate borders, rounding integer divide
//   3. Sobel 3x3 gradient (replicate borders); squared magnitude
//      m2 = gx^2 + gy^2 stays integer and is compared against low^2/high^2
//   4. non-maximum suppression: gradient direction folded to [0,180) and
//      quantized to 4 sectors with offsets (1,0),(1,1),(0,1),(-1,1)
//      (horizontal iff gy <= tan(22.5)*|gx|, vertical iff
//      gy >= tan(67.5)*|gx| after folding); keep iff
//      m2 >= m2[p-d] && m2 > m2[p+d], out-of-range neighbors read as 0
//   5. hysteresis: strong iff m2 >= high^2, weak iff m2 >= low^2; weak
//      pixels survive when 8-connected to a strong pixel
BinaryMap detect_edges(const DepthCondition& depth, float low, float high);

// Morphological dilation with a (2*radius+1)^2 square structuring element,
// clipped at borders. radius 0 is the identity.
BinaryMap dilate(const BinaryMap& edges, int radius);

// 1 where the mask is 0, else 0, as floats.
Gray invert_mask(const BinaryMap& mask);

// Bilinear resize with half-pixel centers; sampling coordinates are clamped
// to the source and output values to [0,1]. Identity when sizes match.
Gray resize_bilinear(const Gray& src, int out_h, int out_w);

// Full module: m = 1 - dilate(detect_edges(depth)), resized to each site
// resolution, then rescaled to w = w_floor + (1 - w_floor) * m.
WeightMaps build_weight_maps(const DepthCondition& depth,
                             const std::vector<Resolution>& site_resolutions,
                             const WcmConfig& config);

}  // namespace snp
