#pragma once

#include <span>
#include <utility>
#include <vector>

#include "snp/errors.hpp"

namespace snp {

// Head/object pose in degrees, each axis canonicalized into [-180, 180).
struct PoseAngles {
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    static double canonical(double degrees);
    PoseAngles canonicalized() const {
        return {canonical(yaw), canonical(pitch), canonical(roll)};
    }
};

// Wrapped absolute angular difference: min(|a-b|, 360-|a-b|) after
// canonicalization. Always in [0, 180].
double wrapped_abs_diff(double a_deg, double b_deg);

struct PoseErrorDetail {
    double mean = 0.0;  // unweighted mean over yaw/pitch/roll
    double yaw = 0.0, pitch = 0.0, roll = 0.0;
};

PoseErrorDetail pose_error_detail(const PoseAngles& pred, const PoseAngles& gt);
double pose_error(const PoseAngles& pred, const PoseAngles& gt);

// Cosine similarity between two nonzero vectors of equal dimension.
double clip_similarity(std::span<const float> image_embedding,
                       std::span<const float> prompt_embedding);

// Feature vectors for Frechet-distance estimation. At least 2 vectors per
// set (sample covariance), dimension >= 1.
struct FeatureSet {
    std::vector<std::vector<float>> vectors;

    int dim() const { return vectors.empty() ? 0 : static_cast<int>(vectors[0].size()); }
    int count() const { return static_cast<int>(vectors.size()); }
    void validate() const;
};

// ||mu_a - mu_b||^2 + Tr(Sigma_a + Sigma_b - 2 (Sigma_a Sigma_b)^{1/2}),
// unbiased (n-1) sample covariances, matrix square root via symmetric
// eigendecomposition of sqrt(Sigma_a) Sigma_b sqrt(Sigma_a). Tiny negative
// results are clipped to 0.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

struct BinStat {
    double lo = 0.0, hi = 0.0;  // [lo, hi)
    int count = 0;
    double mean_error = 0.0;
};

// Fig.-11-style breakdown: rotation bins group by ground-truth yaw and
// report mean wrapped yaw error; elevation bins group by ground-truth
// pitch and report mean wrapped pitch error. Bins cover [-180, 180).
struct BinnedPoseReport {
    int bin_width = 0;
    int sample_count = 0;
    std::vector<BinStat> rotation;
    std::vector<BinStat> elevation;
};

// pairs are (ground truth, prediction). bin_width must divide 360. Empty
// input produces an empty (all-zero-count) report.
BinnedPoseReport binned_pose_report(
    const std::vector<std::pair<PoseAngles, PoseAngles>>& gt_pred_pairs, int bin_width_deg);

}  // namespace snp
