#include "snp/eval.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace snp {

double PoseAngles::canonical(double degrees) {
    if (!std::isfinite(degrees)) throw ContractViolation("pose angle is non-finite");
    if (degrees >= -180.0 && degrees < 180.0) return degrees;  // already canonical, keep exact
    double a = std::fmod(degrees + 180.0, 360.0);
    if (a < 0) a += 360.0;
    return a - 180.0;
}

double wrapped_abs_diff(double a_deg, double b_deg) {
    double d = std::fabs(PoseAngles::canonical(a_deg) - PoseAngles::canonical(b_deg));
    return std::min(d, 360.0 - d);
}

PoseErrorDetail pose_error_detail(const PoseAngles& pred, const PoseAngles& gt) {
    PoseErrorDetail e;
    e.yaw = wrapped_abs_diff(pred.yaw, gt.yaw);
    e.pitch = wrapped_abs_diff(pred.pitch, gt.pitch);
    e.roll = wrapped_abs_diff(pred.roll, gt.roll);
    e.mean = (e.yaw + e.pitch + e.roll) / 3.0;
    return e;
}

double pose_error(const PoseAngles& pred, const PoseAngles& gt) {
    return pose_error_detail(pred, gt).mean;
}

double clip_similarity(std::span<const float> image_embedding,
                       std::span<const float> prompt_embedding) {
    if (image_embedding.empty() || image_embedding.size() != prompt_embedding.size())
        throw ContractViolation("clip_similarity: dimensions " +
                                std::to_string(image_embedding.size()) + " vs " +
                                std::to_string(prompt_embedding.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < image_embedding.size(); ++i) {
        const double a = image_embedding[i];
        const double b = prompt_embedding[i];
        if (!std::isfinite(a) || !std::isfinite(b))
            throw ContractViolation("clip_similarity: non-finite input");
        dot += a * b;
        na += a * a;
        nb += b * b;
    }
    if (na == 0.0 || nb == 0.0) throw ContractViolation("clip_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

void FeatureSet::validate() const {
    if (count() < 2)
        throw ContractViolation("feature set needs >= 2 vectors for covariance estimation, got " +
                                std::to_string(count()));
    const size_t d = vectors[0].size();
    if (d < 1) throw ContractViolation("feature vectors must have dimension >= 1");
    for (const auto& v : vectors) {
        if (v.size() != d)
            throw ContractViolation("feature set mixes dimensions " + std::to_string(d) + " and " +
                                    std::to_string(v.size()));
        for (float x : v)
            if (!std::isfinite(x)) throw ContractViolation("feature set contains non-finite values");
    }
}

namespace {

void moments(const FeatureSet& s, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const int n = s.count();
    const int d = s.dim();
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = s.vectors[i][j];
    mu = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(n - 1);  // unbiased
}

// PSD square root via symmetric eigendecomposition; eigenvalues that are
// slightly negative (numerical noise) clip to 0, strongly negative ones
// are reported as a conditioning failure.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* label) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError(std::string("frechet_distance: eigendecomposition of ") + label +
                             " did not converge");
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    const double tol = 1e-8 * scale;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < -tol) {
            std::ostringstream os;
            os << "frechet_distance: " << label << " has eigenvalue " << ev(i)
               << " below -" << tol << " (min " << ev.minCoeff() << ", max " << ev.maxCoeff()
               << "); input is not a valid covariance";
            throw NumericalError(os.str());
        }
        ev(i) = ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim())
        throw ContractViolation("frechet_distance: dimensions " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));

    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(a, mu_a, cov_a);
    moments(b, mu_b, cov_b);

    const Eigen::MatrixXd sqrt_a = psd_sqrt(cov_a, "Sigma_a");
    // Tr((Sigma_a Sigma_b)^{1/2}) = Tr(M^{1/2}) with the symmetrized
    // product M = sqrt(Sigma_a) Sigma_b sqrt(Sigma_a).
    Eigen::MatrixXd m = sqrt_a * cov_b * sqrt_a;
    m = 0.5 * (m + m.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("frechet_distance: eigendecomposition of the symmetrized product "
                             "did not converge");
    double trace_sqrt = 0.0;
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-8 * scale) {
            std::ostringstream os;
            os << "frechet_distance: symmetrized product eigenvalue " << ev(i)
               << " out of tolerance (scale " << scale << ")";
            throw NumericalError(os.str());
        }
        trace_sqrt += ev(i) > 0 ? std::sqrt(ev(i)) : 0.0;
    }

    const double mean_term = (mu_a - mu_b).squaredNorm();
    double fid = mean_term + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt;
    if (fid < 0.0) {
        if (fid < -1e-6)
            throw NumericalError("frechet_distance: negative value " + std::to_string(fid) +
                                 " beyond tolerance");
        fid = 0.0;
    }
    return fid;
}

BinnedPoseReport binned_pose_report(
    const std::vector<std::pair<PoseAngles, PoseAngles>>& gt_pred_pairs, int bin_width_deg) {
    if (bin_width_deg <= 0 || 360 % bin_width_deg != 0)
        throw ContractViolation("bin width " + std::to_string(bin_width_deg) +
                                " does not divide 360");

    const int bins = 360 / bin_width_deg;
    BinnedPoseReport report;
    report.bin_width = bin_width_deg;
    report.sample_count = static_cast<int>(gt_pred_pairs.size());
    report.rotation.resize(bins);
    report.elevation.resize(bins);
    for (int i = 0; i < bins; ++i) {
        report.rotation[i].lo = report.elevation[i].lo = -180.0 + i * bin_width_deg;
        report.rotation[i].hi = report.elevation[i].hi = -180.0 + (i + 1) * bin_width_deg;
    }

    auto bin_of = [&](double canonical_deg) {
        int b = static_cast<int>(std::floor((canonical_deg + 180.0) / bin_width_deg));
        return std::min(std::max(b, 0), bins - 1);
    };
    std::vector<double> rot_sum(bins, 0.0), ele_sum(bins, 0.0);
    for (const auto& [gt, pred] : gt_pred_pairs) {
        const int rb = bin_of(PoseAngles::canonical(gt.yaw));
        rot_sum[rb] += wrapped_abs_diff(pred.yaw, gt.yaw);
        report.rotation[rb].count += 1;
        const int eb = bin_of(PoseAngles::canonical(gt.pitch));
        ele_sum[eb] += wrapped_abs_diff(pred.pitch, gt.pitch);
        report.elevation[eb].count += 1;
    }
    for (int i = 0; i < bins; ++i) {
        if (report.rotation[i].count > 0)
            report.rotation[i].mean_error = rot_sum[i] / report.rotation[i].count;
        if (report.elevation[i].count > 0)
            report.elevation[i].mean_error = ele_sum[i] / report.elevation[i].count;
    }
    return report;
}

}  // namespace snp
