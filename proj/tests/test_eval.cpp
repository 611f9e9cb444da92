#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "snp/errors.hpp"
#include "snp/eval.hpp"
#include "support/oracles.hpp"

using namespace snp;

namespace {

PoseAngles random_pose(std::mt19937& rng) {
    // Canonical range: pose_error's precondition, and required for exact
    // agreement with the loop-based oracle canonicalization.
    std::uniform_real_distribution<double> canon(-180.0, 180.0);
    return {canon(rng), canon(rng), canon(rng)};
}

PoseAngles random_pose_wide(std::mt19937& rng) {
    std::uniform_real_distribution<double> wide(-720.0, 720.0);
    return {wide(rng), wide(rng), wide(rng)};
}

std::vector<float> random_vec(int d, std::mt19937& rng, float spread = 1.0f) {
    std::normal_distribution<float> dist(0.0f, spread);
    std::vector<float> v(d);
    for (float& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("pose error: identical poses give zero") {
    PoseAngles p{12.0, -30.0, 170.0};
    CHECK(pose_error(p, p) == 0.0);
}

TEST_CASE("pose error: wrap-around arithmetic") {
    PoseAngles pred{179.0, 10.0, -5.0};
    PoseAngles gt{-179.0, 10.0, -5.0};
    CHECK(pose_error(pred, gt) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    PoseErrorDetail d = pose_error_detail(pred, gt);
    CHECK(d.yaw == doctest::Approx(2.0));
    CHECK(d.pitch == 0.0);
    CHECK(d.roll == 0.0);
}

TEST_CASE("pose error matches the brute-force wrap oracle exactly on 1000 random pairs") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        PoseAngles a = random_pose(rng);
        PoseAngles b = random_pose(rng);
        double expect = (test::oracle::wrap_diff_bruteforce(a.yaw, b.yaw) +
                         test::oracle::wrap_diff_bruteforce(a.pitch, b.pitch) +
                         test::oracle::wrap_diff_bruteforce(a.roll, b.roll)) /
                        3.0;
        REQUIRE(pose_error(a, b) == expect);
    }
}

TEST_CASE("out-of-range angles agree with the oracle to rounding noise") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        PoseAngles a = random_pose_wide(rng);
        PoseAngles b = random_pose_wide(rng);
        double expect = test::oracle::wrap_diff_bruteforce(a.yaw, b.yaw);
        CHECK(wrapped_abs_diff(a.yaw, b.yaw) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("pose error is symmetric, bounded and zero only at equality") {
    std::mt19937 rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        PoseAngles a = random_pose(rng);
        PoseAngles b = random_pose(rng);
        double e = pose_error(a, b);
        CHECK(e == pose_error(b, a));
        CHECK(e >= 0.0);
        CHECK(e <= 180.0);
        if (e == 0.0) {
            CHECK(PoseAngles::canonical(a.yaw) == doctest::Approx(PoseAngles::canonical(b.yaw)));
        }
    }
    CHECK(PoseAngles::canonical(180.0) == -180.0);
    CHECK(PoseAngles::canonical(-180.0) == -180.0);
    CHECK(PoseAngles::canonical(540.0) == -180.0);
    CHECK(PoseAngles::canonical(0.0) == 0.0);
}

TEST_CASE("clip similarity basics") {
    std::vector<float> v{0.3f, -1.2f, 4.0f};
    std::vector<float> neg{-0.3f, 1.2f, -4.0f};
    CHECK(clip_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(clip_similarity(v, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    std::vector<float> zero(3, 0.0f);
    CHECK_THROWS_AS(clip_similarity(v, zero), ContractViolation);
    std::vector<float> other_dim(4, 1.0f);
    CHECK_THROWS_AS(clip_similarity(v, other_dim), ContractViolation);
}

TEST_CASE("clip similarity matches the scalar cosine oracle to 1e-9") {
    std::mt19937 rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> a = random_vec(16, rng);
        std::vector<float> b = random_vec(16, rng);
        double dot = 0, na = 0, nb = 0;
        for (int i = 0; i < 16; ++i) {
            dot += static_cast<double>(a[i]) * b[i];
            na += static_cast<double>(a[i]) * a[i];
            nb += static_cast<double>(b[i]) * b[i];
        }
        double expect = dot / (std::sqrt(na) * std::sqrt(nb));
        REQUIRE(std::fabs(clip_similarity(a, b) - expect) <= 1e-9);
    }
}

TEST_CASE("clip similarity is scale-invariant") {
    std::mt19937 rng(45);
    std::vector<float> u = random_vec(12, rng);
    std::vector<float> v = random_vec(12, rng);
    double base = clip_similarity(u, v);
    // Power-of-two factors scale the float inputs exactly, so this checks
    // the similarity itself rather than input quantization.
    for (float alpha : {0.25f, 4.0f, 1024.0f}) {
        std::vector<float> us = u, vs = v;
        for (float& x : us) x *= alpha;
        for (float& x : vs) x *= 0.5f * alpha;
        CHECK(std::fabs(clip_similarity(us, vs) - base) <= 1e-9);
    }
}

TEST_CASE("frechet distance: identical sets give zero") {
    std::mt19937 rng(46);
    FeatureSet a;
    for (int i = 0; i < 24; ++i) a.vectors.push_back(random_vec(5, rng));
    CHECK(frechet_distance(a, a) <= 1e-6);
}

TEST_CASE("frechet distance: constructed 1-D Gaussian pair gives exactly 1") {
    // {-1, 0, 1} has sample mean 0 and unbiased variance 1; shifting by 1
    // moves only the mean, so the distance is (0-1)^2 + (1+1-2) = 1.
    FeatureSet a{{{-1.0f}, {0.0f}, {1.0f}}};
    FeatureSet b{{{0.0f}, {1.0f}, {2.0f}}};
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("frechet distance matches the extended-precision oracle on random 3-D sets") {
    std::mt19937 rng(47);
    for (int trial = 0; trial < 10; ++trial) {
        FeatureSet a, b;
        for (int i = 0; i < 64; ++i) a.vectors.push_back(random_vec(3, rng, 1.0f));
        for (int i = 0; i < 48; ++i) {
            std::vector<float> v = random_vec(3, rng, 1.7f);
            v[0] += 0.8f;
            b.vectors.push_back(v);
        }
        double ours = frechet_distance(a, b);
        double ref = static_cast<double>(test::oracle::frechet_reference(a.vectors, b.vectors));
        REQUIRE(std::fabs(ours - ref) <= 1e-6 * std::max(1.0, std::fabs(ref)));
    }
}

TEST_CASE("frechet distance is symmetric") {
    std::mt19937 rng(48);
    FeatureSet a, b;
    for (int i = 0; i < 32; ++i) a.vectors.push_back(random_vec(4, rng));
    for (int i = 0; i < 32; ++i) b.vectors.push_back(random_vec(4, rng, 2.0f));
    CHECK(std::fabs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-6);
}

TEST_CASE("frechet distance input contracts") {
    FeatureSet one{{{1.0f}}};
    FeatureSet ok{{{0.0f}, {1.0f}}};
    CHECK_THROWS_AS(frechet_distance(one, ok), ContractViolation);

    FeatureSet mixed{{{1.0f, 2.0f}, {1.0f}}};
    CHECK_THROWS_AS(frechet_distance(mixed, ok), ContractViolation);

    FeatureSet dims{{{1.0f, 2.0f}, {0.0f, 1.0f}}};
    CHECK_THROWS_AS(frechet_distance(dims, ok), ContractViolation);

    FeatureSet nan{{{0.0f}, {std::numeric_limits<float>::quiet_NaN()}}};
    CHECK_THROWS_AS(frechet_distance(nan, ok), ContractViolation);
}

TEST_CASE("binned report: identical pairs give zero in every occupied bin") {
    std::mt19937 rng(49);
    std::vector<std::pair<PoseAngles, PoseAngles>> pairs;
    for (int i = 0; i < 50; ++i) {
        PoseAngles p = random_pose(rng);
        pairs.emplace_back(p, p);
    }
    BinnedPoseReport r = binned_pose_report(pairs, 30);
    int rot_total = 0, ele_total = 0;
    for (const BinStat& b : r.rotation) {
        rot_total += b.count;
        if (b.count > 0) CHECK(b.mean_error == 0.0);
    }
    for (const BinStat& b : r.elevation) {
        ele_total += b.count;
        if (b.count > 0) CHECK(b.mean_error == 0.0);
    }
    CHECK(rot_total == 50);
    CHECK(ele_total == 50);
}

TEST_CASE("binned report: single pair lands in its yaw bin") {
    PoseAngles gt{10.0, 0.0, 0.0};
    PoseAngles pred{15.0, 0.0, 0.0};
    BinnedPoseReport r = binned_pose_report({{gt, pred}}, 30);
    for (const BinStat& b : r.rotation) {
        if (b.lo == 0.0) {
            CHECK(b.hi == 30.0);
            CHECK(b.count == 1);
            CHECK(b.mean_error == doctest::Approx(5.0));
        } else {
            CHECK(b.count == 0);
        }
    }
}

TEST_CASE("binned report matches a scalar groupby oracle") {
    std::mt19937 rng(50);
    std::vector<std::pair<PoseAngles, PoseAngles>> pairs;
    for (int i = 0; i < 300; ++i) pairs.emplace_back(random_pose(rng), random_pose(rng));
    const int bw = 45;
    BinnedPoseReport r = binned_pose_report(pairs, bw);

    std::map<int, std::pair<double, int>> rot, ele;
    for (const auto& [gt, pred] : pairs) {
        int rb = static_cast<int>(std::floor((PoseAngles::canonical(gt.yaw) + 180.0) / bw));
        rot[rb].first += test::oracle::wrap_diff_bruteforce(pred.yaw, gt.yaw);
        rot[rb].second += 1;
        int eb = static_cast<int>(std::floor((PoseAngles::canonical(gt.pitch) + 180.0) / bw));
        ele[eb].first += test::oracle::wrap_diff_bruteforce(pred.pitch, gt.pitch);
        ele[eb].second += 1;
    }
    for (size_t i = 0; i < r.rotation.size(); ++i) {
        auto it = rot.find(static_cast<int>(i));
        int expect_count = it == rot.end() ? 0 : it->second.second;
        CHECK(r.rotation[i].count == expect_count);
        if (expect_count > 0)
            CHECK(r.rotation[i].mean_error ==
                  doctest::Approx(it->second.first / expect_count).epsilon(1e-12));
    }
    for (size_t i = 0; i < r.elevation.size(); ++i) {
        auto it = ele.find(static_cast<int>(i));
        int expect_count = it == ele.end() ? 0 : it->second.second;
        CHECK(r.elevation[i].count == expect_count);
    }
}

TEST_CASE("binned report edge cases") {
    BinnedPoseReport empty = binned_pose_report({}, 30);
    CHECK(empty.sample_count == 0);
    for (const BinStat& b : empty.rotation) CHECK(b.count == 0);

    CHECK_THROWS_AS(binned_pose_report({}, 7), ContractViolation);   // 7 does not divide 360
    CHECK_THROWS_AS(binned_pose_report({}, 0), ContractViolation);
    CHECK_THROWS_AS(binned_pose_report({}, -30), ContractViolation);
}
