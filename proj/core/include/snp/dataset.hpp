#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snp/eval.hpp"

namespace snp {

// One image in a `<root>/<id>.png` dataset with its optional sidecars:
//   <id>.pose.json  ground-truth pose (keys yaw/pitch/roll, degrees)
//   <id>.est.json   estimated pose, same schema (written by an estimator)
//   <id>.feat       float32 LE feature vector
struct DatasetItem {
    std::string id;
    std::filesystem::path image;
    std::optional<std::filesystem::path> pose_json;
    std::optional<std::filesystem::path> est_json;
    std::optional<std::filesystem::path> feat;
};

// Items sorted by id. Throws DatasetError if root is not a directory.
std::vector<DatasetItem> scan_dataset(const std::filesystem::path& root);

PoseAngles read_pose_json(const std::filesystem::path& path);
void write_pose_json(const std::filesystem::path& path, const PoseAngles& pose);

// Maps an image to its estimated pose. Real estimators are external
// models; this seam lets the eval harness run against any of them.
class PoseEstimator {
public:
    virtual ~PoseEstimator() = default;
    virtual PoseAngles estimate(const DatasetItem& item) const = 0;
};

// Stub estimator for testing: reads <id>.est.json when present, otherwise
// falls back to the ground-truth sidecar (zero error).
class SidecarPoseEstimator final : public PoseEstimator {
public:
    PoseAngles estimate(const DatasetItem& item) const override;
};

}  // namespace snp
