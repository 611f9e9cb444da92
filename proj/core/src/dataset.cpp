#include "snp/dataset.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "snp/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace snp {

std::vector<DatasetItem> scan_dataset(const fs::path& root) {
    if (!fs::is_directory(root))
        throw DatasetError("dataset root " + root.string() + " is not a directory");

    std::vector<DatasetItem> items;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        DatasetItem item;
        item.image = entry.path();
        item.id = entry.path().stem().string();
        fs::path base = root / item.id;
        if (fs::path p = base; fs::exists(p += ".pose.json")) item.pose_json = p;
        if (fs::path p = base; fs::exists(p += ".est.json")) item.est_json = p;
        if (fs::path p = base; fs::exists(p += ".feat")) item.feat = p;
        items.push_back(std::move(item));
    }
    std::sort(items.begin(), items.end(),
              [](const DatasetItem& a, const DatasetItem& b) { return a.id < b.id; });
    return items;
}

PoseAngles read_pose_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open " + path.string(), {path.string()});
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
    for (const char* key : {"yaw", "pitch", "roll"})
        if (!j.contains(key) || !j[key].is_number())
            throw DatasetError(path.string() + ": missing numeric key '" + key + "'");
    PoseAngles p{j["yaw"].get<double>(), j["pitch"].get<double>(), j["roll"].get<double>()};
    return p.canonicalized();
}

void write_pose_json(const fs::path& path, const PoseAngles& pose) {
    json j{{"yaw", pose.yaw}, {"pitch", pose.pitch}, {"roll", pose.roll}};
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

PoseAngles SidecarPoseEstimator::estimate(const DatasetItem& item) const {
    if (item.est_json) return read_pose_json(*item.est_json);
    if (item.pose_json) return read_pose_json(*item.pose_json);
    throw DatasetError("no pose sidecar for " + item.image.string(),
                       {item.image.stem().string() + ".est.json"});
}

}  // namespace snp
