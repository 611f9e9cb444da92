#include "snp/control_router.hpp"

#include <iostream>
#include <sstream>

#include "snp/backend.hpp"
#include "snp/errors.hpp"

namespace snp {

void ControlFeatureSet::validate() const {
    if (features.size() != site_resolutions.size())
        throw ContractViolation("control feature set: " + std::to_string(features.size()) +
                                " features vs " + std::to_string(site_resolutions.size()) +
                                " declared sites");
    for (size_t i = 0; i < features.size(); ++i) {
        const Tensor4f& f = features[i];
        if (f.empty()) continue;  // absent site
        if (f.shape.h != site_resolutions[i].h || f.shape.w != site_resolutions[i].w)
            throw ContractViolation("control feature at site " + std::to_string(i) + " is " +
                                    f.shape.str() + ", declared resolution " +
                                    site_resolutions[i].str());
    }
}

RoutingMask RoutingMask::all(int site_count) {
    RoutingMask m;
    for (int i = 0; i < site_count; ++i) m.active_sites.insert(i);
    return m;
}

void RoutingMask::validate(int site_count) const {
    for (int s : active_sites)
        if (s < 0 || s >= site_count)
            throw ContractViolation("routing mask site " + std::to_string(s) +
                                    " out of range [0," + std::to_string(site_count) + ")");
}

std::string RoutingMask::str() const {
    std::ostringstream os;
    os << "{";
    bool first = true;
    for (int s : active_sites) {
        if (!first) os << ",";
        os << s;
        first = false;
    }
    os << "}";
    return os.str();
}

ControlFeatureSet route_features(const ControlFeatureSet& features,
                                 const RoutingMask& mask,
                                 const WeightMaps* weights) {
    features.validate();
    mask.validate(features.site_count());

    ControlFeatureSet out;
    out.site_resolutions = features.site_resolutions;
    out.features.reserve(features.features.size());

    for (int i = 0; i < features.site_count(); ++i) {
        const Tensor4f& f = features.features[i];
        if (f.empty()) {  // absent stays absent
            out.features.emplace_back();
            continue;
        }
        if (!mask.contains(i)) {
            out.features.push_back(Tensor4f::zeros(f.shape));
            continue;
        }
        if (weights == nullptr) {
            out.features.push_back(f);
            continue;
        }
        const Gray* wm = weights->find(i);
        if (wm == nullptr)
            throw ContractViolation("no weight map for active site " + std::to_string(i));
        if (wm->h != f.shape.h || wm->w != f.shape.w)
            throw ContractViolation("weight map at site " + std::to_string(i) + " is " +
                                    std::to_string(wm->h) + "x" + std::to_string(wm->w) +
                                    ", feature is " + f.shape.str());
        Tensor4f scaled(f.shape);
        for (int n = 0; n < f.shape.n; ++n)
            for (int c = 0; c < f.shape.c; ++c)
                for (int y = 0; y < f.shape.h; ++y)
                    for (int x = 0; x < f.shape.w; ++x)
                        scaled.at(n, c, y, x) = f.at(n, c, y, x) * wm->at(y, x);
        out.features.push_back(std::move(scaled));
    }
    return out;
}

RoutingMask pose_mask_from_layout(const DenoiserBackend& backend,
                                  const std::set<int>& decoder_blocks) {
    RoutingMask m;
    if (backend.middle_site() >= 0) m.active_sites.insert(backend.middle_site());
    const std::vector<int>& blocks = backend.site_to_decoder_block();
    for (size_t i = 0; i < blocks.size(); ++i)
        if (decoder_blocks.count(blocks[i]) && static_cast<int>(i) != backend.middle_site())
            m.active_sites.insert(static_cast<int>(i));
    return m;
}

RoutingTable RoutingTable::with_builtins() {
    RoutingTable t;
    // Pose-relevant blocks for SDXL differ per model build; ships empty.
    t.entries_.emplace("sdxl", RoutingMask::none());
    return t;
}

void RoutingTable::register_backend(const DenoiserBackend& backend) {
    entries_[backend.id()] = pose_mask_from_layout(backend);
}

void RoutingTable::set(const std::string& backend_id, RoutingMask mask) {
    entries_[backend_id] = std::move(mask);
}

std::vector<std::string> RoutingTable::registered_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries_.size());
    for (const auto& [id, _] : entries_) ids.push_back(id);
    return ids;
}

RoutingMask RoutingTable::default_pose_mask(const std::string& backend_id) const {
    auto it = entries_.find(backend_id);
    if (it == entries_.end()) {
        std::ostringstream os;
        os << "no routing table entry for backend '" << backend_id << "'; registered:";
        for (const auto& [id, _] : entries_) os << " " << id;
        throw LookupError(os.str());
    }
    if (it->second.empty())
        std::cerr << "warning: routing table entry for '" << backend_id
                  << "' is empty; all control features will be suppressed\n";
    return it->second;
}

}  // namespace snp
