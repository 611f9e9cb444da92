#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "snp/tensor.hpp"
#include "snp/wcm.hpp"

namespace snp {

class DenoiserBackend;

// Ordered per-site control features as emitted by the control encoder.
// An empty tensor at a site means "absent": the denoiser skips injection
// there, which is contract-equivalent to injecting zeros.
struct ControlFeatureSet {
    std::vector<Tensor4f> features;
    std::vector<Resolution> site_resolutions;

    int site_count() const { return static_cast<int>(features.size()); }
    void validate() const;
};

struct RoutingMask {
    std::set<int> active_sites;

    static RoutingMask all(int site_count);
    static RoutingMask none() { return {}; }
    static RoutingMask of(std::initializer_list<int> sites) { return {std::set<int>(sites)}; }

    bool contains(int site) const { return active_sites.count(site) != 0; }
    bool empty() const { return active_sites.empty(); }
    void validate(int site_count) const;
    std::string str() const;

    bool operator==(const RoutingMask&) const = default;
};

// Selective routing and weight-map modulation of control features before
// they reach the denoiser's skip/middle sites. Per site i the output is
//   i not in mask          -> zeros
//   i in mask, weights set -> feature * weights[i], broadcast over channels
//   i in mask, no weights  -> unchanged
ControlFeatureSet route_features(const ControlFeatureSet& features,
                                 const RoutingMask& mask,
                                 const WeightMaps* weights = nullptr);

// Pose-relevant sites derived from a backend's declared layout: the
// middle-block site plus every site feeding the given decoder blocks
// (default: block 4, the SD-1.5-style convention).
RoutingMask pose_mask_from_layout(const DenoiserBackend& backend,
                                  const std::set<int>& decoder_blocks = {4});

// Registry of per-backend pose masks. Which blocks matter varies with the
// baseline model, so entries are data: builtin entries cover the toy
// layout, config files may add or override ids.
class RoutingTable {
public:
    // Ships with an "sdxl" placeholder entry that is intentionally empty;
    // fill it via config once the pose-relevant blocks are known.
    static RoutingTable with_builtins();

    void register_backend(const DenoiserBackend& backend);
    void set(const std::string& backend_id, RoutingMask mask);
    bool has(const std::string& backend_id) const { return entries_.count(backend_id) != 0; }
    std::vector<std::string> registered_ids() const;

    // Throws LookupError (listing registered ids) for unknown ids; warns on
    // stderr and returns the empty mask for registered-but-empty entries.
    RoutingMask default_pose_mask(const std::string& backend_id) const;

private:
    std::map<std::string, RoutingMask> entries_;
};

}  // namespace snp
