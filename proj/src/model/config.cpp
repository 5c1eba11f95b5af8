#include "model/config.hpp"

#include <iomanip>
#include <sstream>

namespace steadapt {

std::string config_hash(const BackboneConfig& bb, const InjectionPlan& plan) {
    std::ostringstream os;
    os << "D=" << bb.embed_dim << ";G=" << bb.num_groups << ";B=" << bb.blocks_per_group
       << ";H=" << bb.num_heads << ";W=" << bb.window_size << ";mlp=" << bb.mlp_ratio
       << ";alpha=" << bb.cab_weight << ";sq=" << bb.cab_squeeze << ";scale=" << bb.scale
       << ";imgc=" << bb.img_channels << "|spatial=" << (plan.spatial ? 1 : 0) << ";sites=";
    for (size_t i = 0; i < plan.stereo_sites.size(); ++i)
        os << (i ? "," : "") << plan.stereo_sites[i];
    os << ";place=" << placement_name(plan.placement) << ";bn=" << plan.bottleneck
       << ";tau=" << plan.tau << ";row=" << (plan.row_attention ? 1 : 0);
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
    return hex.str();
}

}  // namespace steadapt
