#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace steadapt {

struct BackboneConfig {
    int embed_dim = 32;       // D
    int num_groups = 2;       // residual groups
    int blocks_per_group = 2; // attention blocks per group
    int num_heads = 4;
    int window_size = 4;
    double mlp_ratio = 2.0;
    double cab_weight = 0.01;  // weight on the conv-attention branch
    int cab_squeeze = 4;       // channel reduction inside that branch
    int scale = 2;
    int img_channels = 3;

    void validate() const {
        if (embed_dim <= 0 || num_groups <= 0 || blocks_per_group <= 0 || num_heads <= 0 ||
            window_size <= 0 || img_channels <= 0)
            throw InvalidConfig("backbone dims must be positive");
        if (mlp_ratio <= 0) throw InvalidConfig("mlp_ratio must be positive");
        if (embed_dim % num_heads != 0)
            throw InvalidConfig("embed_dim " + std::to_string(embed_dim) +
                                " not divisible by num_heads " + std::to_string(num_heads));
        if (scale != 2 && scale != 4)
            throw InvalidConfig("scale must be 2 or 4, got " + std::to_string(scale));
        if (cab_squeeze <= 0 || embed_dim % cab_squeeze != 0)
            throw InvalidConfig("cab_squeeze " + std::to_string(cab_squeeze) +
                                " must divide embed_dim " + std::to_string(embed_dim));
    }

    int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
};

enum class Placement { after_ha, after_mlp_extra, parallel };

inline const char* placement_name(Placement p) {
    switch (p) {
        case Placement::after_ha: return "after_ha";
        case Placement::after_mlp_extra: return "after_mlp_extra";
        case Placement::parallel: return "parallel";
    }
    return "?";
}

struct InjectionPlan {
    bool spatial = false;
    std::vector<int> stereo_sites;  // group indices, sorted unique
    Placement placement = Placement::after_ha;
    int bottleneck = 0;        // 0 -> embed_dim / 4
    double tau = 1.0;          // softmax temperature, non-trainable
    bool row_attention = true; // false: global over all positions

    void validate(const BackboneConfig& bb) const {
        for (int s : stereo_sites)
            if (s < 0 || s >= bb.num_groups)
                throw InvalidConfig("stereo site " + std::to_string(s) + " out of range [0," +
                                    std::to_string(bb.num_groups) + ")");
        if (!std::is_sorted(stereo_sites.begin(), stereo_sites.end()) ||
            std::adjacent_find(stereo_sites.begin(), stereo_sites.end()) != stereo_sites.end())
            throw InvalidConfig("stereo_sites must be sorted and unique");
        if (tau <= 0) throw InvalidConfig("tau must be positive");
        if (bottleneck < 0 || bottleneck >= bb.embed_dim)
            throw InvalidConfig("bottleneck must lie in [0, embed_dim)");
    }

    int bottleneck_dim(const BackboneConfig& bb) const {
        return bottleneck > 0 ? bottleneck : std::max(1, bb.embed_dim / 4);
    }

    // Default attachment: one cross-view mixer after every second group.
    static std::vector<int> every_second_group(int num_groups) {
        std::vector<int> v;
        for (int g = 1; g < num_groups; g += 2) v.push_back(g);
        if (v.empty()) v.push_back(num_groups - 1);
        return v;
    }
};

enum class TuningMode { scratch, full, spatial_only, stereo_only, both, frozen };

inline const char* tuning_mode_name(TuningMode m) {
    switch (m) {
        case TuningMode::scratch: return "scratch";
        case TuningMode::full: return "full";
        case TuningMode::spatial_only: return "spatial_only";
        case TuningMode::stereo_only: return "stereo_only";
        case TuningMode::both: return "both";
        case TuningMode::frozen: return "frozen";
    }
    return "?";
}

inline TuningMode tuning_mode_from(const std::string& s) {
    if (s == "scratch") return TuningMode::scratch;
    if (s == "full") return TuningMode::full;
    if (s == "spatial_only" || s == "spatial") return TuningMode::spatial_only;
    if (s == "stereo_only" || s == "stereo") return TuningMode::stereo_only;
    if (s == "both") return TuningMode::both;
    if (s == "frozen") return TuningMode::frozen;
    throw InvalidConfig("unknown tuning mode '" + s + "'");
}

// Hash of the architecture-defining fields; stored in checkpoints so a loader
// can flag mismatched graphs before shapes do.
std::string config_hash(const BackboneConfig& bb, const InjectionPlan& plan);

}  // namespace steadapt
