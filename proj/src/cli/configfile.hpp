#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "data/datapipe.hpp"
#include "eval/evaluate.hpp"
#include "model/config.hpp"
#include "surgery/surgery.hpp"
#include "train/trainer.hpp"

namespace steadapt {

// Flat "section.key -> value" view over an INI-style file. Every key must be
// consumed by RunConfig::from_map; leftovers are reported as config errors.
class ConfigMap {
public:
    static ConfigMap from_file(const std::string& path);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string get_str(const std::string& key, const std::string& def) const;
    long get_long(const std::string& key, long def) const;
    int get_int(const std::string& key, int def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;

    void check_all_consumed() const;

private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> consumed_;
};

struct RunConfig {
    BackboneConfig backbone;
    InjectionPlan plan;
    TrainConfig train;
    std::string data_root;
    std::string val_root;
    PatchSpec patch;
    AugmentConfig aug;
    EvalProtocol eval;
    TuningMode mode = TuningMode::both;
    std::string pretrained;
    std::string out_dir = "out";
    LoadPolicy load_policy = LoadPolicy::strict_backbone;
    bool deterministic = true;

    static RunConfig from_map(const ConfigMap& m);
    std::string serialize() const;  // canonical resolved form, reparseable
};

std::vector<int> parse_stereo_sites(const std::string& text, int num_groups);

}  // namespace steadapt
