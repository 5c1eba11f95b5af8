#pragma once

#include <optional>
#include <string>
#include <vector>

#include "model/stereo_model.hpp"
#include "surgery/checkpoint.hpp"

namespace steadapt {

enum class LoadPolicy { strict_backbone, permissive };

struct LoadReport {
    std::vector<std::string> loaded;
    std::vector<std::string> missing;  // model names absent from the checkpoint
    std::vector<std::string> ignored;  // checkpoint names absent from the model
    bool hash_match = true;
};

// Builds the two-view model around a shared backbone. Weight initialization
// is name-keyed, so the backbone comes out identical for any plan.
template <class T>
StereoModel<T> inject_adapters(const BackboneConfig& cfg, const InjectionPlan& plan,
                               std::uint64_t seed = 0) {
    return StereoModel<T>(cfg, plan, seed);
}

template <class T>
Checkpoint snapshot(const StereoModel<T>& model) {
    Checkpoint ckpt;
    ckpt.config_hash = config_hash(model.config(), model.plan());
    for (const auto& [name, e] : model.params().entries()) {
        Checkpoint::Entry ce;
        ce.shape = e.var->value.shape();
        ce.trainable = e.trainable;
        ce.data.resize(static_cast<size_t>(e.var->value.numel()));
        for (std::int64_t i = 0; i < e.var->value.numel(); ++i)
            ce.data[static_cast<size_t>(i)] = static_cast<float>(e.var->value[i]);
        ckpt.tensors.emplace(name, std::move(ce));
    }
    return ckpt;
}

template <class T>
void save_checkpoint(const StereoModel<T>& model, const std::string& path) {
    write_checkpoint(snapshot(model), path);
}

template <class T>
void restore_tensor(Tensor<T>& dst, const Checkpoint::Entry& e) {
    for (std::int64_t i = 0; i < dst.numel(); ++i)
        dst[i] = static_cast<T>(e.data[static_cast<size_t>(i)]);
}

// Copies every matching backbone/adapter tensor. Absent adapter names keep
// their initialization; absent backbone names are an error under
// strict_backbone. Shape conflicts always error, naming the tensor.
template <class T>
LoadReport load_pretrained(StereoModel<T>& model, const Checkpoint& ckpt, LoadPolicy policy) {
    LoadReport rep;
    rep.hash_match =
        ckpt.config_hash.empty() || ckpt.config_hash == config_hash(model.config(), model.plan());
    for (auto& [name, e] : model.params().entries()) {
        auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) {
            rep.missing.push_back(name);
            if (policy == LoadPolicy::strict_backbone && name.rfind("backbone.", 0) == 0)
                throw MissingWeights("checkpoint is missing backbone tensor '" + name + "'");
            continue;
        }
        if (it->second.shape != e.var->value.shape())
            throw ShapeConflict("tensor '" + name + "' has shape " +
                                shape_str(it->second.shape) + ", model expects " +
                                shape_str(e.var->value.shape()));
        restore_tensor(e.var->value, it->second);
        rep.loaded.push_back(name);
    }
    for (const auto& [name, ce] : ckpt.tensors)
        if (!model.params().has(name)) rep.ignored.push_back(name);
    return rep;
}

// Marks the trainable subset for a fine-tuning regime and returns it sorted.
// scratch additionally re-randomizes the backbone.
template <class T>
std::vector<std::string> apply_tuning_mode(StereoModel<T>& model, TuningMode mode) {
    if (mode == TuningMode::scratch) model.params().reinit_prefix("backbone.");
    std::vector<std::string> trainable;
    for (auto& [name, e] : model.params().entries()) {
        bool t = false;
        switch (mode) {
            case TuningMode::scratch:
            case TuningMode::full: t = true; break;
            case TuningMode::spatial_only: t = name.rfind("adapter.spatial.", 0) == 0; break;
            case TuningMode::stereo_only: t = name.rfind("adapter.stereo.", 0) == 0; break;
            case TuningMode::both: t = name.rfind("adapter.", 0) == 0; break;
            case TuningMode::frozen: t = false; break;
        }
        e.trainable = t;
        if (t) trainable.push_back(name);
    }
    return trainable;
}

template <class T>
std::int64_t count_params(const StereoModel<T>& model, bool trainable_only) {
    return model.params().count(trainable_only);
}

template <class T>
std::int64_t count_params_prefix(const StereoModel<T>& model, const std::string& prefix) {
    std::int64_t n = 0;
    for (const auto& [name, e] : model.params().entries())
        if (name.rfind(prefix, 0) == 0) n += e.var->value.numel();
    return n;
}

// Best-effort translation of published HAT tensor names onto this repo's
// names. Unmapped names (overlapping-attention blocks, the post-body norm,
// index buffers) return nullopt and are reported as ignored by the loader.
std::optional<std::string> map_hat_param_name(const std::string& name);

// Applies the name map to a foreign checkpoint, dropping unmapped tensors.
Checkpoint translate_hat_checkpoint(const Checkpoint& ckpt);

}  // namespace steadapt
