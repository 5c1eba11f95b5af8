#include "surgery/surgery.hpp"

#include <regex>

namespace steadapt {

namespace {

std::string suffix_map(const std::string& tail) {
    if (tail == "weight" || tail == "bias") return tail;
    return "";
}

}  // namespace

std::optional<std::string> map_hat_param_name(const std::string& name) {
    static const std::regex block_re(
        R"(^layers\.(\d+)\.residual_group\.blocks\.(\d+)\.(.+)$)");
    static const std::regex layer_conv_re(R"(^layers\.(\d+)\.conv\.(weight|bias)$)");

    std::smatch m;
    if (std::regex_match(name, m, block_re)) {
        const std::string base = "backbone.body.g" + m[1].str() + ".b" + m[2].str() + ".";
        const std::string rest = m[3].str();
        if (rest == "norm1.weight") return base + "norm1.scale";
        if (rest == "norm1.bias") return base + "norm1.shift";
        if (rest == "norm2.weight") return base + "norm2.scale";
        if (rest == "norm2.bias") return base + "norm2.shift";
        if (rest == "attn.relative_position_bias_table") return base + "attn.rel_bias";
        if (rest.rfind("attn.qkv.", 0) == 0) return base + "attn.qkv." + suffix_map(rest.substr(9));
        if (rest.rfind("attn.proj.", 0) == 0)
            return base + "attn.proj." + suffix_map(rest.substr(10));
        if (rest.rfind("conv_block.cab.0.", 0) == 0)
            return base + "cab.conv1." + suffix_map(rest.substr(17));
        if (rest.rfind("conv_block.cab.2.", 0) == 0)
            return base + "cab.conv2." + suffix_map(rest.substr(17));
        if (rest.rfind("conv_block.cab.3.attention.1.", 0) == 0)
            return base + "cab.se1." + suffix_map(rest.substr(29));
        if (rest.rfind("conv_block.cab.3.attention.3.", 0) == 0)
            return base + "cab.se2." + suffix_map(rest.substr(29));
        if (rest.rfind("mlp.fc1.", 0) == 0) return base + "mlp.fc1." + suffix_map(rest.substr(8));
        if (rest.rfind("mlp.fc2.", 0) == 0) return base + "mlp.fc2." + suffix_map(rest.substr(8));
        return std::nullopt;  // overlap_attn.*, relative_position_index, attn_mask
    }
    if (std::regex_match(name, m, layer_conv_re))
        return "backbone.body.g" + m[1].str() + ".conv." + m[2].str();
    if (name == "conv_first.weight" || name == "conv_first.bias")
        return "backbone." + name;
    if (name == "conv_after_body.weight" || name == "conv_after_body.bias")
        return "backbone." + name;
    if (name.rfind("conv_before_upsample.0.", 0) == 0)
        return "backbone.tail.conv_before." + suffix_map(name.substr(23));
    if (name.rfind("upsample.0.", 0) == 0) return "backbone.tail.up0." + suffix_map(name.substr(11));
    if (name.rfind("upsample.2.", 0) == 0) return "backbone.tail.up1." + suffix_map(name.substr(11));
    if (name.rfind("conv_last.", 0) == 0)
        return "backbone.tail.conv_last." + suffix_map(name.substr(10));
    return std::nullopt;  // norm.*, overlapping attention, buffers
}

Checkpoint translate_hat_checkpoint(const Checkpoint& ckpt) {
    Checkpoint out;
    out.config_hash.clear();
    for (const auto& [name, e] : ckpt.tensors) {
        auto mapped = map_hat_param_name(name);
        if (mapped) out.tensors.emplace(*mapped, e);
    }
    return out;
}

}  // namespace steadapt
