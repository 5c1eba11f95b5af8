#include "cli/configfile.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace steadapt {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap ConfigMap::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidConfig("cannot open config file: " + path);
    ConfigMap m;
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw InvalidConfig(path + ":" + std::to_string(lineno) + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidConfig(path + ":" + std::to_string(lineno) + ": empty key");
        m.kv_[section.empty() ? key : section + "." + key] = value;
    }
    return m;
}

std::string ConfigMap::get_str(const std::string& key, const std::string& def) const {
    consumed_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

long ConfigMap::get_long(const std::string& key, long def) const {
    const std::string s = get_str(key, "");
    if (s.empty()) return def;
    try {
        size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("config key '" + key + "': expected integer, got '" + s + "'");
    }
}

int ConfigMap::get_int(const std::string& key, int def) const {
    return static_cast<int>(get_long(key, def));
}

double ConfigMap::get_double(const std::string& key, double def) const {
    const std::string s = get_str(key, "");
    if (s.empty()) return def;
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InvalidConfig("config key '" + key + "': expected number, got '" + s + "'");
    }
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
    std::string s = get_str(key, "");
    if (s.empty()) return def;
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidConfig("config key '" + key + "': expected boolean, got '" + s + "'");
}

void ConfigMap::check_all_consumed() const {
    for (const auto& [key, value] : kv_)
        if (!consumed_.count(key)) throw InvalidConfig("unknown config key '" + key + "'");
}

std::vector<int> parse_stereo_sites(const std::string& text, int num_groups) {
    std::vector<int> sites;
    if (text.empty() || text == "none") return sites;
    if (text == "all") {
        for (int g = 0; g < num_groups; ++g) sites.push_back(g);
        return sites;
    }
    if (text == "every2") return InjectionPlan::every_second_group(num_groups);
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            sites.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw InvalidConfig("plan.stereo_sites: bad entry '" + tok + "'");
        }
    }
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    return sites;
}

RunConfig RunConfig::from_map(const ConfigMap& m) {
    RunConfig rc;
    rc.backbone.embed_dim = m.get_int("backbone.embed_dim", rc.backbone.embed_dim);
    rc.backbone.num_groups = m.get_int("backbone.num_groups", rc.backbone.num_groups);
    rc.backbone.blocks_per_group =
        m.get_int("backbone.blocks_per_group", rc.backbone.blocks_per_group);
    rc.backbone.num_heads = m.get_int("backbone.num_heads", rc.backbone.num_heads);
    rc.backbone.window_size = m.get_int("backbone.window_size", rc.backbone.window_size);
    rc.backbone.mlp_ratio = m.get_double("backbone.mlp_ratio", rc.backbone.mlp_ratio);
    rc.backbone.cab_weight = m.get_double("backbone.cab_weight", rc.backbone.cab_weight);
    rc.backbone.cab_squeeze = m.get_int("backbone.cab_squeeze", rc.backbone.cab_squeeze);
    rc.backbone.scale = m.get_int("backbone.scale", rc.backbone.scale);
    rc.backbone.img_channels = m.get_int("backbone.img_channels", rc.backbone.img_channels);
    rc.backbone.validate();

    rc.plan.spatial = m.get_bool("plan.spatial", rc.plan.spatial);
    rc.plan.stereo_sites =
        parse_stereo_sites(m.get_str("plan.stereo_sites", "none"), rc.backbone.num_groups);
    const std::string placement = m.get_str("plan.placement", "after_ha");
    if (placement == "after_ha") rc.plan.placement = Placement::after_ha;
    else if (placement == "after_mlp_extra") rc.plan.placement = Placement::after_mlp_extra;
    else if (placement == "parallel") rc.plan.placement = Placement::parallel;
    else throw InvalidConfig("plan.placement: unknown value '" + placement + "'");
    rc.plan.bottleneck = m.get_int("plan.bottleneck", rc.plan.bottleneck);
    rc.plan.tau = m.get_double("plan.tau", rc.plan.tau);
    const std::string att = m.get_str("plan.stereo_attention", "row");
    if (att == "row") rc.plan.row_attention = true;
    else if (att == "global") rc.plan.row_attention = false;
    else throw InvalidConfig("plan.stereo_attention must be row or global, got '" + att + "'");
    rc.plan.validate(rc.backbone);

    rc.train.lr = m.get_double("train.lr", rc.train.lr);
    rc.train.beta1 = m.get_double("train.beta1", rc.train.beta1);
    rc.train.beta2 = m.get_double("train.beta2", rc.train.beta2);
    rc.train.weight_decay = m.get_double("train.weight_decay", rc.train.weight_decay);
    rc.train.iterations = m.get_long("train.iterations", rc.train.iterations);
    rc.train.batch = m.get_int("train.batch", rc.train.batch);
    const std::string loss = m.get_str("train.loss", "l1");
    if (loss != "l1") throw InvalidConfig("train.loss: only 'l1' is supported, got '" + loss + "'");
    const std::string sched = m.get_str("train.schedule", "cosine");
    if (sched == "cosine") rc.train.schedule = TrainConfig::Sched::cosine;
    else if (sched == "constant") rc.train.schedule = TrainConfig::Sched::constant;
    else throw InvalidConfig("train.schedule must be cosine or constant, got '" + sched + "'");
    rc.train.seed = static_cast<std::uint64_t>(m.get_long("train.seed", 0));
    rc.train.log_every = m.get_long("train.log_every", rc.train.log_every);
    rc.train.ckpt_every = m.get_long("train.ckpt_every", rc.train.ckpt_every);
    rc.train.grad_clip = m.get_double("train.grad_clip", rc.train.grad_clip);
    rc.train.validate();

    rc.data_root = m.get_str("data.root", "");
    rc.val_root = m.get_str("data.val_root", "");
    rc.patch.lr_h = m.get_int("data.patch_lr_h", 0);
    rc.patch.lr_w = m.get_int("data.patch_lr_w", 0);
    rc.aug.hflip = m.get_bool("data.hflip", rc.aug.hflip);
    rc.aug.vflip = m.get_bool("data.vflip", rc.aug.vflip);
    rc.aug.rgb_perm = m.get_bool("data.rgb_perm", rc.aug.rgb_perm);

    rc.eval.view_mode = view_mode_from(m.get_str("eval.view_mode", "mean_lr"));
    rc.eval.boundary_crop = m.get_int("eval.boundary_crop", 0);
    rc.eval.ensemble = m.get_bool("eval.ensemble", false);
    rc.eval.validate();

    rc.mode = tuning_mode_from(m.get_str("run.mode", "both"));
    rc.pretrained = m.get_str("run.pretrained", "");
    rc.out_dir = m.get_str("run.out_dir", rc.out_dir);
    const std::string policy = m.get_str("run.load_policy", "strict");
    if (policy == "strict" || policy == "strict_backbone")
        rc.load_policy = LoadPolicy::strict_backbone;
    else if (policy == "permissive") rc.load_policy = LoadPolicy::permissive;
    else throw InvalidConfig("run.load_policy must be strict or permissive, got '" + policy + "'");
    rc.deterministic = m.get_bool("run.deterministic", true);

    m.check_all_consumed();
    return rc;
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os << "[backbone]\n";
    os << "embed_dim = " << backbone.embed_dim << "\n";
    os << "num_groups = " << backbone.num_groups << "\n";
    os << "blocks_per_group = " << backbone.blocks_per_group << "\n";
    os << "num_heads = " << backbone.num_heads << "\n";
    os << "window_size = " << backbone.window_size << "\n";
    os << "mlp_ratio = " << backbone.mlp_ratio << "\n";
    os << "cab_weight = " << backbone.cab_weight << "\n";
    os << "cab_squeeze = " << backbone.cab_squeeze << "\n";
    os << "scale = " << backbone.scale << "\n";
    os << "img_channels = " << backbone.img_channels << "\n";
    os << "\n[plan]\n";
    os << "spatial = " << (plan.spatial ? "true" : "false") << "\n";
    os << "stereo_sites = ";
    if (plan.stereo_sites.empty()) os << "none";
    for (size_t i = 0; i < plan.stereo_sites.size(); ++i)
        os << (i ? "," : "") << plan.stereo_sites[i];
    os << "\n";
    os << "placement = " << placement_name(plan.placement) << "\n";
    os << "bottleneck = " << plan.bottleneck << "\n";
    os << "tau = " << plan.tau << "\n";
    os << "stereo_attention = " << (plan.row_attention ? "row" : "global") << "\n";
    os << "\n[train]\n";
    os << "lr = " << train.lr << "\n";
    os << "beta1 = " << train.beta1 << "\n";
    os << "beta2 = " << train.beta2 << "\n";
    os << "weight_decay = " << train.weight_decay << "\n";
    os << "iterations = " << train.iterations << "\n";
    os << "batch = " << train.batch << "\n";
    os << "loss = l1\n";
    os << "schedule = "
       << (train.schedule == TrainConfig::Sched::cosine ? "cosine" : "constant") << "\n";
    os << "seed = " << train.seed << "\n";
    os << "log_every = " << train.log_every << "\n";
    os << "ckpt_every = " << train.ckpt_every << "\n";
    os << "grad_clip = " << train.grad_clip << "\n";
    os << "\n[data]\n";
    os << "root = " << data_root << "\n";
    os << "val_root = " << val_root << "\n";
    os << "patch_lr_h = " << patch.lr_h << "\n";
    os << "patch_lr_w = " << patch.lr_w << "\n";
    os << "hflip = " << (aug.hflip ? "true" : "false") << "\n";
    os << "vflip = " << (aug.vflip ? "true" : "false") << "\n";
    os << "rgb_perm = " << (aug.rgb_perm ? "true" : "false") << "\n";
    os << "\n[eval]\n";
    os << "view_mode = " << (eval.view_mode == ViewMode::left_only ? "left_only" : "mean_lr")
       << "\n";
    os << "boundary_crop = " << eval.boundary_crop << "\n";
    os << "ensemble = " << (eval.ensemble ? "true" : "false") << "\n";
    os << "\n[run]\n";
    os << "mode = " << tuning_mode_name(mode) << "\n";
    os << "pretrained = " << pretrained << "\n";
    os << "out_dir = " << out_dir << "\n";
    os << "load_policy = "
       << (load_policy == LoadPolicy::strict_backbone ? "strict" : "permissive") << "\n";
    os << "deterministic = " << (deterministic ? "true" : "false") << "\n";
    return os.str();
}

}  // namespace steadapt
