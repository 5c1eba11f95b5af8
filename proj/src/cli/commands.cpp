#include "cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cli/configfile.hpp"

namespace fs = std::filesystem;

namespace steadapt {

namespace {

using Model = StereoModel<float>;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    long seed = -1;
    bool deterministic = false;
};

RunConfig load_run_config(const CommonArgs& a) {
    ConfigMap m = ConfigMap::from_file(a.config_path);
    for (const std::string& ov : a.overrides) {
        // --section.key=value
        std::string s = ov;
        if (s.rfind("--", 0) == 0) s = s.substr(2);
        const auto eq = s.find('=');
        if (eq == std::string::npos || s.find('.') == std::string::npos || eq < s.find('.'))
            throw InvalidConfig("bad override '" + ov + "' (expected --section.key=value)");
        m.set(s.substr(0, eq), s.substr(eq + 1));
    }
    RunConfig rc = RunConfig::from_map(m);
    if (a.seed >= 0) rc.train.seed = static_cast<std::uint64_t>(a.seed);
    if (a.deterministic) rc.deterministic = true;
    return rc;
}

StereoForward make_forward(const Model& model) {
    return [&model](const ViewPair& lr) {
        auto [l, r] = model.infer_pair(lr.left.tensor(), lr.right.tensor());
        return ViewPair{Image::from_tensor(l), Image::from_tensor(r)};
    };
}

Model build_model(const RunConfig& rc) {
    Model model = inject_adapters<float>(rc.backbone, rc.plan, rc.train.seed);
    if (!rc.pretrained.empty()) {
        const Checkpoint ckpt = read_checkpoint(rc.pretrained);
        const LoadReport rep = load_pretrained(model, ckpt, rc.load_policy);
        if (!rep.hash_match)
            std::cerr << "note: checkpoint config hash differs from run config\n";
        std::cout << "loaded " << rep.loaded.size() << " tensors, " << rep.missing.size()
                  << " kept at init, " << rep.ignored.size() << " ignored\n";
    }
    return model;
}

MetricReport run_eval(const Model& model, const RunConfig& rc,
                      const std::vector<std::pair<std::string, std::string>>& datasets) {
    MetricReport report;
    report.params_total = count_params(model, false);
    report.params_trainable = count_params(model, true);
    const StereoForward fwd = make_forward(model);
    for (const auto& [name, root] : datasets) {
        std::vector<std::string> warnings;
        const auto samples = load_dataset(root, rc.backbone.scale, &warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
        report.datasets[name] = evaluate_dataset(fwd, samples, rc.eval);
    }
    return report;
}

void print_report(const MetricReport& report) {
    for (const auto& [name, ds] : report.datasets) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s %.2f/%.4f\n", name.c_str(), ds.psnr, ds.ssim);
        std::cout << buf;
    }
}

void write_reports(const MetricReport& report, const std::string& dir, bool per_image) {
    write_report_json(report, dir + "/report.json");
    write_report_csv(report, dir + "/report.csv", per_image);
}

int cmd_train(const CommonArgs& a) {
    RunConfig rc = load_run_config(a);
    if (rc.mode == TuningMode::frozen)
        throw InvalidConfig("frozen mode has no trainable parameters");
    if (rc.data_root.empty()) throw InvalidConfig("data.root is required for training");
    if (!fs::exists(rc.data_root))
        throw InvalidConfig("data.root does not exist: " + rc.data_root);
    if (!rc.pretrained.empty() && !fs::exists(rc.pretrained))
        throw InvalidConfig("run.pretrained does not exist: " + rc.pretrained);
    if (!rc.val_root.empty() && !fs::exists(rc.val_root))
        throw InvalidConfig("data.val_root does not exist: " + rc.val_root);

    fs::create_directories(rc.out_dir);
    {
        std::ofstream f(rc.out_dir + "/config_resolved.ini", std::ios::trunc);
        f << rc.serialize();
    }

    std::vector<std::string> warnings;
    auto samples = load_dataset(rc.data_root, rc.backbone.scale, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

    Model model = build_model(rc);
    BatchSampler sampler(std::move(samples), rc.patch, rc.train.batch, rc.backbone.scale, rc.aug,
                         rc.train.seed);

    const auto res = fit(model, sampler, rc.train, rc.mode, rc.out_dir);
    std::cout << "trained " << rc.train.iterations << " iterations, final loss "
              << res.final_loss << "\n";

    const std::string eval_root = rc.val_root.empty() ? rc.data_root : rc.val_root;
    const std::string eval_name = rc.val_root.empty() ? "train" : "val";
    const MetricReport report = run_eval(model, rc, {{eval_name, eval_root}});
    write_reports(report, rc.out_dir, false);
    print_report(report);
    return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& ckpt_path,
             const std::vector<std::string>& data_paths, const std::string& out,
             bool per_image) {
    RunConfig rc = load_run_config(a);
    if (ckpt_path.empty()) throw InvalidConfig("--ckpt is required");
    if (!fs::exists(ckpt_path)) throw InvalidConfig("checkpoint does not exist: " + ckpt_path);
    rc.pretrained = ckpt_path;

    std::vector<std::pair<std::string, std::string>> datasets;
    if (!data_paths.empty())
        for (const std::string& p : data_paths)
            datasets.emplace_back(fs::path(p).filename().string(), p);
    else if (!rc.val_root.empty())
        datasets.emplace_back("val", rc.val_root);
    else if (!rc.data_root.empty())
        datasets.emplace_back("train", rc.data_root);
    else
        throw InvalidConfig("no dataset: pass --data or set data.val_root");

    Model model = build_model(rc);
    apply_tuning_mode(model, rc.mode);  // for the params_trainable column
    const MetricReport report = run_eval(model, rc, datasets);

    const std::string out_dir = out.empty() ? rc.out_dir : out;
    fs::create_directories(out_dir);
    write_reports(report, out_dir, per_image);
    print_report(report);
    return 0;
}

int cmd_info(const CommonArgs& a) {
    RunConfig rc = load_run_config(a);
    Model model = inject_adapters<float>(rc.backbone, rc.plan, rc.train.seed);
    const std::int64_t total = count_params(model, false);
    const std::int64_t backbone = count_params_prefix(model, "backbone.");
    const std::int64_t spatial = count_params_prefix(model, "adapter.spatial.");
    const std::int64_t stereo = count_params_prefix(model, "adapter.stereo.");
    const std::int64_t adapters = count_params_prefix(model, "adapter.");
    apply_tuning_mode(model, rc.mode);
    const std::int64_t trainable = count_params(model, true);

    auto mm = [](std::int64_t n) { return static_cast<double>(n) / 1e6; };
    std::printf("total parameters:   %12lld  (%.2fM)\n", static_cast<long long>(total), mm(total));
    std::printf("backbone:           %12lld  (%.2fM)\n", static_cast<long long>(backbone),
                mm(backbone));
    std::printf("spatial adapters:   %12lld  (%.2fM)\n", static_cast<long long>(spatial),
                mm(spatial));
    std::printf("stereo adapters:    %12lld  (%.2fM)\n", static_cast<long long>(stereo),
                mm(stereo));
    std::printf("all adapters:       %12lld  (%.2fM)\n", static_cast<long long>(adapters),
                mm(adapters));
    std::printf("mode %s trainable:  %lld (%.1f%% of total)\n", tuning_mode_name(rc.mode),
                static_cast<long long>(trainable),
                total > 0 ? 100.0 * static_cast<double>(trainable) / static_cast<double>(total)
                          : 0.0);
    return 0;
}

int cmd_infer(const CommonArgs& a, const std::string& ckpt_path, const std::string& left,
              const std::string& right, const std::string& out, bool ensemble) {
    RunConfig rc = load_run_config(a);
    if (!ckpt_path.empty()) {
        if (!fs::exists(ckpt_path)) throw InvalidConfig("checkpoint does not exist: " + ckpt_path);
        rc.pretrained = ckpt_path;
    }
    ViewPair lr{read_png(left), read_png(right)};
    Model model = build_model(rc);
    const StereoForward fwd = make_forward(model);

    const auto t0 = std::chrono::steady_clock::now();
    const ViewPair sr = ensemble ? self_ensemble_forward(fwd, lr) : fwd(lr);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const std::string out_dir = out.empty() ? rc.out_dir : out;
    fs::create_directories(out_dir);
    write_png(sr.left, out_dir + "/sr_L.png");
    write_png(sr.right, out_dir + "/sr_R.png");
    std::printf("wrote %s/sr_L.png and sr_R.png (%dx%d), %.1f ms per pair\n", out_dir.c_str(),
                sr.left.w, sr.left.h, ms);
    return 0;
}

int cmd_datagen(const SynthConfig& cfg, const std::string& out) {
    if (out.empty()) throw InvalidConfig("--out is required");
    write_synthetic_dataset(cfg, out);
    std::printf("wrote %d synthetic stereo pairs under %s\n", cfg.count, out.c_str());
    return 0;
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"stereo super-resolution adapter toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&common](CLI::App* sub) {
        sub->add_option("config", common.config_path, "run config file")->required();
        sub->add_option("--seed", common.seed, "override train.seed");
        sub->add_flag("--deterministic", common.deterministic,
                      "force deterministic execution (always on; recorded in outputs)");
        sub->allow_extras();  // --section.key=value overrides
    };

    CLI::App* train = app.add_subcommand("train", "fine-tune on a stereo dataset");
    add_common(train);

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint on datasets");
    add_common(eval_cmd);
    std::string ckpt, out;
    std::vector<std::string> data_paths;
    bool per_image = false;
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint to evaluate");
    eval_cmd->add_option("--data", data_paths, "dataset root(s)");
    eval_cmd->add_option("--out", out, "report directory");
    eval_cmd->add_flag("--per-image", per_image, "dump per-image PSNR/SSIM rows");
    bool ensemble_flag = false;
    eval_cmd->add_flag("--ensemble", ensemble_flag, "enable flip/swap self-ensemble");

    CLI::App* info = app.add_subcommand("info", "print parameter budgets");
    add_common(info);

    CLI::App* infer = app.add_subcommand("infer", "super-resolve one LR pair");
    add_common(infer);
    std::string in_left, in_right, infer_ckpt, infer_out;
    bool infer_ensemble = false;
    infer->add_option("--ckpt", infer_ckpt, "checkpoint");
    infer->add_option("--left", in_left, "left LR image")->required();
    infer->add_option("--right", in_right, "right LR image")->required();
    infer->add_option("--out", infer_out, "output directory");
    infer->add_flag("--ensemble", infer_ensemble, "enable self-ensemble");

    CLI::App* datagen = app.add_subcommand("datagen", "write a synthetic stereo dataset");
    SynthConfig synth;
    std::string datagen_out;
    long datagen_seed = 0;
    datagen->add_option("--out", datagen_out, "output directory")->required();
    datagen->add_option("--count", synth.count, "number of pairs");
    datagen->add_option("--height", synth.height, "image height");
    datagen->add_option("--width", synth.width, "image width");
    datagen->add_option("--min-disparity", synth.min_disparity, "minimum disparity");
    datagen->add_option("--max-disparity", synth.max_disparity, "maximum disparity");
    datagen->add_option("--seed", datagen_seed, "generator seed");

    std::vector<char*> argv;
    std::vector<std::string> storage = args;
    storage.insert(storage.begin(), "steadapt");
    argv.reserve(storage.size());
    for (std::string& s : storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (train->parsed()) {
        common.overrides = train->remaining();
        return cmd_train(common);
    }
    if (eval_cmd->parsed()) {
        common.overrides = eval_cmd->remaining();
        if (ensemble_flag) common.overrides.push_back("--eval.ensemble=true");
        return cmd_eval(common, ckpt, data_paths, out, per_image);
    }
    if (info->parsed()) {
        common.overrides = info->remaining();
        return cmd_info(common);
    }
    if (infer->parsed()) {
        common.overrides = infer->remaining();
        return cmd_infer(common, infer_ckpt, in_left, in_right, infer_out, infer_ensemble);
    }
    if (datagen->parsed()) {
        synth.seed = static_cast<std::uint64_t>(datagen_seed);
        return cmd_datagen(synth, datagen_out);
    }
    return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const EmptyDataset& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DecodeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const PatchTooLarge& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        // config/shape/weights problems
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace steadapt
