#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "data/datapipe.hpp"
#include "eval/metrics.hpp"

namespace steadapt {

enum class ViewMode { left_only, mean_lr };

inline ViewMode view_mode_from(const std::string& s) {
    if (s == "left_only" || s == "left") return ViewMode::left_only;
    if (s == "mean_lr" || s == "mean") return ViewMode::mean_lr;
    throw InvalidConfig("unknown view mode '" + s + "'");
}

struct EvalProtocol {
    ViewMode view_mode = ViewMode::mean_lr;
    int boundary_crop = 0;  // pixels shaved from every border before scoring
    bool ensemble = false;

    void validate() const {
        if (boundary_crop < 0) throw InvalidConfig("eval.boundary_crop must be >= 0");
    }
};

struct PairScore {
    std::string id;
    double psnr = 0;
    double ssim = 0;
};

struct DatasetScore {
    double psnr = 0;
    double ssim = 0;
    int n_pairs = 0;
    std::vector<PairScore> per_pair;
};

struct MetricReport {
    std::map<std::string, DatasetScore> datasets;
    std::int64_t params_trainable = 0;
    std::int64_t params_total = 0;
};

// Any stereo super-resolver: LR pair in, SR pair out.
using StereoForward = std::function<ViewPair(const ViewPair&)>;

// Averages over the geometry-respecting transform group {identity, vertical
// flip, horizontal flip with view swap, both}, inverting each before the mean.
ViewPair self_ensemble_forward(const StereoForward& forward, const ViewPair& lr);

DatasetScore evaluate_dataset(const StereoForward& forward,
                              const std::vector<StereoSample>& samples,
                              const EvalProtocol& proto);

void write_report_json(const MetricReport& report, const std::string& path);
void write_report_csv(const MetricReport& report, const std::string& path,
                      bool per_image = false);

}  // namespace steadapt
