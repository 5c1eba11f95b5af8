#include "eval/evaluate.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "core/error.hpp"

namespace steadapt {

namespace {

ViewPair vflip_pair(const ViewPair& p) { return {vflip(p.left), vflip(p.right)}; }
// Mirroring exchanges the epipolar geometry, so the views swap roles.
ViewPair hflip_swap_pair(const ViewPair& p) { return {hflip(p.right), hflip(p.left)}; }

Image crop_border(const Image& img, int border) {
    if (border <= 0) return img;
    if (2 * border >= img.h || 2 * border >= img.w)
        throw InvalidShape("boundary_crop leaves no pixels");
    return crop(img, border, border, img.h - 2 * border, img.w - 2 * border);
}

}  // namespace

ViewPair self_ensemble_forward(const StereoForward& forward, const ViewPair& lr) {
    // Transforms are involutions; the inverse is the transform itself.
    const std::vector<std::function<ViewPair(const ViewPair&)>> tf = {
        [](const ViewPair& p) { return p; },
        vflip_pair,
        hflip_swap_pair,
        [](const ViewPair& p) { return hflip_swap_pair(vflip_pair(p)); },
    };
    std::vector<double> acc_l, acc_r;
    int out_c = 0, out_h = 0, out_w = 0;
    for (const auto& t : tf) {
        const ViewPair sr = t(forward(t(lr)));
        if (acc_l.empty()) {
            out_c = sr.left.c;
            out_h = sr.left.h;
            out_w = sr.left.w;
            acc_l.assign(sr.left.v.size(), 0.0);
            acc_r.assign(sr.right.v.size(), 0.0);
        }
        for (size_t i = 0; i < acc_l.size(); ++i) acc_l[i] += sr.left.v[i];
        for (size_t i = 0; i < acc_r.size(); ++i) acc_r[i] += sr.right.v[i];
    }
    ViewPair out{Image(out_c, out_h, out_w), Image(out_c, out_h, out_w)};
    for (size_t i = 0; i < acc_l.size(); ++i) out.left.v[i] = static_cast<float>(acc_l[i] / 4.0);
    for (size_t i = 0; i < acc_r.size(); ++i) out.right.v[i] = static_cast<float>(acc_r[i] / 4.0);
    return out;
}

DatasetScore evaluate_dataset(const StereoForward& forward,
                              const std::vector<StereoSample>& samples,
                              const EvalProtocol& proto) {
    proto.validate();
    if (samples.empty()) throw EmptyDataset("evaluation dataset is empty");

    std::vector<const StereoSample*> ordered;
    ordered.reserve(samples.size());
    for (const auto& s : samples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const StereoSample* a, const StereoSample* b) { return a->id < b->id; });

    DatasetScore score;
    for (const StereoSample* s : ordered) {
        const ViewPair sr =
            proto.ensemble ? self_ensemble_forward(forward, s->lr) : forward(s->lr);
        const Image sl = crop_border(sr.left, proto.boundary_crop);
        const Image sr_r = crop_border(sr.right, proto.boundary_crop);
        const Image gl = crop_border(s->hr.left, proto.boundary_crop);
        const Image gr = crop_border(s->hr.right, proto.boundary_crop);
        PairScore ps;
        ps.id = s->id;
        if (proto.view_mode == ViewMode::left_only) {
            ps.psnr = psnr(sl, gl);
            ps.ssim = ssim(sl, gl);
        } else {
            ps.psnr = 0.5 * (psnr(sl, gl) + psnr(sr_r, gr));
            ps.ssim = 0.5 * (ssim(sl, gl) + ssim(sr_r, gr));
        }
        score.psnr += ps.psnr;
        score.ssim += ps.ssim;
        score.per_pair.push_back(std::move(ps));
        ++score.n_pairs;
    }
    score.psnr /= score.n_pairs;
    score.ssim /= score.n_pairs;
    return score;
}

void write_report_json(const MetricReport& report, const std::string& path) {
    nlohmann::json j;
    j["params_trainable"] = report.params_trainable;
    j["params_total"] = report.params_total;
    for (const auto& [name, ds] : report.datasets) {
        nlohmann::json d;
        d["psnr"] = ds.psnr;
        d["ssim"] = ds.ssim;
        d["n_pairs"] = ds.n_pairs;
        j["datasets"][name] = d;
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write report: " + path);
    f << j.dump(2) << "\n";
}

void write_report_csv(const MetricReport& report, const std::string& path, bool per_image) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write report: " + path);
    f << "dataset,pair,psnr,ssim,n_pairs\n";
    for (const auto& [name, ds] : report.datasets) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,,%.6f,%.6f,%d\n", name.c_str(), ds.psnr, ds.ssim,
                      ds.n_pairs);
        f << buf;
        if (per_image)
            for (const PairScore& ps : ds.per_pair) {
                std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,\n", name.c_str(), ps.id.c_str(),
                              ps.psnr, ps.ssim);
                f << buf;
            }
    }
}

}  // namespace steadapt
