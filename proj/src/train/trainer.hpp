#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "data/datapipe.hpp"
#include "surgery/surgery.hpp"

namespace steadapt {

struct TrainConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.0;
    double eps = 1e-8;
    long iterations = 2000;  // paper scale runs 200000
    int batch = 3;
    enum class Loss { l1 } loss = Loss::l1;
    enum class Sched { cosine, constant } schedule = Sched::cosine;
    std::uint64_t seed = 0;
    long log_every = 50;
    long ckpt_every = 0;  // 0: final checkpoint only
    double grad_clip = 0.0;

    void validate() const {
        if (lr <= 0) throw InvalidConfig("train.lr must be positive");
        if (iterations < 0) throw InvalidConfig("train.iterations must be non-negative");
        if (batch <= 0) throw InvalidConfig("train.batch must be positive");
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw InvalidConfig("train.betas must lie in [0,1)");
    }
};

// Cosine decay from cfg.lr down to 1e-7 across [0, iterations-1].
double lr_at(const TrainConfig& cfg, long iter);

struct LogRow {
    long iter;
    double loss;
    double lr;
    double seconds;
};

struct FitResult {
    std::vector<LogRow> log;
    double final_loss = 0;
};

// Adaptive moments with decoupled weight decay, restricted to a name set.
template <class T>
class AdamW {
public:
    explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

    void step(ParamStore<T>& params, const std::vector<std::string>& trainable, double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (const std::string& name : trainable) {
            auto& entry = params.at(name);
            Tensor<T>& theta = entry.var->value;
            if (!entry.var->grad.defined()) entry.var->ensure_grad();
            const Tensor<T>& g = entry.var->grad;
            State& st = state_[name];
            if (!st.m.defined()) {
                st.m = Tensor<T>::zeros(theta.shape());
                st.v = Tensor<T>::zeros(theta.shape());
            }
            for (std::int64_t i = 0; i < theta.numel(); ++i) {
                const double gi = static_cast<double>(g[i]);
                const double m = cfg_.beta1 * static_cast<double>(st.m[i]) + (1 - cfg_.beta1) * gi;
                const double v =
                    cfg_.beta2 * static_cast<double>(st.v[i]) + (1 - cfg_.beta2) * gi * gi;
                st.m[i] = static_cast<T>(m);
                st.v[i] = static_cast<T>(v);
                const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps) +
                                      cfg_.weight_decay * static_cast<double>(theta[i]);
                theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * update);
            }
        }
    }

private:
    struct State {
        Tensor<T> m, v;
    };
    TrainConfig cfg_;
    std::map<std::string, State> state_;
    long t_ = 0;
};

// Mean absolute error over all elements of both views jointly.
template <class T>
ad::Var<T> l1_loss_pair(const ad::Var<T>& pred_l, const ad::Var<T>& target_l,
                        const ad::Var<T>& pred_r, const ad::Var<T>& target_r) {
    ad::Var<T> sl = ad::l1_sum(pred_l, target_l);
    ad::Var<T> sr = ad::l1_sum(pred_r, target_r);
    const double n =
        static_cast<double>(pred_l->value.numel()) + static_cast<double>(pred_r->value.numel());
    return ad::combine<T>({sl, sr}, {1.0 / n, 1.0 / n});
}

template <class T>
double l1_loss_value(const Tensor<T>& pred_l, const Tensor<T>& target_l, const Tensor<T>& pred_r,
                     const Tensor<T>& target_r) {
    ad::NoGradGuard ng;
    return static_cast<double>(l1_loss_pair(ad::constant(pred_l), ad::constant(target_l),
                                            ad::constant(pred_r), ad::constant(target_r))
                                   ->value[0]);
}

template <class T>
Tensor<T> to_model_dtype(const Tensor<float>& t) {
    if constexpr (std::is_same_v<T, float>) return t;
    else return t.template cast<T>();
}

// One optimizer step on a batch; gradients flow only into `trainable`.
template <class T>
double train_step(StereoModel<T>& model, const Batch& batch, AdamW<T>& opt,
                  const std::vector<std::string>& trainable, double lr, const TrainConfig& cfg,
                  long iter) {
    model.params().zero_grads();
    auto [sr_l, sr_r] = model.forward_pair(ad::constant(to_model_dtype<T>(batch.lr_left)),
                                           ad::constant(to_model_dtype<T>(batch.lr_right)));
    ad::Var<T> loss =
        l1_loss_pair(sr_l, ad::constant(to_model_dtype<T>(batch.hr_left)), sr_r,
                     ad::constant(to_model_dtype<T>(batch.hr_right)));
    const double lv = static_cast<double>(loss->value[0]);
    if (!std::isfinite(lv)) throw DivergenceError("training loss is not finite", iter);
    if (!trainable.empty()) {
        ad::backward(loss);
        if (cfg.grad_clip > 0) {
            double sq = 0;
            for (const std::string& n : trainable) {
                const auto& g = model.params().at(n).var->grad;
                if (g.defined())
                    for (std::int64_t i = 0; i < g.numel(); ++i)
                        sq += static_cast<double>(g[i]) * static_cast<double>(g[i]);
            }
            const double norm = std::sqrt(sq);
            if (norm > cfg.grad_clip) {
                const T f = static_cast<T>(cfg.grad_clip / norm);
                for (const std::string& n : trainable) {
                    auto& g = model.params().at(n).var->grad;
                    if (g.defined()) kernels::K<T>().scale(f, g.data(), g.numel());
                }
            }
        }
        opt.step(model.params(), trainable, lr);
    }
    return lv;
}

using EvalHook = std::function<void(long iter)>;

// Full fine-tuning loop. Applies the mode, runs cfg.iterations steps, logs
// CSV rows, writes periodic and final checkpoints under out_dir (when given).
template <class T>
FitResult fit(StereoModel<T>& model, BatchSampler& data, const TrainConfig& cfg, TuningMode mode,
              const std::string& out_dir = "", const EvalHook& eval_hook = nullptr,
              long eval_every = 0) {
    cfg.validate();
    const std::vector<std::string> trainable = apply_tuning_mode(model, mode);
    AdamW<T> opt(cfg);
    FitResult res;
    std::ofstream log;
    if (!out_dir.empty()) {
        log.open(out_dir + "/train_log.csv", std::ios::trunc);
        if (!log) throw IoError("cannot open training log in " + out_dir);
        log << "iter,loss,lr,seconds\n";
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (long it = 0; it < cfg.iterations; ++it) {
        const double lr = lr_at(cfg, it);
        const Batch batch = data.next();
        const double loss = train_step(model, batch, opt, trainable, lr, cfg, it);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back({it, loss, lr, secs});
        res.final_loss = loss;
        if (log) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.3f\n", it, loss, lr, secs);
            log << buf;
        }
        if (eval_hook && eval_every > 0 && (it + 1) % eval_every == 0) eval_hook(it);
        if (!out_dir.empty() && cfg.ckpt_every > 0 && (it + 1) % cfg.ckpt_every == 0)
            save_checkpoint(model, out_dir + "/model_iter" + std::to_string(it + 1) + ".ckpt");
    }
    if (!out_dir.empty()) save_checkpoint(model, out_dir + "/model.ckpt");
    return res;
}

}  // namespace steadapt
