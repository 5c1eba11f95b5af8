#include "train/trainer.hpp"

namespace steadapt {

double lr_at(const TrainConfig& cfg, long iter) {
    if (cfg.schedule == TrainConfig::Sched::constant) return cfg.lr;
    constexpr double lr_min = 1e-7;
    if (cfg.iterations <= 1) return iter == 0 ? cfg.lr : lr_min;
    const double t = static_cast<double>(iter) / static_cast<double>(cfg.iterations - 1);
    return lr_min + (cfg.lr - lr_min) * 0.5 * (1.0 + std::cos(3.141592653589793 * t));
}

}  // namespace steadapt
