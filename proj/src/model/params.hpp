#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"

namespace steadapt {

enum class InitKind { zeros, ones, fan_in_uniform, normal };

struct InitSpec {
    InitKind kind = InitKind::zeros;
    double arg = 0;  // fan-in for fan_in_uniform, stddev for normal

    static InitSpec zeros() { return {InitKind::zeros, 0}; }
    static InitSpec ones() { return {InitKind::ones, 0}; }
    static InitSpec fan_in(int fan) { return {InitKind::fan_in_uniform, static_cast<double>(fan)}; }
    static InitSpec normal(double stddev) { return {InitKind::normal, stddev}; }
};

// Named parameter registry. Initial values depend only on (seed, name, shape),
// never on registration order, so two topologies sharing a name share weights.
template <class T>
class ParamStore {
public:
    struct Entry {
        ad::Var<T> var;
        bool trainable = true;
        InitSpec init;
    };

    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    ad::Var<T> create(const std::string& name, Shape shape, InitSpec init) {
        if (entries_.count(name)) throw InvalidConfig("duplicate parameter name: " + name);
        Tensor<T> t{std::move(shape)};
        fill_init(t, name, init);
        Entry e;
        e.var = ad::leaf(std::move(t), true);
        e.init = init;
        return entries_.emplace(name, std::move(e)).first->second.var;
    }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    const Entry& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw InvalidConfig("unknown parameter: " + name);
        return it->second;
    }

    Entry& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw InvalidConfig("unknown parameter: " + name);
        return it->second;
    }

    // Sorted by name (std::map order): deterministic everywhere downstream.
    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::map<std::string, Entry>& entries() { return entries_; }

    void reinit_prefix(const std::string& prefix) {
        for (auto& [name, e] : entries_)
            if (name.rfind(prefix, 0) == 0) fill_init(e.var->value, name, e.init);
    }

    std::int64_t count(bool trainable_only) const {
        std::int64_t n = 0;
        for (const auto& [name, e] : entries_)
            if (!trainable_only || e.trainable) n += e.var->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.var->clear_grad();
    }

private:
    void fill_init(Tensor<T>& t, const std::string& name, InitSpec init) {
        switch (init.kind) {
            case InitKind::zeros: t.fill(T(0)); break;
            case InitKind::ones: t.fill(T(1)); break;
            case InitKind::fan_in_uniform: {
                Rng rng(seed_, name);
                const double bound = 1.0 / std::sqrt(init.arg);
                for (std::int64_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<T>(rng.uniform(-bound, bound));
                break;
            }
            case InitKind::normal: {
                Rng rng(seed_, name);
                for (std::int64_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<T>(rng.normal(0.0, init.arg));
                break;
            }
        }
    }

    std::map<std::string, Entry> entries_;
    std::uint64_t seed_;
};

}  // namespace steadapt
