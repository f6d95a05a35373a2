#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "apnea/autograd.hpp"
#include "apnea/errors.hpp"

namespace apnea::train {

// Adam with bias correction; moments are kept per parameter in registration
// order.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::int64_t t = 0;
    T beta1 = static_cast<T>(0.9);
    T beta2 = static_cast<T>(0.999);
    T eps = static_cast<T>(1e-8);
};

template <typename T>
void adam_step(const std::vector<ag::Var<T>>& params, AdamState<T>& state, T lr) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->numel(), T{});
            state.v[i].assign(params[i]->numel(), T{});
        }
    }
    if (state.m.size() != params.size())
        throw ConfigError("adam_step: state/parameter count mismatch");

    state.t += 1;
    const T bc1 = T{1} - std::pow(state.beta1, static_cast<T>(state.t));
    const T bc2 = T{1} - std::pow(state.beta2, static_cast<T>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        if (p.grad.size() != p.values.size())
            throw ConfigError("adam_step: parameter without gradient");
        if (state.m[i].size() != p.values.size())
            throw ConfigError("adam_step: moment shape mismatch");
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.values.size(); ++j) {
            const T g = p.grad[j];
            m[j] = state.beta1 * m[j] + (T{1} - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (T{1} - state.beta2) * g * g;
            const T m_hat = m[j] / bc1;
            const T v_hat = v[j] / bc2;
            p.values[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

// Both monitors treat the metric as higher-is-better (validation PR-AUC) and
// count epochs without an improvement greater than min_delta.

struct PlateauConfig {
    double factor = 0.5;
    int patience = 3;
    double min_delta = 1e-4;
    double min_lr = 1e-5;
};

struct PlateauState {
    bool has_best = false;
    double best = 0.0;
    int stale = 0;
};

// Returns the learning rate to use from the next epoch on.
inline double reduce_lr_on_plateau(PlateauState& state, double metric, double lr,
                                   const PlateauConfig& cfg) {
    if (!(cfg.factor > 0.0 && cfg.factor < 1.0))
        throw ConfigError("plateau: factor must be in (0, 1)");
    if (!state.has_best || metric > state.best + cfg.min_delta) {
        state.has_best = true;
        state.best = metric;
        state.stale = 0;
        return lr;
    }
    if (++state.stale >= cfg.patience) {
        state.stale = 0;
        return std::max(lr * cfg.factor, cfg.min_lr);
    }
    return lr;
}

struct EarlyStopConfig {
    int patience = 8;
    double min_delta = 1e-4;
};

struct EarlyStopState {
    bool has_best = false;
    double best = 0.0;
    int best_epoch = 0;
    int stale = 0;
};

// epoch is 1-based; returns true when training should stop, with
// state.best_epoch naming the weights to restore.
inline bool early_stopping_update(EarlyStopState& state, double metric, int epoch,
                                  const EarlyStopConfig& cfg) {
    if (cfg.patience < 1) throw ConfigError("early stopping: patience must be >= 1");
    if (!state.has_best || metric > state.best + cfg.min_delta) {
        state.has_best = true;
        state.best = metric;
        state.best_epoch = epoch;
        state.stale = 0;
        return false;
    }
    return ++state.stale >= cfg.patience;
}

}  // namespace apnea::train
