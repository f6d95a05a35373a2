#include "apnea/losses.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace apnea::train {

LossKind loss_kind_from_string(const std::string& name) {
    if (name == "bce") return LossKind::bce;
    if (name == "weighted_bce") return LossKind::weighted_bce;
    if (name == "focal") return LossKind::focal;
    throw ConfigError("unknown loss '" + name + "' (expected bce, weighted_bce or focal)");
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::bce: return "bce";
        case LossKind::weighted_bce: return "weighted_bce";
        case LossKind::focal: return "focal";
    }
    return "?";
}

void LossSpec::validate() const {
    if (kind == LossKind::bce && (w_pos != 1.0 || w_neg != 1.0))
        throw ConfigError("loss: bce requires w_pos = w_neg = 1");
    if (w_pos <= 0.0 || w_neg <= 0.0) throw ConfigError("loss: class weights must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("loss: alpha must be in (0, 1]");
    if (gamma < 0.0) throw ConfigError("loss: gamma must be non-negative");
}

namespace {

template <typename T>
void check_lengths(const ag::Var<T>& p, const std::vector<T>& y) {
    if (p->numel() != y.size()) throw ConfigError("loss: probability/label length mismatch");
    if (y.empty()) throw ConfigError("loss: empty batch");
}

template <typename T>
T clamp_prob(T p) {
    const T lo = static_cast<T>(detail::kProbClamp);
    return std::clamp(p, lo, T{1} - lo);
}

}  // namespace

template <typename T>
ag::Var<T> weighted_bce_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y,
                             T w_pos, T w_neg) {
    check_lengths(p, y);
    const std::size_t n = y.size();
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{1});
    T acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const T pc = clamp_prob(p->values[i]);
        acc += y[i] > T{0.5} ? -w_pos * std::log(pc) : -w_neg * std::log(T{1} - pc);
    }
    out->values[0] = acc / static_cast<T>(n);

    out->set_requires_grad(p->requires_grad);
    if (out->requires_grad && tape) {
        auto labels = std::make_shared<std::vector<T>>(y);
        tape->record([p, out, labels, w_pos, w_neg, n]() {
            ag::detail::ensure_grad(p);
            const T g = out->grad[0] / static_cast<T>(n);
            const T lo = static_cast<T>(detail::kProbClamp);
            for (std::size_t i = 0; i < n; ++i) {
                const T pv = p->values[i];
                if (pv <= lo || pv >= T{1} - lo) continue;  // clamped: zero slope
                p->grad[i] +=
                    g * ((*labels)[i] > T{0.5} ? -w_pos / pv : w_neg / (T{1} - pv));
            }
        });
    }
    return out;
}

template <typename T>
ag::Var<T> bce_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y) {
    return weighted_bce_loss(tape, p, y, T{1}, T{1});
}

template <typename T>
ag::Var<T> focal_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y, T alpha,
                      T gamma, T scale_pos, T scale_neg) {
    check_lengths(p, y);
    const std::size_t n = y.size();
    auto out = std::make_shared<Tensor<T>>(std::vector<std::size_t>{1});
    T acc{};
    for (std::size_t i = 0; i < n; ++i) {
        const T pc = clamp_prob(p->values[i]);
        const bool pos = y[i] > T{0.5};
        const T pt = pos ? pc : T{1} - pc;
        const T scale = pos ? scale_pos : scale_neg;
        acc += -scale * alpha * std::pow(T{1} - pt, gamma) * std::log(pt);
    }
    out->values[0] = acc / static_cast<T>(n);

    out->set_requires_grad(p->requires_grad);
    if (out->requires_grad && tape) {
        auto labels = std::make_shared<std::vector<T>>(y);
        tape->record([p, out, labels, alpha, gamma, scale_pos, scale_neg, n]() {
            ag::detail::ensure_grad(p);
            const T g = out->grad[0] / static_cast<T>(n);
            const T lo = static_cast<T>(detail::kProbClamp);
            for (std::size_t i = 0; i < n; ++i) {
                const T pv = p->values[i];
                if (pv <= lo || pv >= T{1} - lo) continue;
                const bool pos = (*labels)[i] > T{0.5};
                const T pt = pos ? pv : T{1} - pv;
                const T scale = pos ? scale_pos : scale_neg;
                // d/dpt of (1-pt)^gamma ln(pt)
                const T powg = std::pow(T{1} - pt, gamma);
                const T d_pt =
                    gamma > T{0}
                        ? -gamma * std::pow(T{1} - pt, gamma - T{1}) * std::log(pt) + powg / pt
                        : powg / pt;
                const T dloss_dpt = -scale * alpha * d_pt;
                p->grad[i] += g * (pos ? dloss_dpt : -dloss_dpt);
            }
        });
    }
    return out;
}

template <typename T>
ag::Var<T> apply_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y,
                      const LossSpec& spec, std::pair<double, double> class_scale) {
    spec.validate();
    const T sp = static_cast<T>(class_scale.first);
    const T sn = static_cast<T>(class_scale.second);
    switch (spec.kind) {
        case LossKind::bce:
            return weighted_bce_loss(tape, p, y, sp, sn);
        case LossKind::weighted_bce:
            return weighted_bce_loss(tape, p, y, static_cast<T>(spec.w_pos) * sp,
                                     static_cast<T>(spec.w_neg) * sn);
        case LossKind::focal:
            return focal_loss(tape, p, y, static_cast<T>(spec.alpha),
                              static_cast<T>(spec.gamma), sp, sn);
    }
    throw ConfigError("loss: unknown kind");
}

std::pair<double, double> compute_class_weights(std::size_t n_pos, std::size_t n_neg) {
    if (n_pos == 0 || n_neg == 0)
        throw DataError("compute_class_weights: both classes must be present");
    const double half_total = static_cast<double>(n_pos + n_neg) * 0.5;
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);

    // The quotients round, so w_pos*n_pos and w_neg*n_neg can land an ulp
    // apart. Search the ulp neighborhoods of both quotients for a common
    // product value and return that pair, keeping the identity bitwise exact.
    auto products = [](double w, double count) {
        std::vector<std::pair<double, double>> out;  // (product, weight)
        double lo = w, hi = w;
        out.emplace_back(w * count, w);
        for (int k = 0; k < 16; ++k) {
            lo = std::nextafter(lo, 0.0);
            hi = std::nextafter(hi, 2.0 * hi);
            out.emplace_back(lo * count, lo);
            out.emplace_back(hi * count, hi);
        }
        return out;
    };
    const auto pos_cand = products(half_total / np, np);
    const auto neg_cand = products(half_total / nn, nn);

    double best_gap = -1.0;
    std::pair<double, double> best{pos_cand[0].second, neg_cand[0].second};
    for (const auto& [prod_p, wp] : pos_cand) {
        for (const auto& [prod_n, wn] : neg_cand) {
            if (prod_p == prod_n) {
                const double gap = std::abs(prod_p - half_total);
                if (best_gap < 0.0 || gap < best_gap) {
                    best_gap = gap;
                    best = {wp, wn};
                }
            }
        }
    }
    if (best_gap < 0.0)
        throw ArtifactError("compute_class_weights: no exactly-consistent weight pair found");
    return best;
}

std::vector<std::size_t> oversample(const std::vector<std::uint8_t>& labels, RngStream& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty())
        throw DataError("oversample: both classes must be present");

    std::vector<std::size_t> indices;
    indices.reserve(2 * std::max(pos.size(), neg.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) indices.push_back(i);

    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit =
        std::max(pos.size(), neg.size()) - std::min(pos.size(), neg.size());
    for (std::size_t i = 0; i < deficit; ++i)
        indices.push_back(minority[rng.below(minority.size())]);

    rng.shuffle(indices);
    return indices;
}

#define APNEA_INSTANTIATE_LOSSES(T)                                                            \
    template ag::Var<T> bce_loss<T>(ag::Tape<T>*, const ag::Var<T>&, const std::vector<T>&);   \
    template ag::Var<T> weighted_bce_loss<T>(ag::Tape<T>*, const ag::Var<T>&,                  \
                                             const std::vector<T>&, T, T);                     \
    template ag::Var<T> focal_loss<T>(ag::Tape<T>*, const ag::Var<T>&, const std::vector<T>&, \
                                      T, T, T, T);                                             \
    template ag::Var<T> apply_loss<T>(ag::Tape<T>*, const ag::Var<T>&, const std::vector<T>&, \
                                      const LossSpec&, std::pair<double, double>);

APNEA_INSTANTIATE_LOSSES(float)
APNEA_INSTANTIATE_LOSSES(double)

#undef APNEA_INSTANTIATE_LOSSES

}  // namespace apnea::train
