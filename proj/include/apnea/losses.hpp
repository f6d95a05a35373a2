#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "apnea/autograd.hpp"
#include "apnea/errors.hpp"
#include "apnea/rng.hpp"

namespace apnea::train {

enum class LossKind { bce, weighted_bce, focal };

LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct LossSpec {
    LossKind kind = LossKind::bce;
    double w_pos = 1.0;
    double w_neg = 1.0;
    double alpha = 0.25;  // focal balance
    double gamma = 2.0;   // focal exponent

    void validate() const;
};

namespace detail {
constexpr double kProbClamp = 1e-7;
}

// mean over N of -[y ln p + (1-y) ln(1-p)], probabilities clamped to
// [1e-7, 1-1e-7]
template <typename T>
ag::Var<T> bce_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y);

// mean over N of -[w_pos y ln p + w_neg (1-y) ln(1-p)]
template <typename T>
ag::Var<T> weighted_bce_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y,
                             T w_pos, T w_neg);

// mean over N of -alpha (1-p_t)^gamma ln(p_t), p_t = y p + (1-y)(1-p);
// optional per-class scales multiply each sample's term
template <typename T>
ag::Var<T> focal_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y, T alpha,
                      T gamma, T scale_pos = T{1}, T scale_neg = T{1});

// Dispatch on LossSpec; class_scale applies data-derived class weights on top
// (identity scales when class weighting is off).
template <typename T>
ag::Var<T> apply_loss(ag::Tape<T>* tape, const ag::Var<T>& p, const std::vector<T>& y,
                      const LossSpec& spec, std::pair<double, double> class_scale = {1.0, 1.0});

// w_c = (n_pos + n_neg) / (2 n_c), nudged by at most a few ulp so that
// w_pos * n_pos == w_neg * n_neg holds bitwise in double arithmetic.
std::pair<double, double> compute_class_weights(std::size_t n_pos, std::size_t n_neg);

// Every original index once plus uniform-with-replacement duplicates of the
// minority class until counts are equal, then shuffled.
std::vector<std::size_t> oversample(const std::vector<std::uint8_t>& labels, RngStream& rng);

}  // namespace apnea::train
