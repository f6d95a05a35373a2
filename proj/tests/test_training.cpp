#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "apnea/losses.hpp"
#include "apnea/optim.hpp"
#include "apnea/train.hpp"

using namespace apnea;
using train::LossKind;
using train::LossSpec;

namespace {

ag::Var<double> probs(const std::vector<double>& p, bool rg = false) {
    return ag::make_var(Tensor<double>({p.size()}, p), rg);
}

// tiny separable spectrogram set: class decides which half of the image is
// bright; mild per-sample jitter
dsp::SpectrogramCache separable_cache(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed,
                                      std::uint32_t side = 16) {
    RngStream rng(seed);
    dsp::SpectrogramCache cache;
    cache.n_mels = side;
    cache.n_frames = side;
    for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
        dsp::CacheEntry e;
        e.record_id = "synth";
        e.chunk_index = static_cast<std::uint32_t>(i);
        e.label = i < n_pos ? 1 : 0;
        e.values.resize(static_cast<std::size_t>(side) * side);
        for (std::uint32_t r = 0; r < side; ++r)
            for (std::uint32_t c = 0; c < side; ++c) {
                const bool bright = e.label ? r < side / 2 : r >= side / 2;
                const double v = (bright ? 0.8 : 0.2) + 0.1 * rng.uniform(-1.0, 1.0);
                e.values[r * side + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        cache.entries.push_back(std::move(e));
    }
    return cache;
}

model::ResNetConfig tiny_model_config(std::size_t side = 16) {
    model::ResNetConfig cfg;
    cfg.stem_filters = 8;
    cfg.stage_filters = {8, 16};
    cfg.stage_blocks = {1, 1};
    cfg.head_units = 16;
    cfg.dropout_rate = 0.0;
    cfg.input_h = side;
    cfg.input_w = side;
    return cfg;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("bce: anchor values") {
    CHECK(train::bce_loss<double>(nullptr, probs({0.5}), {1.0})->values[0] ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // perfect prediction is clamped, loss stays below 1e-6
    CHECK(train::bce_loss<double>(nullptr, probs({1.0}), {1.0})->values[0] < 1e-6);
    CHECK(train::bce_loss<double>(nullptr, probs({0.9, 0.1}), {1.0, 0.0})->values[0] ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-9));
    CHECK(train::bce_loss<double>(nullptr, probs({0.9, 0.1}), {1.0, 0.0})->values[0] ==
          doctest::Approx(0.10536).epsilon(1e-4));
}

TEST_CASE("weighted bce: anchor values and weight linearity") {
    CHECK(train::weighted_bce_loss<double>(nullptr, probs({0.5}), {1.0}, 2.0, 1.0)->values[0] ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    RngStream rng(5);
    std::vector<double> p(32), y(32);
    for (auto& v : p) v = rng.uniform(0.05, 0.95);
    for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const double base =
        train::weighted_bce_loss<double>(nullptr, probs(p), y, 1.3, 0.6)->values[0];
    const double doubled =
        train::weighted_bce_loss<double>(nullptr, probs(p), y, 2.6, 1.2)->values[0];
    CHECK(doubled == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("focal: anchor value and gamma monotonicity") {
    CHECK(train::focal_loss<double>(nullptr, probs({0.9}), {1.0}, 1.0, 2.0)->values[0] ==
          doctest::Approx(-0.01 * std::log(0.9)).epsilon(1e-9));
    CHECK(train::focal_loss<double>(nullptr, probs({0.9}), {1.0}, 1.0, 2.0)->values[0] ==
          doctest::Approx(0.0010536).epsilon(1e-3));
    double prev = 1e9;
    for (const double gamma : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
        const double v =
            train::focal_loss<double>(nullptr, probs({0.6}), {1.0}, 1.0, gamma)->values[0];
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("loss identities on random vectors, 10 seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(seed);
        std::vector<double> p(64), y(64);
        for (auto& v : p) v = rng.uniform(0.01, 0.99);
        for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        const double bce = train::bce_loss<double>(nullptr, probs(p), y)->values[0];
        const double w11 =
            train::weighted_bce_loss<double>(nullptr, probs(p), y, 1.0, 1.0)->values[0];
        const double focal00 =
            train::focal_loss<double>(nullptr, probs(p), y, 1.0, 0.0)->values[0];
        CHECK(std::abs(w11 - bce) <= 1e-12);
        CHECK(std::abs(focal00 - bce) <= 1e-9);
        CHECK(bce >= 0.0);
    }
}

TEST_CASE("losses are zero only at clamped-perfect predictions") {
    const std::vector<double> y{1.0, 0.0};
    CHECK(train::bce_loss<double>(nullptr, probs({1.0, 0.0}), y)->values[0] < 1e-6);
    CHECK(train::bce_loss<double>(nullptr, probs({0.99, 0.01}), y)->values[0] > 1e-3);
}

TEST_CASE("class weights: balanced and 1:9 cases") {
    const auto [w1, w2] = train::compute_class_weights(100, 100);
    CHECK(w1 == 1.0);
    CHECK(w2 == 1.0);
    const auto [wp, wn] = train::compute_class_weights(100, 900);
    CHECK(wp == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(wn == doctest::Approx(0.5556).epsilon(1e-3));
}

TEST_CASE("class weights: product identity holds bitwise over random counts") {
    RngStream rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        const auto n_pos = 1 + rng.below(1000000);
        const auto n_neg = 1 + rng.below(1000000);
        const auto [wp, wn] = train::compute_class_weights(n_pos, n_neg);
        CHECK(wp * static_cast<double>(n_pos) == wn * static_cast<double>(n_neg));
        // and the weights stay within a hair of the defining formula
        const double half = static_cast<double>(n_pos + n_neg) / 2.0;
        CHECK(wp == doctest::Approx(half / static_cast<double>(n_pos)).epsilon(1e-12));
        CHECK(wn == doctest::Approx(half / static_cast<double>(n_neg)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(train::compute_class_weights(0, 5), DataError);
}

TEST_CASE("oversample: 3 positives / 10 negatives equalizes at 10 per class") {
    std::vector<std::uint8_t> labels(13, 0);
    labels[0] = labels[5] = labels[7] = 1;
    RngStream rng(1);
    const auto idx = train::oversample(labels, rng);
    CHECK(idx.size() == 20);
    std::size_t pos = 0;
    for (const auto i : idx) pos += labels[i];
    CHECK(pos == 10);
    // every original index appears at least once
    std::set<std::size_t> seen(idx.begin(), idx.end());
    CHECK(seen.size() == 13);
}

TEST_CASE("oversample: balanced input is a permutation") {
    std::vector<std::uint8_t> labels{1, 0, 1, 0};
    RngStream rng(2);
    auto idx = train::oversample(labels, rng);
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("oversample: single-class input is an error") {
    RngStream rng(3);
    CHECK_THROWS_AS(train::oversample({1, 1, 1}, rng), DataError);
}

TEST_CASE("adam: zero gradient from zero state is a fixed point") {
    auto p = ag::make_var(Tensor<float>({3}, {1.0f, -2.0f, 0.5f}), true);
    train::AdamState<float> state;
    train::adam_step<float>({p}, state, 0.01f);
    CHECK(p->values == std::vector<float>{1.0f, -2.0f, 0.5f});
}

TEST_CASE("adam: first step moves each coordinate by about lr in the gradient direction") {
    auto p = ag::make_var(Tensor<double>({2}, {1.0, 1.0}), true);
    p->grad = {0.37, -2.2};
    train::AdamState<double> state;
    train::adam_step<double>({p}, state, 0.01);
    CHECK(p->values[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p->values[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
}

TEST_CASE("adam: two steps on a quadratic match a hand-computed trace") {
    // f(x) = x^2 / 2, gradient x, start at x = 1, lr = 0.1
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 0.1;
    double x = 1.0, m = 0.0, v = 0.0;
    std::vector<double> expected;
    for (int t = 1; t <= 2; ++t) {
        const double g = x;
        m = beta1 * m + (1 - beta1) * g;
        v = beta2 * v + (1 - beta2) * g * g;
        const double mh = m / (1 - std::pow(beta1, t));
        const double vh = v / (1 - std::pow(beta2, t));
        x -= lr * mh / (std::sqrt(vh) + eps);
        expected.push_back(x);
    }

    auto p = ag::make_var(Tensor<double>({1}, {1.0}), true);
    train::AdamState<double> state;
    for (int t = 0; t < 2; ++t) {
        p->grad = {p->values[0]};
        train::adam_step<double>({p}, state, lr);
        CHECK(p->values[0] == doctest::Approx(expected[t]).epsilon(1e-12));
    }
}

TEST_CASE("plateau: counter trace and floor") {
    train::PlateauConfig cfg;
    cfg.patience = 2;
    cfg.factor = 0.5;
    cfg.min_lr = 1e-5;
    train::PlateauState state;
    double lr = 1e-3;
    lr = train::reduce_lr_on_plateau(state, 0.5, lr, cfg);
    CHECK(lr == 1e-3);
    lr = train::reduce_lr_on_plateau(state, 0.5, lr, cfg);
    CHECK(lr == 1e-3);  // one stale epoch
    lr = train::reduce_lr_on_plateau(state, 0.5, lr, cfg);
    CHECK(lr == 5e-4);  // fires after the third flat epoch

    // strictly improving metric never reduces
    train::PlateauState improving;
    double lr2 = 1e-3;
    for (int e = 0; e < 10; ++e) {
        lr2 = train::reduce_lr_on_plateau(improving, 0.1 * e, lr2, cfg);
        CHECK(lr2 == 1e-3);
    }

    // clamped at min_lr
    train::PlateauState floor_state;
    double lr3 = 1.2e-5;
    for (int e = 0; e < 10; ++e) lr3 = train::reduce_lr_on_plateau(floor_state, 0.5, lr3, cfg);
    CHECK(lr3 == 1e-5);
}

TEST_CASE("early stopping: counter traces") {
    train::EarlyStopConfig cfg;
    cfg.patience = 3;
    cfg.min_delta = 1e-4;
    train::EarlyStopState state;
    const std::vector<double> metric{0.5, 0.7, 0.69, 0.69, 0.69};
    bool stopped = false;
    int stop_epoch = 0;
    for (std::size_t e = 0; e < metric.size(); ++e) {
        if (train::early_stopping_update(state, metric[e], static_cast<int>(e + 1), cfg)) {
            stopped = true;
            stop_epoch = static_cast<int>(e + 1);
            break;
        }
    }
    CHECK(stopped);
    CHECK(stop_epoch == 5);
    CHECK(state.best_epoch == 2);

    // monotone improvement never stops
    train::EarlyStopState improving;
    for (int e = 1; e <= 80; ++e)
        CHECK_FALSE(train::early_stopping_update(improving, 0.01 * e, e, cfg));
    CHECK(improving.best_epoch == 80);

    // min_delta larger than every improvement
    train::EarlyStopConfig coarse;
    coarse.patience = 3;
    coarse.min_delta = 10.0;
    train::EarlyStopState state2;
    int stop2 = 0;
    for (int e = 1; e <= 20; ++e)
        if (train::early_stopping_update(state2, 0.1 * e, e, coarse)) {
            stop2 = e;
            break;
        }
    CHECK(stop2 == 1 + coarse.patience);
    CHECK(state2.best_epoch == 1);
}

TEST_CASE("train: separable data reaches high validation recall quickly") {
    const auto cache = separable_cache(60, 140, 900);
    RngStream init(41);
    auto net = model::build_model(tiny_model_config(), init);

    train::TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 32;
    cfg.seed = 17;
    cfg.validation_fraction = 0.2;
    const auto result = train::train(cache, net, cfg);
    REQUIRE_FALSE(result.history.empty());
    double best_recall = 0.0;
    for (const auto& log : result.history) best_recall = std::max(best_recall, log.val_recall);
    CHECK(best_recall >= 0.95);
}

TEST_CASE("train: same seed twice is bit-identical") {
    const auto cache = separable_cache(20, 30, 901);
    auto run = [&]() {
        RngStream init(42);
        auto net = model::build_model(tiny_model_config(), init);
        train::TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch_size = 16;
        cfg.seed = 5;
        cfg.validation_fraction = 0.15;
        const auto result = train::train(cache, net, cfg);
        std::vector<float> flat;
        for (const auto& [name, p] : net.named_parameters())
            flat.insert(flat.end(), p->values.begin(), p->values.end());
        std::vector<double> history;
        for (const auto& log : result.history) {
            history.push_back(log.train_loss);
            history.push_back(log.val_pr_auc);
            history.push_back(log.val_recall);
            history.push_back(log.lr);
        }
        return std::make_pair(flat, history);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);    // weights bit-identical
    CHECK(a.second == b.second);  // history identical except wall time
}

TEST_CASE("train: overfits a tiny dataset to full training accuracy") {
    const auto cache = separable_cache(4, 4, 902);
    RngStream init(43);
    auto cfg_model = tiny_model_config();
    auto net = model::build_model(cfg_model, init);

    train::TrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 4;
    cfg.seed = 9;
    cfg.validation_fraction = 0.25;
    cfg.early_stopping = false;
    cfg.plateau = false;
    train::train(cache, net, cfg);

    const auto scores = train::predict(cache, net, 8);
    const auto labels = train::labels_of(cache);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        correct += (scores[i] >= 0.5) == (labels[i] != 0);
    CHECK(correct == scores.size());
}

TEST_CASE("train: validation indices never enter the training pool") {
    const auto cache = separable_cache(25, 75, 903);
    RngStream init(44);
    auto net = model::build_model(tiny_model_config(), init);
    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 23;
    const auto result = train::train(cache, net, cfg);
    const std::set<std::size_t> val(result.val_indices.begin(), result.val_indices.end());
    CHECK_FALSE(val.empty());
    for (const auto i : result.train_pool) CHECK(val.count(i) == 0);
}

TEST_CASE("train: plain-BCE degenerate configuration") {
    const auto cache = separable_cache(30, 40, 904);
    RngStream init(45);
    auto net = model::build_model(tiny_model_config(), init);
    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 31;
    cfg.oversample = false;
    cfg.class_weighting = false;
    cfg.loss.kind = LossKind::bce;
    const auto result = train::train(cache, net, cfg);
    CHECK(result.w_pos == 1.0);
    CHECK(result.w_neg == 1.0);
    // no duplicates: the pool is exactly the non-validation index set
    std::set<std::size_t> unique(result.train_pool.begin(), result.train_pool.end());
    CHECK(unique.size() == result.train_pool.size());
    CHECK(result.train_pool.size() + result.val_indices.size() == cache.entries.size());
}

TEST_CASE("train: single-class dataset is an error") {
    auto cache = separable_cache(5, 5, 905);
    for (auto& e : cache.entries) e.label = 1;
    RngStream init(46);
    auto net = model::build_model(tiny_model_config(), init);
    train::TrainConfig cfg;
    CHECK_THROWS_AS(train::train(cache, net, cfg), DataError);
}

TEST_CASE("loss spec invariants") {
    LossSpec spec;
    spec.kind = LossKind::bce;
    spec.w_pos = 2.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = {};
    spec.alpha = 1.5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = {};
    spec.gamma = -1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

}  // TEST_SUITE
