#include "apnea/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "apnea/errors.hpp"
#include "apnea/metrics.hpp"

namespace apnea::train {

namespace {

Tensor<float> make_batch(const dsp::SpectrogramCache& data, std::span<const std::size_t> indices,
                         std::vector<float>& labels_out) {
    const std::size_t n = indices.size();
    const std::size_t hw = static_cast<std::size_t>(data.n_mels) * data.n_frames;
    Tensor<float> batch({n, 1, data.n_mels, data.n_frames});
    labels_out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = data.entries[indices[i]];
        std::copy(e.values.begin(), e.values.end(), batch.values.begin() + i * hw);
        labels_out[i] = e.label ? 1.0f : 0.0f;
    }
    return batch;
}

std::vector<double> predict_indices(const dsp::SpectrogramCache& data,
                                    std::span<const std::size_t> indices, model::ResNetModel& net,
                                    std::size_t batch_size) {
    std::vector<double> scores;
    scores.reserve(indices.size());
    std::vector<float> labels_unused;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        const auto batch = make_batch(data, indices.subspan(start, end - start), labels_unused);
        const auto probs = net.forward(batch, false, nullptr, nullptr);
        for (const float p : probs->values) scores.push_back(static_cast<double>(p));
    }
    return scores;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("train: validation_fraction must be in (0, 1)");
    loss.validate();
}

std::vector<std::uint8_t> labels_of(const dsp::SpectrogramCache& dataset) {
    std::vector<std::uint8_t> labels(dataset.entries.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = dataset.entries[i].label ? 1 : 0;
    return labels;
}

std::vector<double> predict(const dsp::SpectrogramCache& dataset, model::ResNetModel& net,
                            std::size_t batch_size) {
    std::vector<std::size_t> all(dataset.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return predict_indices(dataset, all, net, batch_size);
}

TrainResult train(const dsp::SpectrogramCache& dataset, model::ResNetModel& net,
                  const TrainConfig& config) {
    config.validate();
    const auto labels = labels_of(dataset);

    // stratified validation split, held out before any balancing
    std::vector<std::size_t> pos_idx, neg_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos_idx : neg_idx).push_back(i);
    if (pos_idx.empty() || neg_idx.empty())
        throw DataError("train: dataset must contain both classes");

    RngStream split_rng(derive_seed(config.seed, "valsplit"));
    split_rng.shuffle(pos_idx);
    split_rng.shuffle(neg_idx);

    auto take_val = [&](std::vector<std::size_t>& from, std::vector<std::size_t>& val) {
        const auto want = static_cast<std::size_t>(
            std::floor(config.validation_fraction * static_cast<double>(from.size())));
        const std::size_t n_val = std::max<std::size_t>(1, want);
        if (n_val >= from.size())
            throw DataError("train: validation split would leave an empty training class");
        val.insert(val.end(), from.end() - static_cast<std::ptrdiff_t>(n_val), from.end());
        from.resize(from.size() - n_val);
    };
    std::vector<std::size_t> val_idx;
    take_val(pos_idx, val_idx);
    take_val(neg_idx, val_idx);
    std::sort(val_idx.begin(), val_idx.end());

    TrainResult result;
    result.train_pos = pos_idx.size();
    result.train_neg = neg_idx.size();

    std::pair<double, double> class_scale{1.0, 1.0};
    if (config.class_weighting)
        class_scale = compute_class_weights(result.train_pos, result.train_neg);
    result.w_pos = class_scale.first;
    result.w_neg = class_scale.second;

    // training index pool: oversampled once, then reshuffled per epoch
    std::vector<std::size_t> pool;
    pool.reserve(pos_idx.size() + neg_idx.size());
    pool.insert(pool.end(), pos_idx.begin(), pos_idx.end());
    pool.insert(pool.end(), neg_idx.begin(), neg_idx.end());
    std::sort(pool.begin(), pool.end());
    if (config.oversample) {
        std::vector<std::uint8_t> pool_labels(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool_labels[i] = labels[pool[i]];
        RngStream os_rng(derive_seed(config.seed, "oversample"));
        const auto resampled = oversample(pool_labels, os_rng);
        std::vector<std::size_t> expanded;
        expanded.reserve(resampled.size());
        for (const auto j : resampled) expanded.push_back(pool[j]);
        pool = std::move(expanded);
    }

    result.val_indices = val_idx;
    result.train_pool = pool;

    RngStream shuffle_rng(derive_seed(config.seed, "shuffle"));
    RngStream dropout_rng(derive_seed(config.seed, "dropout"));

    std::vector<ag::Var<float>> params;
    for (const auto& [name, p] : net.named_parameters()) params.push_back(p);
    AdamState<float> adam;

    double lr = config.learning_rate;
    PlateauState plateau_state;
    EarlyStopState stop_state;
    model::ResNetModel::Snapshot best_snapshot = net.snapshot();
    int best_epoch = 1;

    const auto val_labels = [&]() {
        std::vector<std::uint8_t> v(val_idx.size());
        for (std::size_t i = 0; i < val_idx.size(); ++i) v[i] = labels[val_idx[i]];
        return v;
    }();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(pool);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        std::vector<float> batch_labels;
        for (std::size_t start = 0; start < pool.size(); start += config.batch_size) {
            const std::size_t end = std::min(pool.size(), start + config.batch_size);
            const auto batch = make_batch(
                dataset, std::span<const std::size_t>(pool).subspan(start, end - start),
                batch_labels);
            ag::Tape<float> tape;
            auto probs = net.forward(batch, true, &tape, &dropout_rng);
            auto loss = apply_loss(&tape, probs, batch_labels, config.loss, class_scale);
            net.zero_grad();
            tape.backward(loss);
            adam_step(params, adam, static_cast<float>(lr));
            loss_sum += static_cast<double>(loss->values[0]);
            ++n_batches;
        }

        const auto val_scores = predict_indices(dataset, val_idx, net, config.batch_size);
        const double val_pr_auc = metrics::pr_auc_of(val_scores, val_labels);
        const auto val_cm = metrics::confusion_at_threshold(val_scores, val_labels, 0.5);
        const double val_recall =
            val_cm.tp + val_cm.fn > 0
                ? static_cast<double>(val_cm.tp) / static_cast<double>(val_cm.tp + val_cm.fn)
                : 0.0;

        EpochLog log;
        log.epoch = static_cast<int>(epoch);
        log.train_loss = n_batches > 0 ? loss_sum / static_cast<double>(n_batches) : 0.0;
        log.val_pr_auc = val_pr_auc;
        log.val_recall = val_recall;
        log.lr = lr;
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(log);

        if (config.plateau)
            lr = reduce_lr_on_plateau(plateau_state, val_pr_auc, lr, config.plateau_cfg);

        if (config.early_stopping) {
            const int before_best = stop_state.best_epoch;
            const bool stop = early_stopping_update(stop_state, val_pr_auc,
                                                    static_cast<int>(epoch), config.early_stop);
            if (stop_state.best_epoch != before_best) {
                best_snapshot = net.snapshot();
                best_epoch = stop_state.best_epoch;
            }
            if (stop) break;
        } else {
            best_epoch = static_cast<int>(epoch);
        }
    }

    if (config.early_stopping) net.restore(best_snapshot);
    result.best_epoch = best_epoch;
    return result;
}

}  // namespace apnea::train
