#include "apnea/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "apnea/errors.hpp"

namespace apnea::metrics {

ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels, double threshold) {
    if (scores.size() != labels.size())
        throw ConfigError("confusion_at_threshold: score/label length mismatch");
    if (scores.empty()) throw ConfigError("confusion_at_threshold: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (actual)
            (predicted ? cm.tp : cm.fn) += 1;
        else
            (predicted ? cm.fp : cm.tn) += 1;
    }
    return cm;
}

MetricsReport derive_metrics(const ConfusionMatrix& cm, double threshold) {
    if (cm.total() == 0) throw ConfigError("derive_metrics: empty confusion matrix");
    MetricsReport r;
    r.threshold = threshold;
    r.confusion = cm;
    r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    r.precision = cm.tp + cm.fp > 0
                      ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp)
                      : 0.0;
    r.recall = cm.tp + cm.fn > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn)
                                 : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;
    return r;
}

PRCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw ConfigError("pr_curve: score/label length mismatch");
    const auto n_pos = static_cast<std::uint64_t>(
        std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
    if (n_pos == 0) throw DataError("pr_curve: no positive labels");

    // order by score descending; sweep accumulates tp/fp per distinct score
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    PRCurve curve;
    std::uint64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels[order[i]] != 0)
                ++tp;
            else
                ++fp;
            ++i;
        }
        PRPoint pt;
        pt.threshold = threshold;
        pt.recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        curve.points.push_back(pt);
    }

    PRPoint anchor;
    anchor.threshold = std::numeric_limits<double>::infinity();
    anchor.recall = 0.0;
    anchor.precision = curve.points.front().precision;
    curve.points.insert(curve.points.begin(), anchor);
    return curve;
}

double pr_auc(const PRCurve& curve) {
    auto points = curve.points;
    std::stable_sort(points.begin(), points.end(),
                     [](const PRPoint& a, const PRPoint& b) { return a.recall < b.recall; });
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        area += (points[i].recall - points[i - 1].recall) *
                (points[i].precision + points[i - 1].precision) / 2.0;
    return area;
}

double pr_auc_of(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    return pr_auc(pr_curve(scores, labels));
}

Objective objective_from_string(const std::string& name) {
    if (name == "max_f1") return Objective::max_f1;
    if (name == "recall_floor") return Objective::recall_floor;
    if (name == "precision_floor") return Objective::precision_floor;
    throw ConfigError("unknown sweep objective '" + name + "'");
}

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::max_f1: return "max_f1";
        case Objective::recall_floor: return "recall_floor";
        case Objective::precision_floor: return "precision_floor";
    }
    return "?";
}

SweepResult threshold_sweep(std::span<const double> scores, std::span<const std::uint8_t> labels,
                            Objective objective, double floor_value) {
    const bool any_pos = std::any_of(labels.begin(), labels.end(),
                                     [](std::uint8_t l) { return l != 0; });
    const bool any_neg = std::any_of(labels.begin(), labels.end(),
                                     [](std::uint8_t l) { return l == 0; });
    if (!any_pos || !any_neg) throw DataError("threshold_sweep: labels are degenerate");

    std::vector<double> thresholds(scores.begin(), scores.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    SweepResult result;
    double best_key = -1.0;
    for (const double t : thresholds) {  // descending: earlier = higher threshold wins ties
        const auto report = derive_metrics(confusion_at_threshold(scores, labels, t), t);
        double key = -1.0;
        switch (objective) {
            case Objective::max_f1:
                key = report.f1;
                break;
            case Objective::recall_floor:
                if (report.recall >= floor_value) key = report.precision;
                break;
            case Objective::precision_floor:
                if (report.precision >= floor_value) key = report.recall;
                break;
        }
        if (key >= 0.0 && key > best_key) {
            best_key = key;
            result.feasible = true;
            result.report = report;
        }
    }
    return result;
}

}  // namespace apnea::metrics
