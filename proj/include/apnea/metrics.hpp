#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace apnea::metrics {

// Apnea is the positive class; the prediction rule is score >= threshold.
struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fn = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fn + fp + tn; }
};

struct MetricsReport {
    double threshold = 0.5;
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double pr_auc = 0.0;
};

struct PRPoint {
    double threshold = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

// Points at every distinct score, threshold descending (recall
// non-decreasing), preceded by the conventional (recall 0) anchor.
struct PRCurve {
    std::vector<PRPoint> points;
};

ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const std::uint8_t> labels, double threshold);

// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
// f1 = 2PR/(P+R); zero-denominator cases yield 0.
MetricsReport derive_metrics(const ConfusionMatrix& cm, double threshold = 0.5);

PRCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

// trapezoidal area over recall
double pr_auc(const PRCurve& curve);

double pr_auc_of(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class Objective { max_f1, recall_floor, precision_floor };

Objective objective_from_string(const std::string& name);
std::string to_string(Objective objective);

struct SweepResult {
    bool feasible = false;
    MetricsReport report;  // report.threshold is the chosen threshold
};

// Evaluates every distinct score as a threshold; ties break toward the higher
// threshold. recall_floor maximizes precision subject to recall >= floor;
// precision_floor maximizes recall subject to precision >= floor.
SweepResult threshold_sweep(std::span<const double> scores, std::span<const std::uint8_t> labels,
                            Objective objective, double floor_value = 0.0);

}  // namespace apnea::metrics
