#pragma once

#include "gzsl/classify.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/ood.hpp"
#include "gzsl/wgan.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gzsl {

// ---------------------------------------------------------------------------
// Metrics (all in percent)

/// Unweighted mean over `class_set` of per-class accuracy. Every class in
/// the set must have at least one row.
double per_class_accuracy(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
                          const std::vector<int>& class_set);

/// 2su / (s + u), or 0 when s + u == 0.
double harmonic_mean(double s, double u);

struct BiasMetrics {
    double sc = 0.0;  // truly-seen rows predicted into the seen group
    double uc = 0.0;  // truly-unseen rows predicted into the unseen group
};

/// Group-level accuracy treating all seen classes as one group and all
/// unseen classes as the other.
BiasMetrics bias_metrics(const std::vector<bool>& predicted_seen, const std::vector<bool>& true_seen);

struct CurvePoint {
    double fraction = 0.0;  // share of unseen rows kept, in (0, 1]
    double accuracy = 0.0;  // percent correct over the kept rows
};

/// Rows sorted by confidence (descending, stable); point k reports the
/// accuracy over the top ceil(k/100 * n) rows, k = 1..100.
std::vector<CurvePoint> sorted_confidence_curve(const std::vector<double>& confidence,
                                                const std::vector<bool>& correct);

// ---------------------------------------------------------------------------
// Protocol

enum class Method { cewgan_od, cewgan, cewgan_od_bin };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct SplitResult {
    std::uint64_t seed = 0;
    Method method = Method::cewgan_od;
    double seen_acc = 0.0;
    double unseen_acc = 0.0;
    double harmonic = 0.0;
    double zsl_acc = 0.0;
    double bias_sc = 0.0;
    double bias_uc = 0.0;
    std::optional<double> ent_th;            // entropy detector only
    std::optional<double> routed_seen_rate;  // routed methods only, percent of test rows
    std::vector<CurvePoint> curve;

    nlohmann::ordered_json metrics_json() const;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single run
    double min = 0.0;
    double max = 0.0;
};

MetricSummary summarize(const std::vector<double>& values);

struct AggregateReport {
    Method method = Method::cewgan_od;
    std::vector<SplitResult> runs;
    std::map<std::string, MetricSummary> metrics;

    nlohmann::ordered_json to_json() const;
};

AggregateReport aggregate(Method method, std::vector<SplitResult> runs);

/// Mean of the per-run curves at each 1% step.
std::vector<CurvePoint> mean_curve(const std::vector<SplitResult>& runs);

struct ProtocolConfig {
    int num_seen = 10;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<Method> methods{Method::cewgan_od};
    double seen_test_fraction = 0.2;
    TrainConfig gan;
    OdConfig od;
    HeadConfig head;
    /// Generated rows per unseen class; 0 means the mean seen training count.
    int synth_per_class = 0;
    int threads = 1;
    std::filesystem::path output_dir;  // per-run artifacts when nonempty
    /// Optional per-split GAN training monitor (see train_gan).
    std::function<GanMonitor(const SplitSpec&)> gan_monitor;
};

/// Everything produced for one split, shared by all requested methods.
struct SplitArtifacts {
    SplitSpec split;
    TrainedGan gan;
    FeatureDataset synth_unseen;
    std::optional<OdDetector> detector;  // set when CEWGAN-OD was requested
    std::vector<SplitResult> results;    // one per requested method, in order
};

/// Train/synthesize/detect/classify/evaluate on one split. The GAN is
/// trained once and reused by every method.
SplitArtifacts run_split(const FeatureDataset& ds, const SplitSpec& split, const ProtocolConfig& cfg);

/// One report per requested method, runs in seed order.
std::vector<AggregateReport> run_protocol(const FeatureDataset& ds, const ProtocolConfig& cfg);

}  // namespace gzsl
