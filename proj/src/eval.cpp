#include "gzsl/eval.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace gzsl {

double per_class_accuracy(const std::vector<int>& true_labels, const std::vector<int>& pred_labels,
                          const std::vector<int>& class_set) {
    if (class_set.empty()) throw ValidationError("per-class accuracy needs a nonempty class set");
    if (true_labels.size() != pred_labels.size()) throw ValidationError("label vectors differ in length");
    double sum = 0.0;
    for (int c : class_set) {
        int total = 0, correct = 0;
        for (std::size_t i = 0; i < true_labels.size(); ++i) {
            if (true_labels[i] != c) continue;
            ++total;
            if (pred_labels[i] == c) ++correct;
        }
        if (total == 0) throw ValidationError("class " + std::to_string(c) + " has no test rows");
        sum += static_cast<double>(correct) / total;
    }
    return 100.0 * sum / static_cast<double>(class_set.size());
}

double harmonic_mean(double s, double u) {
    if (s < 0.0 || u < 0.0) throw ValidationError("harmonic mean of negative accuracies");
    if (s + u == 0.0) return 0.0;
    return 2.0 * s * u / (s + u);
}

BiasMetrics bias_metrics(const std::vector<bool>& predicted_seen, const std::vector<bool>& true_seen) {
    if (predicted_seen.size() != true_seen.size()) throw ValidationError("flag vectors differ in length");
    int seen = 0, seen_ok = 0, unseen = 0, unseen_ok = 0;
    for (std::size_t i = 0; i < true_seen.size(); ++i) {
        if (true_seen[i]) {
            ++seen;
            seen_ok += predicted_seen[i] ? 1 : 0;
        } else {
            ++unseen;
            unseen_ok += predicted_seen[i] ? 0 : 1;
        }
    }
    if (seen == 0 || unseen == 0) throw ValidationError("bias metrics need both seen and unseen rows");
    return {100.0 * seen_ok / seen, 100.0 * unseen_ok / unseen};
}

std::vector<CurvePoint> sorted_confidence_curve(const std::vector<double>& confidence,
                                                const std::vector<bool>& correct) {
    if (confidence.empty()) throw ValidationError("confidence curve needs at least one unseen row");
    if (confidence.size() != correct.size()) throw ValidationError("confidence and correctness differ in length");
    std::vector<std::size_t> order(confidence.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return confidence[a] > confidence[b]; });
    std::vector<int> cumulative(order.size() + 1, 0);
    for (std::size_t i = 0; i < order.size(); ++i) cumulative[i + 1] = cumulative[i] + (correct[order[i]] ? 1 : 0);

    const auto n = static_cast<long>(order.size());
    std::vector<CurvePoint> curve;
    for (long k = 1; k <= 100; ++k) {
        const long top = std::max(1L, (k * n + 99) / 100);
        curve.push_back({static_cast<double>(k) / 100.0, 100.0 * cumulative[static_cast<std::size_t>(top)] / top});
    }
    return curve;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::cewgan_od: return "CEWGAN-OD";
        case Method::cewgan: return "CEWGAN";
        case Method::cewgan_od_bin: return "CEWGAN-OD_bin";
    }
    return "CEWGAN-OD";
}

Method method_from_string(const std::string& name) {
    if (name == "CEWGAN-OD") return Method::cewgan_od;
    if (name == "CEWGAN") return Method::cewgan;
    if (name == "CEWGAN-OD_bin") return Method::cewgan_od_bin;
    throw ValidationError("unknown method '" + name + "' (expected CEWGAN-OD, CEWGAN or CEWGAN-OD_bin)");
}

nlohmann::ordered_json SplitResult::metrics_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["method"] = to_string(method);
    j["s"] = seen_acc;
    j["u"] = unseen_acc;
    j["H"] = harmonic;
    j["zsl"] = zsl_acc;
    j["bias_sc"] = bias_sc;
    j["bias_uc"] = bias_uc;
    if (routed_seen_rate) j["routed_seen_rate"] = *routed_seen_rate;
    if (ent_th) j["ent_th"] = *ent_th;
    return j;
}

MetricSummary summarize(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("cannot summarize zero runs");
    MetricSummary s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    // Guard the mean against summation drift outside [min, max].
    s.mean = std::clamp(s.mean, s.min, s.max);
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

AggregateReport aggregate(Method method, std::vector<SplitResult> runs) {
    AggregateReport report;
    report.method = method;
    report.runs = std::move(runs);
    auto collect = [&](const std::string& name, auto getter) {
        std::vector<double> values;
        for (const SplitResult& r : report.runs) {
            const std::optional<double> v = getter(r);
            if (v) values.push_back(*v);
        }
        if (!values.empty()) report.metrics[name] = summarize(values);
    };
    collect("s", [](const SplitResult& r) { return std::optional<double>(r.seen_acc); });
    collect("u", [](const SplitResult& r) { return std::optional<double>(r.unseen_acc); });
    collect("H", [](const SplitResult& r) { return std::optional<double>(r.harmonic); });
    collect("zsl", [](const SplitResult& r) { return std::optional<double>(r.zsl_acc); });
    collect("bias_sc", [](const SplitResult& r) { return std::optional<double>(r.bias_sc); });
    collect("bias_uc", [](const SplitResult& r) { return std::optional<double>(r.bias_uc); });
    collect("routed_seen_rate", [](const SplitResult& r) { return r.routed_seen_rate; });
    collect("ent_th", [](const SplitResult& r) { return r.ent_th; });
    return report;
}

nlohmann::ordered_json AggregateReport::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = to_string(method);
    j["num_runs"] = runs.size();
    nlohmann::ordered_json agg = nlohmann::ordered_json::object();
    for (const auto& [name, m] : metrics)
        agg[name] = {{"mean", m.mean}, {"std", m.std}, {"min", m.min}, {"max", m.max}};
    j["aggregate"] = agg;
    nlohmann::ordered_json per_run = nlohmann::ordered_json::array();
    for (const SplitResult& r : runs) per_run.push_back(r.metrics_json());
    j["runs"] = per_run;
    return j;
}

std::vector<CurvePoint> mean_curve(const std::vector<SplitResult>& runs) {
    std::vector<CurvePoint> out;
    if (runs.empty()) return out;
    out = runs.front().curve;
    for (CurvePoint& p : out) p.accuracy = 0.0;
    for (const SplitResult& r : runs)
        for (std::size_t k = 0; k < out.size() && k < r.curve.size(); ++k) out[k].accuracy += r.curve[k].accuracy;
    for (CurvePoint& p : out) p.accuracy /= static_cast<double>(runs.size());
    return out;
}

// ---------------------------------------------------------------------------
// One split

namespace {

struct TestView {
    Matrix features;
    std::vector<int> labels;
    std::vector<bool> true_seen;
    std::vector<int> seen_classes_present;
    std::vector<int> unseen_classes_present;
};

TestView make_test_view(const GzslTestSet& test, const SplitSpec& split) {
    TestView v;
    v.features = to_double(test.features);
    v.labels = test.labels;
    v.true_seen = test.is_seen_class;
    for (int y : split.seen)
        if (std::find(test.labels.begin(), test.labels.end(), y) != test.labels.end())
            v.seen_classes_present.push_back(y);
    for (int y : split.unseen)
        if (std::find(test.labels.begin(), test.labels.end(), y) != test.labels.end())
            v.unseen_classes_present.push_back(y);
    if (v.seen_classes_present.empty() || v.unseen_classes_present.empty())
        throw ValidationError("test set lacks seen or unseen rows");
    return v;
}

std::vector<int> pick(const std::vector<int>& values, const std::vector<bool>& mask, bool want) {
    std::vector<int> out;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (mask[i] == want) out.push_back(values[i]);
    return out;
}

// Fills the metric fields shared by all methods.
void score(SplitResult& r, const TestView& test, const SplitSpec& split, const HeadPrediction& pred, int zsl_correct,
           int zsl_total) {
    const std::vector<int> seen_true = pick(test.labels, test.true_seen, true);
    const std::vector<int> seen_pred = pick(pred.classes, test.true_seen, true);
    const std::vector<int> unseen_true = pick(test.labels, test.true_seen, false);
    const std::vector<int> unseen_pred = pick(pred.classes, test.true_seen, false);
    r.seen_acc = per_class_accuracy(seen_true, seen_pred, test.seen_classes_present);
    r.unseen_acc = per_class_accuracy(unseen_true, unseen_pred, test.unseen_classes_present);
    r.harmonic = harmonic_mean(r.seen_acc, r.unseen_acc);
    r.zsl_acc = 100.0 * zsl_correct / std::max(zsl_total, 1);

    std::vector<bool> predicted_seen(pred.classes.size());
    for (std::size_t i = 0; i < pred.classes.size(); ++i) predicted_seen[i] = split.is_seen(pred.classes[i]);
    const BiasMetrics bias = bias_metrics(predicted_seen, test.true_seen);
    r.bias_sc = bias.sc;
    r.bias_uc = bias.uc;

    std::vector<double> conf;
    std::vector<bool> correct;
    for (std::size_t i = 0; i < pred.classes.size(); ++i) {
        if (test.true_seen[i]) continue;
        conf.push_back(pred.confidence[i]);
        correct.push_back(pred.classes[i] == test.labels[i]);
    }
    r.curve = sorted_confidence_curve(conf, correct);
}

int count_zsl_correct(const ClassifierHead& unseen_head, const TestView& test, int& total) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < test.labels.size(); ++i)
        if (!test.true_seen[i]) rows.push_back(static_cast<int>(i));
    Matrix x(static_cast<Eigen::Index>(rows.size()), test.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = test.features.row(rows[i]);
    const HeadPrediction p = predict_head(unseen_head, x);
    int correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
        correct += p.classes[i] == test.labels[static_cast<std::size_t>(rows[i])] ? 1 : 0;
    total = static_cast<int>(rows.size());
    return correct;
}

std::string predictions_csv(const TestView& test, const std::vector<int>& source_rows, const HeadPrediction& pred,
                            const std::vector<bool>& routed_seen, const std::vector<double>* entropies) {
    std::ostringstream out;
    out.precision(9);
    out << "row_index,true_class,predicted_class,routed_seen,entropy,confidence\n";
    for (std::size_t i = 0; i < pred.classes.size(); ++i) {
        out << source_rows[i] << ',' << test.labels[i] << ',' << pred.classes[i] << ',' << (routed_seen[i] ? 1 : 0)
            << ',';
        if (entropies) out << (*entropies)[i];
        out << ',' << pred.confidence[i] << '\n';
    }
    return out.str();
}

HeadConfig head_cfg(const HeadConfig& base, std::uint64_t seed, std::uint64_t stream) {
    HeadConfig c = base;
    c.seed = derive_seed(seed, stream);
    return c;
}

}  // namespace

SplitArtifacts run_split(const FeatureDataset& ds, const SplitSpec& split, const ProtocolConfig& cfg) {
    SplitArtifacts art;
    art.split = split;
    const GzslPartition part = partition_rows(ds, split);
    const FeatureDataset train = ds.subset(part.train_rows);
    const GzslTestSet test_set = build_gzsl_test_set(ds, split);
    const TestView test = make_test_view(test_set, split);

    TrainConfig gan_cfg = cfg.gan;
    gan_cfg.seed = derive_seed(split.seed, 100);
    art.gan = train_gan(train, gan_cfg, cfg.gan_monitor ? cfg.gan_monitor(split) : GanMonitor{});

    int per_class = cfg.synth_per_class;
    if (per_class <= 0)
        per_class = static_cast<int>(std::lround(static_cast<double>(train.size()) / split.seen.size()));
    art.synth_unseen = synthesize(art.gan.model, ds, split.unseen, per_class, derive_seed(split.seed, 101));
    const FeatureDataset& synth_unseen = art.synth_unseen;
    const Matrix train_x = to_double(train.features);

    OdConfig od_cfg = cfg.od;
    od_cfg.seed = derive_seed(split.seed, 102);

    // Heads shared by the routed methods.
    std::optional<ClassifierHead> seen_head, unseen_head;
    auto ensure_heads = [&] {
        if (seen_head) return;
        seen_head = train_head(train_x, train.labels, split.seen, head_cfg(cfg.head, split.seed, 103));
        unseen_head = train_head(to_double(synth_unseen.features), synth_unseen.labels, split.unseen,
                                 head_cfg(cfg.head, split.seed, 104));
    };

    for (Method method : cfg.methods) {
        SplitResult r;
        r.seed = split.seed;
        r.method = method;
        HeadPrediction pred;
        std::vector<bool> routed_seen;
        std::vector<double> entropies;
        std::filesystem::path run_dir;
        if (!cfg.output_dir.empty()) run_dir = cfg.output_dir / to_string(method) / std::to_string(split.seed);
        int zsl_total = 0, zsl_correct = 0;

        if (method == Method::cewgan) {
            const ClassifierHead joint = train_baseline_gzsl(train, synth_unseen, split.seen, split.unseen,
                                                             head_cfg(cfg.head, split.seed, 105));
            pred = predict_head(joint, test.features);
            for (int y : pred.classes) routed_seen.push_back(split.is_seen(y));
            // ZSL: the joint head restricted to its unseen columns.
            ClassifierHead restricted;
            restricted.label_map = split.unseen;
            restricted.network = joint.network;
            Layer& out = restricted.network.layers.back();
            Matrix w(static_cast<Eigen::Index>(split.unseen.size()), out.weight.cols());
            RowVector b(static_cast<Eigen::Index>(split.unseen.size()));
            for (std::size_t k = 0; k < split.unseen.size(); ++k) {
                const auto col = std::find(joint.label_map.begin(), joint.label_map.end(), split.unseen[k]) -
                                 joint.label_map.begin();
                w.row(static_cast<Eigen::Index>(k)) = out.weight.row(col);
                b(static_cast<Eigen::Index>(k)) = out.bias(col);
            }
            out.weight = w;
            out.bias = b;
            restricted.network.spec.layer_sizes.back() = static_cast<int>(split.unseen.size());
            zsl_correct = count_zsl_correct(restricted, test, zsl_total);
            if (!run_dir.empty()) save_mlp(joint.network, run_dir / "checkpoints" / "baseline_head");
        } else if (method == Method::cewgan_od) {
            ensure_heads();
            GzslPredictor predictor{train_od(train, synth_unseen, split.seen, od_cfg), *seen_head, *unseen_head};
            predictor.validate();
            const std::vector<GzslPrediction> rows = predict_gzsl_rows(predictor, test.features);
            for (const GzslPrediction& p : rows) {
                pred.classes.push_back(p.predicted_class);
                pred.confidence.push_back(p.confidence);
                routed_seen.push_back(p.routed_seen);
                entropies.push_back(p.entropy);
            }
            r.ent_th = predictor.od.threshold;
            zsl_correct = count_zsl_correct(*unseen_head, test, zsl_total);
            if (!run_dir.empty()) save_detector(predictor.od, run_dir / "checkpoints" / "detector");
            art.detector = predictor.od;
        } else {
            ensure_heads();
            const FeatureDataset synth_seen =
                synthesize(art.gan.model, ds, split.seen, per_class, derive_seed(split.seed, 106));
            const BinaryDetector bin = train_od_binary(train, synth_seen, synth_unseen, od_cfg);
            routed_seen = bin.routes_seen(test.features);
            pred = predict_routed(routed_seen, *seen_head, *unseen_head, test.features);
            zsl_correct = count_zsl_correct(*unseen_head, test, zsl_total);
            if (!run_dir.empty()) save_mlp(bin.network, run_dir / "checkpoints" / "binary_detector");
        }
        if (method != Method::cewgan) {
            const auto seen_count = std::count(routed_seen.begin(), routed_seen.end(), true);
            r.routed_seen_rate = 100.0 * static_cast<double>(seen_count) / static_cast<double>(routed_seen.size());
        }
        score(r, test, split, pred, zsl_correct, zsl_total);

        if (!run_dir.empty()) {
            std::filesystem::create_directories(run_dir / "checkpoints");
            io::write_json(run_dir / "split.json", split_to_json(split));
            save_gan(art.gan.model, run_dir / "checkpoints" / "gan");
            if (seen_head && method != Method::cewgan) {
                save_mlp(seen_head->network, run_dir / "checkpoints" / "seen_head");
                save_mlp(unseen_head->network, run_dir / "checkpoints" / "unseen_head");
            }
            io::write_text(run_dir / "loss_history.csv", history_csv(art.gan.history));
            io::write_text(run_dir / "predictions.csv",
                           predictions_csv(test, test_set.source_rows, pred, routed_seen,
                                           entropies.empty() ? nullptr : &entropies));
            io::write_json(run_dir / "metrics.json", r.metrics_json());
        }
        art.results.push_back(std::move(r));
    }
    return art;
}

std::vector<AggregateReport> run_protocol(const FeatureDataset& ds, const ProtocolConfig& cfg) {
    if (cfg.seeds.empty()) throw ValidationError("protocol needs at least one run");
    if (cfg.methods.empty()) throw ValidationError("protocol needs at least one method");
    ds.validate();

    const std::size_t runs = cfg.seeds.size();
    std::vector<std::vector<SplitResult>> per_run(runs);
    std::vector<std::exception_ptr> errors(runs);

    auto work = [&](std::size_t r) {
        const std::uint64_t seed = cfg.seeds[r];
        try {
            SplitSpec split = random_split(ds, cfg.num_seen, seed);
            split.seen_test_fraction = cfg.seen_test_fraction;
            per_run[r] = run_split(ds, split, cfg).results;
        } catch (const ValidationError& e) {
            errors[r] = std::make_exception_ptr(ValidationError("run seed " + std::to_string(seed) + ": " + e.what()));
        } catch (const std::exception& e) {
            errors[r] = std::make_exception_ptr(RunError("run seed " + std::to_string(seed) + ": " + e.what()));
        }
    };

    const auto threads = static_cast<std::size_t>(std::max(1, cfg.threads));
    if (threads == 1 || runs == 1) {
        for (std::size_t r = 0; r < runs; ++r) work(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, runs); ++t)
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < runs; r = next++) work(r);
            });
    }
    for (const std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<AggregateReport> reports;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        std::vector<SplitResult> results;
        for (std::size_t r = 0; r < runs; ++r) results.push_back(per_run[r][m]);
        reports.push_back(aggregate(cfg.methods[m], std::move(results)));
    }
    return reports;
}

}  // namespace gzsl
