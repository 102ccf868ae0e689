#include "gzsl/cli.hpp"

#include "gzsl/binary_io.hpp"
#include "gzsl/error.hpp"
#include "gzsl/wgan.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

namespace gzsl {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key())) throw ValidationError(where + ": unknown key '" + item.key() + "'");
}

std::string at(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

void read_int(const json& j, const std::string& key, int& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError(at(where, key) + ": expected an integer");
    out = v.get<int>();
}

void read_u64(const json& j, const std::string& key, std::uint64_t& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw ValidationError(at(where, key) + ": expected a nonnegative integer");
    out = v.get<std::uint64_t>();
}

void read_double(const json& j, const std::string& key, double& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_number()) throw ValidationError(at(where, key) + ": expected a number");
    out = v.get<double>();
}

void read_bool(const json& j, const std::string& key, bool& out, const std::string& where) {
    if (!j.contains(key)) return;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw ValidationError(at(where, key) + ": expected true or false");
    out = v.get<bool>();
}

std::string read_string(const json& j, const std::string& key, const std::string& where) {
    const json& v = j.at(key);
    if (!v.is_string()) throw ValidationError(at(where, key) + ": expected a string");
    return v.get<std::string>();
}

TrainConfig gan_from_json(const json& j) {
    const std::string w = "gan";
    check_keys(j,
               {"alpha", "beta", "gamma", "lr", "adam_beta1", "adam_beta2", "batch_size", "epochs",
                "critic_steps_per_gen_step", "d_z", "hidden", "squared_cycle", "decoder_on_real"},
               w);
    TrainConfig c;
    read_double(j, "alpha", c.alpha, w);
    read_double(j, "beta", c.beta, w);
    read_double(j, "gamma", c.gamma, w);
    read_double(j, "lr", c.lr, w);
    read_double(j, "adam_beta1", c.adam_beta1, w);
    read_double(j, "adam_beta2", c.adam_beta2, w);
    read_int(j, "batch_size", c.batch_size, w);
    read_int(j, "epochs", c.epochs, w);
    read_int(j, "critic_steps_per_gen_step", c.critic_steps_per_gen_step, w);
    read_int(j, "d_z", c.d_z, w);
    read_int(j, "hidden", c.hidden, w);
    read_bool(j, "squared_cycle", c.squared_cycle, w);
    read_bool(j, "decoder_on_real", c.decoder_on_real, w);
    return c;
}

ordered_json gan_to_json(const TrainConfig& c) {
    ordered_json j;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["gamma"] = c.gamma;
    j["lr"] = c.lr;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["critic_steps_per_gen_step"] = c.critic_steps_per_gen_step;
    j["d_z"] = c.d_z;
    j["hidden"] = c.hidden;
    j["squared_cycle"] = c.squared_cycle;
    j["decoder_on_real"] = c.decoder_on_real;
    return j;
}

OdConfig od_from_json(const json& j) {
    const std::string w = "od";
    check_keys(j, {"hidden", "epochs", "batch_size", "lr", "nll_weight"}, w);
    OdConfig c;
    read_int(j, "hidden", c.hidden, w);
    read_int(j, "epochs", c.epochs, w);
    read_int(j, "batch_size", c.batch_size, w);
    read_double(j, "lr", c.lr, w);
    read_double(j, "nll_weight", c.nll_weight, w);
    return c;
}

ordered_json od_to_json(const OdConfig& c) {
    return {{"hidden", c.hidden}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr},
            {"nll_weight", c.nll_weight}};
}

HeadConfig head_from_json(const json& j) {
    const std::string w = "head";
    check_keys(j, {"epochs", "batch_size", "lr"}, w);
    HeadConfig c;
    read_int(j, "epochs", c.epochs, w);
    read_int(j, "batch_size", c.batch_size, w);
    read_double(j, "lr", c.lr, w);
    return c;
}

ordered_json head_to_json(const HeadConfig& c) {
    return {{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}};
}

const char* choice_name(EmbeddingChoice c) {
    switch (c) {
        case EmbeddingChoice::primary: return "primary";
        case EmbeddingChoice::manual: return "manual";
        case EmbeddingChoice::transferred: return "transferred";
    }
    return "primary";
}

EmbeddingChoice choice_from_string(const std::string& s) {
    if (s == "primary") return EmbeddingChoice::primary;
    if (s == "manual") return EmbeddingChoice::manual;
    if (s == "transferred") return EmbeddingChoice::transferred;
    throw ValidationError("embedding_choice: expected primary, manual or transferred, got '" + s + "'");
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "fraction,accuracy\n";
    char line[64];
    for (const CurvePoint& p : curve) {
        std::snprintf(line, sizeof line, "%.2f,%.6f\n", p.fraction, p.accuracy);
        out += line;
    }
    return out;
}

double metric_mean(const json& block, const std::string& metric, const std::string& who) {
    if (!block.contains("aggregate") || !block["aggregate"].contains(metric) ||
        !block["aggregate"][metric].contains("mean") || !block["aggregate"][metric]["mean"].is_number())
        throw ValidationError(who + ": missing metric '" + metric + "'");
    return block["aggregate"][metric]["mean"].get<double>();
}

const json& method_blocks(const json& report, const std::string& who) {
    if (!report.is_object() || !report.contains("methods") || !report["methods"].is_array())
        throw ValidationError(who + ": missing 'methods' list");
    return report["methods"];
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

SyntheticBenchmarkConfig synthetic_from_json(const json& j) {
    const std::string w = "synthetic";
    check_keys(j,
               {"num_classes", "dim_feature", "dim_embedding", "samples_per_class", "cluster_spread",
                "embedding_noise", "embedding_rank", "seed"},
               w);
    SyntheticBenchmarkConfig c;
    read_int(j, "num_classes", c.num_classes, w);
    read_int(j, "dim_feature", c.dim_feature, w);
    read_int(j, "dim_embedding", c.dim_embedding, w);
    read_int(j, "samples_per_class", c.samples_per_class, w);
    read_double(j, "cluster_spread", c.cluster_spread, w);
    read_double(j, "embedding_noise", c.embedding_noise, w);
    read_int(j, "embedding_rank", c.embedding_rank, w);
    read_u64(j, "seed", c.seed, w);
    // A lowered dim_embedding drags the default rank with it.
    if (!j.contains("embedding_rank") && c.embedding_rank > c.dim_embedding && c.dim_embedding > 0)
        c.embedding_rank = c.dim_embedding;
    return c;
}

ordered_json synthetic_to_json(const SyntheticBenchmarkConfig& c) {
    ordered_json j;
    j["num_classes"] = c.num_classes;
    j["dim_feature"] = c.dim_feature;
    j["dim_embedding"] = c.dim_embedding;
    j["samples_per_class"] = c.samples_per_class;
    j["cluster_spread"] = c.cluster_spread;
    j["embedding_noise"] = c.embedding_noise;
    j["embedding_rank"] = c.embedding_rank;
    j["seed"] = c.seed;
    return j;
}

ExperimentConfig experiment_from_json(const json& j) {
    check_keys(j,
               {"dataset", "synthetic", "embedding_choice", "transferred_embeddings", "num_seen", "runs", "seed",
                "method", "seen_test_fraction", "synth_per_class", "threads", "gan", "od", "head", "output_dir"},
               "config");
    ExperimentConfig c;
    if (j.contains("dataset")) c.dataset = read_string(j, "dataset", "");
    if (j.contains("synthetic")) c.synthetic = synthetic_from_json(j.at("synthetic"));
    if (j.contains("embedding_choice")) c.embedding_choice = choice_from_string(read_string(j, "embedding_choice", ""));
    if (j.contains("transferred_embeddings")) c.transferred_embeddings = read_string(j, "transferred_embeddings", "");
    read_int(j, "num_seen", c.num_seen, "");
    read_int(j, "runs", c.runs, "");
    read_u64(j, "seed", c.seed, "");
    if (j.contains("method")) {
        const json& m = j.at("method");
        c.methods.clear();
        if (m.is_string()) {
            c.methods.push_back(method_from_string(m.get<std::string>()));
        } else if (m.is_array()) {
            for (const json& e : m) {
                if (!e.is_string()) throw ValidationError("method: expected method names");
                c.methods.push_back(method_from_string(e.get<std::string>()));
            }
        } else {
            throw ValidationError("method: expected a name or a list of names");
        }
    }
    read_double(j, "seen_test_fraction", c.seen_test_fraction, "");
    read_int(j, "synth_per_class", c.synth_per_class, "");
    read_int(j, "threads", c.threads, "");
    if (j.contains("gan")) c.gan = gan_from_json(j.at("gan"));
    if (j.contains("od")) c.od = od_from_json(j.at("od"));
    if (j.contains("head")) c.head = head_from_json(j.at("head"));
    if (j.contains("output_dir")) c.output_dir = read_string(j, "output_dir", "");
    return c;
}

ordered_json experiment_to_json(const ExperimentConfig& c) {
    ordered_json j;
    if (c.dataset) j["dataset"] = c.dataset->string();
    if (c.synthetic) j["synthetic"] = synthetic_to_json(*c.synthetic);
    j["embedding_choice"] = choice_name(c.embedding_choice);
    if (c.embedding_choice == EmbeddingChoice::transferred)
        j["transferred_embeddings"] = c.transferred_embeddings.string();
    j["num_seen"] = c.num_seen;
    j["runs"] = c.runs;
    j["seed"] = c.seed;
    ordered_json methods = ordered_json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    j["method"] = methods;
    j["seen_test_fraction"] = c.seen_test_fraction;
    j["synth_per_class"] = c.synth_per_class;
    j["threads"] = c.threads;
    j["gan"] = gan_to_json(c.gan);
    j["od"] = od_to_json(c.od);
    j["head"] = head_to_json(c.head);
    j["output_dir"] = c.output_dir.string();
    return j;
}

void ExperimentConfig::validate() const {
    if (dataset.has_value() == synthetic.has_value())
        throw ValidationError("config needs exactly one data source: 'dataset' or 'synthetic'");
    if (dataset && !std::filesystem::is_directory(*dataset))
        throw ValidationError("dataset directory not found: " + dataset->string());
    if (synthetic) synthetic->validate();
    if (embedding_choice == EmbeddingChoice::transferred) {
        if (transferred_embeddings.empty())
            throw ValidationError("embedding_choice 'transferred' needs transferred_embeddings");
        if (!std::filesystem::is_regular_file(transferred_embeddings))
            throw ValidationError("transferred_embeddings not found: " + transferred_embeddings.string());
    } else if (!transferred_embeddings.empty()) {
        throw ValidationError("transferred_embeddings is only used with embedding_choice 'transferred'");
    }
    if (embedding_choice == EmbeddingChoice::manual && synthetic)
        throw ValidationError("the synthetic benchmark has no manual embedding table");
    if (num_seen < 1) throw ValidationError("num_seen must be positive");
    if (runs < 1) throw ValidationError("runs must be positive");
    if (methods.empty()) throw ValidationError("at least one method is required");
    if (!(seen_test_fraction > 0.0 && seen_test_fraction < 1.0))
        throw ValidationError("seen_test_fraction must lie in (0, 1)");
    if (synth_per_class < 0) throw ValidationError("synth_per_class must be nonnegative");
    if (threads < 1) throw ValidationError("threads must be positive");
    gan.validate();
    if (od.hidden < 1 || od.epochs < 0 || od.batch_size < 2 || !(od.lr > 0.0) || !(od.nll_weight >= 0.0))
        throw ValidationError("invalid od settings");
    if (head.epochs < 0 || head.batch_size < 1 || !(head.lr > 0.0)) throw ValidationError("invalid head settings");
    if (output_dir.empty()) throw ValidationError("output_dir is empty");
}

ProtocolConfig ExperimentConfig::protocol() const {
    ProtocolConfig p;
    p.num_seen = num_seen;
    p.seeds.clear();
    for (int r = 0; r < runs; ++r) p.seeds.push_back(seed + static_cast<std::uint64_t>(r));
    p.methods = methods;
    p.seen_test_fraction = seen_test_fraction;
    p.gan = gan;
    p.od = od;
    p.head = head;
    p.synth_per_class = synth_per_class;
    p.threads = threads;
    p.output_dir = output_dir;
    return p;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ValidationError("bad override path: " + path);
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

std::filesystem::path default_output_root() {
    if (const char* env = std::getenv("GZSL_OUTPUT_ROOT"); env && *env) return env;
    return "runs";
}

FeatureDataset load_experiment_data(const ExperimentConfig& cfg) {
    FeatureDataset ds = cfg.synthetic ? make_synthetic_benchmark(*cfg.synthetic) : load_dataset(*cfg.dataset);
    switch (cfg.embedding_choice) {
        case EmbeddingChoice::primary: break;
        case EmbeddingChoice::manual:
            if (!ds.manual_embeddings) throw ValidationError("dataset has no manual embedding table");
            ds.embeddings = *ds.manual_embeddings;
            break;
        case EmbeddingChoice::transferred: {
            const std::vector<float> flat = io::read_f32(cfg.transferred_embeddings);
            const auto c = static_cast<std::size_t>(ds.num_classes());
            if (flat.empty() || flat.size() % c != 0)
                throw ValidationError("dimension mismatch: transferred table does not hold " + std::to_string(c) +
                                      " rows");
            const auto cols = static_cast<Eigen::Index>(flat.size() / c);
            ds.embeddings = Eigen::Map<const FeatureMatrix>(flat.data(), static_cast<Eigen::Index>(c), cols);
            break;
        }
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_synth_data(const SyntheticBenchmarkConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    if (out_dir.empty()) throw ValidationError("output directory is empty");
    save_dataset(make_synthetic_benchmark(cfg), out_dir);
}

std::vector<AggregateReport> cmd_run(const ExperimentConfig& cfg) {
    cfg.validate();
    const FeatureDataset ds = load_experiment_data(cfg);
    const std::vector<AggregateReport> reports = run_protocol(ds, cfg.protocol());

    std::filesystem::create_directories(cfg.output_dir / "curves");
    ordered_json report;
    report["created"] = utc_timestamp();
    report["config"] = experiment_to_json(cfg);
    ordered_json blocks = ordered_json::array();
    for (const AggregateReport& r : reports) {
        blocks.push_back(r.to_json());
        io::write_text(cfg.output_dir / "curves" / (to_string(r.method) + ".csv"), curve_csv(mean_curve(r.runs)));
    }
    report["methods"] = blocks;
    io::write_json(cfg.output_dir / "report.json", report);
    return reports;
}

std::vector<CompareRow> cmd_compare(const json& report_a, const json& report_b) {
    const json& a = method_blocks(report_a, "report a");
    const json& b = method_blocks(report_b, "report b");
    if (a.size() != b.size())
        throw ValidationError("reports hold different numbers of methods (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    if (a.empty()) throw ValidationError("reports hold no methods");
    std::vector<CompareRow> rows;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CompareRow row;
        row.method_a = a[k].value("method", "?");
        row.method_b = b[k].value("method", "?");
        const std::string wa = "report a (" + row.method_a + ")";
        const std::string wb = "report b (" + row.method_b + ")";
        row.s_a = metric_mean(a[k], "s", wa);
        row.u_a = metric_mean(a[k], "u", wa);
        row.h_a = metric_mean(a[k], "H", wa);
        row.s_b = metric_mean(b[k], "s", wb);
        row.u_b = metric_mean(b[k], "u", wb);
        row.h_b = metric_mean(b[k], "H", wb);
        rows.push_back(row);
    }
    return rows;
}

std::string compare_text(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-16s %-16s %7s %7s %7s %7s %7s %7s %8s %8s %8s\n", "method_a", "method_b", "s_a",
                  "u_a", "H_a", "s_b", "u_b", "H_b", "delta_s", "delta_u", "delta_H");
    out << line;
    for (const CompareRow& r : rows) {
        std::snprintf(line, sizeof line, "%-16s %-16s %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %+8.2f %+8.2f %+8.2f\n",
                      r.method_a.c_str(), r.method_b.c_str(), r.s_a, r.u_a, r.h_a, r.s_b, r.u_b, r.h_b, r.ds(), r.du(),
                      r.dh());
        out << line;
    }
    return out.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "method_a,method_b,s_a,u_a,H_a,s_b,u_b,H_b,delta_s,delta_u,delta_H\n";
    char line[256];
    for (const CompareRow& r : rows) {
        std::snprintf(line, sizeof line, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.method_a.c_str(),
                      r.method_b.c_str(), r.s_a, r.u_a, r.h_a, r.s_b, r.u_b, r.h_b, r.ds(), r.du(), r.dh());
        out << line;
    }
    return out.str();
}

TransferResult cmd_transfer_attrs(const TransferAttrsOptions& opt) {
    if (opt.out_dir.empty()) throw ValidationError("output directory is empty");
    if (opt.per_class < 1) throw ValidationError("per_class must be positive");
    const FeatureDataset source = load_dataset(opt.source);
    const FeatureDataset target = load_dataset(opt.target);
    const GanModel gan = load_gan(opt.gan);
    if (gan.embedding_dim() != target.embedding_dim() || gan.feature_dim() != target.feature_dim())
        throw ValidationError("dimension mismatch between generator checkpoint and target dataset");

    std::vector<int> classes = opt.classes;
    if (classes.empty())
        for (int y = 0; y < target.num_classes(); ++y) classes.push_back(y);
    for (int y : classes)
        if (y < 0 || y >= target.num_classes()) throw ValidationError("class out of range: " + std::to_string(y));
    if (std::set<int>(classes.begin(), classes.end()).size() != classes.size())
        throw ValidationError("--classes lists a class twice");

    // Generated rows only: the target's real features are never touched.
    // The transfer sees just the requested classes, relabelled 0..k-1.
    FeatureDataset synth = synthesize(gan, target, classes, opt.per_class, opt.transfer.seed);
    const Matrix all_vectors = to_double(target.embeddings);
    Matrix vectors(static_cast<Eigen::Index>(classes.size()), all_vectors.cols());
    std::vector<int> local(static_cast<std::size_t>(target.num_classes()), -1);
    for (std::size_t k = 0; k < classes.size(); ++k) {
        vectors.row(static_cast<Eigen::Index>(k)) = all_vectors.row(classes[k]);
        local[static_cast<std::size_t>(classes[k])] = static_cast<int>(k);
    }
    for (int& y : synth.labels) y = local[static_cast<std::size_t>(y)];
    const TransferResult res = transfer_attributes(source, vectors, synth, opt.transfer);

    const auto dm = res.attributes.cols();
    Matrix table = Matrix::Zero(target.num_classes(), dm);
    for (std::size_t k = 0; k < classes.size(); ++k) table.row(classes[k]) = res.attributes.row(static_cast<Eigen::Index>(k));
    std::filesystem::create_directories(opt.out_dir);
    const FeatureMatrix f = to_float(table);
    io::write_f32(opt.out_dir / "attributes.f32", std::vector<float>(f.data(), f.data() + f.size()));
    ordered_json meta;
    meta["rows"] = target.num_classes();
    meta["cols"] = dm;
    meta["classes"] = classes;
    meta["validation_mse"] = res.validation_mse;
    meta["best_epoch"] = res.best_epoch;
    io::write_json(opt.out_dir / "transfer.json", meta);
    return res;
}

// ---------------------------------------------------------------------------
// Entry point

int run_cli(int argc, char** argv) {
    CLI::App app{"Generalized zero-shot learning with an out-of-distribution detector"};
    app.require_subcommand(1);

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "Write a synthetic benchmark dataset");
    std::string synth_config, synth_out;
    std::optional<int> n_classes, d_feature, d_embedding, per_class, rank;
    std::optional<double> spread, noise;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--config", synth_config, "JSON file with benchmark settings")->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output dataset directory")->required();
    synth->add_option("--num-classes", n_classes);
    synth->add_option("--dim-feature", d_feature);
    synth->add_option("--dim-embedding", d_embedding);
    synth->add_option("--samples-per-class", per_class);
    synth->add_option("--cluster-spread", spread);
    synth->add_option("--embedding-noise", noise);
    synth->add_option("--embedding-rank", rank);
    synth->add_option("--seed", synth_seed);

    // run
    auto* run = app.add_subcommand("run", "Run the multi-split protocol");
    std::string run_config, run_dataset, run_out, run_embedding, run_transferred;
    bool run_synthetic = false;
    std::optional<int> run_num_seen, run_runs, run_threads, run_gan_epochs;
    std::optional<std::uint64_t> run_seed;
    std::vector<std::string> run_methods, run_sets;
    run->add_option("--config", run_config, "JSON experiment config")->check(CLI::ExistingFile);
    run->add_option("--dataset", run_dataset, "Dataset directory");
    run->add_flag("--synthetic", run_synthetic, "Use the default synthetic benchmark");
    run->add_option("--embedding", run_embedding, "primary, manual or transferred");
    run->add_option("--transferred-embeddings", run_transferred, "attributes.f32 from transfer-attrs");
    run->add_option("--num-seen", run_num_seen);
    run->add_option("--runs", run_runs, "Number of random splits (R)");
    run->add_option("--seed", run_seed, "First split seed");
    run->add_option("--method", run_methods, "CEWGAN-OD, CEWGAN or CEWGAN-OD_bin (repeatable)");
    run->add_option("--threads", run_threads);
    run->add_option("--gan-epochs", run_gan_epochs);
    run->add_option("--output-dir", run_out, "Defaults to $GZSL_OUTPUT_ROOT or ./runs");
    run->add_option("--set", run_sets, "Override a config key, e.g. --set gan.lr=0.0005 (repeatable)");

    // compare
    auto* compare = app.add_subcommand("compare", "Compare two report.json files");
    std::string report_a, report_b, compare_csv_path;
    compare->add_option("report_a", report_a)->required()->check(CLI::ExistingFile);
    compare->add_option("report_b", report_b)->required()->check(CLI::ExistingFile);
    compare->add_option("--csv", compare_csv_path, "Also write the table as CSV");

    // transfer-attrs
    auto* transfer = app.add_subcommand("transfer-attrs", "Predict manual attributes from word vectors");
    TransferAttrsOptions topt;
    std::string t_source, t_target, t_gan, t_out;
    transfer->add_option("--source", t_source, "Dataset with both embedding tables")->required();
    transfer->add_option("--target", t_target, "Dataset whose embeddings are word vectors")->required();
    transfer->add_option("--gan", t_gan, "GAN checkpoint trained on the target")->required();
    transfer->add_option("--classes", topt.classes, "Target classes (default: all)");
    transfer->add_option("--per-class", topt.per_class);
    transfer->add_option("--hidden", topt.transfer.hidden);
    transfer->add_option("--epochs", topt.transfer.epochs);
    transfer->add_option("--lr", topt.transfer.lr);
    transfer->add_option("--seed", topt.transfer.seed);
    transfer->add_option("--out", t_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            json j = json::object();
            if (!synth_config.empty()) j = io::read_json(synth_config);
            if (n_classes) j["num_classes"] = *n_classes;
            if (d_feature) j["dim_feature"] = *d_feature;
            if (d_embedding) j["dim_embedding"] = *d_embedding;
            if (per_class) j["samples_per_class"] = *per_class;
            if (spread) j["cluster_spread"] = *spread;
            if (noise) j["embedding_noise"] = *noise;
            if (rank) j["embedding_rank"] = *rank;
            if (synth_seed) j["seed"] = *synth_seed;
            cmd_synth_data(synthetic_from_json(j), synth_out);
            std::cout << "wrote " << synth_out << "\n";
        } else if (*run) {
            json j = json::object();
            if (!run_config.empty()) j = io::read_json(run_config);
            if (!j.is_object()) throw ValidationError("config: expected a JSON object");
            // Flags win over the file.
            if (!run_dataset.empty()) {
                j["dataset"] = run_dataset;
                j.erase("synthetic");
            }
            if (run_synthetic) {
                if (!j.contains("synthetic")) j["synthetic"] = json::object();
                j.erase("dataset");
            }
            if (!run_embedding.empty()) j["embedding_choice"] = run_embedding;
            if (!run_transferred.empty()) j["transferred_embeddings"] = run_transferred;
            if (run_num_seen) j["num_seen"] = *run_num_seen;
            if (run_runs) j["runs"] = *run_runs;
            if (run_seed) j["seed"] = *run_seed;
            if (!run_methods.empty()) j["method"] = run_methods;
            if (run_threads) j["threads"] = *run_threads;
            if (run_gan_epochs) j["gan"]["epochs"] = *run_gan_epochs;
            if (!run_out.empty()) j["output_dir"] = run_out;
            for (const std::string& s : run_sets) apply_override(j, s);
            ExperimentConfig cfg = experiment_from_json(j);
            if (cfg.output_dir.empty()) cfg.output_dir = default_output_root();
            const std::vector<AggregateReport> reports = cmd_run(cfg);
            for (const AggregateReport& r : reports) {
                const auto& m = r.metrics;
                std::printf("%-14s s=%6.2f u=%6.2f H=%6.2f (R=%zu)\n", to_string(r.method).c_str(), m.at("s").mean,
                            m.at("u").mean, m.at("H").mean, r.runs.size());
            }
            std::cout << "report: " << (cfg.output_dir / "report.json").string() << "\n";
        } else if (*compare) {
            const std::vector<CompareRow> rows = cmd_compare(io::read_json(report_a), io::read_json(report_b));
            std::cout << compare_text(rows);
            if (!compare_csv_path.empty()) io::write_text(compare_csv_path, compare_csv(rows));
        } else if (*transfer) {
            topt.source = t_source;
            topt.target = t_target;
            topt.gan = t_gan;
            topt.out_dir = t_out;
            const TransferResult res = cmd_transfer_attrs(topt);
            std::cout << "validation mse " << res.validation_mse << " at epoch " << res.best_epoch << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace gzsl
