// malgraph command line: synth -> extract -> collate -> split -> train ->
// eval -> adapt -> report. Every subcommand writes its resolved config and a
// manifest with config/input hashes next to its outputs, and emits a
// machine-readable error object on stderr when it fails.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "malgraph/adapt.hpp"
#include "malgraph/bench.hpp"
#include "malgraph/collate.hpp"
#include "malgraph/common.hpp"
#include "malgraph/features.hpp"
#include "malgraph/gnn.hpp"
#include "malgraph/io.hpp"
#include "malgraph/pipeline.hpp"
#include "malgraph/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using namespace malgraph;

namespace {

std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

// Config section parsing. Unknown keys are rejected; every violation is
// collected so one run reports them all.

struct RunConfig {
    std::uint64_t seed = 0;
    FeatureConfig features{true, false, true};
    int workers = 1;
    CollationScheme scheme = CollationScheme::kZero;
    ModelConfig model;
    TrainConfig train;
    double train_frac = 0.7;
    double val_frac = 0.1;
    AdaptConfig adapt;
    SyntheticConfig synth;
    std::string raw;  // resolved text, logged and hashed
};

void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed,
                std::vector<std::string>& problems) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            problems.push_back("unknown key '" + (section.empty() ? it.key() : section + "." + it.key()) +
                               "'");
        }
    }
}

FeatureConfig parse_feature_list(const std::vector<std::string>& names) {
    FeatureConfig config{false, false, false};
    for (const auto& name : names) {
        if (name == "meta") config.meta = true;
        else if (name == "llm") config.llm = true;
        else if (name == "ldp") config.ldp = true;
        else throw ConfigError("unknown feature family '" + name + "' (expected meta|llm|ldp)");
    }
    if (!config.meta && !config.llm && !config.ldp) throw ConfigError("empty feature selection");
    return config;
}

RunConfig parse_run_config(const std::string& text) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig config;
    std::vector<std::string> problems;
    check_keys(obj, "", {"seed", "extract", "collate", "model", "train", "adapt", "bench", "io"},
               problems);

    const auto get = [&](const json& section, const char* sec_name, const char* key, auto& into) {
        if (!section.contains(key)) return;
        try {
            into = section.at(key).get<std::decay_t<decltype(into)>>();
        } catch (const json::exception&) {
            problems.push_back(std::string("bad value for '") + sec_name + "." + key + "'");
        }
    };

    if (obj.contains("seed")) get(obj, "", "seed", config.seed);
    if (obj.contains("extract")) {
        const json& sec = obj.at("extract");
        check_keys(sec, "extract", {"features", "workers"}, problems);
        if (sec.contains("features")) {
            try {
                config.features = parse_feature_list(sec.at("features").get<std::vector<std::string>>());
            } catch (const Error& e) {
                problems.push_back(e.what());
            } catch (const json::exception&) {
                problems.push_back("bad value for 'extract.features'");
            }
        }
        get(sec, "extract", "workers", config.workers);
        if (config.workers < 1) problems.push_back("extract.workers must be >= 1");
    }
    if (obj.contains("collate")) {
        const json& sec = obj.at("collate");
        check_keys(sec, "collate", {"scheme"}, problems);
        if (sec.contains("scheme")) {
            try {
                config.scheme = collation_scheme_from_name(sec.at("scheme").get<std::string>());
            } catch (const Error& e) {
                problems.push_back(e.what());
            }
        }
    }
    if (obj.contains("model")) {
        const json& sec = obj.at("model");
        check_keys(sec, "model",
                   {"backbone", "layers", "hidden", "gin_epsilon", "norm", "dropout", "symmetric",
                    "readout"},
                   problems);
        try {
            if (sec.contains("backbone")) {
                config.model.backbone = backbone_from_name(sec.at("backbone").get<std::string>());
            }
            if (sec.contains("norm")) config.model.norm = norm_from_name(sec.at("norm").get<std::string>());
            if (sec.contains("readout")) {
                config.model.readout = readout_from_name(sec.at("readout").get<std::string>());
            }
        } catch (const Error& e) {
            problems.push_back(e.what());
        }
        get(sec, "model", "layers", config.model.layers);
        get(sec, "model", "hidden", config.model.hidden);
        get(sec, "model", "gin_epsilon", config.model.gin_epsilon);
        get(sec, "model", "dropout", config.model.dropout);
        get(sec, "model", "symmetric", config.model.symmetric);
    }
    if (obj.contains("train")) {
        const json& sec = obj.at("train");
        check_keys(sec, "train",
                   {"epochs", "batch_size", "lr", "optimizer", "early_stop_patience", "train_frac",
                    "val_frac"},
                   problems);
        get(sec, "train", "epochs", config.train.epochs);
        get(sec, "train", "batch_size", config.train.batch_size);
        get(sec, "train", "lr", config.train.lr);
        get(sec, "train", "optimizer", config.train.optimizer);
        get(sec, "train", "early_stop_patience", config.train.early_stop_patience);
        get(sec, "train", "train_frac", config.train_frac);
        get(sec, "train", "val_frac", config.val_frac);
    }
    if (obj.contains("adapt")) {
        const json& sec = obj.at("adapt");
        check_keys(sec, "adapt",
                   {"method", "M", "k", "tent_lr", "tent_steps_per_batch", "tent_batch_size",
                    "finetune_epochs", "finetune_lr", "finetune_batch_size", "reinit_classifier"},
                   problems);
        get(sec, "adapt", "method", config.adapt.method);
        get(sec, "adapt", "M", config.adapt.support_capacity);
        get(sec, "adapt", "k", config.adapt.k);
        get(sec, "adapt", "tent_lr", config.adapt.tent_lr);
        get(sec, "adapt", "tent_steps_per_batch", config.adapt.tent_steps_per_batch);
        get(sec, "adapt", "tent_batch_size", config.adapt.tent_batch_size);
        get(sec, "adapt", "finetune_epochs", config.adapt.finetune_epochs);
        get(sec, "adapt", "finetune_lr", config.adapt.finetune_lr);
        get(sec, "adapt", "finetune_batch_size", config.adapt.finetune_batch_size);
        get(sec, "adapt", "reinit_classifier", config.adapt.reinit_classifier);
    }
    if (obj.contains("bench")) {
        try {
            config.synth = SyntheticConfig::from_json(obj.at("bench").dump());
        } catch (const Error& e) {
            problems.push_back(e.what());
        } catch (const json::exception& e) {
            problems.push_back(std::string("bad bench section: ") + e.what());
        }
    }
    if (obj.contains("io")) {
        // reserved; nothing configurable here yet
        check_keys(obj.at("io"), "io", {}, problems);
    }

    if (!problems.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
    config.train.seed = config.seed;
    config.adapt.seed = config.seed;
    config.raw = text;
    return config;
}

std::string resolved_config_json(const RunConfig& config, const ModelConfig* model) {
    ordered_json out;
    out["seed"] = config.seed;
    ordered_json extract;
    std::vector<std::string> families;
    if (config.features.meta) families.push_back("meta");
    if (config.features.llm) families.push_back("llm");
    if (config.features.ldp) families.push_back("ldp");
    extract["features"] = families;
    extract["workers"] = config.workers;
    out["extract"] = extract;
    out["collate"] = ordered_json{{"scheme", collation_scheme_name(config.scheme)}};
    if (model) out["model"] = json::parse(model->to_json());
    ordered_json train;
    train["epochs"] = config.train.epochs;
    train["batch_size"] = config.train.batch_size;
    train["lr"] = config.train.lr;
    train["optimizer"] = config.train.optimizer;
    train["early_stop_patience"] = config.train.early_stop_patience;
    train["train_frac"] = config.train_frac;
    train["val_frac"] = config.val_frac;
    out["train"] = train;
    ordered_json adapt;
    adapt["method"] = config.adapt.method;
    adapt["M"] = config.adapt.support_capacity;
    adapt["k"] = config.adapt.k;
    adapt["tent_lr"] = config.adapt.tent_lr;
    adapt["tent_steps_per_batch"] = config.adapt.tent_steps_per_batch;
    adapt["tent_batch_size"] = config.adapt.tent_batch_size;
    adapt["finetune_epochs"] = config.adapt.finetune_epochs;
    adapt["finetune_lr"] = config.adapt.finetune_lr;
    adapt["finetune_batch_size"] = config.adapt.finetune_batch_size;
    adapt["reinit_classifier"] = config.adapt.reinit_classifier;
    out["adapt"] = adapt;
    out["bench"] = json::parse(config.synth.to_json());
    return out.dump(2) + "\n";
}

void write_manifest(const fs::path& out_dir, const std::string& command, const std::string& config_text,
                    const std::vector<fs::path>& inputs) {
    ordered_json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = hex64(fnv1a64(config_text));
    ordered_json input_hashes = ordered_json::object();
    for (const auto& input : inputs) {
        fs::path target = input;
        if (fs::is_directory(target)) {
            const fs::path idx = target / kIndexFileName;
            if (!fs::exists(idx)) {
                input_hashes[input.string()] = "directory";
                continue;
            }
            target = idx;
        }
        input_hashes[input.string()] = hex64(hash_file(target));
    }
    manifest["inputs"] = input_hashes;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void log_resolved_config(const fs::path& out_dir, const std::string& text) {
    log_info("resolved config:\n" + text);
    write_text_file(out_dir / "config.json", text);
}

CorpusIndex load_index_arg(const fs::path& arg) {
    if (fs::is_directory(arg)) {
        const fs::path idx = arg / kIndexFileName;
        if (fs::exists(idx)) return corpus_index_from_json(read_text_file(idx));
        return scan_corpus(arg);
    }
    return corpus_index_from_json(read_text_file(arg));
}

std::set<std::string> load_exclude_arg(const fs::path& path) {
    const json obj = json::parse(read_text_file(path));
    std::set<std::string> ids;
    if (obj.is_array()) {
        for (const auto& v : obj) ids.insert(v.get<std::string>());
        return ids;
    }
    if (obj.is_object() && obj.contains("selection")) {
        for (auto it = obj.at("selection").begin(); it != obj.at("selection").end(); ++it) {
            for (const auto& v : it.value()) ids.insert(v.get<std::string>());
        }
        return ids;
    }
    throw ConfigError("--exclude file must be a JSON id array or a split selection");
}

Dataset load_dataset_arg(const fs::path& data_dir, const std::string& split_path) {
    if (split_path.empty()) return load_dataset(data_dir);
    // The selection's class ids are authoritative for the filtered dataset.
    SplitSpec spec;
    const Selection selection = selection_from_json(read_text_file(split_path), &spec);
    Dataset data = load_dataset(data_dir, &selection);
    data.classes = spec.classes;
    return data;
}

void write_report(const fs::path& path, const std::string& name, const std::string& dataset,
                  const std::string& method, std::uint64_t seed, const EvalReport& report) {
    ordered_json out;
    out["name"] = name;
    out["dataset"] = dataset;
    out["method"] = method;
    out["seed"] = seed;
    out["accuracy"] = report.accuracy;
    out["report"] = json::parse(report.to_json());
    write_text_file(path, out.dump(2) + "\n");
    std::cout << name << " on " << dataset << ": accuracy " << report.accuracy << " (n=" << report.n_samples
              << ")\n";
}

int default_workers() {
    if (const char* env = std::getenv("MALGRAPH_WORKERS")) {
        const int w = std::atoi(env);
        if (w >= 1) return w;
    }
    return 1;
}

// --- subcommand bodies -----------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out, int workers) {
    const std::string text = read_text_file(config_path);
    const json obj = json::parse(text);
    SyntheticConfig config = obj.contains("bench") ? SyntheticConfig::from_json(obj.at("bench").dump())
                                                   : SyntheticConfig::from_json(text);
    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    generate_synthetic_corpus(config, out_dir, workers);
    write_text_file(out_dir / "synth_config.json", config.to_json());
    write_manifest(out_dir, "synth", config.to_json(), {config_path});
    log_info("synthetic corpus written to " + out);
    return 0;
}

int cmd_extract(const std::string& corpus, const std::string& out, const std::string& features_csv,
                const std::string& embeddings, int workers) {
    ExtractOptions options;
    std::vector<std::string> names;
    for (std::size_t start = 0; start < features_csv.size();) {
        const auto comma = features_csv.find(',', start);
        const auto end = comma == std::string::npos ? features_csv.size() : comma;
        if (end > start) names.push_back(features_csv.substr(start, end - start));
        start = end + 1;
    }
    options.features = parse_feature_list(names);
    if (!embeddings.empty()) options.embeddings_root = fs::path(embeddings);
    options.workers = workers;

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    extract_corpus(corpus, out_dir, options);

    ordered_json resolved;
    resolved["features"] = names;
    resolved["workers"] = workers;
    resolved["embeddings"] = embeddings;
    log_resolved_config(out_dir, resolved.dump(2) + "\n");
    write_manifest(out_dir, "extract", resolved.dump(), {corpus});
    return 0;
}

int cmd_collate(const std::string& in, const std::string& out, const std::string& scheme_name) {
    const CollationScheme scheme = collation_scheme_from_name(scheme_name);
    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    collate_dataset(in, out_dir, scheme);
    ordered_json resolved;
    resolved["scheme"] = scheme_name;
    log_resolved_config(out_dir, resolved.dump(2) + "\n");
    write_manifest(out_dir, "collate", resolved.dump(), {in});
    return 0;
}

int cmd_split(const std::string& index_arg, const std::string& spec_path, const std::string& out,
              const std::string& exclude_path) {
    const CorpusIndex index = load_index_arg(index_arg);
    const SplitSpec spec = SplitSpec::from_json(read_text_file(spec_path));
    std::set<std::string> exclude;
    if (!exclude_path.empty()) exclude = load_exclude_arg(exclude_path);
    const Selection selection = build_split(index, spec, exclude);
    write_text_file(out, selection_to_json(spec, selection));
    log_info("split written to " + out);
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path, const std::string& out,
              const std::string& split_path, const std::string& name) {
    RunConfig config = parse_run_config(read_text_file(config_path));
    Dataset data = load_dataset_arg(data_dir, split_path);

    ModelConfig model_config = config.model;
    model_config.input_dim = data.width();
    model_config.classes = data.classes.num_classes();
    model_config.validate();

    const DataSplit split = stratified_split(data, config.train_frac, config.val_frac, config.seed);
    TrainHistory history;
    ModelState model = train_upstream(data, split, model_config, config.train, &history);

    const fs::path out_dir(out);
    fs::create_directories(out_dir);
    save_checkpoint(model, out_dir / "checkpoint");
    write_text_file(out_dir / "history.json", history.to_json());
    const EvalReport report = evaluate(model, data, split.test);
    write_report(out_dir / "report.json", name.empty() ? "train" : name, data_dir, "train", config.seed,
                 report);
    log_resolved_config(out_dir, resolved_config_json(config, &model_config));
    write_manifest(out_dir, "train", config.raw, {data_dir, config_path});
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& report_path,
             const std::string& split_path, const std::string& name) {
    ModelState model = load_checkpoint(ckpt);
    Dataset data = load_dataset_arg(data_dir, split_path);
    const EvalReport report = evaluate_all(model, data);
    if (!report_path.empty()) {
        write_report(report_path, name.empty() ? "eval" : name, data_dir, "eval", 0, report);
    } else {
        std::cout << report.to_json();
    }
    return 0;
}

int cmd_adapt(const std::string& ckpt, const std::string& data_dir, const std::string& config_path,
              const std::string& method_flag, const std::string& out, const std::string& split_path,
              const std::string& name) {
    RunConfig config = parse_run_config(read_text_file(config_path));
    if (!method_flag.empty()) config.adapt.method = method_flag;
    config.adapt.validate();
    const std::string& method = config.adapt.method;

    ModelState source = load_checkpoint(ckpt);
    Dataset data = load_dataset_arg(data_dir, split_path);

    const fs::path out_dir(out);
    fs::create_directories(out_dir);

    EvalReport report;
    if (method == "t3a") {
        T3aPredictor predictor(source, config.adapt.support_capacity);
        std::vector<const AttributedGraph*> stream;
        std::vector<int> labels;
        for (const auto& s : data.samples) {
            stream.push_back(&s.graph);
            labels.push_back(s.label);
        }
        const std::vector<int> predictions = predictor.run_stream(stream);
        report = report_from_predictions(predictions, labels, source.config.classes);
        write_text_file(out_dir / "supports.json", predictor.supports_json());
    } else if (method == "tent") {
        std::vector<const AttributedGraph*> stream;
        std::vector<int> labels;
        for (const auto& s : data.samples) {
            stream.push_back(&s.graph);
            labels.push_back(s.label);
        }
        TentResult result = tent_adapt(source, stream, config.adapt.tent_batch_size,
                                       config.adapt.tent_lr, config.adapt.tent_steps_per_batch);
        report = report_from_predictions(result.predictions, labels, source.config.classes);
        save_checkpoint(result.model, out_dir / "checkpoint");
    } else if (method == "knn") {
        const DataSplit split = stratified_split(data, config.train_frac, config.val_frac, config.seed);
        std::vector<int> fit = split.train;
        fit.insert(fit.end(), split.val.begin(), split.val.end());
        std::sort(fit.begin(), fit.end());
        const KnnProbe probe = knn_fit(source, data, fit, config.adapt.k);
        report = knn_evaluate(source, probe, data, split.test);
    } else {  // finetune
        const DataSplit split = stratified_split(data, config.train_frac, config.val_frac, config.seed);
        FinetuneConfig fc;
        fc.epochs = config.adapt.finetune_epochs;
        fc.lr = config.adapt.finetune_lr;
        fc.batch_size = config.adapt.finetune_batch_size;
        fc.reinit_classifier = config.adapt.reinit_classifier;
        fc.seed = config.seed;
        TrainHistory history;
        ModelState adapted = finetune(source, data, split, fc, &history);
        save_checkpoint(adapted, out_dir / "checkpoint");
        write_text_file(out_dir / "history.json", history.to_json());
        report = evaluate(adapted, data, split.test);
    }

    write_report(out_dir / "report.json", name.empty() ? method : name, data_dir, method, config.seed,
                 report);
    log_resolved_config(out_dir, resolved_config_json(config, nullptr));
    write_manifest(out_dir, "adapt", config.raw, {data_dir, config_path, ckpt});
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs) {
    struct Cell {
        std::vector<double> accuracies;
    };
    std::map<std::string, std::map<std::string, Cell>> table;  // name -> dataset -> accs
    std::set<std::string> datasets;
    for (const auto& dir : run_dirs) {
        const json obj = json::parse(read_text_file(fs::path(dir) / "report.json"));
        const std::string name = obj.at("name").get<std::string>();
        const std::string dataset = obj.at("dataset").get<std::string>();
        table[name][dataset].accuracies.push_back(obj.at("accuracy").get<double>());
        datasets.insert(dataset);
    }

    std::cout << "method";
    for (const auto& d : datasets) std::cout << "\t" << d;
    std::cout << "\n";
    for (const auto& [name, row] : table) {
        std::cout << name;
        for (const auto& d : datasets) {
            const auto it = row.find(d);
            if (it == row.end()) {
                std::cout << "\t-";
                continue;
            }
            const auto& accs = it->second.accuracies;
            double mean = 0.0;
            for (const double a : accs) mean += a;
            mean /= static_cast<double>(accs.size());
            double var = 0.0;
            for (const double a : accs) var += (a - mean) * (a - mean);
            var /= static_cast<double>(accs.size());
            char cell[64];
            // Percent with the std as a subscript, the paper-table convention.
            std::snprintf(cell, sizeof(cell), "%.1f_%.2f", 100.0 * mean, 100.0 * std::sqrt(var));
            std::cout << "\t" << cell;
        }
        std::cout << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attributed function-call-graph pipeline"};
    app.require_subcommand(1);

    std::string arg_corpus, arg_out, arg_in, arg_features = "meta,ldp", arg_embeddings;
    std::string arg_scheme, arg_index, arg_spec, arg_exclude, arg_data, arg_config, arg_ckpt;
    std::string arg_report, arg_split, arg_method, arg_name;
    int arg_workers = default_workers();
    std::vector<std::string> arg_run_dirs;

    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    synth->add_option("config", arg_config, "synthetic config JSON")->required();
    synth->add_option("out", arg_out, "output corpus directory")->required();
    synth->add_option("--workers", arg_workers, "parallel workers");

    auto* extract = app.add_subcommand("extract", "extract node features for a corpus");
    extract->add_option("corpus", arg_corpus, "corpus directory")->required();
    extract->add_option("out", arg_out, "output dataset directory")->required();
    extract->add_option("--features", arg_features, "comma list of meta,llm,ldp");
    extract->add_option("--embeddings", arg_embeddings, "embedding root (defaults to corpus)");
    extract->add_option("--workers", arg_workers, "parallel workers");

    auto* collate_cmd = app.add_subcommand("collate", "collate a dataset (trim|zero|prune)");
    collate_cmd->add_option("in", arg_in, "extracted dataset directory")->required();
    collate_cmd->add_option("out", arg_out, "output dataset directory")->required();
    collate_cmd->add_option("--scheme", arg_scheme, "trim|zero|prune")->required();

    auto* split_cmd = app.add_subcommand("split", "build a benchmark split");
    split_cmd->add_option("index", arg_index, "corpus/dataset dir or index.json")->required();
    split_cmd->add_option("spec", arg_spec, "split spec JSON")->required();
    split_cmd->add_option("out", arg_out, "output selection JSON path")->required();
    split_cmd->add_option("--exclude", arg_exclude, "id list or selection JSON to exclude");

    auto* train_cmd = app.add_subcommand("train", "train an upstream model");
    train_cmd->add_option("data", arg_data, "collated dataset directory")->required();
    train_cmd->add_option("config", arg_config, "run config JSON")->required();
    train_cmd->add_option("out", arg_out, "output run directory")->required();
    train_cmd->add_option("--split", arg_split, "restrict to a split selection JSON");
    train_cmd->add_option("--name", arg_name, "report row name");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("ckpt", arg_ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("data", arg_data, "collated dataset directory")->required();
    eval_cmd->add_option("--report", arg_report, "write report JSON here");
    eval_cmd->add_option("--split", arg_split, "restrict to a split selection JSON");
    eval_cmd->add_option("--name", arg_name, "report row name");

    auto* adapt_cmd = app.add_subcommand("adapt", "adapt a checkpoint to target data");
    adapt_cmd->add_option("ckpt", arg_ckpt, "source checkpoint directory")->required();
    adapt_cmd->add_option("data", arg_data, "target dataset directory")->required();
    adapt_cmd->add_option("config", arg_config, "run config JSON")->required();
    adapt_cmd->add_option("--method", arg_method, "t3a|tent|knn|finetune (overrides config)");
    adapt_cmd->add_option("--out", arg_out, "output run directory")->required();
    adapt_cmd->add_option("--split", arg_split, "restrict to a split selection JSON");
    adapt_cmd->add_option("--name", arg_name, "report row name");

    auto* report_cmd = app.add_subcommand("report", "aggregate run reports into a table");
    report_cmd->add_option("runs", arg_run_dirs, "run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(arg_config, arg_out, arg_workers);
        if (extract->parsed()) {
            return cmd_extract(arg_corpus, arg_out, arg_features, arg_embeddings, arg_workers);
        }
        if (collate_cmd->parsed()) return cmd_collate(arg_in, arg_out, arg_scheme);
        if (split_cmd->parsed()) return cmd_split(arg_index, arg_spec, arg_out, arg_exclude);
        if (train_cmd->parsed()) return cmd_train(arg_data, arg_config, arg_out, arg_split, arg_name);
        if (eval_cmd->parsed()) return cmd_eval(arg_ckpt, arg_data, arg_report, arg_split, arg_name);
        if (adapt_cmd->parsed()) {
            return cmd_adapt(arg_ckpt, arg_data, arg_config, arg_method, arg_out, arg_split, arg_name);
        }
        if (report_cmd->parsed()) return cmd_report(arg_run_dirs);
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = ordered_json{{"type", "runtime"}, {"message", e.what()}};
        if (dynamic_cast<const ConfigError*>(&e)) err["error"]["type"] = "config";
        else if (dynamic_cast<const ParseError*>(&e)) err["error"]["type"] = "parse";
        else if (dynamic_cast<const ValidationError*>(&e)) err["error"]["type"] = "validation";
        else if (dynamic_cast<const IoError*>(&e)) err["error"]["type"] = "io";
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
