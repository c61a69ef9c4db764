#include "malgraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

namespace malgraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int ClassTable::class_of(const Label& label) const {
    for (const auto& row : rows) {
        if (row.family != label.family) continue;
        if (std::find(row.types.begin(), row.types.end(), label.type) != row.types.end()) {
            return row.class_id;
        }
    }
    return -1;
}

void ClassTable::validate() const {
    if (rows.size() < 2) throw ConfigError("class table needs at least 2 classes");
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].class_id != static_cast<int>(i)) {
            throw ConfigError("class table ids must be 0..k-1 in order");
        }
        if (rows[i].types.empty()) throw ConfigError("class table row has no types");
        for (const auto& t : rows[i].types) {
            if (!seen.insert({rows[i].family, t}).second) {
                throw ConfigError("class table has overlapping (family, type) rows: " +
                                  rows[i].family + "/" + t);
            }
        }
    }
}

std::string ClassTable::to_json() const {
    ordered_json out;
    ordered_json rows_json = ordered_json::array();
    for (const auto& row : rows) {
        ordered_json jr;
        jr["class_id"] = row.class_id;
        jr["family"] = row.family;
        jr["types"] = row.types;
        rows_json.push_back(jr);
    }
    out["classes"] = rows_json;
    return out.dump(2) + "\n";
}

ClassTable ClassTable::from_json(const std::string& text) {
    const json obj = json::parse(text);
    ClassTable table;
    for (const auto& jr : obj.at("classes")) {
        ClassRow row;
        row.class_id = jr.at("class_id").get<int>();
        row.family = jr.at("family").get<std::string>();
        row.types = jr.at("types").get<std::vector<std::string>>();
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const ClassRow& a, const ClassRow& b) { return a.class_id < b.class_id; });
    table.validate();
    return table;
}

ClassTable derive_class_table(const std::vector<Label>& labels) {
    std::map<std::string, std::set<std::string>> families;
    for (const auto& label : labels) families[label.family].insert(label.type);
    ClassTable table;
    int id = 0;
    for (const auto& [family, types] : families) {
        ClassRow row;
        row.class_id = id++;
        row.family = family;
        row.types.assign(types.begin(), types.end());
        table.rows.push_back(std::move(row));
    }
    table.validate();
    return table;
}

int Dataset::width() const {
    if (samples.empty()) throw ValidationError("dataset is empty");
    const int d = samples.front().graph.schema.dim;
    for (const auto& s : samples) {
        if (s.graph.schema.dim != d) {
            throw ValidationError("width mismatch across samples: " + s.graph.sample_id + " has " +
                                  std::to_string(s.graph.schema.dim) + " columns, expected " +
                                  std::to_string(d));
        }
    }
    return d;
}

DataSplit stratified_split(const Dataset& data, double train_frac, double val_frac,
                           std::uint64_t seed) {
    if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw ConfigError("bad split fractions");
    }
    std::map<int, std::vector<int>> by_class;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        by_class[data.samples[i].label].push_back(static_cast<int>(i));
    }
    DataSplit split;
    Rng rng(seed);
    for (auto& [cls, indices] : by_class) {
        rng.shuffle(indices);
        const auto n = indices.size();
        const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
        const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
        for (std::size_t k = 0; k < n; ++k) {
            if (k < n_train) split.train.push_back(indices[k]);
            else if (k < n_train + n_val) split.val.push_back(indices[k]);
            else split.test.push_back(indices[k]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

void TrainConfig::validate() const {
    std::vector<std::string> problems;
    if (epochs < 0) problems.push_back("epochs must be >= 0");
    if (batch_size < 1) problems.push_back("batch_size must be >= 1");
    if (lr <= 0.0) problems.push_back("lr must be positive");
    if (optimizer != "adam" && optimizer != "sgd") problems.push_back("optimizer must be adam or sgd");
    if (early_stop_patience < 0) problems.push_back("early_stop_patience must be >= 0");
    if (!problems.empty()) {
        std::string msg = "invalid train config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::string TrainHistory::to_json() const {
    ordered_json out;
    ordered_json epochs_json = ordered_json::array();
    for (const auto& e : epochs) {
        ordered_json je;
        je["epoch"] = e.epoch;
        je["train_loss"] = e.train_loss;
        je["val_accuracy"] = e.val_accuracy;
        epochs_json.push_back(je);
    }
    out["epochs"] = epochs_json;
    out["best_epoch"] = best_epoch;
    out["best_val_accuracy"] = best_val_accuracy;
    return out.dump(2) + "\n";
}

std::string EvalReport::to_json() const {
    ordered_json out;
    out["accuracy"] = accuracy;
    out["per_class_accuracy"] = per_class_accuracy;
    out["macro_f1"] = macro_f1;
    out["confusion"] = confusion;
    out["n_samples"] = n_samples;
    return out.dump(2) + "\n";
}

int argmax_row(const double* row, int count) {
    int best = 0;
    for (int j = 1; j < count; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

EvalReport report_from_predictions(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int num_classes) {
    if (predictions.size() != labels.size()) {
        throw ValidationError("report: prediction/label count mismatch");
    }
    EvalReport report;
    report.n_samples = static_cast<std::int64_t>(labels.size());
    report.predictions = predictions;
    report.confusion.assign(static_cast<std::size_t>(num_classes),
                            std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        report.confusion[labels[i]][predictions[i]] += 1;
        if (labels[i] == predictions[i]) ++correct;
    }
    report.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());

    report.per_class_accuracy.assign(static_cast<std::size_t>(num_classes), 0.0);
    double f1_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        std::int64_t support = 0, predicted = 0;
        for (int j = 0; j < num_classes; ++j) {
            support += report.confusion[c][j];
            predicted += report.confusion[j][c];
        }
        const std::int64_t tp = report.confusion[c][c];
        report.per_class_accuracy[c] =
            support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(support);
        const std::int64_t denom = support + predicted;
        f1_sum += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    report.macro_f1 = num_classes == 0 ? 0.0 : f1_sum / num_classes;
    return report;
}

EvalReport evaluate(ModelState& model, const Dataset& data, const std::vector<int>& indices,
                    int batch_size) {
    std::vector<int> predictions;
    std::vector<int> labels;
    predictions.reserve(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<const AttributedGraph*> batch;
        for (std::size_t k = start; k < end; ++k) batch.push_back(&data.samples[indices[k]].graph);
        const Tensor logits = eval_logits(model, batch);
        for (std::size_t k = start; k < end; ++k) {
            const auto row = static_cast<int>(k - start);
            predictions.push_back(
                argmax_row(logits.v.data() + static_cast<std::size_t>(row) * logits.cols(), logits.cols()));
            labels.push_back(data.samples[indices[k]].label);
        }
    }
    return report_from_predictions(predictions, labels, model.config.classes);
}

EvalReport evaluate_all(ModelState& model, const Dataset& data, int batch_size) {
    std::vector<int> indices(data.samples.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    return evaluate(model, data, indices, batch_size);
}

namespace {

// Deep parameter copy for best-epoch snapshots.
ParamSet clone_params(const ParamSet& params) {
    ParamSet out;
    for (const auto& name : params.order()) {
        const ParamEntry& entry = params.at(name);
        out.add(name, entry.value, entry.trainable);
    }
    out.set_step_count(params.step_count());
    return out;
}

ModelState run_training(ModelState state, const Dataset& data, const DataSplit& split,
                        const TrainConfig& config, TrainHistory* history) {
    config.validate();
    if (split.train.empty()) throw ValidationError("train split is empty");
    const int width = data.width();
    if (width != state.config.input_dim) {
        throw ValidationError("width mismatch: dataset has " + std::to_string(width) +
                              " columns, model expects " + std::to_string(state.config.input_dim));
    }
    for (const auto& s : data.samples) {
        if (s.label < 0 || s.label >= state.config.classes) {
            throw ValidationError("sample " + s.graph.sample_id + " has label outside model classes");
        }
    }

    state.params.reset_optimizer_state();
    Rng shuffle_rng(config.seed * 0x9e3779b97f4a7c15ULL + 1);
    Rng dropout_rng(config.seed * 0x9e3779b97f4a7c15ULL + 2);

    TrainHistory local_history;
    TrainHistory& hist = history ? *history : local_history;
    hist = TrainHistory{};

    ParamSet best = clone_params(state.params);
    int best_epoch = -1;
    double best_val = -1.0;

    std::vector<int> order = split.train;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::int64_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const AttributedGraph*> batch;
            std::vector<int> labels;
            for (std::size_t k = start; k < end; ++k) {
                batch.push_back(&data.samples[order[k]].graph);
                labels.push_back(data.samples[order[k]].label);
            }
            ForwardPass pass = model_forward(state, batch, RunMode::kTrain, &dropout_rng);
            const Tape::Var loss = pass.tape.softmax_cross_entropy(pass.logits, labels);
            pass.tape.backward(loss);

            GradMap grads;
            for (const auto& [name, var] : pass.params) {
                if (pass.tape.requires_grad(var)) grads.emplace(name, pass.tape.grad(var));
            }
            if (config.optimizer == "adam") {
                adam_step(state.params, grads, config.lr);
            } else {
                sgd_step(state.params, grads, config.lr);
            }
            loss_sum += pass.tape.value(loss).v[0] * static_cast<double>(end - start);
            seen += static_cast<std::int64_t>(end - start);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(seen);
        if (!split.val.empty()) {
            stats.val_accuracy = evaluate(state, data, split.val).accuracy;
        } else {
            stats.val_accuracy = 0.0;
        }
        hist.epochs.push_back(stats);

        // Strictly-greater keeps the earlier epoch on ties.
        if (stats.val_accuracy > best_val) {
            best_val = stats.val_accuracy;
            best_epoch = epoch;
            best = clone_params(state.params);
        }
        if (config.early_stop_patience > 0 && epoch - best_epoch >= config.early_stop_patience) break;
    }

    hist.best_epoch = best_epoch;
    hist.best_val_accuracy = best_val < 0.0 ? 0.0 : best_val;
    if (best_epoch >= 0 && !split.val.empty()) {
        state.params = std::move(best);
    }
    return state;
}

}  // namespace

ModelState train_upstream(const Dataset& data, const DataSplit& split, const ModelConfig& model_config,
                          const TrainConfig& train_config, TrainHistory* history) {
    if (train_config.epochs < 1) throw ConfigError("train_upstream: epochs must be >= 1");
    ModelState state = init_model(model_config, train_config.seed);
    return run_training(std::move(state), data, split, train_config, history);
}

ModelState train_from(ModelState start, const Dataset& data, const DataSplit& split,
                      const TrainConfig& train_config, TrainHistory* history) {
    return run_training(std::move(start), data, split, train_config, history);
}

}  // namespace malgraph
