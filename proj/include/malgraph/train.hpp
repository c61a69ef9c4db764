#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "malgraph/gnn.hpp"
#include "malgraph/types.hpp"

namespace malgraph {

// class_id -> (family, allowed types). This is the label table: in shifted
// variants the same class id maps to different (family, type) pairs.
struct ClassRow {
    int class_id = 0;
    std::string family;
    std::vector<std::string> types;
};

struct ClassTable {
    std::vector<ClassRow> rows;  // sorted by class_id, ids 0..k-1

    int num_classes() const { return static_cast<int>(rows.size()); }
    int class_of(const Label& label) const;  // -1 when unmapped
    void validate() const;
    std::string to_json() const;
    static ClassTable from_json(const std::string& text);
};

// Derives one class per family, types as observed, families sorted.
ClassTable derive_class_table(const std::vector<Label>& labels);

struct Sample {
    AttributedGraph graph;
    int label = 0;
};

struct Dataset {
    std::vector<Sample> samples;  // sorted by sample_id
    ClassTable classes;

    int width() const;  // common feature width; throws on mismatch
};

struct DataSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

// Stratified by class with seeded shuffling; fractions must sum to 1.
DataSplit stratified_split(const Dataset& data, double train_frac, double val_frac,
                           std::uint64_t seed);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr = 1e-3;
    std::string optimizer = "adam";  // adam | sgd
    std::uint64_t seed = 0;
    int early_stop_patience = 0;  // 0 disables

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_accuracy = 0.0;

    std::string to_json() const;
};

struct EvalReport {
    double accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    double macro_f1 = 0.0;
    std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
    std::int64_t n_samples = 0;
    std::vector<int> predictions;  // aligned with the evaluated list

    std::string to_json() const;
};

// Minimizes mean softmax cross-entropy on the train split and returns the
// parameters of the best-validation-accuracy epoch (ties go to the earlier
// one). Deterministic per seed.
ModelState train_upstream(const Dataset& data, const DataSplit& split, const ModelConfig& model_config,
                          const TrainConfig& train_config, TrainHistory* history = nullptr);

// Continues training an existing model (finetuning); same loop and selection.
ModelState train_from(ModelState start, const Dataset& data, const DataSplit& split,
                      const TrainConfig& train_config, TrainHistory* history = nullptr);

EvalReport evaluate(ModelState& model, const Dataset& data, const std::vector<int>& indices,
                    int batch_size = 64);
EvalReport evaluate_all(ModelState& model, const Dataset& data, int batch_size = 64);

EvalReport report_from_predictions(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int num_classes);

int argmax_row(const double* row, int count);  // lowest index wins ties

}  // namespace malgraph
