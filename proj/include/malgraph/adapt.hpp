#pragma once

#include <string>
#include <vector>

#include "malgraph/gnn.hpp"
#include "malgraph/train.hpp"

namespace malgraph {

struct AdaptConfig {
    std::string method = "t3a";  // t3a | tent | knn | finetune
    int support_capacity = 100;  // t3a M
    int k = 5;                   // knn
    double tent_lr = 1e-3;
    int tent_steps_per_batch = 1;
    int tent_batch_size = 32;
    int finetune_epochs = 30;
    double finetune_lr = 1e-3;
    int finetune_batch_size = 32;
    bool reinit_classifier = false;
    std::uint64_t seed = 0;

    void validate() const;
};

// Gradient-free test-time adapter: replaces the linear classifier with
// class prototypes averaged from entropy-filtered support embeddings.
// Prediction for a graph always uses the prototypes from before its own
// insertion, and the backbone is never touched.
class T3aPredictor {
public:
    struct SupportEntry {
        std::vector<double> embedding;
        double entropy = 0.0;
        std::int64_t arrival = 0;  // -1 for classifier-weight warmup entries
    };

    T3aPredictor(ModelState& model, int capacity);

    int predict_and_adapt(const AttributedGraph& graph);
    std::vector<int> run_stream(const std::vector<const AttributedGraph*>& stream);

    const std::vector<std::vector<SupportEntry>>& supports() const { return supports_; }
    std::string supports_json() const;

private:
    int classify(const std::vector<double>& z, std::vector<double>* scores_out) const;
    std::vector<double> prototype(int cls) const;
    void insert(int cls, std::vector<double> z, double entropy);

    ModelState* model_;
    int capacity_;
    std::int64_t arrivals_ = 0;
    std::vector<std::vector<SupportEntry>> supports_;  // ascending entropy; newer first on ties
};

struct TentResult {
    ModelState model;
    std::vector<int> predictions;          // online, one per stream graph
    std::vector<double> batch_entropy;     // loss of the last step per batch
};

// Entropy-minimization TTA: only norm scale/shift move, normalization uses
// current-batch statistics, adaptation is cumulative over the stream.
TentResult tent_adapt(const ModelState& source, const std::vector<const AttributedGraph*>& stream,
                      int batch_size, double lr, int steps_per_batch);

struct KnnProbe {
    int k = 5;
    int classes = 0;
    std::vector<std::vector<double>> embeddings;
    std::vector<int> labels;
};

// Embeds the labeled set with the frozen backbone. k is clamped to the set
// size with a warning.
KnnProbe knn_fit(ModelState& model, const Dataset& data, const std::vector<int>& indices, int k);
int knn_predict(const KnnProbe& probe, const std::vector<double>& embedding);
EvalReport knn_evaluate(ModelState& model, const KnnProbe& probe, const Dataset& data,
                        const std::vector<int>& indices);

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

struct FinetuneConfig {
    int epochs = 30;
    double lr = 1e-3;
    int batch_size = 32;
    bool reinit_classifier = false;
    std::uint64_t seed = 0;
    int early_stop_patience = 0;
};

// Full finetuning on labeled target data. A class-count change requires
// reinit_classifier; with 0 epochs the result is the source model.
ModelState finetune(const ModelState& source, const Dataset& target, const DataSplit& split,
                    const FinetuneConfig& config, TrainHistory* history = nullptr);

// Names of the norm scale/shift parameters (the only ones Tent may change).
std::set<std::string> norm_affine_names(const ModelConfig& config);

}  // namespace malgraph
