#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "malgraph/autodiff.hpp"
#include "malgraph/optim.hpp"
#include "malgraph/types.hpp"

namespace malgraph {

enum class Backbone { kGcn, kGin };
enum class NormKind { kBatch, kNone };
enum class Readout { kMax, kMean };

const char* backbone_name(Backbone b);
Backbone backbone_from_name(const std::string& name);
const char* norm_name(NormKind n);
NormKind norm_from_name(const std::string& name);
const char* readout_name(Readout r);
Readout readout_from_name(const std::string& name);

struct ModelConfig {
    Backbone backbone = Backbone::kGin;
    int layers = 3;
    int hidden = 64;
    int input_dim = 0;
    int classes = 0;
    double gin_epsilon = 0.0;
    NormKind norm = NormKind::kBatch;
    double dropout = 0.0;
    bool symmetric = true;       // propagate over sym(A); false uses A as-is
    Readout readout = Readout::kMax;  // mean is available for ablation

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

// Parameters plus norm running statistics; every shape is derivable from the
// config alone.
struct ModelState {
    ModelConfig config;
    ParamSet params;
};

ModelState init_model(const ModelConfig& config, std::uint64_t seed);

// Replaces the classifier head (used when adapting to a new label set).
void reinit_classifier(ModelState& state, int classes, std::uint64_t seed);

enum class RunMode {
    kTrain,      // batch-norm batch stats + running update, dropout active
    kEval,       // frozen statistics, no dropout
    kTentAdapt,  // batch-norm batch stats, running stats untouched, no dropout
};

// One forward evaluation over a disjoint-union batch. The tape stays alive so
// a caller can attach a loss and run backward; `params` maps parameter names
// to their leaf vars for gradient readout.
struct ForwardPass {
    Tape tape;
    Tape::Var embeddings;  // graphs x hidden, pre-classifier readout
    Tape::Var logits;      // graphs x classes
    std::map<std::string, Tape::Var> params;
};

// grad_filter: when non-null, only the named parameters track gradients.
ForwardPass model_forward(ModelState& state, const std::vector<const AttributedGraph*>& batch,
                          RunMode mode, Rng* dropout_rng = nullptr,
                          const std::set<std::string>* grad_filter = nullptr);

Tensor eval_logits(ModelState& state, const std::vector<const AttributedGraph*>& batch);
Tensor eval_embeddings(ModelState& state, const std::vector<const AttributedGraph*>& batch);

// Symmetric 0/1 view of the batch adjacency (self-loops kept as given).
SparseMatrix adjacency01(std::int32_t n, const std::vector<Edge>& edges, bool symmetric);
// D^{-1/2} (sym(A) + I) D^{-1/2}, the GCN propagation operator.
SparseMatrix gcn_propagation(std::int32_t n, const std::vector<Edge>& edges, bool symmetric);

// Checkpoint directory: manifest.json + params.bin (concatenated f64le).
void save_checkpoint(const ModelState& state, const std::filesystem::path& dir);
ModelState load_checkpoint(const std::filesystem::path& dir);

}  // namespace malgraph
