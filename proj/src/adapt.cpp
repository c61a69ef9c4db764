#include "malgraph/adapt.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace malgraph {

using ordered_json = nlohmann::ordered_json;

void AdaptConfig::validate() const {
    std::vector<std::string> problems;
    if (method != "t3a" && method != "tent" && method != "knn" && method != "finetune") {
        problems.push_back("method must be one of t3a|tent|knn|finetune");
    }
    if (support_capacity < 1) problems.push_back("support capacity M must be >= 1");
    if (k < 1) problems.push_back("k must be >= 1");
    if (tent_lr <= 0.0) problems.push_back("tent_lr must be positive");
    if (tent_steps_per_batch < 1) problems.push_back("tent_steps_per_batch must be >= 1");
    if (tent_batch_size < 1) problems.push_back("tent_batch_size must be >= 1");
    if (finetune_epochs < 0) problems.push_back("finetune_epochs must be >= 0");
    if (finetune_lr <= 0.0) problems.push_back("finetune_lr must be positive");
    if (finetune_batch_size < 1) problems.push_back("finetune_batch_size must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid adapt config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

namespace {

double vec_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x * x;
    return std::sqrt(s);
}

double vec_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double entropy_nats(const std::vector<double>& probs) {
    double h = 0.0;
    for (const double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

}  // namespace

T3aPredictor::T3aPredictor(ModelState& model, int capacity) : model_(&model), capacity_(capacity) {
    if (capacity < 1) throw ConfigError("t3a: support capacity M must be >= 1");
    const Tensor& w = model.params.at("cls.W").value;  // hidden x classes
    const int hidden = w.rows();
    const int classes = w.cols();
    supports_.resize(static_cast<std::size_t>(classes));

    // Warm-up supports are the classifier weight columns; their entropy is
    // their own prediction entropy under those initial prototypes, so stale
    // warmup entries lose to confident target samples.
    std::vector<std::vector<double>> warm(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        warm[c].resize(static_cast<std::size_t>(hidden));
        for (int j = 0; j < hidden; ++j) warm[c][j] = w.at2(j, c);
    }
    for (int c = 0; c < classes; ++c) {
        supports_[c].push_back(SupportEntry{warm[c], 0.0, -1});
    }
    for (int c = 0; c < classes; ++c) {
        std::vector<double> scores;
        classify(warm[c], &scores);
        supports_[c][0].entropy = entropy_nats(softmax_row(scores.data(), classes));
    }
}

std::vector<double> T3aPredictor::prototype(int cls) const {
    const auto& entries = supports_[cls];
    std::vector<double> p(entries.front().embedding.size(), 0.0);
    for (const auto& e : entries) {
        for (std::size_t j = 0; j < p.size(); ++j) p[j] += e.embedding[j];
    }
    for (double& x : p) x /= static_cast<double>(entries.size());
    return p;
}

int T3aPredictor::classify(const std::vector<double>& z, std::vector<double>* scores_out) const {
    const double zn = vec_norm(z);
    if (zn == 0.0) log_warn("t3a: zero-norm embedding, scoring with unnormalized dot products");
    std::vector<double> zhat = z;
    if (zn > 0.0) {
        for (double& x : zhat) x /= zn;
    }
    const int classes = static_cast<int>(supports_.size());
    std::vector<double> scores(static_cast<std::size_t>(classes), 0.0);
    for (int c = 0; c < classes; ++c) {
        std::vector<double> p = prototype(c);
        const double pn = vec_norm(p);
        if (pn > 0.0) {
            for (double& x : p) x /= pn;
        }
        scores[c] = vec_dot(zhat, p);
    }
    int best = 0;
    for (int c = 1; c < classes; ++c) {
        if (scores[c] > scores[best]) best = c;
    }
    if (scores_out) *scores_out = std::move(scores);
    return best;
}

void T3aPredictor::insert(int cls, std::vector<double> z, double entropy) {
    auto& entries = supports_[cls];
    entries.push_back(SupportEntry{std::move(z), entropy, arrivals_++});
    // Ascending entropy; among equals the newer entry ranks better, so ties
    // evict the older (including warmup) entry first.
    std::stable_sort(entries.begin(), entries.end(), [](const SupportEntry& a, const SupportEntry& b) {
        if (a.entropy != b.entropy) return a.entropy < b.entropy;
        return a.arrival > b.arrival;
    });
    while (static_cast<int>(entries.size()) > capacity_) entries.pop_back();
}

int T3aPredictor::predict_and_adapt(const AttributedGraph& graph) {
    const Tensor emb = eval_embeddings(*model_, {&graph});
    std::vector<double> z(emb.v.begin(), emb.v.end());
    std::vector<double> scores;
    const int predicted = classify(z, &scores);
    const double h = entropy_nats(softmax_row(scores.data(), static_cast<int>(scores.size())));
    insert(predicted, std::move(z), h);
    return predicted;
}

std::vector<int> T3aPredictor::run_stream(const std::vector<const AttributedGraph*>& stream) {
    std::vector<int> predictions;
    predictions.reserve(stream.size());
    for (const AttributedGraph* g : stream) predictions.push_back(predict_and_adapt(*g));
    return predictions;
}

std::string T3aPredictor::supports_json() const {
    ordered_json out;
    ordered_json classes = ordered_json::array();
    for (const auto& entries : supports_) {
        ordered_json list = ordered_json::array();
        for (const auto& e : entries) {
            ordered_json je;
            je["entropy"] = e.entropy;
            je["arrival"] = e.arrival;
            je["embedding"] = e.embedding;
            list.push_back(je);
        }
        classes.push_back(list);
    }
    out["capacity"] = capacity_;
    out["supports"] = classes;
    return out.dump(2) + "\n";
}

std::set<std::string> norm_affine_names(const ModelConfig& config) {
    std::set<std::string> names;
    for (int l = 0; l < config.layers; ++l) {
        names.insert("layer" + std::to_string(l) + ".bn.gamma");
        names.insert("layer" + std::to_string(l) + ".bn.beta");
    }
    return names;
}

TentResult tent_adapt(const ModelState& source, const std::vector<const AttributedGraph*>& stream,
                      int batch_size, double lr, int steps_per_batch) {
    if (source.config.norm != NormKind::kBatch) {
        throw ConfigError("tent requires a model with batch normalization (norm=batch)");
    }
    if (batch_size < 1 || steps_per_batch < 1) throw ConfigError("tent: bad batch/step settings");

    TentResult result;
    result.model = ModelState{source.config, ParamSet{}};
    for (const auto& name : source.params.order()) {
        const ParamEntry& entry = source.params.at(name);
        result.model.params.add(name, entry.value, entry.trainable);
    }
    const std::set<std::string> affine = norm_affine_names(source.config);

    for (std::size_t start = 0; start < stream.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(stream.size(), start + static_cast<std::size_t>(batch_size));
        const std::vector<const AttributedGraph*> batch(stream.begin() + start, stream.begin() + end);
        double last_entropy = 0.0;
        std::vector<int> batch_preds;
        for (int step = 0; step < steps_per_batch; ++step) {
            ForwardPass pass = model_forward(result.model, batch, RunMode::kTentAdapt, nullptr, &affine);
            const Tape::Var loss = pass.tape.mean_entropy(pass.logits);
            pass.tape.backward(loss);
            last_entropy = pass.tape.value(loss).v[0];

            // Predictions come from the forward pass that produced the final
            // update, i.e. before that update lands.
            if (step == steps_per_batch - 1) {
                const Tensor& logits = pass.tape.value(pass.logits);
                batch_preds.clear();
                for (int i = 0; i < logits.rows(); ++i) {
                    batch_preds.push_back(argmax_row(
                        logits.v.data() + static_cast<std::size_t>(i) * logits.cols(), logits.cols()));
                }
            }
            GradMap grads;
            for (const auto& [name, var] : pass.params) {
                if (pass.tape.requires_grad(var)) grads.emplace(name, pass.tape.grad(var));
            }
            adam_step(result.model.params, grads, lr);
        }
        result.batch_entropy.push_back(last_entropy);
        result.predictions.insert(result.predictions.end(), batch_preds.begin(), batch_preds.end());
    }
    return result;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = vec_norm(a);
    const double nb = vec_norm(b);
    if (na == 0.0 || nb == 0.0) return 1.0;  // similarity defined as 0 for zero vectors
    return 1.0 - vec_dot(a, b) / (na * nb);
}

KnnProbe knn_fit(ModelState& model, const Dataset& data, const std::vector<int>& indices, int k) {
    if (indices.empty()) throw ValidationError("knn_fit: empty labeled set");
    KnnProbe probe;
    probe.classes = model.config.classes;
    probe.k = k;
    if (k > static_cast<int>(indices.size())) {
        probe.k = static_cast<int>(indices.size());
        log_warn("knn: k=" + std::to_string(k) + " larger than set size " +
                 std::to_string(indices.size()) + ", clamped");
    }
    for (const int idx : indices) {
        const Tensor emb = eval_embeddings(model, {&data.samples[idx].graph});
        probe.embeddings.emplace_back(emb.v.begin(), emb.v.end());
        probe.labels.push_back(data.samples[idx].label);
    }
    return probe;
}

int knn_predict(const KnnProbe& probe, const std::vector<double>& embedding) {
    struct Neighbor {
        double distance;
        int index;
    };
    std::vector<Neighbor> neighbors;
    neighbors.reserve(probe.embeddings.size());
    for (std::size_t i = 0; i < probe.embeddings.size(); ++i) {
        neighbors.push_back({cosine_distance(embedding, probe.embeddings[i]), static_cast<int>(i)});
    }
    std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });

    std::vector<int> votes(static_cast<std::size_t>(probe.classes), 0);
    for (int i = 0; i < probe.k; ++i) votes[probe.labels[neighbors[i].index]] += 1;
    int best_count = 0;
    for (const int v : votes) best_count = std::max(best_count, v);
    // Majority; ties resolved by the nearest neighbor among the tied classes.
    for (int i = 0; i < probe.k; ++i) {
        const int cls = probe.labels[neighbors[i].index];
        if (votes[cls] == best_count) return cls;
    }
    return probe.labels[neighbors[0].index];
}

EvalReport knn_evaluate(ModelState& model, const KnnProbe& probe, const Dataset& data,
                        const std::vector<int>& indices) {
    std::vector<int> predictions;
    std::vector<int> labels;
    for (const int idx : indices) {
        const Tensor emb = eval_embeddings(model, {&data.samples[idx].graph});
        predictions.push_back(knn_predict(probe, std::vector<double>(emb.v.begin(), emb.v.end())));
        labels.push_back(data.samples[idx].label);
    }
    return report_from_predictions(predictions, labels, probe.classes);
}

ModelState finetune(const ModelState& source, const Dataset& target, const DataSplit& split,
                    const FinetuneConfig& config, TrainHistory* history) {
    ModelState state{source.config, ParamSet{}};
    for (const auto& name : source.params.order()) {
        const ParamEntry& entry = source.params.at(name);
        state.params.add(name, entry.value, entry.trainable);
    }

    const int target_classes = target.classes.num_classes();
    if (target_classes != source.config.classes) {
        if (!config.reinit_classifier) {
            throw ConfigError("finetune: target has " + std::to_string(target_classes) +
                              " classes but the checkpoint has " +
                              std::to_string(source.config.classes) +
                              "; set reinit_classifier for a new label set");
        }
    }
    if (config.reinit_classifier) {
        reinit_classifier(state, target_classes, config.seed * 0x9e3779b97f4a7c15ULL + 3);
    }

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.lr = config.lr;
    tc.optimizer = "adam";
    tc.seed = config.seed;
    tc.early_stop_patience = config.early_stop_patience;
    return train_from(std::move(state), target, split, tc, history);
}

}  // namespace malgraph
