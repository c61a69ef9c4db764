#include "malgraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

namespace malgraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* backbone_name(Backbone b) { return b == Backbone::kGcn ? "gcn" : "gin"; }

Backbone backbone_from_name(const std::string& name) {
    if (name == "gcn") return Backbone::kGcn;
    if (name == "gin") return Backbone::kGin;
    throw ConfigError("unknown backbone '" + name + "' (expected gcn|gin)");
}

const char* norm_name(NormKind n) { return n == NormKind::kBatch ? "batch" : "none"; }

const char* readout_name(Readout r) { return r == Readout::kMax ? "max" : "mean"; }

Readout readout_from_name(const std::string& name) {
    if (name == "max") return Readout::kMax;
    if (name == "mean") return Readout::kMean;
    throw ConfigError("unknown readout '" + name + "' (expected max|mean)");
}

NormKind norm_from_name(const std::string& name) {
    if (name == "batch") return NormKind::kBatch;
    if (name == "none") return NormKind::kNone;
    throw ConfigError("unknown norm '" + name + "' (expected batch|none)");
}

void ModelConfig::validate() const {
    std::vector<std::string> problems;
    if (layers < 1) problems.push_back("layers must be >= 1");
    if (hidden < 1) problems.push_back("hidden must be >= 1");
    if (input_dim < 1) problems.push_back("input_dim must be >= 1");
    if (classes < 2) problems.push_back("classes must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0) problems.push_back("dropout must be in [0, 1)");
    if (!problems.empty()) {
        std::string msg = "invalid model config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::string ModelConfig::to_json() const {
    ordered_json out;
    out["backbone"] = backbone_name(backbone);
    out["layers"] = layers;
    out["hidden"] = hidden;
    out["input_dim"] = input_dim;
    out["classes"] = classes;
    out["gin_epsilon"] = gin_epsilon;
    out["norm"] = norm_name(norm);
    out["dropout"] = dropout;
    out["symmetric"] = symmetric;
    out["readout"] = readout_name(readout);
    return out.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    const json obj = json::parse(text);
    ModelConfig c;
    c.backbone = backbone_from_name(obj.at("backbone").get<std::string>());
    c.layers = obj.at("layers").get<int>();
    c.hidden = obj.at("hidden").get<int>();
    c.input_dim = obj.at("input_dim").get<int>();
    c.classes = obj.at("classes").get<int>();
    c.gin_epsilon = obj.at("gin_epsilon").get<double>();
    c.norm = norm_from_name(obj.at("norm").get<std::string>());
    c.dropout = obj.at("dropout").get<double>();
    c.symmetric = obj.at("symmetric").get<bool>();
    c.readout = readout_from_name(obj.value("readout", "max"));
    c.validate();
    return c;
}

namespace {

Tensor uniform_fan_in(Rng& rng, int fan_in, int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& x : t.v) x = rng.uniform(-bound, bound);
    return t;
}

std::string layer_prefix(int l) { return "layer" + std::to_string(l); }

void add_bn_params(ParamSet& params, const std::string& prefix, int width) {
    Tensor gamma = Tensor::zeros({width});
    std::fill(gamma.v.begin(), gamma.v.end(), 1.0);
    params.add(prefix + ".bn.gamma", std::move(gamma), true);
    params.add(prefix + ".bn.beta", Tensor::zeros({width}), true);
    params.add(prefix + ".bn.running_mean", Tensor::zeros({width}), false);
    Tensor var = Tensor::zeros({width});
    std::fill(var.v.begin(), var.v.end(), 1.0);
    params.add(prefix + ".bn.running_var", std::move(var), false);
}

}  // namespace

ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ModelState state;
    state.config = config;
    for (int l = 0; l < config.layers; ++l) {
        const int in = l == 0 ? config.input_dim : config.hidden;
        const std::string prefix = layer_prefix(l);
        if (config.backbone == Backbone::kGcn) {
            state.params.add(prefix + ".W", uniform_fan_in(rng, in, config.hidden), true);
            state.params.add(prefix + ".b", Tensor::zeros({config.hidden}), true);
        } else {
            state.params.add(prefix + ".mlp.W1", uniform_fan_in(rng, in, config.hidden), true);
            state.params.add(prefix + ".mlp.b1", Tensor::zeros({config.hidden}), true);
            state.params.add(prefix + ".mlp.W2", uniform_fan_in(rng, config.hidden, config.hidden), true);
            state.params.add(prefix + ".mlp.b2", Tensor::zeros({config.hidden}), true);
        }
        if (config.norm == NormKind::kBatch) add_bn_params(state.params, prefix, config.hidden);
    }
    state.params.add("cls.W", uniform_fan_in(rng, config.hidden, config.classes), true);
    state.params.add("cls.b", Tensor::zeros({config.classes}), true);
    return state;
}

void reinit_classifier(ModelState& state, int classes, std::uint64_t seed) {
    if (classes < 2) throw ConfigError("reinit_classifier: classes must be >= 2");
    Rng rng(seed);
    state.config.classes = classes;
    state.params.replace("cls.W", uniform_fan_in(rng, state.config.hidden, classes));
    state.params.replace("cls.b", Tensor::zeros({classes}));
}

SparseMatrix adjacency01(std::int32_t n, const std::vector<Edge>& edges, bool symmetric) {
    std::vector<Edge> sym;
    sym.reserve(edges.size() * 2);
    for (const auto& [src, dst] : edges) {
        sym.emplace_back(src, dst);
        if (symmetric && src != dst) sym.emplace_back(dst, src);
    }
    std::sort(sym.begin(), sym.end());
    sym.erase(std::unique(sym.begin(), sym.end()), sym.end());

    SparseMatrix m;
    m.rows = n;
    m.cols = n;
    m.entries.reserve(sym.size());
    for (const auto& [src, dst] : sym) m.entries.push_back({src, dst, 1.0});
    return m;
}

SparseMatrix gcn_propagation(std::int32_t n, const std::vector<Edge>& edges, bool symmetric) {
    SparseMatrix base = adjacency01(n, edges, symmetric);
    // A_hat = sym(A) + I: identity added on top, so a data self-loop weighs 2.
    std::vector<double> diag(static_cast<std::size_t>(n), 1.0);
    std::vector<SparseMatrix::Entry> offdiag;
    offdiag.reserve(base.entries.size());
    for (const auto& e : base.entries) {
        if (e.row == e.col) {
            diag[e.row] += e.value;
        } else {
            offdiag.push_back(e);
        }
    }
    std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
    for (std::int32_t i = 0; i < n; ++i) degree[i] = diag[i];
    for (const auto& e : offdiag) degree[e.row] += e.value;

    SparseMatrix out;
    out.rows = n;
    out.cols = n;
    for (std::int32_t i = 0; i < n; ++i) {
        out.entries.push_back({i, i, diag[i] / std::sqrt(degree[i] * degree[i])});
    }
    for (const auto& e : offdiag) {
        out.entries.push_back({e.row, e.col, e.value / std::sqrt(degree[e.row] * degree[e.col])});
    }
    out.sort_entries();
    return out;
}

namespace {

struct Batch {
    Tensor x;
    std::vector<int> segment_ids;
    int num_graphs = 0;
    SparseMatrix prop;
};

Batch build_batch(const ModelConfig& config, const std::vector<const AttributedGraph*>& graphs) {
    if (graphs.empty()) throw ValidationError("model_forward: empty batch");
    std::int64_t total = 0;
    for (const AttributedGraph* g : graphs) {
        if (g->n == 0) throw ValidationError("model_forward: graph " + g->sample_id + " has 0 nodes");
        if (g->schema.dim != config.input_dim) {
            throw ValidationError("width mismatch: graph " + g->sample_id + " has " +
                                  std::to_string(g->schema.dim) + " feature columns, model expects " +
                                  std::to_string(config.input_dim));
        }
        if (!g->fully_present()) {
            throw ValidationError("graph " + g->sample_id +
                                  " has undefined feature entries; collate before training");
        }
        total += g->n;
    }

    Batch batch;
    batch.num_graphs = static_cast<int>(graphs.size());
    batch.x = Tensor::zeros({static_cast<int>(total), config.input_dim});
    batch.segment_ids.reserve(static_cast<std::size_t>(total));
    batch.prop.rows = static_cast<int>(total);
    batch.prop.cols = static_cast<int>(total);

    int offset = 0;
    for (std::size_t b = 0; b < graphs.size(); ++b) {
        const AttributedGraph* g = graphs[b];
        for (std::int32_t i = 0; i < g->n; ++i) {
            const float* src = g->row(i);
            double* dst = batch.x.v.data() + static_cast<std::size_t>(offset + i) * config.input_dim;
            for (int j = 0; j < config.input_dim; ++j) dst[j] = static_cast<double>(src[j]);
            batch.segment_ids.push_back(static_cast<int>(b));
        }
        const SparseMatrix prop = config.backbone == Backbone::kGcn
                                      ? gcn_propagation(g->n, g->edges, config.symmetric)
                                      : adjacency01(g->n, g->edges, config.symmetric);
        for (const auto& e : prop.entries) {
            batch.prop.entries.push_back({e.row + offset, e.col + offset, e.value});
        }
        offset += g->n;
    }
    batch.prop.sort_entries();
    return batch;
}

}  // namespace

ForwardPass model_forward(ModelState& state, const std::vector<const AttributedGraph*>& graphs,
                          RunMode mode, Rng* dropout_rng, const std::set<std::string>* grad_filter) {
    const ModelConfig& config = state.config;
    config.validate();
    Batch batch = build_batch(config, graphs);

    const bool training = mode == RunMode::kTrain;
    if (training && config.dropout > 0.0 && dropout_rng == nullptr) {
        throw ValidationError("model_forward: dropout requires an rng in train mode");
    }

    ForwardPass pass;
    Tape& tape = pass.tape;

    const auto wants_grad = [&](const std::string& name) {
        if (mode == RunMode::kEval) return false;
        if (grad_filter) return grad_filter->count(name) != 0;
        return state.params.at(name).trainable;
    };
    const auto param_var = [&](const std::string& name) {
        const auto it = pass.params.find(name);
        if (it != pass.params.end()) return it->second;
        const Tape::Var var = tape.leaf(state.params.at(name).value, wants_grad(name));
        pass.params.emplace(name, var);
        return var;
    };

    Tape::Var h = tape.leaf(std::move(batch.x), false);
    for (int l = 0; l < config.layers; ++l) {
        const std::string prefix = layer_prefix(l);
        if (config.backbone == Backbone::kGcn) {
            const Tape::Var hw = tape.matmul(h, param_var(prefix + ".W"));
            h = tape.add_broadcast(tape.spmm(batch.prop, hw), param_var(prefix + ".b"));
        } else {
            // (1 + eps) * H + sym(A) * H, then the 2-layer MLP.
            const Tape::Var agg =
                tape.add(tape.scale(h, 1.0 + config.gin_epsilon), tape.spmm(batch.prop, h));
            const Tape::Var h1 = tape.relu(
                tape.add_broadcast(tape.matmul(agg, param_var(prefix + ".mlp.W1")),
                                   param_var(prefix + ".mlp.b1")));
            h = tape.add_broadcast(tape.matmul(h1, param_var(prefix + ".mlp.W2")),
                                   param_var(prefix + ".mlp.b2"));
        }
        if (config.norm == NormKind::kBatch) {
            BnStats stats;
            stats.running_mean = state.params.at(prefix + ".bn.running_mean").value;
            stats.running_var = state.params.at(prefix + ".bn.running_var").value;
            const BnMode bn_mode = mode == RunMode::kTrain    ? BnMode::kTrain
                                   : mode == RunMode::kEval   ? BnMode::kEval
                                                              : BnMode::kBatchOnly;
            h = tape.batch_norm(h, param_var(prefix + ".bn.gamma"), param_var(prefix + ".bn.beta"),
                                &stats, bn_mode);
            if (bn_mode == BnMode::kTrain) {
                state.params.at(prefix + ".bn.running_mean").value = std::move(stats.running_mean);
                state.params.at(prefix + ".bn.running_var").value = std::move(stats.running_var);
            }
        }
        h = tape.relu(h);
        if (training && config.dropout > 0.0) h = tape.dropout(h, config.dropout, *dropout_rng);
    }

    pass.embeddings = config.readout == Readout::kMax
                          ? tape.segment_max(h, batch.segment_ids, batch.num_graphs)
                          : tape.segment_mean(h, batch.segment_ids, batch.num_graphs);
    pass.logits = tape.add_broadcast(tape.matmul(pass.embeddings, param_var("cls.W")),
                                     param_var("cls.b"));
    return pass;
}

Tensor eval_logits(ModelState& state, const std::vector<const AttributedGraph*>& batch) {
    ForwardPass pass = model_forward(state, batch, RunMode::kEval);
    return pass.tape.value(pass.logits);
}

Tensor eval_embeddings(ModelState& state, const std::vector<const AttributedGraph*>& batch) {
    ForwardPass pass = model_forward(state, batch, RunMode::kEval);
    return pass.tape.value(pass.embeddings);
}

namespace {

// Shapes are a pure function of the config; used to validate manifests.
std::vector<int> expected_shape(const ModelConfig& config, const std::string& name) {
    const int hidden = config.hidden;
    const auto layer_in = [&](int l) { return l == 0 ? config.input_dim : hidden; };
    for (int l = 0; l < config.layers; ++l) {
        const std::string prefix = layer_prefix(l);
        if (name == prefix + ".W") return {layer_in(l), hidden};
        if (name == prefix + ".b") return {hidden};
        if (name == prefix + ".mlp.W1") return {layer_in(l), hidden};
        if (name == prefix + ".mlp.b1") return {hidden};
        if (name == prefix + ".mlp.W2") return {hidden, hidden};
        if (name == prefix + ".mlp.b2") return {hidden};
        if (name == prefix + ".bn.gamma" || name == prefix + ".bn.beta" ||
            name == prefix + ".bn.running_mean" || name == prefix + ".bn.running_var") {
            return {hidden};
        }
    }
    if (name == "cls.W") return {hidden, config.classes};
    if (name == "cls.b") return {config.classes};
    throw ValidationError("checkpoint names unknown tensor '" + name + "'");
}

std::vector<std::string> expected_tensor_order(const ModelConfig& config) {
    std::vector<std::string> names;
    for (int l = 0; l < config.layers; ++l) {
        const std::string prefix = layer_prefix(l);
        if (config.backbone == Backbone::kGcn) {
            names.push_back(prefix + ".W");
            names.push_back(prefix + ".b");
        } else {
            names.push_back(prefix + ".mlp.W1");
            names.push_back(prefix + ".mlp.b1");
            names.push_back(prefix + ".mlp.W2");
            names.push_back(prefix + ".mlp.b2");
        }
        if (config.norm == NormKind::kBatch) {
            names.push_back(prefix + ".bn.gamma");
            names.push_back(prefix + ".bn.beta");
            names.push_back(prefix + ".bn.running_mean");
            names.push_back(prefix + ".bn.running_var");
        }
    }
    names.push_back("cls.W");
    names.push_back("cls.b");
    return names;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    ordered_json manifest;
    manifest["format"] = "malgraph-ckpt-v1";
    manifest["config"] = json::parse(state.config.to_json());
    manifest["step"] = state.params.step_count();

    std::vector<std::uint8_t> blob;
    ordered_json tensors = ordered_json::array();
    for (const auto& name : state.params.order()) {
        const ParamEntry& entry = state.params.at(name);
        ordered_json jt;
        jt["name"] = name;
        jt["shape"] = entry.value.shape;
        jt["offset"] = blob.size();
        jt["trainable"] = entry.trainable;
        tensors.push_back(jt);
        const std::size_t pos = blob.size();
        blob.resize(pos + entry.value.v.size() * sizeof(double));
        std::memcpy(blob.data() + pos, entry.value.v.data(), entry.value.v.size() * sizeof(double));
    }
    manifest["tensors"] = tensors;
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    write_binary_file(dir / "params.bin", blob);
}

ModelState load_checkpoint(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text_file(dir / "manifest.json"));
    if (!manifest.contains("format") ||
        manifest.at("format").get<std::string>() != "malgraph-ckpt-v1") {
        throw ParseError("checkpoint: unknown manifest format");
    }
    ModelState state;
    state.config = ModelConfig::from_json(manifest.at("config").dump());
    const auto blob = read_binary_file(dir / "params.bin");

    std::size_t expected_offset = 0;
    for (const auto& jt : manifest.at("tensors")) {
        const std::string name = jt.at("name").get<std::string>();
        const auto shape = jt.at("shape").get<std::vector<int>>();
        const auto offset = jt.at("offset").get<std::size_t>();
        const bool trainable = jt.at("trainable").get<bool>();

        const std::vector<int> want = expected_shape(state.config, name);
        if (shape != want) {
            throw ValidationError("checkpoint tensor '" + name + "' has wrong shape");
        }
        if (offset != expected_offset) {
            throw ValidationError("checkpoint tensor '" + name + "' has inconsistent offset");
        }
        Tensor t = Tensor::zeros(shape);
        const std::size_t bytes = t.v.size() * sizeof(double);
        if (offset + bytes > blob.size()) throw ParseError("checkpoint: truncated params.bin");
        std::memcpy(t.v.data(), blob.data() + offset, bytes);
        state.params.add(name, std::move(t), trainable);
        expected_offset = offset + bytes;
    }
    if (expected_offset != blob.size()) throw ParseError("checkpoint: trailing bytes in params.bin");
    if (state.params.order() != expected_tensor_order(state.config)) {
        throw ValidationError("checkpoint tensor list does not match the config's parameter set");
    }
    state.params.set_step_count(manifest.value("step", std::int64_t{0}));
    return state;
}

}  // namespace malgraph
