#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "malgraph/gnn.hpp"
#include "support.hpp"

using namespace malgraph;
namespace fs = std::filesystem;

namespace {

// Fully-present graph with one feature group.
AttributedGraph graph_with_features(std::int32_t n, std::vector<Edge> edges,
                                    std::vector<float> features, int dim,
                                    const std::string& id = "g") {
    AttributedGraph g;
    g.n = n;
    g.edges = canonical_edges(std::move(edges), n);
    g.schema = make_schema({{"x", 0, dim, true}});
    g.x = std::move(features);
    g.present.assign(static_cast<std::size_t>(n), 1);
    g.sample_id = id;
    return g;
}

ModelConfig small_config(Backbone backbone, int input_dim, int classes, NormKind norm,
                         int layers = 2, int hidden = 6) {
    ModelConfig c;
    c.backbone = backbone;
    c.layers = layers;
    c.hidden = hidden;
    c.input_dim = input_dim;
    c.classes = classes;
    c.norm = norm;
    return c;
}

}  // namespace

TEST_CASE("gcn propagation matrix matches the hand-derived chain values") {
    // chain 0->1->2, symmetrized, identity added:
    // degrees 2, 3, 2; offdiagonal weights 1/sqrt(deg_i deg_j).
    const SparseMatrix p = gcn_propagation(3, {{0, 1}, {1, 2}}, true);
    const auto at = [&](int r, int c) {
        for (const auto& e : p.entries) {
            if (e.row == r && e.col == c) return e.value;
        }
        return 0.0;
    };
    CHECK(at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at(1, 1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(at(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
    CHECK(at(1, 0) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
    CHECK(at(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
    CHECK(at(0, 2) == 0.0);
}

TEST_CASE("a data self-loop adds to the identity on the diagonal") {
    const SparseMatrix p = gcn_propagation(1, {{0, 0}}, true);
    REQUIRE(p.entries.size() == 1);
    CHECK(p.entries[0].value == doctest::Approx(1.0).epsilon(1e-12));  // 2 / sqrt(2*2)
}

TEST_CASE("one GCN layer with hand-set weights matches dense propagation") {
    // 3-node chain, 2 input features, no norm. Weights chosen so every
    // activation stays positive and relu is the identity.
    const std::vector<float> x = {1, 2, 3, 4, 5, 6};
    AttributedGraph g = graph_with_features(3, {{0, 1}, {1, 2}}, x, 2);
    ModelConfig config = small_config(Backbone::kGcn, 2, 2, NormKind::kNone, 1, 2);
    ModelState state = init_model(config, 1);
    state.params.at("layer0.W").value = Tensor({2, 2}, {0.5, 0.25, 0.125, 0.75});
    state.params.at("cls.W").value = Tensor({2, 2}, {1, 0, 0, 1});
    state.params.at("cls.b").value = Tensor({2}, {0, 0});

    // Dense oracle: P (from the previous test) times X times W, max over rows.
    const double s6 = 1.0 / std::sqrt(6.0);
    const double p_mat[3][3] = {{0.5, s6, 0}, {s6, 1.0 / 3, s6}, {0, s6, 0.5}};
    const double w_mat[2][2] = {{0.5, 0.25}, {0.125, 0.75}};
    double xw[3][2] = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 2; ++k) xw[i][j] += x[i * 2 + k] * w_mat[k][j];
        }
    }
    double h_mat[3][2] = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            for (int k = 0; k < 3; ++k) h_mat[i][j] += p_mat[i][k] * xw[k][j];
        }
    }
    double readout[2];
    for (int j = 0; j < 2; ++j) readout[j] = std::max({h_mat[0][j], h_mat[1][j], h_mat[2][j]});

    const Tensor logits = eval_logits(state, {&g});
    CHECK(logits.v[0] == doctest::Approx(readout[0]).epsilon(1e-12));
    CHECK(logits.v[1] == doctest::Approx(readout[1]).epsilon(1e-12));
}

TEST_CASE("single-node graph readout equals that node's representation") {
    AttributedGraph g = graph_with_features(1, {}, {0.5, -0.25, 1.0}, 3);
    ModelConfig config = small_config(Backbone::kGin, 3, 2, NormKind::kNone);
    ModelState state = init_model(config, 3);
    ForwardPass pass = model_forward(state, {&g}, RunMode::kEval);
    const Tensor& emb = pass.tape.value(pass.embeddings);
    CHECK(emb.rows() == 1);
    CHECK(emb.cols() == config.hidden);
    // With one node, max pooling is the identity on the final layer output:
    // rebuilding the batch twice must give the same row.
    ForwardPass again = model_forward(state, {&g}, RunMode::kEval);
    CHECK(pass.tape.value(pass.embeddings).v == again.tape.value(again.embeddings).v);
}

TEST_CASE("node permutation leaves logits unchanged") {
    Rng rng(71);
    for (const Backbone backbone : {Backbone::kGcn, Backbone::kGin}) {
        const int n = 7, dim = 4;
        std::vector<float> x(static_cast<std::size_t>(n) * dim);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<Edge> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 0}, {2, 5}, {1, 1}};
        AttributedGraph g = graph_with_features(n, edges, x, dim);

        // permutation: reverse order
        std::vector<float> px(x.size());
        std::vector<Edge> pedges;
        const auto perm = [n](std::int32_t v) { return static_cast<std::int32_t>(n - 1 - v); };
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < dim; ++c) px[static_cast<std::size_t>(perm(i)) * dim + c] = x[i * dim + c];
        }
        for (const auto& [s, t] : edges) pedges.emplace_back(perm(s), perm(t));
        AttributedGraph pg = graph_with_features(n, pedges, px, dim);

        ModelState state = init_model(small_config(backbone, dim, 3, NormKind::kNone, 3), 7);
        const Tensor a = eval_logits(state, {&g});
        const Tensor b = eval_logits(state, {&pg});
        for (std::size_t i = 0; i < a.v.size(); ++i) {
            CHECK(std::abs(a.v[i] - b.v[i]) < 1e-9);
        }
    }
}

TEST_CASE("two isomorphic graphs with identical features give identical logits") {
    const std::vector<float> x = {1, 0, 0, 1, 1, 1};
    AttributedGraph a = graph_with_features(3, {{0, 1}, {1, 2}}, x, 2, "a");
    // same chain expressed with nodes relabeled 2,1,0
    const std::vector<float> y = {1, 1, 0, 1, 1, 0};
    AttributedGraph b = graph_with_features(3, {{2, 1}, {1, 0}}, y, 2, "b");
    ModelState state = init_model(small_config(Backbone::kGin, 2, 2, NormKind::kNone), 9);
    const Tensor la = eval_logits(state, {&a});
    const Tensor lb = eval_logits(state, {&b});
    for (std::size_t i = 0; i < la.v.size(); ++i) CHECK(std::abs(la.v[i] - lb.v[i]) < 1e-9);
}

TEST_CASE("eval logits are independent of batch composition") {
    Rng rng(73);
    const auto mk = [&](int n, const std::string& id) {
        std::vector<float> x(static_cast<std::size_t>(n) * 3);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        std::vector<Edge> edges;
        for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
        return graph_with_features(n, edges, x, 3, id);
    };
    const AttributedGraph a = mk(4, "a"), b = mk(6, "b"), c = mk(3, "c");
    for (const NormKind norm : {NormKind::kNone, NormKind::kBatch}) {
        ModelState state = init_model(small_config(Backbone::kGcn, 3, 2, norm), 11);
        const Tensor alone = eval_logits(state, {&a});
        const Tensor batched = eval_logits(state, {&a, &b, &c});
        for (int j = 0; j < alone.cols(); ++j) CHECK(alone.at2(0, j) == batched.at2(0, j));
    }
}

TEST_CASE("GIN separates a 1-WL-distinguishable pair for generic weights") {
    // star vs path on 4 nodes, constant features
    const std::vector<float> ones = {1, 1, 1, 1};
    AttributedGraph star = graph_with_features(4, {{0, 1}, {0, 2}, {0, 3}}, ones, 1, "star");
    AttributedGraph path = graph_with_features(4, {{0, 1}, {1, 2}, {2, 3}}, ones, 1, "path");
    int distinguished = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ModelConfig config = small_config(Backbone::kGin, 1, 2, NormKind::kNone, 2, 8);
        config.gin_epsilon = 0.0;
        ModelState state = init_model(config, seed);
        const Tensor es = eval_embeddings(state, {&star});
        const Tensor ep = eval_embeddings(state, {&path});
        double diff = 0.0;
        for (std::size_t i = 0; i < es.v.size(); ++i) diff = std::max(diff, std::abs(es.v[i] - ep.v[i]));
        if (diff > 1e-9) ++distinguished;
    }
    CHECK(distinguished == 10);
}

TEST_CASE("full-model gradients match finite differences on a 2-graph batch") {
    AttributedGraph a = graph_with_features(3, {{0, 1}, {1, 2}}, {1, 0, 0, 1, 1, 1}, 2, "a");
    AttributedGraph b = graph_with_features(2, {{0, 1}, {1, 1}}, {-1, 0.5, 0.25, -0.75}, 2, "b");
    const std::vector<int> labels = {0, 2};

    for (const Backbone backbone : {Backbone::kGcn, Backbone::kGin}) {
        ModelConfig config = small_config(backbone, 2, 3, NormKind::kBatch, 2, 4);
        ModelState state = init_model(config, 21);

        ForwardPass pass = model_forward(state, {&a, &b}, RunMode::kTentAdapt, nullptr, nullptr);
        const Tape::Var loss = pass.tape.softmax_cross_entropy(pass.logits, labels);
        pass.tape.backward(loss);

        const auto loss_value = [&]() {
            ForwardPass p = model_forward(state, {&a, &b}, RunMode::kTentAdapt, nullptr, nullptr);
            return p.tape.value(p.tape.softmax_cross_entropy(p.logits, labels)).v[0];
        };

        for (const auto& name : state.params.order()) {
            if (!state.params.at(name).trainable) continue;
            const Tensor& analytic = pass.tape.grad(pass.params.at(name));
            Tensor& value = state.params.at(name).value;
            for (std::size_t i = 0; i < value.v.size(); i += std::max<std::size_t>(1, value.v.size() / 6)) {
                const double fd = testsupport::central_difference(loss_value, value.v, i);
                INFO(name, " coord ", i);
                CHECK(testsupport::rel_error(analytic.v[i], fd) < 1e-4);
            }
        }
    }
}

TEST_CASE("init_model is deterministic per seed") {
    const ModelConfig config = small_config(Backbone::kGin, 5, 3, NormKind::kBatch);
    const ModelState a = init_model(config, 123);
    const ModelState b = init_model(config, 123);
    const ModelState c = init_model(config, 124);
    bool any_diff = false;
    for (const auto& name : a.params.order()) {
        CHECK(a.params.at(name).value.v == b.params.at(name).value.v);
        any_diff = any_diff || a.params.at(name).value.v != c.params.at(name).value.v;
    }
    CHECK(any_diff);
}

TEST_CASE("model config invariants are enforced") {
    ModelConfig config = small_config(Backbone::kGin, 4, 3, NormKind::kNone);
    config.hidden = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.hidden = 8;
    config.classes = 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.classes = 2;
    config.layers = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}

TEST_CASE("forward rejects bad batches") {
    ModelState state = init_model(small_config(Backbone::kGcn, 3, 2, NormKind::kNone), 5);
    CHECK_THROWS_WITH_AS(model_forward(state, {}, RunMode::kEval), doctest::Contains("empty"),
                         ValidationError);
    AttributedGraph wrong = graph_with_features(2, {}, {1, 1, 1, 1}, 2, "wrong");
    CHECK_THROWS_WITH_AS(model_forward(state, {&wrong}, RunMode::kEval),
                         doctest::Contains("width mismatch"), ValidationError);
    AttributedGraph empty;
    empty.schema = make_schema({{"x", 0, 3, true}});
    empty.sample_id = "empty";
    CHECK_THROWS_AS(model_forward(state, {&empty}, RunMode::kEval), ValidationError);
}

TEST_CASE("forward rejects graphs with undefined entries") {
    AttributedGraph g = graph_with_features(2, {{0, 1}}, {1, 2, 3, 4}, 2, "masked");
    g.present[1] = 0;
    ModelState state = init_model(small_config(Backbone::kGcn, 2, 2, NormKind::kNone), 5);
    CHECK_THROWS_WITH_AS(model_forward(state, {&g}, RunMode::kEval), doctest::Contains("collate"),
                         ValidationError);
}

TEST_CASE("checkpoint round trip reproduces logits bit-exactly") {
    const auto dir = testsupport::fresh_temp_dir("ckpt");
    AttributedGraph g = graph_with_features(3, {{0, 1}, {1, 2}}, {1, 0, 0, 1, 1, 1}, 2);
    ModelState state = init_model(small_config(Backbone::kGin, 2, 3, NormKind::kBatch), 33);
    const Tensor before = eval_logits(state, {&g});

    save_checkpoint(state, dir);
    ModelState loaded = load_checkpoint(dir);
    CHECK(loaded.config == state.config);
    for (const auto& name : state.params.order()) {
        CHECK(loaded.params.at(name).value.v == state.params.at(name).value.v);
    }
    const Tensor after = eval_logits(loaded, {&g});
    CHECK(before.v == after.v);

    // save(load(dir)) writes identical bytes
    const auto dir2 = testsupport::fresh_temp_dir("ckpt2");
    save_checkpoint(loaded, dir2);
    CHECK(read_binary_file(dir / "params.bin") == read_binary_file(dir2 / "params.bin"));
    CHECK(read_text_file(dir / "manifest.json") == read_text_file(dir2 / "manifest.json"));

    SUBCASE("truncated params.bin fails to load") {
        auto blob = read_binary_file(dir / "params.bin");
        blob.resize(blob.size() - 8);
        write_binary_file(dir / "params.bin", blob);
        CHECK_THROWS_AS(load_checkpoint(dir), ParseError);
    }
    SUBCASE("manifest edited to a wrong shape names the tensor") {
        auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
        for (auto& jt : manifest.at("tensors")) {
            if (jt.at("name") == "cls.b") jt["shape"] = {4};
        }
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
        CHECK_THROWS_WITH_AS(load_checkpoint(dir), doctest::Contains("cls.b"), ValidationError);
    }

    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("mean readout averages node representations") {
    // two identical one-node graphs vs their two-node disjoint union: with
    // mean readout the averaged representation of equal rows matches the
    // single-node embedding
    AttributedGraph g1 = graph_with_features(1, {}, {0.7f, -0.3f}, 2, "g1");
    AttributedGraph g2 = graph_with_features(2, {}, {0.7f, -0.3f, 0.7f, -0.3f}, 2, "g2");
    ModelConfig config = small_config(Backbone::kGin, 2, 2, NormKind::kNone);
    config.readout = Readout::kMean;
    ModelState state = init_model(config, 4);
    const Tensor e1 = eval_embeddings(state, {&g1});
    const Tensor e2 = eval_embeddings(state, {&g2});
    for (std::size_t i = 0; i < e1.v.size(); ++i) {
        CHECK(e1.v[i] == doctest::Approx(e2.v[i]).epsilon(1e-12));
    }
    // config survives the checkpoint round trip
    const auto dir = testsupport::fresh_temp_dir("readout");
    save_checkpoint(state, dir);
    CHECK(load_checkpoint(dir).config.readout == Readout::kMean);
    fs::remove_all(dir);
}

TEST_CASE("directed propagation differs from symmetric on an asymmetric graph") {
    AttributedGraph g = graph_with_features(3, {{0, 1}, {0, 2}}, {1, 0, 0, 1, 1, 1}, 2, "dir");
    ModelConfig config = small_config(Backbone::kGcn, 2, 2, NormKind::kNone);
    ModelState sym_state = init_model(config, 6);
    config.symmetric = false;
    ModelState dir_state = init_model(config, 6);
    const Tensor a = eval_logits(sym_state, {&g});
    const Tensor b = eval_logits(dir_state, {&g});
    bool differs = false;
    for (std::size_t i = 0; i < a.v.size(); ++i) differs = differs || a.v[i] != b.v[i];
    CHECK(differs);
}

TEST_CASE("reinit_classifier resizes the head and keeps the backbone") {
    ModelState state = init_model(small_config(Backbone::kGin, 4, 3, NormKind::kNone), 2);
    const Tensor backbone_before = state.params.at("layer0.mlp.W1").value;
    reinit_classifier(state, 5, 77);
    CHECK(state.config.classes == 5);
    CHECK(state.params.at("cls.W").value.shape == std::vector<int>{6, 5});
    CHECK(state.params.at("cls.b").value.shape == std::vector<int>{5});
    CHECK(state.params.at("layer0.mlp.W1").value.v == backbone_before.v);
}
