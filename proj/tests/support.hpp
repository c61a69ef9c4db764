// Shared helpers and independent oracles for the test suites. The oracles
// here deliberately re-derive results from first principles (per-entry scans,
// dense math, finite differences) instead of reusing library code paths.
#pragma once

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "malgraph/autodiff.hpp"
#include "malgraph/common.hpp"
#include "malgraph/types.hpp"

namespace testsupport {

using malgraph::AttributedGraph;
using malgraph::Edge;
using malgraph::FeatureGroup;
using malgraph::FeatureSchema;
using malgraph::FunctionRecord;
using malgraph::Rng;
using malgraph::Tensor;

inline FunctionRecord simple_record(const std::string& method, bool external = false) {
    FunctionRecord r;
    r.class_name = {"com", "demo", "App"};
    r.method_name = method;
    r.num_params = 0;
    r.return_type = "void";
    r.set_flag(malgraph::AccessFlag::kPublic);
    r.external = external;
    if (!external) {
        r.num_registers = 4;
        malgraph::CodeBlock code;
        code.bytes = {0x01, 0x02, 0x03, 0x04};
        code.length = 4;
        r.code = code;
        malgraph::InstructionInfo info;
        info.opcodes = {"invoke-virtual", "return-void"};
        info.count = 2;
        info.cached = true;
        r.instructions = info;
        r.strings = std::vector<std::string>{"hello"};
    }
    return r;
}

// Random masked graph over a random small schema. Universal groups are
// always present; everything else is Bernoulli per (node, group). Masked-out
// values are poisoned with a sentinel so reads of undefined data are loud.
inline AttributedGraph random_masked_graph(Rng& rng, int max_nodes = 30, int max_groups = 8) {
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes)));
    const int group_count = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_groups)));
    std::vector<FeatureGroup> groups;
    for (int g = 0; g < group_count; ++g) {
        FeatureGroup grp;
        grp.name = "g" + std::to_string(g);
        grp.width = 1 + static_cast<int>(rng.below(4));
        grp.universal = rng.bernoulli(0.3);
        groups.push_back(grp);
    }
    AttributedGraph g;
    g.n = n;
    g.schema = malgraph::make_schema(groups);
    g.sample_id = "random";
    g.x.assign(static_cast<std::size_t>(n) * g.schema.dim, 0.0f);
    g.present.assign(static_cast<std::size_t>(n) * group_count, 0);
    for (int i = 0; i < n; ++i) {
        for (int grp = 0; grp < group_count; ++grp) {
            const bool present = groups[grp].universal || rng.bernoulli(0.7);
            g.set_group_present(i, grp, present);
            const auto& info = g.schema.groups[grp];
            for (int c = info.offset; c < info.offset + info.width; ++c) {
                g.row(i)[c] = present ? static_cast<float>(rng.uniform(-3.0, 3.0)) : -9999.0f;
            }
        }
    }
    const int edge_count = static_cast<int>(rng.below(static_cast<std::uint64_t>(3 * n + 1)));
    std::vector<Edge> edges;
    for (int e = 0; e < edge_count; ++e) {
        edges.emplace_back(static_cast<std::int32_t>(rng.below(n)),
                           static_cast<std::int32_t>(rng.below(n)));
    }
    g.edges = malgraph::canonical_edges(std::move(edges), n);
    return g;
}

// --- collation oracle: per-entry transliteration of the set definitions ----

struct CollationOracle {
    // defined(i, c) per entry
    std::vector<std::vector<bool>> defined;
    std::vector<std::vector<float>> x;
    std::set<std::pair<int, int>> edges;
    int n = 0;
    int d = 0;

    static CollationOracle from_graph(const AttributedGraph& g) {
        CollationOracle o;
        o.n = g.n;
        o.d = g.schema.dim;
        o.defined.assign(g.n, std::vector<bool>(g.schema.dim, false));
        o.x.assign(g.n, std::vector<float>(g.schema.dim, 0.0f));
        for (int i = 0; i < g.n; ++i) {
            for (int grp = 0; grp < g.schema.group_count(); ++grp) {
                const auto& info = g.schema.groups[grp];
                for (int c = info.offset; c < info.offset + info.width; ++c) {
                    o.defined[i][c] = g.group_present(i, grp);
                    o.x[i][c] = g.row(i)[c];
                }
            }
        }
        for (const auto& [s, t] : g.edges) o.edges.insert({s, t});
        return o;
    }

    // C = { c | exists i with X[i,c] missing }
    std::set<int> non_universal() const {
        std::set<int> c_set;
        for (int c = 0; c < d; ++c) {
            for (int i = 0; i < n; ++i) {
                if (!defined[i][c]) {
                    c_set.insert(c);
                    break;
                }
            }
        }
        return c_set;
    }

    // F = {1..d} \ C; X_trim = X[:, F]
    std::vector<std::vector<float>> trim_matrix(std::vector<int>* kept_cols) const {
        const std::set<int> c_set = non_universal();
        std::vector<int> f_cols;
        for (int c = 0; c < d; ++c) {
            if (!c_set.count(c)) f_cols.push_back(c);
        }
        std::vector<std::vector<float>> out(n);
        for (int i = 0; i < n; ++i) {
            for (const int c : f_cols) out[i].push_back(x[i][c]);
        }
        if (kept_cols) *kept_cols = f_cols;
        return out;
    }

    // X_zero[i,c] = X[i,c] when defined else 0
    std::vector<std::vector<float>> zero_matrix() const {
        std::vector<std::vector<float>> out(n, std::vector<float>(d, 0.0f));
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < d; ++c) {
                if (defined[i][c]) out[i][c] = x[i][c];
            }
        }
        return out;
    }

    // V' = nodes with every entry defined; induced subgraph, isolated kept.
    std::vector<int> prune_nodes() const {
        std::vector<int> kept;
        for (int i = 0; i < n; ++i) {
            bool complete = true;
            for (int c = 0; c < d; ++c) complete = complete && defined[i][c];
            if (complete) kept.push_back(i);
        }
        return kept;
    }

    std::set<std::pair<int, int>> prune_edges(const std::vector<int>& kept) const {
        std::vector<int> new_id(n, -1);
        for (std::size_t k = 0; k < kept.size(); ++k) new_id[kept[k]] = static_cast<int>(k);
        std::set<std::pair<int, int>> out;
        for (const auto& [s, t] : edges) {
            if (new_id[s] >= 0 && new_id[t] >= 0) out.insert({new_id[s], new_id[t]});
        }
        return out;
    }
};

// --- LDP oracle: direct neighbor scan over the undirected view --------------

inline std::array<float, 5> ldp_oracle_row(int v, int n, const std::vector<Edge>& edges) {
    std::set<int> nbr;
    for (const auto& [s, t] : edges) {
        if (s == v && t != v) nbr.insert(t);
        if (t == v && s != v) nbr.insert(s);
    }
    const auto degree_of = [&](int u) {
        std::set<int> un;
        for (const auto& [s, t] : edges) {
            if (s == u && t != u) un.insert(t);
            if (t == u && s != u) un.insert(s);
        }
        return static_cast<double>(un.size());
    };
    std::array<float, 5> row{};
    if (nbr.empty()) return row;
    double lo = 1e300, hi = -1e300, sum = 0.0;
    for (const int u : nbr) {
        const double deg = degree_of(u);
        lo = std::min(lo, deg);
        hi = std::max(hi, deg);
        sum += deg;
    }
    const double mean = sum / static_cast<double>(nbr.size());
    double varsum = 0.0;
    for (const int u : nbr) {
        const double diff = degree_of(u) - mean;
        varsum += diff * diff;
    }
    row[0] = static_cast<float>(nbr.size());
    row[1] = static_cast<float>(lo);
    row[2] = static_cast<float>(hi);
    row[3] = static_cast<float>(mean);
    row[4] = static_cast<float>(std::sqrt(varsum / static_cast<double>(nbr.size())));
    return row;
}

// --- finite differences ------------------------------------------------------

// Central finite difference of f at x, perturbing a single coordinate.
template <typename F>
double central_difference(F&& f, std::vector<double>& x, std::size_t i, double h = 1e-5) {
    const double keep = x[i];
    x[i] = keep + h;
    const double hi = f();
    x[i] = keep - h;
    const double lo = f();
    x[i] = keep;
    return (hi - lo) / (2.0 * h);
}

// Relative error with a scale floor so near-zero gradients are compared
// absolutely at the floor's scale instead of blowing up the ratio.
inline double rel_error(double a, double b, double floor = 1e-2) {
    const double scale = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / scale;
}

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("malgraph_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsupport
