#include "malgraph/collate.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace malgraph {

using ordered_json = nlohmann::ordered_json;

const char* collation_scheme_name(CollationScheme scheme) {
    switch (scheme) {
        case CollationScheme::kTrim: return "trim";
        case CollationScheme::kZero: return "zero";
        case CollationScheme::kPrune: return "prune";
    }
    return "?";
}

CollationScheme collation_scheme_from_name(const std::string& name) {
    if (name == "trim") return CollationScheme::kTrim;
    if (name == "zero") return CollationScheme::kZero;
    if (name == "prune") return CollationScheme::kPrune;
    throw ConfigError("unknown collation scheme '" + name + "' (expected trim|zero|prune)");
}

std::string CollationReport::to_json() const {
    ordered_json out;
    out["scheme"] = collation_scheme_name(scheme);
    out["dims_removed"] = dims_removed;
    out["nodes_removed"] = nodes_removed;
    if (scheme == CollationScheme::kPrune) {
        ordered_json map = ordered_json::object();
        for (const auto& [old_id, new_id] : id_map) map[std::to_string(old_id)] = new_id;
        out["id_map"] = map;
    }
    out["output_dim"] = output_dim;
    return out.dump(2) + "\n";
}

std::set<int> non_universal_dims(const AttributedGraph& g) {
    std::set<int> dims;
    for (int grp = 0; grp < g.schema.group_count(); ++grp) {
        bool missing_somewhere = false;
        for (std::int32_t i = 0; i < g.n && !missing_somewhere; ++i) {
            if (!g.group_present(i, grp)) missing_somewhere = true;
        }
        if (missing_somewhere) {
            const auto& grp_info = g.schema.groups[grp];
            for (int c = grp_info.offset; c < grp_info.offset + grp_info.width; ++c) dims.insert(c);
        }
    }
    return dims;
}

std::vector<int> fully_present_groups(const AttributedGraph& g) {
    std::vector<int> groups;
    for (int grp = 0; grp < g.schema.group_count(); ++grp) {
        bool everywhere = true;
        for (std::int32_t i = 0; i < g.n && everywhere; ++i) {
            if (!g.group_present(i, grp)) everywhere = false;
        }
        if (everywhere) groups.push_back(grp);
    }
    return groups;
}

namespace {

AttributedGraph restrict_columns(const AttributedGraph& g, const std::vector<int>& kept_groups) {
    std::vector<FeatureGroup> new_groups;
    new_groups.reserve(kept_groups.size());
    for (const int grp : kept_groups) new_groups.push_back(g.schema.groups[grp]);

    AttributedGraph out;
    out.n = g.n;
    out.edges = g.edges;
    out.label = g.label;
    out.sample_id = g.sample_id;
    out.schema = make_schema(new_groups);
    out.x.assign(static_cast<std::size_t>(out.n) * out.schema.dim, 0.0f);
    out.present.assign(static_cast<std::size_t>(out.n) * out.schema.group_count(), 1);
    for (std::int32_t i = 0; i < g.n; ++i) {
        const float* src = g.row(i);
        float* dst = out.row(i);
        for (std::size_t k = 0; k < kept_groups.size(); ++k) {
            const auto& old_grp = g.schema.groups[kept_groups[k]];
            std::memcpy(dst + out.schema.groups[k].offset, src + old_grp.offset,
                        static_cast<std::size_t>(old_grp.width) * sizeof(float));
        }
    }
    return out;
}

}  // namespace

CollationResult trim(const AttributedGraph& g) {
    const std::vector<int> kept = fully_present_groups(g);
    if (kept.empty()) {
        throw ValidationError("trim leaves no feature dimensions for sample " + g.sample_id);
    }
    CollationResult result;
    result.report.scheme = CollationScheme::kTrim;
    result.report.dims_removed = non_universal_dims(g);
    result.graph = restrict_columns(g, kept);
    result.report.output_dim = result.graph.schema.dim;
    return result;
}

CollationResult zero(const AttributedGraph& g) {
    CollationResult result;
    result.report.scheme = CollationScheme::kZero;
    result.report.output_dim = g.schema.dim;
    result.graph = g;
    for (std::int32_t i = 0; i < g.n; ++i) {
        float* row = result.graph.row(i);
        for (int grp = 0; grp < g.schema.group_count(); ++grp) {
            if (!g.group_present(i, grp)) {
                const auto& info = g.schema.groups[grp];
                std::fill(row + info.offset, row + info.offset + info.width, 0.0f);
                result.graph.set_group_present(i, grp, true);
            }
        }
    }
    return result;
}

CollationResult prune(const AttributedGraph& g) {
    CollationResult result;
    result.report.scheme = CollationScheme::kPrune;
    result.report.output_dim = g.schema.dim;

    std::vector<std::int32_t> kept;
    for (std::int32_t i = 0; i < g.n; ++i) {
        bool complete = true;
        for (int grp = 0; grp < g.schema.group_count() && complete; ++grp) {
            if (!g.group_present(i, grp)) complete = false;
        }
        if (complete) {
            kept.push_back(i);
        } else {
            result.report.nodes_removed.insert(i);
        }
    }
    if (kept.empty()) {
        throw ValidationError("prune removes every node of sample " + g.sample_id);
    }

    std::vector<std::int32_t> new_id(static_cast<std::size_t>(g.n), -1);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        new_id[kept[k]] = static_cast<std::int32_t>(k);
        result.report.id_map[kept[k]] = static_cast<std::int32_t>(k);
    }

    AttributedGraph& out = result.graph;
    out.n = static_cast<std::int32_t>(kept.size());
    out.schema = g.schema;
    out.label = g.label;
    out.sample_id = g.sample_id;
    out.x.resize(static_cast<std::size_t>(out.n) * out.schema.dim);
    out.present.assign(static_cast<std::size_t>(out.n) * out.schema.group_count(), 1);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        std::memcpy(out.row(static_cast<std::int32_t>(k)), g.row(kept[k]),
                    static_cast<std::size_t>(g.schema.dim) * sizeof(float));
    }
    for (const auto& [src, dst] : g.edges) {
        if (new_id[src] >= 0 && new_id[dst] >= 0) out.edges.emplace_back(new_id[src], new_id[dst]);
    }
    out.edges = canonical_edges(std::move(out.edges), out.n);
    return result;
}

CollationResult collate(const AttributedGraph& g, CollationScheme scheme) {
    switch (scheme) {
        case CollationScheme::kTrim: return trim(g);
        case CollationScheme::kZero: return zero(g);
        case CollationScheme::kPrune: return prune(g);
    }
    throw ConfigError("bad collation scheme");
}

AttributedGraph trim_to_groups(const AttributedGraph& g, const std::vector<std::string>& group_names) {
    std::vector<int> kept;
    kept.reserve(group_names.size());
    for (const auto& name : group_names) {
        const int grp = g.schema.find_group(name);
        if (grp < 0) {
            throw ValidationError("sample " + g.sample_id + " has no feature group '" + name + "'");
        }
        for (std::int32_t i = 0; i < g.n; ++i) {
            if (!g.group_present(i, grp)) {
                throw ValidationError("sample " + g.sample_id + ": group '" + name +
                                      "' is not present on every node");
            }
        }
        kept.push_back(grp);
    }
    if (kept.empty()) throw ValidationError("trim_to_groups: empty group list");
    return restrict_columns(g, kept);
}

FeatureSchema dataset_trim_schema(const std::vector<const AttributedGraph*>& samples) {
    if (samples.empty()) throw ValidationError("dataset_trim_schema: no samples");

    std::vector<const AttributedGraph*> ordered = samples;
    std::sort(ordered.begin(), ordered.end(), [](const AttributedGraph* a, const AttributedGraph* b) {
        return a->sample_id < b->sample_id;
    });

    const FeatureSchema& base = ordered.front()->schema;
    std::vector<bool> kept(base.groups.size(), true);
    for (const AttributedGraph* g : ordered) {
        if (g->schema.schema_hash != base.schema_hash) {
            throw ValidationError("dataset_trim_schema: samples have differing schemas");
        }
        std::vector<bool> mine(base.groups.size(), false);
        for (const int grp : fully_present_groups(*g)) mine[grp] = true;
        for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = kept[i] && mine[i];
    }

    std::vector<FeatureGroup> groups;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (kept[i]) groups.push_back(base.groups[i]);
    }
    if (groups.empty()) {
        throw ValidationError("dataset_trim_schema: no group is present across the whole corpus");
    }
    return make_schema(groups);
}

}  // namespace malgraph
