#include "malgraph/types.hpp"

#include <algorithm>

namespace malgraph {

const std::vector<std::string>& access_flag_names() {
    static const std::vector<std::string> names = {
        "public", "private", "protected", "static", "final", "synchronized", "bridge",
        "varargs", "native", "interface", "abstract", "strictfp", "synthetic", "constructor"};
    return names;
}

std::optional<AccessFlag> access_flag_from_name(const std::string& name) {
    const auto& names = access_flag_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<AccessFlag>(i);
    }
    return std::nullopt;
}

void validate_record(const FunctionRecord& record, int node) {
    if (record.num_params < 0) {
        throw ValidationError("node " + std::to_string(node) + ": num_params is negative");
    }
    if (static_cast<std::size_t>(record.num_params) != record.param_types.size()) {
        throw ValidationError("node " + std::to_string(node) + ": num_params=" +
                              std::to_string(record.num_params) + " does not match param_types length " +
                              std::to_string(record.param_types.size()));
    }
    if (record.num_registers && *record.num_registers < 0) {
        throw ValidationError("node " + std::to_string(node) + ": num_registers is negative");
    }
    if (record.external && (record.code || record.instructions || record.strings)) {
        throw ValidationError("node " + std::to_string(node) +
                              ": external record carries code/instructions/strings");
    }
}

int FeatureSchema::find_group(const std::string& name) const {
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::uint64_t schema_digest(const std::vector<FeatureGroup>& groups) {
    std::uint64_t h = kFnvOffset;
    for (const auto& g : groups) {
        h = fnv1a64(g.name, h);
        h = fnv1a64("\0", 1, h);
        h = fnv1a64_u64(static_cast<std::uint64_t>(g.offset), h);
        h = fnv1a64_u64(static_cast<std::uint64_t>(g.width), h);
        const unsigned char u = g.universal ? 1 : 0;
        h = fnv1a64(&u, 1, h);
    }
    return h;
}

FeatureSchema make_schema(const std::vector<FeatureGroup>& groups) {
    FeatureSchema schema;
    schema.groups = groups;
    int offset = 0;
    for (auto& g : schema.groups) {
        if (g.width <= 0) throw ValidationError("schema group '" + g.name + "' has non-positive width");
        g.offset = offset;
        offset += g.width;
    }
    schema.dim = offset;
    schema.schema_hash = schema_digest(schema.groups);
    return schema;
}

bool AttributedGraph::fully_present() const {
    return std::all_of(present.begin(), present.end(), [](std::uint8_t b) { return b != 0; });
}

void AttributedGraph::check_consistent() const {
    if (n < 0) throw ValidationError("graph " + sample_id + ": negative node count");
    if (x.size() != static_cast<std::size_t>(n) * schema.dim) {
        throw ValidationError("graph " + sample_id + ": feature matrix shape mismatch");
    }
    if (present.size() != static_cast<std::size_t>(n) * schema.groups.size()) {
        throw ValidationError("graph " + sample_id + ": mask shape mismatch");
    }
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= n || dst < 0 || dst >= n) {
            throw ValidationError("graph " + sample_id + ": edge endpoint out of range");
        }
    }
}

std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::int32_t n) {
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= n) {
            throw ValidationError("edge endpoint " + std::to_string(src) + " out of range for " +
                                  std::to_string(n) + " nodes");
        }
        if (dst < 0 || dst >= n) {
            throw ValidationError("edge endpoint " + std::to_string(dst) + " out of range for " +
                                  std::to_string(n) + " nodes");
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

const CorpusEntry* CorpusIndex::find(const std::string& sample_id) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), sample_id,
                               [](const CorpusEntry& e, const std::string& id) { return e.sample_id < id; });
    if (it != entries.end() && it->sample_id == sample_id) return &*it;
    return nullptr;
}

}  // namespace malgraph
