#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "malgraph/types.hpp"

namespace malgraph {

enum class CollationScheme { kTrim, kZero, kPrune };

const char* collation_scheme_name(CollationScheme scheme);
CollationScheme collation_scheme_from_name(const std::string& name);

struct CollationReport {
    CollationScheme scheme = CollationScheme::kZero;
    std::set<int> dims_removed;
    std::set<std::int32_t> nodes_removed;
    std::map<std::int32_t, std::int32_t> id_map;  // prune: old -> new
    int output_dim = 0;

    std::string to_json() const;
};

// Columns of every group that is missing for at least one node of this sample.
std::set<int> non_universal_dims(const AttributedGraph& g);

// Groups that are present on every node of this sample, in schema order.
std::vector<int> fully_present_groups(const AttributedGraph& g);

struct CollationResult {
    AttributedGraph graph;
    CollationReport report;
};

// Drop columns that are not defined on every node. Fails when nothing
// would remain.
CollationResult trim(const AttributedGraph& g);

// Keep shape, write zeros into undefined entries, mark everything present.
CollationResult zero(const AttributedGraph& g);

// Keep only nodes with every configured group present; take the induced
// subgraph with order-preserving id compaction. Nodes isolated by the cut
// are kept. Fails when no node survives.
CollationResult prune(const AttributedGraph& g);

CollationResult collate(const AttributedGraph& g, CollationScheme scheme);

// Restrict to an explicit group subset (used to give every trimmed sample in
// a dataset the same width).
AttributedGraph trim_to_groups(const AttributedGraph& g, const std::vector<std::string>& group_names);

// Intersection over samples of per-sample fully-present group sets, folded in
// sorted sample order. Fails when the intersection is empty.
FeatureSchema dataset_trim_schema(const std::vector<const AttributedGraph*>& samples);

}  // namespace malgraph
