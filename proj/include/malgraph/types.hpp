#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "malgraph/common.hpp"

namespace malgraph {

// The 14 Dalvik-style access flags, in multi-hot encoding order.
enum class AccessFlag : int {
    kPublic = 0,
    kPrivate,
    kProtected,
    kStatic,
    kFinal,
    kSynchronized,
    kBridge,
    kVarargs,
    kNative,
    kInterface,
    kAbstract,
    kStrictfp,
    kSynthetic,
    kConstructor,
};
inline constexpr int kNumAccessFlags = 14;

const std::vector<std::string>& access_flag_names();
std::optional<AccessFlag> access_flag_from_name(const std::string& name);

struct CodeBlock {
    std::int64_t length = 0;
    std::vector<std::uint8_t> bytes;

    bool operator==(const CodeBlock&) const = default;
};

struct InstructionInfo {
    std::int64_t count = 0;
    std::vector<std::string> opcodes;
    bool cached = false;

    bool operator==(const InstructionInfo&) const = default;
};

// One node's raw analysis output. External functions carry names and flags
// only; code, instructions and strings must be absent for them.
struct FunctionRecord {
    std::vector<std::string> class_name;
    std::string method_name;
    std::int64_t num_params = 0;
    std::vector<std::string> param_types;
    std::string return_type;
    std::uint16_t access_flags = 0;  // bit i = flag with enum value i
    std::optional<std::int64_t> num_registers;
    std::optional<CodeBlock> code;
    std::optional<InstructionInfo> instructions;
    std::optional<std::vector<std::string>> strings;
    bool external = false;

    bool has_flag(AccessFlag f) const { return (access_flags >> static_cast<int>(f)) & 1; }
    void set_flag(AccessFlag f) { access_flags |= static_cast<std::uint16_t>(1u << static_cast<int>(f)); }

    bool operator==(const FunctionRecord&) const = default;
};

// Throws ValidationError naming `node` on any invariant breach.
void validate_record(const FunctionRecord& record, int node);

struct Label {
    std::string family;
    std::string type;

    bool operator==(const Label&) const = default;
    bool operator<(const Label& o) const {
        return family != o.family ? family < o.family : type < o.type;
    }
};

struct FeatureGroup {
    std::string name;
    int offset = 0;
    int width = 0;
    bool universal = false;

    bool operator==(const FeatureGroup&) const = default;
};

// Ordered column groups of the node-feature matrix. The digest pins the exact
// layout so files produced under different configs cannot be mixed up.
struct FeatureSchema {
    std::vector<FeatureGroup> groups;
    int dim = 0;
    std::uint64_t schema_hash = 0;

    int group_count() const { return static_cast<int>(groups.size()); }
    bool empty() const { return groups.empty(); }
    int find_group(const std::string& name) const;  // -1 when absent

    bool operator==(const FeatureSchema&) const = default;
};

// Builds offsets contiguously from (name, width, universal) triples and
// computes the digest.
FeatureSchema make_schema(const std::vector<FeatureGroup>& groups);
std::uint64_t schema_digest(const std::vector<FeatureGroup>& groups);

using Edge = std::pair<std::int32_t, std::int32_t>;

// Adjacency plus masked node features. Edges are sorted and unique; the mask
// is per (node, group) and a cleared bit means the group's columns hold
// unspecified values that must never be read as data.
struct AttributedGraph {
    std::int32_t n = 0;
    std::vector<Edge> edges;
    FeatureSchema schema;
    std::vector<float> x;              // n * schema.dim, row-major
    std::vector<std::uint8_t> present; // n * schema.group_count(), 0/1
    std::optional<Label> label;
    std::string sample_id;

    bool group_present(int node, int group) const {
        return present[static_cast<std::size_t>(node) * schema.groups.size() + group] != 0;
    }
    void set_group_present(int node, int group, bool value) {
        present[static_cast<std::size_t>(node) * schema.groups.size() + group] = value ? 1 : 0;
    }
    const float* row(int node) const { return x.data() + static_cast<std::size_t>(node) * schema.dim; }
    float* row(int node) { return x.data() + static_cast<std::size_t>(node) * schema.dim; }
    bool fully_present() const;
    void check_consistent() const;  // throws ValidationError
};

// Sorts, deduplicates and bounds-checks an edge list against n.
std::vector<Edge> canonical_edges(std::vector<Edge> edges, std::int32_t n);

struct CorpusEntry {
    std::string sample_id;
    std::string family;
    std::string type;
    std::int64_t node_count = 0;
    std::string path;
};

struct CorpusIndex {
    std::vector<CorpusEntry> entries;  // sorted by sample_id
    std::int64_t skipped = 0;

    const CorpusEntry* find(const std::string& sample_id) const;
};

}  // namespace malgraph
