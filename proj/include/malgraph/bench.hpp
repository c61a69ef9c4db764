#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "malgraph/features.hpp"
#include "malgraph/train.hpp"
#include "malgraph/types.hpp"

namespace malgraph {

struct SplitSpec {
    std::string variant = "tiny";  // tiny | common | distinct
    ClassTable classes;
    int per_class = 1000;
    int max_nodes = 5000;  // strict upper bound on node count
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static SplitSpec from_json(const std::string& text);
};

using Selection = std::map<int, std::vector<std::string>>;  // class_id -> sample ids

// Deterministic sampling without replacement: per class, candidates are
// sorted lexicographically by sample id, Fisher-Yates shuffled with an
// mt19937_64 seeded from fnv1a64(spec.seed le64 || class_id le64), and the
// first per_class are taken. Candidates must match one of the class's
// (family, type) rows, have node_count < max_nodes, and not appear in
// `exclude`.
Selection build_split(const CorpusIndex& index, const SplitSpec& spec,
                      const std::set<std::string>& exclude = {});

std::uint64_t split_class_seed(std::uint64_t seed, int class_id);

std::string selection_to_json(const SplitSpec& spec, const Selection& selection);
Selection selection_from_json(const std::string& text, SplitSpec* spec_out = nullptr);

struct DisjointnessReport {
    bool pass = false;  // true iff all pairwise sample intersections are empty
    struct PairOverlap {
        int first = 0;
        int second = 0;
        std::vector<std::string> shared_samples;
        std::vector<std::pair<std::string, std::string>> shared_labels;  // (family, type)
    };
    std::vector<PairOverlap> pairs;

    std::string to_json() const;
};

// Sample-id and (family, type) overlap audit across split selections.
DisjointnessReport verify_disjoint(const CorpusIndex& index, const std::vector<Selection>& splits);

enum class StructureKind { kChainHeavy, kStarHeavy, kRandom };
const char* structure_kind_name(StructureKind kind);

struct SyntheticConfig {
    int families = 5;
    int types_per_family = 2;
    int samples_per_type = 50;
    int nodes_min = 12;
    int nodes_max = 32;
    double external_fraction = 0.3;   // rho
    double signature_strength = 0.9;  // probability a token comes from the family pool
    int embedding_dim = 64;
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static SyntheticConfig from_json(const std::string& text);
};

// Family identity lives in tokens (and synthetic embeddings); graph topology
// is fixed per type index, so structure shifts across types while token
// signatures persist. Fraction rho of nodes are external. Deterministic per
// seed, independent of generation order: every sample derives its own RNG
// from seed ^ fnv1a64(sample_id).
void generate_synthetic_corpus(const SyntheticConfig& config, const std::filesystem::path& root,
                               int workers = 1);

struct SyntheticSample {
    std::string sample_id;
    Label label;
    std::vector<Edge> edges;
    std::vector<FunctionRecord> records;
    EmbeddingTable embeddings;  // internal nodes only
};

SyntheticSample generate_synthetic_sample(const SyntheticConfig& config, int family, int type,
                                          int sample_index);

StructureKind structure_for_type(int type_index);

}  // namespace malgraph
