#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "malgraph/types.hpp"

namespace malgraph {

inline constexpr int kHashDim = 50;
inline constexpr int kByteHistDim = 256;
inline constexpr int kByteEntropyDim = 256;  // 16 entropy bins x 16 byte bins
inline constexpr int kCharHistDim = 96;      // printable ASCII + other bucket
inline constexpr int kLdpDim = 5;
inline constexpr int kMetaDim = 936;
inline constexpr int kMetaGroupCount = 24;
inline constexpr int kMetaUniversalGroups = 5;

// Signed feature hashing: slot = fnv1a64(token) mod width, sign from bit 63.
// Token order does not matter; hash(a ++ b) == hash(a) + hash(b).
std::vector<float> hash_tokens(const std::vector<std::string>& tokens, int width = kHashDim);

// Byte value distribution, normalized to sum 1; empty input -> zeros.
std::array<float, kByteHistDim> byte_histogram(const std::vector<std::uint8_t>& bytes);

// EMBER-style joint (window entropy, byte value) histogram: 2048-byte windows
// with stride 1024 (whole input as a single window when shorter), entropy in
// bits binned by floor(2H) capped at 15, byte high nibble as the second axis,
// flattened entropy-major and normalized to sum 1.
std::array<float, kByteEntropyDim> byte_entropy_histogram(const std::vector<std::uint8_t>& bytes);

double shannon_entropy_bits(const double* probs, int count);

struct StringStats {
    float num_strings = 0;
    float avg_length = 0;
    std::array<float, kCharHistDim> char_histogram{};
    float char_entropy = 0;   // bits, over char_histogram
    float has_invalid_chars = 0;
    float external_paths = 0;     // strings starting with "/"
    float urls = 0;               // strings containing http:// or https://
    float ips = 0;                // strings containing a dotted quad, each group <= 255
    float registry_mods = 0;      // shared_prefs / Settings.* keywords
    float in_memory_exec = 0;     // ClassLoader / DexFile / ... keywords
};

// Counters are counts of matching strings; a string matching several keywords
// of one category still counts once.
StringStats string_stats(const std::vector<std::string>& strings);

// Meta feature layout, fixed order. The first 5 groups (names + signature)
// are universal; the rest depend on what the analyzer could extract.
struct MetaGroupSpec {
    const char* name;
    int width;
    bool universal;
};
const std::array<MetaGroupSpec, kMetaGroupCount>& meta_group_specs();
FeatureSchema meta_schema();

struct MetaVector {
    std::array<float, kMetaDim> values{};
    std::array<bool, kMetaGroupCount> present{};
};

MetaVector meta_features(const FunctionRecord& record);

// Local degree profile on the deduplicated undirected view, self-loops
// excluded from neighborhoods. Row = [deg, min, max, mean, std of neighbor
// degrees]; all-zero for isolated nodes. std is the population form.
std::vector<std::array<float, kLdpDim>> ldp_features(std::int32_t n, const std::vector<Edge>& edges);

struct EmbeddingTable {
    int dim = 0;
    std::map<std::int32_t, std::vector<float>> entries;
};

// .emb: one-line JSON header {"magic":"EMB1","dim":E,"count":K}, then K
// records of (u32le node_id, E f32le values).
std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table);
EmbeddingTable decode_embeddings(const std::vector<std::uint8_t>& bytes, std::int32_t n);
void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable ingest_embeddings(const std::filesystem::path& path, std::int32_t n);

struct FeatureConfig {
    bool meta = true;
    bool llm = false;
    bool ldp = true;

    bool operator==(const FeatureConfig&) const = default;
};

FeatureSchema assembled_schema(const FeatureConfig& config, int llm_dim);

// phi_F: fills X = Meta || LLM || LDP (configured subset, in that order) and
// the per-group presence mask on top of the loaded topology.
AttributedGraph assemble_features(const AttributedGraph& topology,
                                  const std::vector<FunctionRecord>& records,
                                  const EmbeddingTable* embeddings, const FeatureConfig& config);

}  // namespace malgraph
