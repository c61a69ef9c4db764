#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "malgraph/types.hpp"

namespace malgraph {

// Edge file: one "src dst" pair per line, base-10, LF-terminated.
std::vector<Edge> parse_edges(const std::string& text, std::int32_t n);
std::vector<Edge> read_edges_file(const std::filesystem::path& path, std::int32_t n);
std::string format_edges(const std::vector<Edge>& edges);
void write_edges_file(const std::filesystem::path& path, const std::vector<Edge>& edges);

// Record file: JSON Lines, line i = node i. Code bytes travel as "bytes_b64".
std::vector<FunctionRecord> parse_records(const std::string& text);
std::vector<FunctionRecord> read_records_file(const std::filesystem::path& path);
std::string format_records(const std::vector<FunctionRecord>& records);
void write_records_file(const std::filesystem::path& path, const std::vector<FunctionRecord>& records);
std::int64_t count_record_lines(const std::filesystem::path& path);

// Builds the topology half of a sample: adjacency with duplicates collapsed,
// self-loops retained, features left unpopulated.
AttributedGraph load_sample(const std::filesystem::path& edges_path,
                            const std::filesystem::path& records_path);
AttributedGraph load_sample_from_records(const std::vector<Edge>& raw_edges,
                                         const std::vector<FunctionRecord>& records);

// .fmx: one-line JSON header, then rows*cols little-endian f32, then the
// group-presence mask packed LSB-first per node row.
struct FeatureMatrixFile {
    FeatureSchema schema;
    std::int64_t rows = 0;
    std::vector<float> values;           // rows * schema.dim
    std::vector<std::uint8_t> present;   // rows * schema.group_count()
};

std::vector<std::uint8_t> encode_feature_matrix(const AttributedGraph& g);
FeatureMatrixFile decode_feature_matrix(const std::vector<std::uint8_t>& bytes,
                                        const FeatureSchema* expected = nullptr);
void write_feature_matrix(const AttributedGraph& g, const std::filesystem::path& path);
FeatureMatrixFile read_feature_matrix(const std::filesystem::path& path,
                                      const FeatureSchema* expected = nullptr);

// Corpus layout: root/<family>/<type>/<sample_dir>/ holding kEdgesFileName and
// kRecordsFileName. sample_id is "<family>/<type>/<sample_dir>".
inline constexpr const char* kEdgesFileName = "edges.txt";
inline constexpr const char* kRecordsFileName = "records.jsonl";
inline constexpr const char* kEmbeddingsFileName = "embeddings.emb";
inline constexpr const char* kFeaturesFileName = "features.fmx";

CorpusIndex scan_corpus(const std::filesystem::path& root);

std::string corpus_index_to_json(const CorpusIndex& index);
CorpusIndex corpus_index_from_json(const std::string& text);

}  // namespace malgraph
