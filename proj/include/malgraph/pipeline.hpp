#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "malgraph/bench.hpp"
#include "malgraph/collate.hpp"
#include "malgraph/features.hpp"
#include "malgraph/train.hpp"

namespace malgraph {

// Dataset directory layout mirrors the corpus: <family>/<type>/<sample>/ with
// features.fmx + edges.txt per sample, plus index.json and classes.json at
// the root.
inline constexpr const char* kIndexFileName = "index.json";
inline constexpr const char* kClassesFileName = "classes.json";

struct ExtractOptions {
    FeatureConfig features;
    std::optional<std::filesystem::path> embeddings_root;  // defaults to the corpus itself
    int workers = 1;
};

// phi over a whole corpus: scan, extract per sample, write the dataset dir.
// Output bytes are independent of the worker count.
CorpusIndex extract_corpus(const std::filesystem::path& corpus, const std::filesystem::path& out,
                           const ExtractOptions& options);

// Applies one collation scheme to every sample of an extracted dataset.
// Trim uses the dataset-wide group intersection so all outputs share one
// width; prune rewrites edges and node counts.
void collate_dataset(const std::filesystem::path& in, const std::filesystem::path& out,
                     CollationScheme scheme);

// Loads a dataset directory. With a selection, only the listed sample ids are
// loaded and class ids come from the selection; otherwise labels map through
// classes.json.
Dataset load_dataset(const std::filesystem::path& dir, const Selection* selection = nullptr);

AttributedGraph load_dataset_sample(const std::filesystem::path& sample_dir);

}  // namespace malgraph
