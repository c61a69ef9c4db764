#include "malgraph/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include "malgraph/io.hpp"

namespace malgraph {

namespace fs = std::filesystem;

namespace {

// Dataset indexes store sample paths relative to the dataset root, so trees
// are relocatable and byte-comparable.
fs::path resolve_entry_path(const fs::path& root, const std::string& stored) {
    const fs::path p(stored);
    return p.is_absolute() ? p : root / p;
}

std::string relative_sample_path(const CorpusEntry& entry) {
    return (fs::path(entry.family) / entry.type / fs::path(entry.sample_id).filename()).string();
}

ClassTable table_from_index(const CorpusIndex& index) {
    std::vector<Label> labels;
    labels.reserve(index.entries.size());
    for (const auto& e : index.entries) labels.push_back(Label{e.family, e.type});
    return derive_class_table(labels);
}

}  // namespace

CorpusIndex extract_corpus(const fs::path& corpus, const fs::path& out, const ExtractOptions& options) {
    if (!options.features.meta && !options.features.llm && !options.features.ldp) {
        throw ConfigError("extract: no feature family selected");
    }
    CorpusIndex index = scan_corpus(corpus);
    if (index.entries.empty()) throw ValidationError("extract: corpus at " + corpus.string() + " is empty");

    const fs::path emb_root = options.embeddings_root.value_or(corpus);

    fs::create_directories(out);
    for (const auto& entry : index.entries) {
        fs::create_directories(out / entry.family / entry.type);
    }

    std::mutex error_mutex;
    std::string first_error;
    std::atomic<std::size_t> next{0};
    const auto run_entry = [&](CorpusEntry& entry) {
        const fs::path src_dir(entry.path);
        const fs::path dst_dir = out / entry.family / entry.type / fs::path(entry.sample_id).filename();
        fs::create_directories(dst_dir);

        const auto records = read_records_file(src_dir / kRecordsFileName);
        const AttributedGraph topo = load_sample_from_records(
            read_edges_file(src_dir / kEdgesFileName, static_cast<std::int32_t>(records.size())),
            records);
        EmbeddingTable table;
        if (options.features.llm) {
            const fs::path emb_path =
                emb_root / entry.family / entry.type / fs::path(entry.sample_id).filename() /
                kEmbeddingsFileName;
            if (!fs::exists(emb_path)) {
                throw IoError("extract: missing embeddings for sample " + entry.sample_id + " at " +
                              emb_path.string());
            }
            table = ingest_embeddings(emb_path, topo.n);
        }
        AttributedGraph g = assemble_features(topo, records,
                                              options.features.llm ? &table : nullptr, options.features);
        g.sample_id = entry.sample_id;
        g.label = Label{entry.family, entry.type};
        write_feature_matrix(g, dst_dir / kFeaturesFileName);
        write_edges_file(dst_dir / kEdgesFileName, g.edges);
        entry.path = relative_sample_path(entry);
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        for (auto& entry : index.entries) run_entry(entry);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= index.entries.size()) return;
                    try {
                        run_entry(index.entries[i]);
                    } catch (const std::exception& e) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (first_error.empty()) first_error = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (!first_error.empty()) throw Error(first_error);
    }

    write_text_file(out / kIndexFileName, corpus_index_to_json(index));
    write_text_file(out / kClassesFileName, table_from_index(index).to_json());
    return index;
}

AttributedGraph load_dataset_sample(const fs::path& sample_dir) {
    const FeatureMatrixFile fmx = read_feature_matrix(sample_dir / kFeaturesFileName);
    AttributedGraph g;
    g.n = static_cast<std::int32_t>(fmx.rows);
    g.schema = fmx.schema;
    g.x = fmx.values;
    g.present = fmx.present;
    g.edges = read_edges_file(sample_dir / kEdgesFileName, g.n);
    return g;
}

void collate_dataset(const fs::path& in, const fs::path& out, CollationScheme scheme) {
    CorpusIndex index = corpus_index_from_json(read_text_file(in / kIndexFileName));
    const std::string classes_json = read_text_file(in / kClassesFileName);
    if (index.entries.empty()) throw ValidationError("collate: dataset at " + in.string() + " is empty");

    // Load everything up front; trim needs the dataset-wide intersection.
    std::vector<AttributedGraph> graphs;
    graphs.reserve(index.entries.size());
    for (const auto& entry : index.entries) {
        AttributedGraph g = load_dataset_sample(resolve_entry_path(in, entry.path));
        g.sample_id = entry.sample_id;
        g.label = Label{entry.family, entry.type};
        graphs.push_back(std::move(g));
    }

    std::vector<std::string> trim_groups;
    std::set<int> trim_removed_cols;
    if (scheme == CollationScheme::kTrim) {
        std::vector<const AttributedGraph*> ptrs;
        ptrs.reserve(graphs.size());
        for (const auto& g : graphs) ptrs.push_back(&g);
        const FeatureSchema schema = dataset_trim_schema(ptrs);
        for (const auto& grp : schema.groups) trim_groups.push_back(grp.name);
        for (const auto& grp : graphs.front().schema.groups) {
            if (schema.find_group(grp.name) >= 0) continue;
            for (int c = grp.offset; c < grp.offset + grp.width; ++c) trim_removed_cols.insert(c);
        }
    }

    fs::create_directories(out);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        CorpusEntry& entry = index.entries[i];
        const fs::path dst_dir = out / entry.family / entry.type / fs::path(entry.sample_id).filename();
        fs::create_directories(dst_dir);

        AttributedGraph result;
        CollationReport report;
        if (scheme == CollationScheme::kTrim) {
            result = trim_to_groups(graphs[i], trim_groups);
            report.scheme = CollationScheme::kTrim;
            report.output_dim = result.schema.dim;
            report.dims_removed = trim_removed_cols;  // dataset-wide column set
        } else {
            CollationResult r = collate(graphs[i], scheme);
            result = std::move(r.graph);
            report = std::move(r.report);
        }
        write_feature_matrix(result, dst_dir / kFeaturesFileName);
        write_edges_file(dst_dir / kEdgesFileName, result.edges);
        write_text_file(dst_dir / "collate_report.json", report.to_json());
        entry.path = relative_sample_path(entry);
        entry.node_count = result.n;
    }
    write_text_file(out / kIndexFileName, corpus_index_to_json(index));
    write_text_file(out / kClassesFileName, classes_json);
}

Dataset load_dataset(const fs::path& dir, const Selection* selection) {
    const CorpusIndex index = corpus_index_from_json(read_text_file(dir / kIndexFileName));
    Dataset data;
    data.classes = ClassTable::from_json(read_text_file(dir / kClassesFileName));

    const auto load_one = [&](const CorpusEntry& entry, int label) {
        Sample s;
        s.graph = load_dataset_sample(resolve_entry_path(dir, entry.path));
        s.graph.sample_id = entry.sample_id;
        s.graph.label = Label{entry.family, entry.type};
        s.label = label;
        data.samples.push_back(std::move(s));
    };

    if (selection) {
        for (const auto& [cls, ids] : *selection) {
            for (const auto& id : ids) {
                const CorpusEntry* entry = index.find(id);
                if (!entry) throw ValidationError("selection names unknown sample '" + id + "'");
                load_one(*entry, cls);
            }
        }
    } else {
        for (const auto& entry : index.entries) {
            const int cls = data.classes.class_of(Label{entry.family, entry.type});
            if (cls < 0) {
                throw ValidationError("sample " + entry.sample_id +
                                      " has no class in the dataset's class table");
            }
            load_one(entry, cls);
        }
    }
    std::sort(data.samples.begin(), data.samples.end(),
              [](const Sample& a, const Sample& b) { return a.graph.sample_id < b.graph.sample_id; });
    return data;
}

}  // namespace malgraph
