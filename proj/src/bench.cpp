#include "malgraph/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "malgraph/features.hpp"
#include "malgraph/io.hpp"

namespace malgraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void SplitSpec::validate() const {
    classes.validate();
    std::vector<std::string> problems;
    if (per_class < 1) problems.push_back("per_class must be >= 1");
    if (max_nodes < 2) problems.push_back("max_nodes must be >= 2");
    if (variant != "tiny" && variant != "common" && variant != "distinct") {
        problems.push_back("variant must be tiny|common|distinct");
    }
    if (!problems.empty()) {
        std::string msg = "invalid split spec:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::string SplitSpec::to_json() const {
    ordered_json out;
    out["variant"] = variant;
    out["per_class"] = per_class;
    out["max_nodes"] = max_nodes;
    out["seed"] = seed;
    out["classes"] = json::parse(classes.to_json()).at("classes");
    return out.dump(2) + "\n";
}

SplitSpec SplitSpec::from_json(const std::string& text) {
    const json obj = json::parse(text);
    SplitSpec spec;
    spec.variant = obj.at("variant").get<std::string>();
    spec.per_class = obj.at("per_class").get<int>();
    spec.max_nodes = obj.at("max_nodes").get<int>();
    spec.seed = obj.at("seed").get<std::uint64_t>();
    ordered_json wrapper;
    wrapper["classes"] = obj.at("classes");
    spec.classes = ClassTable::from_json(wrapper.dump());
    spec.validate();
    return spec;
}

std::uint64_t split_class_seed(std::uint64_t seed, int class_id) {
    return fnv1a64_u64(static_cast<std::uint64_t>(class_id), fnv1a64_u64(seed));
}

Selection build_split(const CorpusIndex& index, const SplitSpec& spec,
                      const std::set<std::string>& exclude) {
    spec.validate();
    Selection selection;
    for (const auto& row : spec.classes.rows) {
        std::vector<std::string> candidates;
        for (const auto& entry : index.entries) {
            if (entry.family != row.family) continue;
            if (std::find(row.types.begin(), row.types.end(), entry.type) == row.types.end()) continue;
            if (entry.node_count >= spec.max_nodes) continue;  // strictly under
            if (exclude.count(entry.sample_id)) continue;
            candidates.push_back(entry.sample_id);
        }
        std::sort(candidates.begin(), candidates.end());
        if (static_cast<int>(candidates.size()) < spec.per_class) {
            throw ValidationError("class " + std::to_string(row.class_id) + " (" + row.family +
                                  "): need " + std::to_string(spec.per_class) + " samples, only " +
                                  std::to_string(candidates.size()) + " candidates (short by " +
                                  std::to_string(spec.per_class - candidates.size()) + ")");
        }
        Rng rng(split_class_seed(spec.seed, row.class_id));
        rng.shuffle(candidates);
        candidates.resize(static_cast<std::size_t>(spec.per_class));
        selection[row.class_id] = std::move(candidates);
    }
    return selection;
}

std::string selection_to_json(const SplitSpec& spec, const Selection& selection) {
    ordered_json out;
    out["spec"] = json::parse(spec.to_json());
    ordered_json sel = ordered_json::object();
    for (const auto& [cls, ids] : selection) sel[std::to_string(cls)] = ids;
    out["selection"] = sel;
    return out.dump(2) + "\n";
}

Selection selection_from_json(const std::string& text, SplitSpec* spec_out) {
    const json obj = json::parse(text);
    if (spec_out) *spec_out = SplitSpec::from_json(obj.at("spec").dump());
    Selection selection;
    for (auto it = obj.at("selection").begin(); it != obj.at("selection").end(); ++it) {
        selection[std::stoi(it.key())] = it.value().get<std::vector<std::string>>();
    }
    return selection;
}

std::string DisjointnessReport::to_json() const {
    ordered_json out;
    out["pass"] = pass;
    ordered_json pairs_json = ordered_json::array();
    for (const auto& p : pairs) {
        ordered_json jp;
        jp["first"] = p.first;
        jp["second"] = p.second;
        jp["shared_samples"] = p.shared_samples;
        ordered_json labels = ordered_json::array();
        for (const auto& [family, type] : p.shared_labels) {
            labels.push_back(ordered_json::array({family, type}));
        }
        jp["shared_labels"] = labels;
        pairs_json.push_back(jp);
    }
    out["pairs"] = pairs_json;
    return out.dump(2) + "\n";
}

DisjointnessReport verify_disjoint(const CorpusIndex& index, const std::vector<Selection>& splits) {
    if (splits.size() < 2) throw ValidationError("verify_disjoint: need at least 2 splits");

    const auto flatten_ids = [](const Selection& s) {
        std::set<std::string> ids;
        for (const auto& [cls, list] : s) ids.insert(list.begin(), list.end());
        return ids;
    };
    const auto flatten_labels = [&](const Selection& s) {
        std::set<std::pair<std::string, std::string>> labels;
        for (const auto& [cls, list] : s) {
            for (const auto& id : list) {
                if (const CorpusEntry* e = index.find(id)) labels.insert({e->family, e->type});
            }
        }
        return labels;
    };

    DisjointnessReport report;
    report.pass = true;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        const auto ids_i = flatten_ids(splits[i]);
        const auto labels_i = flatten_labels(splits[i]);
        for (std::size_t j = i + 1; j < splits.size(); ++j) {
            const auto ids_j = flatten_ids(splits[j]);
            const auto labels_j = flatten_labels(splits[j]);
            DisjointnessReport::PairOverlap overlap;
            overlap.first = static_cast<int>(i);
            overlap.second = static_cast<int>(j);
            std::set_intersection(ids_i.begin(), ids_i.end(), ids_j.begin(), ids_j.end(),
                                  std::back_inserter(overlap.shared_samples));
            std::set_intersection(labels_i.begin(), labels_i.end(), labels_j.begin(), labels_j.end(),
                                  std::back_inserter(overlap.shared_labels));
            if (!overlap.shared_samples.empty()) report.pass = false;
            report.pairs.push_back(std::move(overlap));
        }
    }
    return report;
}

const char* structure_kind_name(StructureKind kind) {
    switch (kind) {
        case StructureKind::kChainHeavy: return "chain-heavy";
        case StructureKind::kStarHeavy: return "star-heavy";
        case StructureKind::kRandom: return "random";
    }
    return "?";
}

StructureKind structure_for_type(int type_index) {
    switch (type_index % 3) {
        case 0: return StructureKind::kChainHeavy;
        case 1: return StructureKind::kStarHeavy;
        default: return StructureKind::kRandom;
    }
}

void SyntheticConfig::validate() const {
    std::vector<std::string> problems;
    if (families < 1) problems.push_back("families must be >= 1");
    if (types_per_family < 1) problems.push_back("types_per_family must be >= 1");
    if (samples_per_type < 1) problems.push_back("samples_per_type must be >= 1");
    if (nodes_min < 1 || nodes_max < nodes_min) problems.push_back("node range invalid");
    if (external_fraction < 0.0 || external_fraction >= 1.0) {
        problems.push_back("external_fraction must be in [0, 1)");
    }
    if (signature_strength < 0.0 || signature_strength > 1.0) {
        problems.push_back("signature_strength must be in [0, 1]");
    }
    if (embedding_dim < 1) problems.push_back("embedding_dim must be >= 1");
    if (!problems.empty()) {
        std::string msg = "invalid synthetic config:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw ConfigError(msg);
    }
}

std::string SyntheticConfig::to_json() const {
    ordered_json out;
    out["families"] = families;
    out["types_per_family"] = types_per_family;
    out["samples_per_type"] = samples_per_type;
    out["nodes_min"] = nodes_min;
    out["nodes_max"] = nodes_max;
    out["external_fraction"] = external_fraction;
    out["signature_strength"] = signature_strength;
    out["embedding_dim"] = embedding_dim;
    out["seed"] = seed;
    return out.dump(2) + "\n";
}

SyntheticConfig SyntheticConfig::from_json(const std::string& text) {
    const json obj = json::parse(text);
    SyntheticConfig c;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        if (key == "families") c.families = it.value().get<int>();
        else if (key == "types_per_family") c.types_per_family = it.value().get<int>();
        else if (key == "samples_per_type") c.samples_per_type = it.value().get<int>();
        else if (key == "nodes_min") c.nodes_min = it.value().get<int>();
        else if (key == "nodes_max") c.nodes_max = it.value().get<int>();
        else if (key == "external_fraction") c.external_fraction = it.value().get<double>();
        else if (key == "signature_strength") c.signature_strength = it.value().get<double>();
        else if (key == "embedding_dim") c.embedding_dim = it.value().get<int>();
        else if (key == "seed") c.seed = it.value().get<std::uint64_t>();
        else throw ConfigError("synthetic config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

namespace {

std::string family_name(int f) { return "fam" + std::to_string(f); }
std::string type_name(int t) { return "t" + std::to_string(t); }

const std::vector<std::string>& noise_tokens() {
    static const std::vector<std::string> pool = [] {
        std::vector<std::string> v;
        for (int i = 0; i < 64; ++i) v.push_back("noise" + std::to_string(i));
        return v;
    }();
    return pool;
}

const std::vector<std::string>& api_tokens() {
    static const std::vector<std::string> pool = [] {
        std::vector<std::string> v;
        for (int i = 0; i < 32; ++i) v.push_back("api" + std::to_string(i));
        return v;
    }();
    return pool;
}

const std::vector<std::string>& param_type_tokens() {
    static const std::vector<std::string> pool = {"int", "long", "boolean", "String", "Object",
                                                  "Context", "Bundle", "byte[]"};
    return pool;
}

const std::vector<std::string>& opcode_tokens() {
    static const std::vector<std::string> pool = {
        "invoke-virtual", "invoke-static", "iget", "iput",       "const-string", "return-void",
        "move",           "if-eqz",        "goto", "new-instance"};
    return pool;
}

const std::vector<std::string>& literal_pool() {
    static const std::vector<std::string> pool = {
        "/sdcard/cache",
        "/storage/emulated/0/tmp",
        "https://cdn.example.net/payload.js",
        "http://10.0.2.2/beacon",
        "server=192.168.1.100",
        "Settings.Secure",
        "/shared_prefs/app.xml",
        "DexFile",
        "ClassLoader",
        "hello world",
        "config_v2",
        "token=abc123",
    };
    return pool;
}

std::vector<std::string> signature_tokens(int family) {
    std::vector<std::string> v;
    for (int i = 0; i < 16; ++i) {
        v.push_back(family_name(family) + "_sig" + std::to_string(i));
    }
    return v;
}

const std::string& pick(Rng& rng, const std::vector<std::string>& pool) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

std::vector<Edge> make_structure(Rng& rng, int n, StructureKind kind) {
    std::vector<Edge> edges;
    switch (kind) {
        case StructureKind::kChainHeavy: {
            for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
            const int extras = std::max(1, n / 8);
            for (int e = 0; e < extras; ++e) {
                edges.emplace_back(static_cast<std::int32_t>(rng.below(n)),
                                   static_cast<std::int32_t>(rng.below(n)));
            }
            break;
        }
        case StructureKind::kStarHeavy: {
            const int hubs = std::max(2, n / 4);
            for (int i = hubs; i < n; ++i) {
                edges.emplace_back(static_cast<std::int32_t>(rng.below(hubs)), i);
            }
            for (int h = 1; h < hubs; ++h) edges.emplace_back(h - 1, h);
            break;
        }
        case StructureKind::kRandom: {
            for (int i = 0; i < n; ++i) {
                const int out_degree = 1 + static_cast<int>(rng.below(3));
                for (int e = 0; e < out_degree; ++e) {
                    edges.emplace_back(i, static_cast<std::int32_t>(rng.below(n)));
                }
            }
            break;
        }
    }
    return edges;
}

FunctionRecord make_external_record(Rng& rng) {
    FunctionRecord r;
    r.external = true;
    r.class_name = {"android", pick(rng, api_tokens()), pick(rng, api_tokens())};
    r.method_name = pick(rng, api_tokens());
    const int params = static_cast<int>(rng.below(3));
    for (int p = 0; p < params; ++p) r.param_types.push_back(pick(rng, param_type_tokens()));
    r.num_params = params;
    r.return_type = pick(rng, param_type_tokens());
    r.set_flag(AccessFlag::kPublic);
    if (rng.bernoulli(0.5)) r.set_flag(AccessFlag::kNative);
    return r;
}

FunctionRecord make_internal_record(Rng& rng, const std::vector<std::string>& sig, double strength) {
    const auto token = [&]() -> const std::string& {
        return rng.bernoulli(strength) ? pick(rng, sig) : pick(rng, noise_tokens());
    };
    FunctionRecord r;
    r.external = false;
    r.class_name = {"com", token(), token()};
    r.method_name = token();
    const int params = static_cast<int>(rng.below(4));
    for (int p = 0; p < params; ++p) r.param_types.push_back(pick(rng, param_type_tokens()));
    r.num_params = params;
    r.return_type = pick(rng, param_type_tokens());
    r.set_flag(AccessFlag::kPublic);
    if (rng.bernoulli(0.3)) r.set_flag(AccessFlag::kStatic);
    if (rng.bernoulli(0.2)) r.set_flag(AccessFlag::kFinal);

    if (rng.bernoulli(0.95)) r.num_registers = 1 + static_cast<std::int64_t>(rng.below(16));

    CodeBlock code;
    const int code_len = 16 + static_cast<int>(rng.below(241));
    code.bytes.reserve(static_cast<std::size_t>(code_len));
    for (int b = 0; b < code_len; ++b) {
        code.bytes.push_back(static_cast<std::uint8_t>(rng.below(256)));
    }
    code.length = code_len;
    r.code = std::move(code);

    InstructionInfo info;
    const int op_count = 4 + static_cast<int>(rng.below(9));
    for (int o = 0; o < op_count; ++o) info.opcodes.push_back(pick(rng, opcode_tokens()));
    info.count = op_count;
    info.cached = rng.bernoulli(0.5);
    r.instructions = std::move(info);

    if (rng.bernoulli(0.9)) {
        std::vector<std::string> strings;
        const int count = static_cast<int>(rng.below(4));
        for (int s = 0; s < count; ++s) {
            strings.push_back(rng.bernoulli(strength) ? pick(rng, sig) + "_lit"
                                                      : pick(rng, literal_pool()));
        }
        r.strings = std::move(strings);
    }
    return r;
}

bool record_fully_populated(const FunctionRecord& r) {
    return !r.external && r.num_registers && r.code && r.instructions && r.strings;
}

}  // namespace

SyntheticSample generate_synthetic_sample(const SyntheticConfig& config, int family, int type,
                                          int sample_index) {
    config.validate();
    char dir_name[16];
    std::snprintf(dir_name, sizeof(dir_name), "s%05d", sample_index);
    SyntheticSample sample;
    sample.label = Label{family_name(family), type_name(type)};
    sample.sample_id = sample.label.family + "/" + sample.label.type + "/" + dir_name;

    const std::vector<std::string> sig = signature_tokens(family);
    const std::uint64_t base_seed = config.seed ^ fnv1a64(sample.sample_id);

    // Prune needs at least one fully-populated node; retry with a derived
    // seed on the (rare) draw where every node is external or partial.
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 1000) throw ValidationError("synthetic sample generation failed: " + sample.sample_id);
        Rng rng(fnv1a64_u64(attempt, fnv1a64_u64(base_seed)));
        const int n = config.nodes_min +
                      static_cast<int>(rng.below(static_cast<std::uint64_t>(config.nodes_max - config.nodes_min + 1)));

        sample.records.clear();
        bool any_complete = false;
        for (int i = 0; i < n; ++i) {
            if (rng.bernoulli(config.external_fraction)) {
                sample.records.push_back(make_external_record(rng));
            } else {
                sample.records.push_back(make_internal_record(rng, sig, config.signature_strength));
                any_complete = any_complete || record_fully_populated(sample.records.back());
            }
        }
        if (!any_complete) continue;

        sample.edges = canonical_edges(make_structure(rng, n, structure_for_type(type)), n);

        sample.embeddings = EmbeddingTable{};
        sample.embeddings.dim = config.embedding_dim;
        for (int i = 0; i < n; ++i) {
            if (sample.records[i].external) continue;
            std::vector<float> e(static_cast<std::size_t>(config.embedding_dim), 0.0f);
            for (auto& x : e) x = static_cast<float>(0.1 * (rng.uniform() - 0.5));
            e[static_cast<std::size_t>(family % config.embedding_dim)] +=
                static_cast<float>(config.signature_strength);
            sample.embeddings.entries.emplace(i, std::move(e));
        }
        break;
    }
    return sample;
}

void generate_synthetic_corpus(const SyntheticConfig& config, const std::filesystem::path& root,
                               int workers) {
    config.validate();
    namespace fs = std::filesystem;

    struct Task {
        int family;
        int type;
        int index;
        fs::path dir;
    };
    std::vector<Task> tasks;
    for (int f = 0; f < config.families; ++f) {
        for (int t = 0; t < config.types_per_family; ++t) {
            const fs::path type_dir = root / family_name(f) / type_name(t);
            fs::create_directories(type_dir);
            for (int s = 0; s < config.samples_per_type; ++s) {
                char dir_name[16];
                std::snprintf(dir_name, sizeof(dir_name), "s%05d", s);
                tasks.push_back(Task{f, t, s, type_dir / dir_name});
            }
        }
    }

    const auto run_task = [&](const Task& task) {
        const SyntheticSample sample = generate_synthetic_sample(config, task.family, task.type, task.index);
        fs::create_directories(task.dir);
        write_edges_file(task.dir / kEdgesFileName, sample.edges);
        write_records_file(task.dir / kRecordsFileName, sample.records);
        write_embeddings(sample.embeddings, task.dir / kEmbeddingsFileName);
    };

    if (workers <= 1) {
        for (const auto& task : tasks) run_task(task);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                run_task(tasks[i]);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace malgraph
