#include "malgraph/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <json.hpp>

namespace malgraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::vector<float> hash_tokens(const std::vector<std::string>& tokens, int width) {
    std::vector<float> out(static_cast<std::size_t>(width), 0.0f);
    for (const auto& tok : tokens) {
        const std::uint64_t h = fnv1a64(tok);
        const auto idx = static_cast<std::size_t>(h % static_cast<std::uint64_t>(width));
        out[idx] += (h >> 63) ? -1.0f : 1.0f;
    }
    return out;
}

std::array<float, kByteHistDim> byte_histogram(const std::vector<std::uint8_t>& bytes) {
    std::array<float, kByteHistDim> out{};
    if (bytes.empty()) return out;
    std::array<std::int64_t, kByteHistDim> counts{};
    for (const auto b : bytes) ++counts[b];
    const auto total = static_cast<double>(bytes.size());
    for (int i = 0; i < kByteHistDim; ++i) {
        out[i] = static_cast<float>(counts[i] / total);
    }
    return out;
}

double shannon_entropy_bits(const double* probs, int count) {
    double h = 0.0;
    for (int i = 0; i < count; ++i) {
        if (probs[i] > 0.0) h -= probs[i] * std::log2(probs[i]);
    }
    return h;
}

namespace {

constexpr std::size_t kEntropyWindow = 2048;
constexpr std::size_t kEntropyStride = 1024;

double window_entropy_bits(const std::uint8_t* data, std::size_t len) {
    std::array<std::int64_t, 256> counts{};
    for (std::size_t i = 0; i < len; ++i) ++counts[data[i]];
    double h = 0.0;
    for (int v = 0; v < 256; ++v) {
        if (counts[v] == 0) continue;
        const double p = static_cast<double>(counts[v]) / static_cast<double>(len);
        h -= p * std::log2(p);
    }
    return h;
}

}  // namespace

std::array<float, kByteEntropyDim> byte_entropy_histogram(const std::vector<std::uint8_t>& bytes) {
    std::array<float, kByteEntropyDim> out{};
    if (bytes.empty()) return out;

    std::array<std::int64_t, kByteEntropyDim> counts{};
    std::int64_t total = 0;
    auto accumulate_window = [&](std::size_t start, std::size_t len) {
        const double h = window_entropy_bits(bytes.data() + start, len);
        const int entropy_bin = std::min(15, static_cast<int>(std::floor(h * 2.0)));
        for (std::size_t i = 0; i < len; ++i) {
            const int byte_bin = bytes[start + i] >> 4;
            ++counts[entropy_bin * 16 + byte_bin];
            ++total;
        }
    };

    if (bytes.size() < kEntropyWindow) {
        accumulate_window(0, bytes.size());
    } else {
        // Full windows only; a trailing fragment shorter than the window is
        // covered by the preceding overlapping windows.
        for (std::size_t start = 0; start + kEntropyWindow <= bytes.size(); start += kEntropyStride) {
            accumulate_window(start, kEntropyWindow);
        }
    }
    for (int i = 0; i < kByteEntropyDim; ++i) {
        out[i] = static_cast<float>(static_cast<double>(counts[i]) / static_cast<double>(total));
    }
    return out;
}

namespace {

bool is_printable_ascii(std::uint8_t b) { return b >= 0x20 && b <= 0x7e; }

// Dotted quad of 1-3 digit groups, each <= 255, not embedded in a longer
// digit/dot run on either side.
bool contains_ipv4(const std::string& s) {
    const auto digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!digit(s[i])) continue;
        if (i > 0 && (digit(s[i - 1]) || s[i - 1] == '.')) continue;
        std::size_t p = i;
        bool ok = true;
        for (int group = 0; group < 4 && ok; ++group) {
            int value = 0;
            int digits = 0;
            while (p < s.size() && digit(s[p]) && digits < 3) {
                value = value * 10 + (s[p] - '0');
                ++p;
                ++digits;
            }
            if (digits == 0 || value > 255) {
                ok = false;
                break;
            }
            if (group < 3) {
                if (p >= s.size() || s[p] != '.') {
                    ok = false;
                } else {
                    ++p;
                }
            }
        }
        if (ok && p < s.size() && (digit(s[p]) || s[p] == '.')) ok = false;
        if (ok) return true;
    }
    return false;
}

const std::vector<std::string>& registry_keywords() {
    static const std::vector<std::string> kw = {"/shared_prefs/", "Settings.Secure", "Settings.System",
                                                "Settings.Global"};
    return kw;
}

const std::vector<std::string>& in_memory_exec_keywords() {
    static const std::vector<std::string> kw = {"ClassLoader", "DexFile",     "loadDex",
                                                "loadClass",   "defineClass", "loadLibrary"};
    return kw;
}

bool contains_any(const std::string& s, const std::vector<std::string>& keywords) {
    for (const auto& kw : keywords) {
        if (s.find(kw) != std::string::npos) return true;
    }
    return false;
}

}  // namespace

StringStats string_stats(const std::vector<std::string>& strings) {
    StringStats st;
    st.num_strings = static_cast<float>(strings.size());

    std::array<std::int64_t, kCharHistDim> counts{};
    std::int64_t total_bytes = 0;
    bool invalid = false;
    for (const auto& s : strings) {
        total_bytes += static_cast<std::int64_t>(s.size());
        for (const char ch : s) {
            const auto b = static_cast<std::uint8_t>(ch);
            if (is_printable_ascii(b)) {
                ++counts[b - 0x20];
            } else {
                ++counts[kCharHistDim - 1];
                if (b != 0x09 && b != 0x0a && b != 0x0d) invalid = true;
            }
        }
        if (!s.empty() && s.front() == '/') st.external_paths += 1.0f;
        if (s.find("http://") != std::string::npos || s.find("https://") != std::string::npos) {
            st.urls += 1.0f;
        }
        if (contains_ipv4(s)) st.ips += 1.0f;
        if (contains_any(s, registry_keywords())) st.registry_mods += 1.0f;
        if (contains_any(s, in_memory_exec_keywords())) st.in_memory_exec += 1.0f;
    }
    st.avg_length = strings.empty()
                        ? 0.0f
                        : static_cast<float>(static_cast<double>(total_bytes) /
                                             static_cast<double>(strings.size()));
    if (total_bytes > 0) {
        std::array<double, kCharHistDim> probs{};
        for (int i = 0; i < kCharHistDim; ++i) {
            probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total_bytes);
            st.char_histogram[i] = static_cast<float>(probs[i]);
        }
        st.char_entropy = static_cast<float>(shannon_entropy_bits(probs.data(), kCharHistDim));
    }
    st.has_invalid_chars = invalid ? 1.0f : 0.0f;
    return st;
}

const std::array<MetaGroupSpec, kMetaGroupCount>& meta_group_specs() {
    static const std::array<MetaGroupSpec, kMetaGroupCount> specs = {{
        {"class_name", kHashDim, true},
        {"method_name", kHashDim, true},
        {"num_params", 1, true},
        {"param_types", kHashDim, true},
        {"return_type", kHashDim, true},
        {"access_flags", kNumAccessFlags, false},
        {"num_registers", 1, false},
        {"code_length", 1, false},
        {"byte_histogram", kByteHistDim, false},
        {"byte_entropy_histogram", kByteEntropyDim, false},
        {"instr_count", 1, false},
        {"opcode_names", kHashDim, false},
        {"has_invalid_chars", 1, false},
        {"string_literals", kHashDim, false},
        {"num_strings", 1, false},
        {"avg_string_length", 1, false},
        {"char_histogram", kCharHistDim, false},
        {"char_entropy", 1, false},
        {"external_paths", 1, false},
        {"urls", 1, false},
        {"ips", 1, false},
        {"registry_mods", 1, false},
        {"in_memory_exec", 1, false},
        {"instructions_cached", 1, false},
    }};
    return specs;
}

FeatureSchema meta_schema() {
    std::vector<FeatureGroup> groups;
    groups.reserve(kMetaGroupCount);
    for (const auto& spec : meta_group_specs()) {
        groups.push_back(FeatureGroup{spec.name, 0, spec.width, spec.universal});
    }
    return make_schema(groups);
}

MetaVector meta_features(const FunctionRecord& record) {
    static const FeatureSchema schema = meta_schema();
    MetaVector out;

    const auto put = [&](int group, const float* values, int width) {
        std::memcpy(out.values.data() + schema.groups[group].offset, values,
                    static_cast<std::size_t>(width) * sizeof(float));
        out.present[group] = true;
    };
    const auto put_scalar = [&](int group, float value) { put(group, &value, 1); };
    const auto put_hashed = [&](int group, const std::vector<std::string>& tokens) {
        const auto v = hash_tokens(tokens, kHashDim);
        put(group, v.data(), kHashDim);
    };

    // Groups 1-5: always available, even for external functions.
    put_hashed(0, record.class_name);
    put_hashed(1, {record.method_name});
    put_scalar(2, static_cast<float>(record.num_params));
    put_hashed(3, record.param_types);
    put_hashed(4, {record.return_type});
    if (record.external) return out;

    {
        std::array<float, kNumAccessFlags> flags{};
        for (int i = 0; i < kNumAccessFlags; ++i) {
            flags[i] = record.has_flag(static_cast<AccessFlag>(i)) ? 1.0f : 0.0f;
        }
        put(5, flags.data(), kNumAccessFlags);
    }
    if (record.num_registers) put_scalar(6, static_cast<float>(*record.num_registers));
    if (record.code) {
        put_scalar(7, static_cast<float>(record.code->length));
        const auto bh = byte_histogram(record.code->bytes);
        put(8, bh.data(), kByteHistDim);
        const auto beh = byte_entropy_histogram(record.code->bytes);
        put(9, beh.data(), kByteEntropyDim);
    }
    if (record.instructions) {
        put_scalar(10, static_cast<float>(record.instructions->count));
        put_hashed(11, record.instructions->opcodes);
        put_scalar(23, record.instructions->cached ? 1.0f : 0.0f);
    }
    if (record.strings) {
        const StringStats st = string_stats(*record.strings);
        put_scalar(12, st.has_invalid_chars);
        put_hashed(13, *record.strings);
        put_scalar(14, st.num_strings);
        put_scalar(15, st.avg_length);
        put(16, st.char_histogram.data(), kCharHistDim);
        put_scalar(17, st.char_entropy);
        put_scalar(18, st.external_paths);
        put_scalar(19, st.urls);
        put_scalar(20, st.ips);
        put_scalar(21, st.registry_mods);
        put_scalar(22, st.in_memory_exec);
    }
    return out;
}

std::vector<std::array<float, kLdpDim>> ldp_features(std::int32_t n, const std::vector<Edge>& edges) {
    std::vector<std::set<std::int32_t>> neighbors(static_cast<std::size_t>(n));
    for (const auto& [src, dst] : edges) {
        if (src == dst) continue;
        neighbors[static_cast<std::size_t>(src)].insert(dst);
        neighbors[static_cast<std::size_t>(dst)].insert(src);
    }
    std::vector<double> degree(static_cast<std::size_t>(n));
    for (std::int32_t v = 0; v < n; ++v) degree[v] = static_cast<double>(neighbors[v].size());

    std::vector<std::array<float, kLdpDim>> out(static_cast<std::size_t>(n));
    for (std::int32_t v = 0; v < n; ++v) {
        auto& row = out[v];
        row.fill(0.0f);
        if (neighbors[v].empty()) continue;
        double lo = degree[*neighbors[v].begin()];
        double hi = lo;
        double sum = 0.0;
        for (const auto u : neighbors[v]) {
            lo = std::min(lo, degree[u]);
            hi = std::max(hi, degree[u]);
            sum += degree[u];
        }
        const double count = static_cast<double>(neighbors[v].size());
        const double mean = sum / count;
        double varsum = 0.0;
        for (const auto u : neighbors[v]) {
            const double d = degree[u] - mean;
            varsum += d * d;
        }
        row[0] = static_cast<float>(degree[v]);
        row[1] = static_cast<float>(lo);
        row[2] = static_cast<float>(hi);
        row[3] = static_cast<float>(mean);
        row[4] = static_cast<float>(std::sqrt(varsum / count));
    }
    return out;
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingTable& table) {
    ordered_json header;
    header["magic"] = "EMB1";
    header["dim"] = table.dim;
    header["count"] = table.entries.size();
    std::string head = header.dump();
    head += '\n';

    std::vector<std::uint8_t> out(head.begin(), head.end());
    for (const auto& [node_id, vec] : table.entries) {
        if (static_cast<int>(vec.size()) != table.dim) {
            throw ValidationError("embedding for node " + std::to_string(node_id) +
                                  " has dimension " + std::to_string(vec.size()) + ", expected " +
                                  std::to_string(table.dim));
        }
        const auto id = static_cast<std::uint32_t>(node_id);
        const std::size_t pos = out.size();
        out.resize(pos + 4 + vec.size() * sizeof(float));
        std::memcpy(out.data() + pos, &id, 4);
        std::memcpy(out.data() + pos + 4, vec.data(), vec.size() * sizeof(float));
    }
    return out;
}

EmbeddingTable decode_embeddings(const std::vector<std::uint8_t>& bytes, std::int32_t n) {
    const auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
    if (nl == bytes.end()) throw ParseError("emb: missing header line");
    json header;
    try {
        header = json::parse(std::string(bytes.begin(), nl));
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("emb: bad header: ") + e.what());
    }
    EmbeddingTable table;
    std::int64_t count = 0;
    try {
        if (!header.contains("magic") || header.at("magic").get<std::string>() != "EMB1") {
            throw ParseError("emb: magic mismatch");
        }
        table.dim = header.at("dim").get<int>();
        count = header.at("count").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("emb: bad header: ") + e.what());
    }
    if (table.dim <= 0) throw ParseError("emb: non-positive dim");
    if (count < 0) throw ParseError("emb: negative count");

    const std::size_t header_len = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    const std::size_t entry_bytes = 4 + static_cast<std::size_t>(table.dim) * sizeof(float);
    const std::size_t need = header_len + entry_bytes * static_cast<std::size_t>(count);
    if (bytes.size() < need) throw ParseError("emb: truncated file");
    if (bytes.size() > need) throw ParseError("emb: trailing bytes");

    for (std::int64_t k = 0; k < count; ++k) {
        const std::size_t pos = header_len + entry_bytes * static_cast<std::size_t>(k);
        std::uint32_t id = 0;
        std::memcpy(&id, bytes.data() + pos, 4);
        if (id >= static_cast<std::uint32_t>(n)) {
            throw ValidationError("emb: node id " + std::to_string(id) + " out of range for " +
                                  std::to_string(n) + " nodes");
        }
        if (table.entries.count(static_cast<std::int32_t>(id))) {
            throw ValidationError("emb: duplicate node id " + std::to_string(id));
        }
        std::vector<float> vec(static_cast<std::size_t>(table.dim));
        std::memcpy(vec.data(), bytes.data() + pos + 4, vec.size() * sizeof(float));
        table.entries.emplace(static_cast<std::int32_t>(id), std::move(vec));
    }
    return table;
}

void write_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    write_binary_file(path, encode_embeddings(table));
}

EmbeddingTable ingest_embeddings(const std::filesystem::path& path, std::int32_t n) {
    return decode_embeddings(read_binary_file(path), n);
}

FeatureSchema assembled_schema(const FeatureConfig& config, int llm_dim) {
    if (!config.meta && !config.llm && !config.ldp) {
        throw ConfigError("feature config selects no feature family");
    }
    std::vector<FeatureGroup> groups;
    if (config.meta) {
        for (const auto& spec : meta_group_specs()) {
            groups.push_back(FeatureGroup{spec.name, 0, spec.width, spec.universal});
        }
    }
    if (config.llm) {
        if (llm_dim <= 0) throw ConfigError("llm features configured but embedding dimension is unknown");
        groups.push_back(FeatureGroup{"llm_embedding", 0, llm_dim, false});
    }
    if (config.ldp) groups.push_back(FeatureGroup{"ldp", 0, kLdpDim, true});
    return make_schema(groups);
}

AttributedGraph assemble_features(const AttributedGraph& topology,
                                  const std::vector<FunctionRecord>& records,
                                  const EmbeddingTable* embeddings, const FeatureConfig& config) {
    const auto n = topology.n;
    if (static_cast<std::int32_t>(records.size()) != n) {
        throw ValidationError("assemble_features: " + std::to_string(records.size()) + " records for " +
                              std::to_string(n) + " nodes");
    }
    if (config.llm && embeddings == nullptr) {
        throw ConfigError("llm features configured but no embedding table supplied");
    }
    for (std::size_t i = 0; i < records.size(); ++i) validate_record(records[i], static_cast<int>(i));

    AttributedGraph g = topology;
    g.schema = assembled_schema(config, embeddings ? embeddings->dim : 0);
    const int group_count = g.schema.group_count();
    g.x.assign(static_cast<std::size_t>(n) * g.schema.dim, 0.0f);
    g.present.assign(static_cast<std::size_t>(n) * group_count, 0);

    int next_group = 0;
    const int meta_base = config.meta ? (next_group += kMetaGroupCount, next_group - kMetaGroupCount) : -1;
    const int llm_group = config.llm ? next_group++ : -1;
    const int ldp_group = config.ldp ? next_group++ : -1;

    std::vector<std::array<float, kLdpDim>> ldp;
    if (config.ldp) ldp = ldp_features(n, g.edges);

    for (std::int32_t i = 0; i < n; ++i) {
        float* row = g.row(i);
        if (config.meta) {
            const MetaVector mv = meta_features(records[i]);
            std::memcpy(row, mv.values.data(), sizeof(mv.values));
            for (int grp = 0; grp < kMetaGroupCount; ++grp) {
                g.set_group_present(i, meta_base + grp, mv.present[grp]);
            }
        }
        if (config.llm) {
            const auto it = embeddings->entries.find(i);
            if (it != embeddings->entries.end()) {
                std::memcpy(row + g.schema.groups[llm_group].offset, it->second.data(),
                            static_cast<std::size_t>(embeddings->dim) * sizeof(float));
                g.set_group_present(i, llm_group, true);
            }
        }
        if (config.ldp) {
            std::memcpy(row + g.schema.groups[ldp_group].offset, ldp[i].data(), sizeof(ldp[i]));
            g.set_group_present(i, ldp_group, true);
        }
    }
    g.check_consistent();
    return g;
}

}  // namespace malgraph
