#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "malgraph/features.hpp"
#include "malgraph/io.hpp"
#include "support.hpp"

using namespace malgraph;

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hash_tokens: empty list is the zero vector") {
    const auto v = hash_tokens({});
    for (const float x : v) CHECK(x == 0.0f);
}

TEST_CASE("hash_tokens: repeated token doubles one slot") {
    const auto v = hash_tokens({"x", "x"});
    int nonzero = 0;
    for (int i = 0; i < kHashDim; ++i) {
        if (v[i] != 0.0f) {
            ++nonzero;
            CHECK(std::abs(v[i]) == 2.0f);
            CHECK(i == 21);  // fnv1a64("x") = 0xaf63f54c86021707, mod 50, sign bit set
            CHECK(v[i] == -2.0f);
        }
    }
    CHECK(nonzero == 1);
}

TEST_CASE("hash_tokens matches the independent FNV-1a reference") {
    // Frozen from a reference FNV-1a implementation (see the published
    // vectors above): java -> slot 25 sign -, lang -> 21 +, Object -> 28 +.
    const auto v = hash_tokens({"java", "lang", "Object"});
    std::map<int, float> expected = {{21, 1.0f}, {25, -1.0f}, {28, 1.0f}};
    for (int i = 0; i < kHashDim; ++i) {
        const auto it = expected.find(i);
        CHECK(v[i] == (it == expected.end() ? 0.0f : it->second));
    }
}

TEST_CASE("hash_tokens is additive over concatenation") {
    Rng rng(7);
    const std::vector<std::string> pool = {"alpha", "beta", "gamma", "delta", "x", "y"};
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<std::string> a, b;
        for (std::uint64_t i = 0, n = rng.below(6); i < n; ++i) {
            a.push_back(pool[rng.below(pool.size())]);
        }
        for (std::uint64_t i = 0, n = rng.below(6); i < n; ++i) {
            b.push_back(pool[rng.below(pool.size())]);
        }
        std::vector<std::string> ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        const auto va = hash_tokens(a), vb = hash_tokens(b), vab = hash_tokens(ab);
        for (int i = 0; i < kHashDim; ++i) CHECK(vab[i] == va[i] + vb[i]);
    }
}

TEST_CASE("byte_histogram basics") {
    const auto all_zero = byte_histogram({0x00, 0x00, 0x00, 0x00});
    CHECK(all_zero[0] == 1.0f);
    for (int i = 1; i < 256; ++i) CHECK(all_zero[i] == 0.0f);

    const auto two = byte_histogram({0x01, 0x02});
    CHECK(two[1] == 0.5f);
    CHECK(two[2] == 0.5f);

    const auto empty = byte_histogram({});
    for (const float x : empty) CHECK(x == 0.0f);
}

TEST_CASE("byte_histogram sums to one on random data") {
    Rng rng(11);
    std::vector<std::uint8_t> buf(1024);
    for (auto& b : buf) b = static_cast<std::uint8_t>(rng.below(256));
    const auto h = byte_histogram(buf);
    double sum = 0.0;
    for (const float x : h) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-6);
}

namespace {

// Independent two-pass oracle for the byte-entropy histogram: enumerate
// windows, compute entropy with a separate accumulation, bin every byte.
std::array<double, 256> byte_entropy_oracle(const std::vector<std::uint8_t>& bytes) {
    std::array<double, 256> acc{};
    if (bytes.empty()) return acc;
    std::vector<std::pair<std::size_t, std::size_t>> windows;
    if (bytes.size() < 2048) {
        windows.emplace_back(0, bytes.size());
    } else {
        for (std::size_t start = 0; start + 2048 <= bytes.size(); start += 1024) {
            windows.emplace_back(start, 2048);
        }
    }
    double total = 0.0;
    for (const auto& [start, len] : windows) {
        std::map<int, std::int64_t> counts;
        for (std::size_t i = 0; i < len; ++i) counts[bytes[start + i]] += 1;
        double entropy = 0.0;
        for (const auto& [value, count] : counts) {
            const double p = static_cast<double>(count) / static_cast<double>(len);
            entropy -= p * std::log2(p);
        }
        int bin = static_cast<int>(std::floor(entropy * 2.0));
        if (bin > 15) bin = 15;
        for (std::size_t i = 0; i < len; ++i) {
            acc[bin * 16 + (bytes[start + i] >> 4)] += 1.0;
            total += 1.0;
        }
    }
    for (auto& x : acc) x /= total;
    return acc;
}

}  // namespace

TEST_CASE("byte_entropy_histogram: constant input lands in bin (0,0)") {
    const std::vector<std::uint8_t> buf(1024, 0x00);
    const auto h = byte_entropy_histogram(buf);
    CHECK(h[0] == 1.0f);
    for (int i = 1; i < 256; ++i) CHECK(h[i] == 0.0f);
}

TEST_CASE("byte_entropy_histogram: uniform bytes give entropy 8") {
    std::vector<std::uint8_t> buf(2048);
    for (int i = 0; i < 2048; ++i) buf[i] = static_cast<std::uint8_t>(i % 256);
    const auto h = byte_entropy_histogram(buf);
    // Entropy bin 15, and the 16 byte bins are hit evenly.
    for (int b = 0; b < 16; ++b) CHECK(h[15 * 16 + b] == doctest::Approx(1.0 / 16).epsilon(1e-6));
    for (int e = 0; e < 15; ++e) {
        for (int b = 0; b < 16; ++b) CHECK(h[e * 16 + b] == 0.0f);
    }
}

TEST_CASE("byte_entropy_histogram matches the two-pass oracle on mixed data") {
    Rng rng(13);
    std::vector<std::uint8_t> buf(4096);
    for (std::size_t i = 0; i < buf.size(); ++i) {
        // Mixed regimes: constant run, small alphabet, full-range noise.
        if (i < 1200) buf[i] = 0x41;
        else if (i < 2600) buf[i] = static_cast<std::uint8_t>(rng.below(4) * 32);
        else buf[i] = static_cast<std::uint8_t>(rng.below(256));
    }
    // stored features are f32, so compare at float precision
    const auto got = byte_entropy_histogram(buf);
    const auto want = byte_entropy_oracle(buf);
    for (int i = 0; i < 256; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-6));

    std::vector<std::uint8_t> shorty(700);
    for (auto& b : shorty) b = static_cast<std::uint8_t>(rng.below(256));
    const auto got_short = byte_entropy_histogram(shorty);
    const auto want_short = byte_entropy_oracle(shorty);
    for (int i = 0; i < 256; ++i) CHECK(got_short[i] == doctest::Approx(want_short[i]).epsilon(1e-6));
}

TEST_CASE("string_stats keyword counters") {
    const StringStats st = string_stats({"/sdcard/a", "Settings.Secure", "DexFile",
                                         "see https://x.io and http://y.z", "ping 10.0.2.2 now",
                                         "1.2.3.4.5", "version 1.2.3.400"});
    CHECK(st.external_paths == 1.0f);
    CHECK(st.registry_mods == 1.0f);
    CHECK(st.in_memory_exec == 1.0f);
    CHECK(st.urls == 1.0f);  // one string contains both schemes, counted once
    CHECK(st.ips == 1.0f);   // quads embedded in longer dotted runs do not count
    CHECK(st.num_strings == 7.0f);
}

TEST_CASE("string_stats entropy and length") {
    const StringStats st = string_stats({"aaaa"});
    CHECK(st.char_entropy == 0.0f);
    CHECK(st.avg_length == 4.0f);
    CHECK(st.has_invalid_chars == 0.0f);
    CHECK(st.char_histogram['a' - 0x20] == 1.0f);

    const StringStats inv = string_stats({std::string("a\x01b", 3)});
    CHECK(inv.has_invalid_chars == 1.0f);

    const StringStats tabs = string_stats({"a\tb\r\n"});
    CHECK(tabs.has_invalid_chars == 0.0f);  // tab/CR/LF are allowed

    const StringStats none = string_stats({});
    CHECK(none.num_strings == 0.0f);
    CHECK(none.avg_length == 0.0f);
    CHECK(none.char_entropy == 0.0f);
}

TEST_CASE("string_stats: a string matching two registry keywords counts once") {
    const StringStats st = string_stats({"Settings.Secure and Settings.System"});
    CHECK(st.registry_mods == 1.0f);
}

TEST_CASE("meta_features on an external record keeps only the first five groups") {
    FunctionRecord r = testsupport::simple_record("getDeviceId", true);
    const MetaVector mv = meta_features(r);
    for (int g = 0; g < kMetaGroupCount; ++g) CHECK(mv.present[g] == (g < kMetaUniversalGroups));
    // names are still hashed
    const FeatureSchema schema = meta_schema();
    bool any_nonzero = false;
    for (int c = 0; c < schema.groups[1].width; ++c) {
        any_nonzero = any_nonzero || mv.values[schema.groups[1].offset + c] != 0.0f;
    }
    CHECK(any_nonzero);
}

TEST_CASE("meta_features encodes access flags multi-hot") {
    FunctionRecord r = testsupport::simple_record("m");
    r.access_flags = 0;
    r.set_flag(AccessFlag::kPublic);
    r.set_flag(AccessFlag::kStatic);
    const MetaVector mv = meta_features(r);
    const FeatureSchema schema = meta_schema();
    const int off = schema.groups[5].offset;
    float total = 0.0f;
    for (int i = 0; i < kNumAccessFlags; ++i) total += mv.values[off + i];
    CHECK(total == 2.0f);
    CHECK(mv.values[off + 0] == 1.0f);  // public
    CHECK(mv.values[off + 3] == 1.0f);  // static
}

TEST_CASE("meta_features copies scalars without normalization") {
    FunctionRecord r = testsupport::simple_record("m");
    r.code->bytes.assign(10, 0x7f);
    r.code->length = 10;
    const MetaVector mv = meta_features(r);
    const FeatureSchema schema = meta_schema();
    CHECK(mv.values[schema.groups[7].offset] == 10.0f);  // code_length as-is
    CHECK(mv.values[schema.groups[2].offset] == 0.0f);   // num_params
    CHECK(mv.values[schema.groups[6].offset] == 4.0f);   // num_registers
}

TEST_CASE("meta schema layout is 936 wide with 5 universal groups first") {
    const FeatureSchema schema = meta_schema();
    CHECK(schema.dim == kMetaDim);
    REQUIRE(schema.group_count() == kMetaGroupCount);
    int universal_width = 0;
    for (int g = 0; g < kMetaGroupCount; ++g) {
        if (g < kMetaUniversalGroups) {
            CHECK(schema.groups[g].universal);
            universal_width += schema.groups[g].width;
        } else {
            CHECK(!schema.groups[g].universal);
        }
    }
    CHECK(universal_width == 201);
}

TEST_CASE("histogram groups are all-zero or sum to one") {
    Rng rng(17);
    const FeatureSchema schema = meta_schema();
    for (int iter = 0; iter < 10; ++iter) {
        FunctionRecord r = testsupport::simple_record("m" + std::to_string(iter));
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(rng.below(400)));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
        r.code->bytes = bytes;
        r.code->length = static_cast<std::int64_t>(bytes.size());
        const MetaVector mv = meta_features(r);
        for (const char* name : {"byte_histogram", "byte_entropy_histogram", "char_histogram"}) {
            const int g = schema.find_group(name);
            double sum = 0.0;
            for (int c = 0; c < schema.groups[g].width; ++c) {
                sum += mv.values[schema.groups[g].offset + c];
            }
            CHECK((std::abs(sum) < 1e-9 || std::abs(sum - 1.0) < 1e-6));
        }
    }
}

TEST_CASE("ldp on a path: middle node sees two degree-1 neighbors") {
    const std::vector<Edge> edges = {{0, 1}, {1, 2}};
    const auto ldp = ldp_features(3, edges);
    CHECK(ldp[1] == std::array<float, 5>{2, 1, 1, 1, 0});
    CHECK(ldp[0] == std::array<float, 5>{1, 2, 2, 2, 0});
}

TEST_CASE("ldp on a star") {
    const std::vector<Edge> edges = {{0, 1}, {0, 2}, {0, 3}};
    const auto ldp = ldp_features(4, edges);
    CHECK(ldp[0] == std::array<float, 5>{3, 1, 1, 1, 0});
    for (int leaf = 1; leaf <= 3; ++leaf) {
        CHECK(ldp[leaf] == std::array<float, 5>{1, 3, 3, 3, 0});
    }
}

TEST_CASE("ldp: isolated node is all zero") {
    const auto ldp = ldp_features(2, {});
    CHECK(ldp[0] == std::array<float, 5>{0, 0, 0, 0, 0});
}

TEST_CASE("ldp matches the brute-force neighbor scan on random graphs") {
    Rng rng(23);
    for (int iter = 0; iter < 40; ++iter) {
        const int n = 1 + static_cast<int>(rng.below(50));
        std::vector<Edge> edges;
        const int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(3 * n)));
        for (int e = 0; e < m; ++e) {
            edges.emplace_back(static_cast<std::int32_t>(rng.below(n)),
                               static_cast<std::int32_t>(rng.below(n)));
        }
        edges = canonical_edges(std::move(edges), n);
        const auto got = ldp_features(n, edges);
        for (int v = 0; v < n; ++v) {
            CHECK(got[v] == testsupport::ldp_oracle_row(v, n, edges));
        }
    }
}

TEST_CASE("embedding table round trip and errors") {
    EmbeddingTable table;
    table.dim = 3;
    Rng rng(31);
    for (const int id : {0, 2, 5}) {
        std::vector<float> v(3);
        for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
        table.entries.emplace(id, v);
    }
    const auto bytes = encode_embeddings(table);
    const EmbeddingTable back = decode_embeddings(bytes, 6);
    CHECK(back.dim == 3);
    CHECK(back.entries == table.entries);
    CHECK(encode_embeddings(back) == bytes);

    SUBCASE("id out of range") {
        CHECK_THROWS_WITH_AS(decode_embeddings(bytes, 5), doctest::Contains("out of range"),
                             ValidationError);
    }
    SUBCASE("truncated") {
        auto bad = bytes;
        bad.resize(bad.size() - 2);
        CHECK_THROWS_AS(decode_embeddings(bad, 6), ParseError);
    }
    SUBCASE("empty table still carries its dimension") {
        EmbeddingTable empty;
        empty.dim = 4;
        const EmbeddingTable back2 = decode_embeddings(encode_embeddings(empty), 3);
        CHECK(back2.dim == 4);
        CHECK(back2.entries.empty());
    }
}

namespace {

AttributedGraph topo_of(std::int32_t n, std::vector<Edge> edges) {
    AttributedGraph g;
    g.n = n;
    g.edges = canonical_edges(std::move(edges), n);
    g.sample_id = "t";
    return g;
}

}  // namespace

TEST_CASE("assemble_features: LDP only gives the 5-wide baseline input") {
    const std::vector<FunctionRecord> records = {testsupport::simple_record("a"),
                                                 testsupport::simple_record("b", true)};
    FeatureConfig config{false, false, true};
    const AttributedGraph g = assemble_features(topo_of(2, {{0, 1}}), records, nullptr, config);
    CHECK(g.schema.dim == kLdpDim);
    CHECK(g.fully_present());
}

TEST_CASE("assemble_features: meta + llm + ldp widths add up") {
    const std::vector<FunctionRecord> records = {testsupport::simple_record("a"),
                                                 testsupport::simple_record("b")};
    EmbeddingTable table;
    table.dim = 8;
    table.entries.emplace(0, std::vector<float>(8, 0.5f));
    FeatureConfig config{true, true, true};
    const AttributedGraph g = assemble_features(topo_of(2, {{0, 1}}), records, &table, config);
    CHECK(g.schema.dim == kMetaDim + 8 + kLdpDim);
    const int llm_group = g.schema.find_group("llm_embedding");
    CHECK(g.group_present(0, llm_group));
    CHECK(!g.group_present(1, llm_group));  // node 1 has no embedding entry
    const int ldp_group = g.schema.find_group("ldp");
    CHECK(g.group_present(1, ldp_group));
}

TEST_CASE("universal groups are present on every node even with externals") {
    std::vector<FunctionRecord> records;
    for (int i = 0; i < 8; ++i) {
        records.push_back(testsupport::simple_record("m" + std::to_string(i), i % 2 == 0));
    }
    FeatureConfig config{true, false, true};
    const AttributedGraph g = assemble_features(topo_of(8, {{0, 1}, {2, 3}}), records, nullptr, config);
    for (std::int32_t i = 0; i < g.n; ++i) {
        for (int grp = 0; grp < g.schema.group_count(); ++grp) {
            if (g.schema.groups[grp].universal) CHECK(g.group_present(i, grp));
        }
    }
    // and the non-universal groups really are missing on the external nodes
    for (std::int32_t i = 0; i < g.n; i += 2) {
        CHECK(!g.group_present(i, g.schema.find_group("byte_histogram")));
    }
}

TEST_CASE("assemble_features rejects bad input combinations") {
    const std::vector<FunctionRecord> records = {testsupport::simple_record("a")};
    CHECK_THROWS_AS(
        assemble_features(topo_of(2, {}), records, nullptr, FeatureConfig{true, false, true}),
        ValidationError);
    CHECK_THROWS_AS(
        assemble_features(topo_of(1, {}), records, nullptr, FeatureConfig{false, false, false}),
        ConfigError);
    CHECK_THROWS_AS(
        assemble_features(topo_of(1, {}), records, nullptr, FeatureConfig{true, true, true}),
        ConfigError);  // llm configured, no table
}

TEST_CASE("assemble_features permutes rows with the node order") {
    Rng rng(41);
    std::vector<FunctionRecord> records;
    for (int i = 0; i < 6; ++i) {
        records.push_back(testsupport::simple_record("m" + std::to_string(i), i % 3 == 0));
    }
    const std::vector<Edge> edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}};
    FeatureConfig config{true, false, true};
    const AttributedGraph base = assemble_features(topo_of(6, edges), records, nullptr, config);

    // Rotate nodes by one: new node i is old node (i+1) mod 6.
    std::vector<FunctionRecord> rotated_records;
    std::vector<Edge> rotated_edges;
    const auto perm = [](std::int32_t v) { return static_cast<std::int32_t>((v + 5) % 6); };
    for (int i = 0; i < 6; ++i) rotated_records.push_back(records[(i + 1) % 6]);
    for (const auto& [s, t] : edges) rotated_edges.emplace_back(perm(s), perm(t));
    const AttributedGraph rotated =
        assemble_features(topo_of(6, rotated_edges), rotated_records, nullptr, config);

    for (int i = 0; i < 6; ++i) {
        const float* want = base.row((i + 1) % 6);
        const float* got = rotated.row(i);
        for (int c = 0; c < base.schema.dim; ++c) CHECK(got[c] == want[c]);
        for (int g = 0; g < base.schema.group_count(); ++g) {
            CHECK(rotated.group_present(i, g) == base.group_present((i + 1) % 6, g));
        }
    }
}

TEST_CASE("extraction is pure: same record gives identical bytes") {
    FunctionRecord r = testsupport::simple_record("deterministic");
    const MetaVector a = meta_features(r);
    const MetaVector b = meta_features(r);
    CHECK(a.values == b.values);
    CHECK(a.present == b.present);
}
