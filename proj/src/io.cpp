#include "malgraph/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little, "fmx/emb formats are little-endian");

namespace malgraph {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::int64_t parse_int_token(const std::string& tok, int line_no) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw ParseError("edge file line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
    }
    return value;
}

void require_keys(const json& obj, const std::vector<std::string>& allowed, int line_no) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            throw ParseError("record line " + std::to_string(line_no) + ": unknown field '" + it.key() + "'");
        }
    }
}

std::vector<std::string> string_list(const json& arr, const std::string& field, int line_no) {
    if (!arr.is_array()) {
        throw ParseError("record line " + std::to_string(line_no) + ": field '" + field + "' must be a list");
    }
    std::vector<std::string> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_string()) {
            throw ParseError("record line " + std::to_string(line_no) + ": field '" + field +
                             "' must contain strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

FunctionRecord record_from_json(const json& obj, int line_no) {
    if (!obj.is_object()) throw ParseError("record line " + std::to_string(line_no) + ": not a JSON object");
    require_keys(obj,
                 {"class_name", "method_name", "num_params", "param_types", "return_type", "access_flags",
                  "num_registers", "code", "instructions", "strings", "external"},
                 line_no);
    for (const char* field : {"class_name", "method_name", "num_params", "param_types", "return_type",
                              "access_flags", "external"}) {
        if (!obj.contains(field)) {
            throw ParseError("record line " + std::to_string(line_no) + ": missing field '" + field + "'");
        }
    }

    FunctionRecord r;
    r.class_name = string_list(obj.at("class_name"), "class_name", line_no);
    r.method_name = obj.at("method_name").get<std::string>();
    r.num_params = obj.at("num_params").get<std::int64_t>();
    r.param_types = string_list(obj.at("param_types"), "param_types", line_no);
    r.return_type = obj.at("return_type").get<std::string>();
    for (const auto& name : string_list(obj.at("access_flags"), "access_flags", line_no)) {
        const auto flag = access_flag_from_name(name);
        if (!flag) {
            throw ValidationError("record line " + std::to_string(line_no) + ": unknown access flag '" +
                                  name + "'");
        }
        r.set_flag(*flag);
    }
    if (obj.contains("num_registers")) r.num_registers = obj.at("num_registers").get<std::int64_t>();
    if (obj.contains("code")) {
        const auto& c = obj.at("code");
        require_keys(c, {"length", "bytes_b64"}, line_no);
        CodeBlock block;
        block.length = c.at("length").get<std::int64_t>();
        block.bytes = base64_decode(c.at("bytes_b64").get<std::string>());
        r.code = std::move(block);
    }
    if (obj.contains("instructions")) {
        const auto& ins = obj.at("instructions");
        require_keys(ins, {"count", "opcodes", "cached"}, line_no);
        InstructionInfo info;
        info.count = ins.at("count").get<std::int64_t>();
        info.opcodes = string_list(ins.at("opcodes"), "opcodes", line_no);
        info.cached = ins.at("cached").get<bool>();
        r.instructions = std::move(info);
    }
    if (obj.contains("strings")) r.strings = string_list(obj.at("strings"), "strings", line_no);
    r.external = obj.at("external").get<bool>();
    return r;
}

ordered_json record_to_json(const FunctionRecord& r) {
    ordered_json obj;
    obj["class_name"] = r.class_name;
    obj["method_name"] = r.method_name;
    obj["num_params"] = r.num_params;
    obj["param_types"] = r.param_types;
    obj["return_type"] = r.return_type;
    json flags = json::array();
    for (int i = 0; i < kNumAccessFlags; ++i) {
        if (r.has_flag(static_cast<AccessFlag>(i))) flags.push_back(access_flag_names()[i]);
    }
    obj["access_flags"] = flags;
    if (r.num_registers) obj["num_registers"] = *r.num_registers;
    if (r.code) {
        ordered_json c;
        c["length"] = r.code->length;
        c["bytes_b64"] = base64_encode(r.code->bytes);
        obj["code"] = c;
    }
    if (r.instructions) {
        ordered_json ins;
        ins["count"] = r.instructions->count;
        ins["opcodes"] = r.instructions->opcodes;
        ins["cached"] = r.instructions->cached;
        obj["instructions"] = ins;
    }
    if (r.strings) obj["strings"] = *r.strings;
    obj["external"] = r.external;
    return obj;
}

ordered_json schema_header_groups(const FeatureSchema& schema) {
    ordered_json groups = ordered_json::array();
    for (const auto& g : schema.groups) {
        ordered_json jg;
        jg["name"] = g.name;
        jg["offset"] = g.offset;
        jg["width"] = g.width;
        jg["universal"] = g.universal;
        groups.push_back(jg);
    }
    return groups;
}

std::string hash_to_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::uint64_t hex_to_hash(const std::string& s) {
    if (s.size() != 16) throw ParseError("schema_hash: expected 16 hex digits");
    std::uint64_t h = 0;
    for (char c : s) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else throw ParseError("schema_hash: invalid hex digit");
        h = (h << 4) | static_cast<std::uint64_t>(v);
    }
    return h;
}

}  // namespace

std::vector<Edge> parse_edges(const std::string& text, std::int32_t n) {
    std::vector<Edge> edges;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (line.empty()) continue;
        const auto space = line.find(' ');
        if (space == std::string::npos || space == 0 || space + 1 >= line.size() ||
            line.find(' ', space + 1) != std::string::npos) {
            throw ParseError("edge file line " + std::to_string(line_no) + ": expected 'src dst'");
        }
        const std::int64_t src = parse_int_token(line.substr(0, space), line_no);
        const std::int64_t dst = parse_int_token(line.substr(space + 1), line_no);
        if (src < 0 || dst < 0) {
            throw ParseError("edge file line " + std::to_string(line_no) + ": negative endpoint");
        }
        edges.emplace_back(static_cast<std::int32_t>(src), static_cast<std::int32_t>(dst));
    }
    return canonical_edges(std::move(edges), n);
}

std::vector<Edge> read_edges_file(const std::filesystem::path& path, std::int32_t n) {
    return parse_edges(read_text_file(path), n);
}

std::string format_edges(const std::vector<Edge>& edges) {
    std::string out;
    for (const auto& [src, dst] : edges) {
        out += std::to_string(src);
        out += ' ';
        out += std::to_string(dst);
        out += '\n';
    }
    return out;
}

void write_edges_file(const std::filesystem::path& path, const std::vector<Edge>& edges) {
    write_text_file(path, format_edges(edges));
}

std::vector<FunctionRecord> parse_records(const std::string& text) {
    std::vector<FunctionRecord> records;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError("record line " + std::to_string(line_no) + ": " + e.what());
        }
        FunctionRecord r;
        try {
            r = record_from_json(obj, line_no);
        } catch (const json::exception& e) {
            throw ParseError("record line " + std::to_string(line_no) + ": " + e.what());
        }
        validate_record(r, static_cast<int>(records.size()));
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<FunctionRecord> read_records_file(const std::filesystem::path& path) {
    return parse_records(read_text_file(path));
}

std::string format_records(const std::vector<FunctionRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

void write_records_file(const std::filesystem::path& path, const std::vector<FunctionRecord>& records) {
    write_text_file(path, format_records(records));
}

std::int64_t count_record_lines(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::int64_t count = 0;
    for (const auto& line : split_lines(text)) {
        if (!line.empty()) ++count;
    }
    return count;
}

AttributedGraph load_sample_from_records(const std::vector<Edge>& raw_edges,
                                         const std::vector<FunctionRecord>& records) {
    if (records.empty()) throw ValidationError("sample has no records");
    AttributedGraph g;
    g.n = static_cast<std::int32_t>(records.size());
    g.edges = canonical_edges(raw_edges, g.n);
    return g;
}

AttributedGraph load_sample(const std::filesystem::path& edges_path,
                            const std::filesystem::path& records_path) {
    const auto records = read_records_file(records_path);
    if (records.empty()) throw ValidationError("sample has no records: " + records_path.string());
    const auto n = static_cast<std::int32_t>(records.size());
    AttributedGraph g;
    g.n = n;
    g.edges = read_edges_file(edges_path, n);
    return g;
}

std::vector<std::uint8_t> encode_feature_matrix(const AttributedGraph& g) {
    g.check_consistent();
    ordered_json header;
    header["magic"] = "FMX1";
    header["rows"] = g.n;
    header["cols"] = g.schema.dim;
    header["dtype"] = "f32le";
    header["groups"] = schema_header_groups(g.schema);
    header["schema_hash"] = hash_to_hex(g.schema.schema_hash);
    std::string head = header.dump();
    head += '\n';

    std::vector<std::uint8_t> out(head.begin(), head.end());
    const std::size_t value_bytes = g.x.size() * sizeof(float);
    std::size_t pos = out.size();
    out.resize(pos + value_bytes);
    static_assert(sizeof(float) == 4);
    std::memcpy(out.data() + pos, g.x.data(), value_bytes);

    const int group_count = g.schema.group_count();
    const std::size_t mask_row_bytes = (static_cast<std::size_t>(group_count) + 7) / 8;
    pos = out.size();
    out.resize(pos + mask_row_bytes * static_cast<std::size_t>(g.n), 0);
    for (std::int32_t i = 0; i < g.n; ++i) {
        for (int grp = 0; grp < group_count; ++grp) {
            if (g.group_present(i, grp)) {
                out[pos + static_cast<std::size_t>(i) * mask_row_bytes + grp / 8] |=
                    static_cast<std::uint8_t>(1u << (grp % 8));
            }
        }
    }
    return out;
}

FeatureMatrixFile decode_feature_matrix(const std::vector<std::uint8_t>& bytes,
                                        const FeatureSchema* expected) {
    const auto nl = std::find(bytes.begin(), bytes.end(), static_cast<std::uint8_t>('\n'));
    if (nl == bytes.end()) throw ParseError("fmx: missing header line");
    const std::string head(bytes.begin(), nl);
    json header;
    try {
        header = json::parse(head);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("fmx: bad header: ") + e.what());
    }
    FeatureMatrixFile out;
    std::int64_t cols = 0;
    try {
        if (!header.contains("magic") || header.at("magic").get<std::string>() != "FMX1") {
            throw ParseError("fmx: magic mismatch");
        }
        if (header.at("dtype").get<std::string>() != "f32le") throw ParseError("fmx: unsupported dtype");
        out.rows = header.at("rows").get<std::int64_t>();
        cols = header.at("cols").get<std::int64_t>();
        if (out.rows < 0 || cols < 0) throw ParseError("fmx: negative dimensions");
        for (const auto& jg : header.at("groups")) {
            FeatureGroup g;
            g.name = jg.at("name").get<std::string>();
            g.offset = jg.at("offset").get<int>();
            g.width = jg.at("width").get<int>();
            g.universal = jg.at("universal").get<bool>();
            out.schema.groups.push_back(std::move(g));
        }
        out.schema.dim = static_cast<int>(cols);
        out.schema.schema_hash = hex_to_hash(header.at("schema_hash").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError(std::string("fmx: bad header: ") + e.what());
    }
    int offset = 0;
    for (const auto& g : out.schema.groups) {
        if (g.offset != offset) throw ParseError("fmx: non-contiguous group offsets");
        offset += g.width;
    }
    if (offset != out.schema.dim) throw ParseError("fmx: group widths do not sum to cols");
    if (schema_digest(out.schema.groups) != out.schema.schema_hash) {
        throw ParseError("fmx: schema_hash does not match group list");
    }
    if (expected && expected->schema_hash != out.schema.schema_hash) {
        throw ValidationError("fmx: schema_hash mismatch against expected schema");
    }

    const std::size_t header_len = static_cast<std::size_t>(nl - bytes.begin()) + 1;
    const std::size_t value_count = static_cast<std::size_t>(out.rows) * static_cast<std::size_t>(cols);
    const std::size_t mask_row_bytes = (out.schema.groups.size() + 7) / 8;
    const std::size_t need =
        header_len + value_count * sizeof(float) + mask_row_bytes * static_cast<std::size_t>(out.rows);
    if (bytes.size() < need) throw ParseError("fmx: truncated payload");
    if (bytes.size() > need) throw ParseError("fmx: trailing bytes after payload");

    out.values.resize(value_count);
    std::memcpy(out.values.data(), bytes.data() + header_len, value_count * sizeof(float));
    out.present.assign(static_cast<std::size_t>(out.rows) * out.schema.groups.size(), 0);
    const std::size_t mask_base = header_len + value_count * sizeof(float);
    for (std::int64_t i = 0; i < out.rows; ++i) {
        for (std::size_t grp = 0; grp < out.schema.groups.size(); ++grp) {
            const std::uint8_t byte =
                bytes[mask_base + static_cast<std::size_t>(i) * mask_row_bytes + grp / 8];
            out.present[static_cast<std::size_t>(i) * out.schema.groups.size() + grp] =
                (byte >> (grp % 8)) & 1;
        }
    }
    return out;
}

void write_feature_matrix(const AttributedGraph& g, const std::filesystem::path& path) {
    write_binary_file(path, encode_feature_matrix(g));
}

FeatureMatrixFile read_feature_matrix(const std::filesystem::path& path, const FeatureSchema* expected) {
    return decode_feature_matrix(read_binary_file(path), expected);
}

CorpusIndex scan_corpus(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    CorpusIndex index;
    if (!fs::exists(root)) return index;

    auto sorted_dirs = [](const fs::path& dir) {
        std::vector<fs::path> out;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_directory()) out.push_back(entry.path());
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    for (const auto& family_dir : sorted_dirs(root)) {
        for (const auto& type_dir : sorted_dirs(family_dir)) {
            for (const auto& sample_dir : sorted_dirs(type_dir)) {
                const std::string sample_id = family_dir.filename().string() + "/" +
                                              type_dir.filename().string() + "/" +
                                              sample_dir.filename().string();
                try {
                    const auto records_path = sample_dir / kRecordsFileName;
                    const auto edges_path = sample_dir / kEdgesFileName;
                    if (!fs::exists(records_path) || !fs::exists(edges_path)) {
                        throw IoError("missing " + std::string(kEdgesFileName) + " or " + kRecordsFileName);
                    }
                    const std::int64_t node_count = count_record_lines(records_path);
                    if (node_count < 1) throw ValidationError("empty records file");
                    CorpusEntry entry;
                    entry.sample_id = sample_id;
                    entry.family = family_dir.filename().string();
                    entry.type = type_dir.filename().string();
                    entry.node_count = node_count;
                    entry.path = sample_dir.string();
                    index.entries.push_back(std::move(entry));
                } catch (const Error& e) {
                    log_warn("skipping sample " + sample_id + ": " + e.what());
                    ++index.skipped;
                }
            }
        }
    }
    std::sort(index.entries.begin(), index.entries.end(),
              [](const CorpusEntry& a, const CorpusEntry& b) { return a.sample_id < b.sample_id; });
    return index;
}

std::string corpus_index_to_json(const CorpusIndex& index) {
    ordered_json out;
    ordered_json entries = ordered_json::array();
    for (const auto& e : index.entries) {
        ordered_json je;
        je["sample_id"] = e.sample_id;
        je["family"] = e.family;
        je["type"] = e.type;
        je["node_count"] = e.node_count;
        je["path"] = e.path;
        entries.push_back(je);
    }
    out["entries"] = entries;
    out["skipped"] = index.skipped;
    return out.dump(2) + "\n";
}

CorpusIndex corpus_index_from_json(const std::string& text) {
    CorpusIndex index;
    const json obj = json::parse(text);
    for (const auto& je : obj.at("entries")) {
        CorpusEntry e;
        e.sample_id = je.at("sample_id").get<std::string>();
        e.family = je.at("family").get<std::string>();
        e.type = je.at("type").get<std::string>();
        e.node_count = je.at("node_count").get<std::int64_t>();
        e.path = je.at("path").get<std::string>();
        index.entries.push_back(std::move(e));
    }
    index.skipped = obj.at("skipped").get<std::int64_t>();
    return index;
}

}  // namespace malgraph
