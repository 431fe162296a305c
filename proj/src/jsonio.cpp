#include "promptmut/jsonio.hpp"

#include <fstream>
#include <sstream>

#include "promptmut/errors.hpp"

namespace promptmut {

std::string canonical_dump(const json& j) {
    return j.dump(2) + "\n";
}

std::string canonical_line(const json& j) {
    return j.dump();
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(bytes);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write file: " + tmp.string());
        out << bytes;
        out.flush();
        if (!out) throw ConfigError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

json parse_json_file(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw SchemaError("invalid JSON in " + path.string());
    return j;
}

std::vector<json> read_jsonl(const std::filesystem::path& path, bool allow_torn_tail) {
    std::string bytes = read_file(path);
    std::vector<json> rows;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t nl = bytes.find('\n', pos);
        bool has_newline = nl != std::string::npos;
        std::string line = bytes.substr(pos, has_newline ? nl - pos : std::string::npos);
        pos = has_newline ? nl + 1 : bytes.size();
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded()) {
            bool is_tail = pos >= bytes.size();
            if (allow_torn_tail && is_tail && !has_newline) break;
            throw CorruptStoreError("torn or malformed line in " + path.string());
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void append_jsonl_line(const std::filesystem::path& path, const json& row) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw ConfigError("cannot append to " + path.string());
    out << canonical_line(row) << "\n";
    out.flush();
    if (!out) throw ConfigError("append failed: " + path.string());
}

}  // namespace promptmut
