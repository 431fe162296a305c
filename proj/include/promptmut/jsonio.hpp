#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace promptmut {

using json = nlohmann::json;

// Canonical form: sorted object keys (nlohmann's std::map ordering), two-space
// indent, LF line endings, trailing newline. Structural equality of documents
// reduces to string equality of this form.
std::string canonical_dump(const json& j);

// Single-line canonical form for JSONL rows (sorted keys, no indent).
std::string canonical_line(const json& j);

// FNV-1a 64-bit over raw bytes, rendered as 16 hex digits.
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

// Write-then-rename so readers never observe a half-written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

json parse_json_file(const std::filesystem::path& path);

// Reads a JSONL file. A malformed line is reported via CorruptStoreError unless
// it is the final line and allow_torn_tail is set (interrupted append), in
// which case the tail is dropped.
std::vector<json> read_jsonl(const std::filesystem::path& path, bool allow_torn_tail = false);

void append_jsonl_line(const std::filesystem::path& path, const json& row);

}  // namespace promptmut
