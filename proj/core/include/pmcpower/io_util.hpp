#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace pmcpower::io {

// Reads the whole file; throws DataError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes content to a sibling temp file and renames it over path, so readers
// never observe a half-written file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

// FNV-1a 64-bit content hash, as used in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

} // namespace pmcpower::io
