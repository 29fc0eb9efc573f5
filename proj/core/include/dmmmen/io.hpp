#pragma once

#include <string>

namespace dmmmen {

/// Writes `contents` to `path` via a temp file plus rename, so readers never
/// observe a partially written artifact.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace dmmmen
