#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace mv3::zip {

// Reads a zip archive into path -> bytes.  Supports stored and deflated
// entries, verifies CRCs, and rejects entries whose names are absolute or
// escape the archive root.  Throws MalformedArchive.
std::map<std::string, std::string> read_archive(const std::filesystem::path& path);

// Writes a zip archive (deflate by default).  Used by tooling and tests;
// emits a plain archive with no extra fields.
void write_archive(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& files, bool deflate = true);

}  // namespace mv3::zip
