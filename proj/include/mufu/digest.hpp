#pragma once

#include <string>
#include <string_view>

namespace mufu {

// SHA-256, lowercase hex.
std::string sha256_hex(std::string_view data);

// Digest of a file's raw bytes. Throws IoError if unreadable.
std::string digest_file(const std::string& path);

} // namespace mufu
