#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kmt {

// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(std::string_view data);

std::string sha256_file(const std::string& path);

}  // namespace kmt
