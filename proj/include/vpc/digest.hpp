#pragma once

#include <string>
#include <string_view>

namespace vpc {

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);

}  // namespace vpc
