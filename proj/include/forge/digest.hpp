#pragma once

#include <string>
#include <string_view>

namespace forge {

/// Lowercase hex SHA-256 of `bytes`.
std::string digest(std::string_view bytes);

}  // namespace forge
