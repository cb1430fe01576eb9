#pragma once

#include <string>

#include <json.hpp>

namespace parallax {

/// Byte-stable JSON text: object keys sorted, two-space indent, floating
/// point numbers printed with 17 significant digits, trailing newline.
std::string canonical_json(const nlohmann::json& value);

}  // namespace parallax
