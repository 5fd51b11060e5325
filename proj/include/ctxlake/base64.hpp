#pragma once

#include <string>
#include <string_view>

#include "ctxlake/types.hpp"

namespace ctxlake {

/// RFC 4648 base64 with padding. Used for the value_b64 fields of the JSONL
/// file formats.
std::string base64_encode(std::string_view bytes);

/// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace ctxlake
