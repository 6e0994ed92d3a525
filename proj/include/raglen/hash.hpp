#pragma once

#include <string>
#include <string_view>

namespace raglen {

std::string sha256_hex(std::string_view data);

// Maps an arbitrary id (e.g. a model id with slashes) to a safe path component.
std::string fs_sanitize(std::string_view name);

}  // namespace raglen
