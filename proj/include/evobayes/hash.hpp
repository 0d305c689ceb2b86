#pragma once

#include <string>
#include <string_view>

namespace evobayes {

std::string sha1_hex(std::string_view bytes);

/// Hash of `content` as git would store it as a blob ("blob <len>\0<content>").
std::string git_blob_hash(std::string_view content);

}  // namespace evobayes
