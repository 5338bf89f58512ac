#pragma once

#include <map>
#include <string>
#include <vector>

#include "aligntree/common.hpp"

namespace aligntree {

using TemplateFields = std::map<std::string, std::string>;

/// Registered prompt template names: "none", "sentiment", "summarization".
std::vector<std::string> template_names();

/// Verbatim placeholder substitution. Unknown template names and missing
/// placeholders raise ArgumentError; output is byte-exact.
std::string apply_template(const std::string& name, const TemplateFields& fields);

}  // namespace aligntree
