#include "aligntree/templates.hpp"

namespace aligntree {

namespace {

const std::map<std::string, std::string>& registry() {
  static const std::map<std::string, std::string> templates{
      {"none", "{prompt}"},
      {"sentiment", "Here is a movie review: {prompt}"},
      {"summarization", "SUBREDDIT: r/{subreddit}\nTITLE: {title}\nPOST: {post}\nTL;DR:"},
  };
  return templates;
}

}  // namespace

std::vector<std::string> template_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : registry()) names.push_back(name);
  return names;
}

std::string apply_template(const std::string& name, const TemplateFields& fields) {
  auto it = registry().find(name);
  if (it == registry().end()) throw ArgumentError("unknown template '" + name + "'");
  const std::string& tpl = it->second;

  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    std::size_t open = tpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tpl, pos, std::string::npos);
      break;
    }
    out.append(tpl, pos, open - pos);
    std::size_t close = tpl.find('}', open);
    if (close == std::string::npos) throw ArgumentError("unbalanced brace in template");
    std::string field = tpl.substr(open + 1, close - open - 1);
    auto value = fields.find(field);
    if (value == fields.end())
      throw ArgumentError("template '" + name + "' needs field '" + field + "'");
    out += value->second;
    pos = close + 1;
  }
  return out;
}

}  // namespace aligntree
