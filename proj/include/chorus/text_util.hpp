#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace chorus {

std::string trim(std::string_view s);

/// Replaces every {{name}} with vars[name]; unknown placeholders are left as is.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Reads `dir`/`name`; throws ConfigError when missing.
std::string load_template(const std::string& dir, const std::string& name);

/// Removes one surrounding ``` fence (with optional language tag) if present.
std::string strip_code_fences(std::string_view s);

/// Locates a JSON object in a model response: the whole text, a fenced block,
/// or the outermost {...} span, in that order.
std::optional<nlohmann::json> extract_json_object(std::string_view raw);

} // namespace chorus
