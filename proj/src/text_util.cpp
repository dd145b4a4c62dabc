#include "chorus/text_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "chorus/error.hpp"

namespace chorus {

std::string trim(std::string_view s)
{
    const auto* ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string name(tmpl.substr(open + 2, close - open - 2));
        if (auto it = vars.find(name); it != vars.end()) {
            out += it->second;
        } else {
            out.append(tmpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

std::string load_template(const std::string& dir, const std::string& name)
{
    const auto path = std::filesystem::path(dir) / name;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing prompt template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_code_fences(std::string_view s)
{
    auto t = trim(s);
    if (t.rfind("```", 0) != 0) return t;
    const auto first_nl = t.find('\n');
    if (first_nl == std::string::npos) return t;
    auto body = std::string_view(t).substr(first_nl + 1);
    const auto close = body.rfind("```");
    if (close != std::string_view::npos) body = body.substr(0, close);
    return trim(body);
}

namespace {

std::optional<nlohmann::json> parse_object(std::string_view text)
{
    auto j = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

} // namespace

std::optional<nlohmann::json> extract_json_object(std::string_view raw)
{
    if (auto j = parse_object(raw)) return j;

    for (auto open = raw.find("```"); open != std::string_view::npos; open = raw.find("```", open + 3)) {
        const auto nl = raw.find('\n', open);
        if (nl == std::string_view::npos) break;
        const auto close = raw.find("```", nl);
        if (close == std::string_view::npos) break;
        if (auto j = parse_object(raw.substr(nl + 1, close - nl - 1))) return j;
        open = close;
    }

    const auto b = raw.find('{');
    const auto e = raw.rfind('}');
    if (b != std::string_view::npos && e != std::string_view::npos && e > b) {
        return parse_object(raw.substr(b, e - b + 1));
    }
    return std::nullopt;
}

} // namespace chorus
