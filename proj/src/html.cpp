#include "mv3/html.hpp"

#include <algorithm>
#include <cctype>

namespace mv3::html {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

int line_of(std::string_view text, std::size_t offset) {
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

bool is_attr_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

}  // namespace

std::vector<ScriptTag> find_script_tags(std::string_view html) {
    std::vector<ScriptTag> tags;
    const std::string lower = to_lower(html);
    std::size_t pos = 0;

    while ((pos = lower.find("<script", pos)) != std::string::npos) {
        const std::size_t after = pos + 7;
        if (after < lower.size() && is_attr_name_char(lower[after])) {
            pos = after;  // e.g. <scripting>
            continue;
        }

        ScriptTag tag;
        tag.tag_line = line_of(html, pos);

        // Scan the attribute region up to '>'.
        std::size_t i = after;
        bool self_closing = false;
        while (i < html.size() && html[i] != '>') {
            if (std::isspace(static_cast<unsigned char>(html[i]))) {
                ++i;
                continue;
            }
            if (html[i] == '/') {
                self_closing = true;
                ++i;
                continue;
            }
            std::size_t name_start = i;
            while (i < html.size() && is_attr_name_char(html[i])) ++i;
            const std::string name = to_lower(html.substr(name_start, i - name_start));
            if (name.empty()) {
                ++i;
                continue;
            }
            std::string value;
            while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
            if (i < html.size() && html[i] == '=') {
                ++i;
                while (i < html.size() && std::isspace(static_cast<unsigned char>(html[i]))) ++i;
                if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
                    const char quote = html[i++];
                    const std::size_t vstart = i;
                    while (i < html.size() && html[i] != quote) ++i;
                    value = std::string(html.substr(vstart, i - vstart));
                    if (i < html.size()) ++i;
                } else {
                    const std::size_t vstart = i;
                    while (i < html.size() && !std::isspace(static_cast<unsigned char>(html[i])) &&
                           html[i] != '>')
                        ++i;
                    value = std::string(html.substr(vstart, i - vstart));
                }
            }
            if (name == "src") {
                tag.has_src = true;
                tag.src = value;
            }
        }
        if (i >= html.size()) break;  // unterminated tag
        ++i;                          // consume '>'

        if (!tag.has_src && !self_closing) {
            const std::size_t body_start = i;
            const std::size_t close = lower.find("</script", body_start);
            const std::size_t body_end = close == std::string::npos ? html.size() : close;
            tag.inline_body = std::string(html.substr(body_start, body_end - body_start));
            tag.body_line = line_of(html, body_start);
            i = body_end;
        }
        tags.push_back(std::move(tag));
        pos = i;
    }
    return tags;
}

}  // namespace mv3::html
