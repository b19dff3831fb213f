#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mv3::html {

// One `<script...>` element found by the minimal tag scanner.  Full HTML
// parsing is unnecessary here: we only need src attributes and inline
// bodies for hit counting and background-page conversion.
struct ScriptTag {
    bool has_src = false;
    std::string src;          // verbatim attribute value when has_src
    std::string inline_body;  // body text when !has_src
    int tag_line = 1;         // line of the opening tag
    int body_line = 1;        // line where the inline body starts
};

std::vector<ScriptTag> find_script_tags(std::string_view html);

}  // namespace mv3::html
