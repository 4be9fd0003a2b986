#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "debate_forge/error.hpp"
#include "debate_forge/text.hpp"
#include "debate_forge/tree.hpp"

namespace debate_forge {

enum class TreeFormat { KialoExport, CanonicalJson };

namespace detail {

inline std::string fnv1a_hex(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Matches `\d+(\.\d+)*` at the front of `s`; returns its length (0 if none).
inline std::size_t numbering_prefix(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i == 0) return 0;
    while (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
        ++i;
        while (i < s.size() && is_digit(s[i])) ++i;
    }
    return i;
}

inline bool is_numbering(std::string_view s) {
    return !s.empty() && numbering_prefix(s) == s.size();
}

struct KialoLine {
    std::string numbering;
    std::optional<Stance> stance;
    std::string text;
};

// `^(\d+(\.\d+)*)\.\s+(Pro:|Con:)?\s*(.*)$`
inline std::optional<KialoLine> match_node_line(std::string_view line) {
    const std::size_t n = numbering_prefix(line);
    if (n == 0 || n >= line.size() || line[n] != '.') return std::nullopt;
    std::size_t i = n + 1;
    const std::size_t ws_start = i;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == ws_start) return std::nullopt;
    KialoLine out;
    out.numbering = std::string(line.substr(0, n));
    auto rest = line.substr(i);
    if (rest.substr(0, 4) == "Pro:") {
        out.stance = Stance::Pro;
        rest.remove_prefix(4);
    } else if (rest.substr(0, 4) == "Con:") {
        out.stance = Stance::Con;
        rest.remove_prefix(4);
    }
    out.text = std::string(trim(rest));
    return out;
}

// `-> See <numbering>.` exactly, after trimming.
inline std::optional<std::string> match_reference(std::string_view text) {
    constexpr std::string_view head = "-> See ";
    text = trim(text);
    if (text.substr(0, head.size()) != head) return std::nullopt;
    text.remove_prefix(head.size());
    if (text.size() < 2 || text.back() != '.') return std::nullopt;
    text.remove_suffix(1);
    if (!is_numbering(text)) return std::nullopt;
    return std::string(text);
}

inline void require_valid(const DebateTree& tree) {
    auto violations = validate_tree(tree);
    if (violations.empty()) return;
    const auto& v = violations.front();
    throw ParseError(ParseError::Kind::InvalidTree,
                     "invalid tree: " + std::string(to_string(v.kind)) +
                         (v.node_id ? " at node '" + *v.node_id + "'" : std::string{}));
}

inline DebateTree load_kialo(std::string_view bytes, std::string tree_id) {
    DebateTree tree;
    std::optional<std::string> title;
    std::string last_id;
    std::string thesis_id;
    std::size_t line_no = 0;
    bool seen_content = false;

    std::size_t pos = 0;
    while (pos <= bytes.size()) {
        auto eol = bytes.find('\n', pos);
        if (eol == std::string_view::npos) eol = bytes.size();
        std::string_view raw = bytes.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        const auto line = trim(raw);
        if (line.empty()) {
            if (eol == bytes.size()) break;
            continue;
        }

        constexpr std::string_view title_prefix = "Discussion Title:";
        if (!seen_content && line.substr(0, title_prefix.size()) == title_prefix) {
            title = std::string(trim(line.substr(title_prefix.size())));
            seen_content = true;
            continue;
        }
        seen_content = true;

        if (auto node_line = match_node_line(line)) {
            const auto& num = node_line->numbering;
            if (tree.nodes.count(num)) {
                throw ParseError(ParseError::Kind::MalformedNumbering,
                                 "duplicate numbering " + num, line_no);
            }
            ArgumentNode node;
            node.id = num;
            node.text = node_line->text;
            const auto dot = num.rfind('.');
            if (dot == std::string::npos) {
                if (!thesis_id.empty()) {
                    throw ParseError(ParseError::Kind::MalformedNumbering,
                                     "second thesis " + num, line_no);
                }
                if (node_line->stance) {
                    throw ParseError(ParseError::Kind::MalformedNumbering,
                                     "thesis " + num + " carries a stance prefix", line_no);
                }
                thesis_id = num;
            } else {
                std::string parent = num.substr(0, dot);
                if (!tree.nodes.count(parent)) {
                    throw ParseError(ParseError::Kind::MalformedNumbering,
                                     "node " + num + " appears before its parent " + parent,
                                     line_no);
                }
                if (!node_line->stance) {
                    throw ParseError(ParseError::Kind::MissingStancePrefix,
                                     "node " + num + " lacks a Pro:/Con: prefix", line_no);
                }
                node.parent_id = std::move(parent);
                node.stance = node_line->stance;
            }
            last_id = num;
            tree.nodes.emplace(num, std::move(node));
        } else {
            if (last_id.empty()) {
                throw ParseError(ParseError::Kind::MalformedNumbering,
                                 "text before the first numbered line", line_no);
            }
            auto& text = tree.nodes.at(last_id).text;
            if (!text.empty()) text.push_back(' ');
            text.append(line);
        }
        if (eol == bytes.size()) break;
    }
    if (thesis_id.empty()) {
        throw ParseError(ParseError::Kind::MalformedNumbering, "no thesis line found", line_no);
    }
    for (auto& [_, node] : tree.nodes) {
        if (auto target = match_reference(node.text)) {
            node.ref_target = std::move(*target);
            node.text.clear();
        }
    }
    tree.title = title ? *title : tree.nodes.at(thesis_id).text;
    tree.tree_id = tree_id.empty() ? "kialo-" + fnv1a_hex(tree.title) : std::move(tree_id);
    require_valid(tree);
    return tree;
}

inline std::string single_line(std::string_view text) {
    std::string out;
    for (char c : text) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
    return out;
}

inline std::string save_kialo(const DebateTree& tree) {
    const TreeIndex index(tree);
    std::map<std::string, std::string> number;  // node id -> numbering
    std::vector<std::string> order;

    const std::string& root = index.root();
    number[root] = std::all_of(root.begin(), root.end(), is_digit) ? root : std::string("1");
    std::vector<std::string> stack{root};
    while (!stack.empty()) {
        std::string id = stack.back();
        stack.pop_back();
        order.push_back(id);
        const auto& kids = index.children(id);
        for (std::size_t k = 0; k < kids.size(); ++k) {
            number[kids[k]] = number[id] + "." + std::to_string(k + 1);
        }
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }

    std::ostringstream out;
    out << "Discussion Title: " << single_line(tree.title) << "\n\n";
    for (const auto& id : order) {
        const auto& n = tree.nodes.at(id);
        out << number[id] << ". ";
        if (n.stance) out << to_string(*n.stance) << ": ";
        if (n.ref_target) {
            out << "-> See " << number.at(*n.ref_target) << ".";
        } else {
            out << single_line(n.text);
        }
        out << '\n';
    }
    return out.str();
}

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw ParseError(ParseError::Kind::SchemaError,
                         std::string("field '") + key + "' must be a string or null");
    }
    return it->get<std::string>();
}

inline std::string required_string(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) {
        throw ParseError(ParseError::Kind::SchemaError,
                         std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
}

inline DebateTree load_json(std::string_view bytes) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(ParseError::Kind::SchemaError, std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError(ParseError::Kind::SchemaError, "top level must be an object");
    DebateTree tree;
    tree.tree_id = required_string(doc, "tree_id");
    tree.title = required_string(doc, "title");
    auto nodes = doc.find("nodes");
    if (nodes == doc.end() || !nodes->is_array()) {
        throw ParseError(ParseError::Kind::SchemaError, "field 'nodes' must be an array");
    }
    for (const auto& jn : *nodes) {
        if (!jn.is_object()) throw ParseError(ParseError::Kind::SchemaError, "node must be an object");
        ArgumentNode node;
        node.id = required_string(jn, "id");
        node.parent_id = optional_string(jn, "parent");
        if (auto stance = optional_string(jn, "stance")) {
            if (*stance == "pro") {
                node.stance = Stance::Pro;
            } else if (*stance == "con") {
                node.stance = Stance::Con;
            } else {
                throw ParseError(ParseError::Kind::SchemaError,
                                 "stance must be \"pro\", \"con\" or null, got \"" + *stance + "\"");
            }
        }
        node.text = required_string(jn, "text");
        node.ref_target = optional_string(jn, "ref");
        const std::string id = node.id;
        if (!tree.nodes.emplace(id, std::move(node)).second) {
            throw ParseError(ParseError::Kind::SchemaError, "duplicate node id '" + id + "'");
        }
    }
    require_valid(tree);
    return tree;
}

}  // namespace detail

inline nlohmann::ordered_json tree_to_json(const DebateTree& tree) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& [id, n] : tree.nodes) {
        nlohmann::ordered_json jn;
        jn["id"] = id;
        jn["parent"] = n.parent_id ? nlohmann::ordered_json(*n.parent_id) : nullptr;
        jn["stance"] = n.stance ? nlohmann::ordered_json(*n.stance == Stance::Pro ? "pro" : "con")
                                : nullptr;
        jn["text"] = n.text;
        jn["ref"] = n.ref_target ? nlohmann::ordered_json(*n.ref_target) : nullptr;
        nodes.push_back(std::move(jn));
    }
    nlohmann::ordered_json doc;
    doc["tree_id"] = tree.tree_id;
    doc["title"] = tree.title;
    doc["nodes"] = std::move(nodes);
    return doc;
}

// Parses either format. Kialo exports carry no tree id; `tree_id` supplies
// one, otherwise it is derived from the title.
inline DebateTree load_tree(std::string_view bytes, TreeFormat format, std::string tree_id = {}) {
    if (!utf8::valid(bytes)) {
        throw ParseError(ParseError::Kind::EncodingError, "input is not valid UTF-8");
    }
    if (format == TreeFormat::KialoExport) return detail::load_kialo(bytes, std::move(tree_id));
    return detail::load_json(bytes);
}

// Kialo output renumbers nodes in preorder (children in natural id order);
// JSON output lists nodes sorted by id.
inline std::string save_tree(const DebateTree& tree, TreeFormat format) {
    if (format == TreeFormat::KialoExport) return detail::save_kialo(tree);
    return tree_to_json(tree).dump(2) + "\n";
}

}  // namespace debate_forge
