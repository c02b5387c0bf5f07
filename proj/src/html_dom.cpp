#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

#include "smartflow/html_prep.hpp"

namespace smartflow::html {

namespace {

constexpr std::array<std::string_view, 14> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img",
    "input", "link", "meta", "param", "source", "track", "wbr"};

constexpr std::array<std::string_view, 4> kRawTextElements = {"script", "style", "textarea",
                                                              "title"};

bool is_void(std::string_view name) {
    return std::find(kVoidElements.begin(), kVoidElements.end(), name) != kVoidElements.end();
}

bool is_raw_text(std::string_view name) {
    return std::find(kRawTextElements.begin(), kRawTextElements.end(), name) !=
           kRawTextElements.end();
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_name_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || c == '-' || c == '_' || c == ':' || c == '.';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {
        if (src_.substr(0, 3) == "\xEF\xBB\xBF") src_.remove_prefix(3);
        root_ = std::make_unique<Node>();
        stack_.push_back(root_.get());
    }

    std::unique_ptr<Node> run() {
        while (pos_ < src_.size()) {
            if (src_[pos_] == '<' && try_markup()) continue;
            read_text();
        }
        return std::move(root_);
    }

private:
    Node* current() { return stack_.back(); }

    Node* append(std::unique_ptr<Node> node) {
        node->parent = current();
        Node* raw = node.get();
        current()->children.push_back(std::move(node));
        return raw;
    }

    void add_text(std::string_view text) {
        if (text.empty()) return;
        auto& kids = current()->children;
        if (!kids.empty() && kids.back()->type == Node::Type::Text) {
            kids.back()->text += text;
            return;
        }
        auto n = std::make_unique<Node>();
        n->type = Node::Type::Text;
        n->text = std::string(text);
        append(std::move(n));
    }

    void read_text() {
        const std::size_t start = pos_;
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] != '<') ++pos_;
        add_text(src_.substr(start, pos_ - start));
    }

    bool try_markup() {
        const std::string_view rest = src_.substr(pos_);
        if (rest.substr(0, 4) == "<!--") {
            const std::size_t end = rest.find("-->", 4);
            auto n = std::make_unique<Node>();
            n->type = Node::Type::Comment;
            if (end == std::string_view::npos) {
                n->text = std::string(rest.substr(4));
                pos_ = src_.size();
            } else {
                n->text = std::string(rest.substr(4, end - 4));
                pos_ += end + 3;
            }
            append(std::move(n));
            return true;
        }
        if (rest.size() >= 2 && (rest[1] == '!' || rest[1] == '?')) {
            const std::size_t end = rest.find('>');
            auto n = std::make_unique<Node>();
            n->type = Node::Type::Doctype;
            n->text = std::string(rest.substr(2, end == std::string_view::npos ? rest.size() - 2
                                                                              : end - 2));
            pos_ = end == std::string_view::npos ? src_.size() : pos_ + end + 1;
            append(std::move(n));
            return true;
        }
        if (rest.size() >= 3 && rest[1] == '/' &&
            std::isalpha(static_cast<unsigned char>(rest[2]))) {
            std::size_t i = 2;
            while (i < rest.size() && is_name_char(rest[i])) ++i;
            const std::string name = lower(rest.substr(2, i - 2));
            const std::size_t end = rest.find('>', i);
            pos_ = end == std::string_view::npos ? src_.size() : pos_ + end + 1;
            close_element(name);
            return true;
        }
        if (rest.size() >= 2 && std::isalpha(static_cast<unsigned char>(rest[1]))) {
            read_start_tag();
            return true;
        }
        return false;
    }

    void read_start_tag() {
        std::size_t i = pos_ + 1;
        const std::size_t name_start = i;
        while (i < src_.size() && is_name_char(src_[i])) ++i;
        auto el = std::make_unique<Node>();
        el->type = Node::Type::Element;
        el->name = lower(src_.substr(name_start, i - name_start));
        bool self_closing = false;

        while (i < src_.size()) {
            while (i < src_.size() && is_space(src_[i])) ++i;
            if (i >= src_.size()) break;
            if (src_[i] == '>') {
                ++i;
                break;
            }
            if (src_[i] == '/') {
                self_closing = true;
                ++i;
                continue;
            }
            const std::size_t an = i;
            while (i < src_.size() && !is_space(src_[i]) && src_[i] != '=' && src_[i] != '>' &&
                   src_[i] != '/')
                ++i;
            if (i == an) {  // stray character such as a lone quote
                ++i;
                continue;
            }
            Attribute attr{lower(src_.substr(an, i - an)), std::nullopt};
            std::size_t j = i;
            while (j < src_.size() && is_space(src_[j])) ++j;
            if (j < src_.size() && src_[j] == '=') {
                ++j;
                while (j < src_.size() && is_space(src_[j])) ++j;
                if (j < src_.size() && (src_[j] == '"' || src_[j] == '\'')) {
                    const char q = src_[j++];
                    const std::size_t vs = j;
                    while (j < src_.size() && src_[j] != q) ++j;
                    attr.value = std::string(src_.substr(vs, j - vs));
                    if (j < src_.size()) ++j;
                } else {
                    const std::size_t vs = j;
                    while (j < src_.size() && !is_space(src_[j]) && src_[j] != '>') ++j;
                    attr.value = std::string(src_.substr(vs, j - vs));
                }
                i = j;
            }
            self_closing = false;
            const bool dup = std::any_of(el->attributes.begin(), el->attributes.end(),
                                         [&](const Attribute& a) { return a.name == attr.name; });
            if (!dup) el->attributes.push_back(std::move(attr));
        }
        pos_ = i;

        implicit_close(el->name);
        const std::string name = el->name;
        Node* raw = append(std::move(el));
        if (is_void(name) || self_closing) return;
        if (is_raw_text(name)) {
            const std::string closing = "</" + name;
            std::size_t end = pos_;
            for (;;) {
                end = src_.find("</", end);
                if (end == std::string_view::npos) break;
                if (lower(src_.substr(end, closing.size())) == closing) break;
                end += 2;
            }
            const std::size_t stop = end == std::string_view::npos ? src_.size() : end;
            if (stop > pos_) {
                auto t = std::make_unique<Node>();
                t->type = Node::Type::Text;
                t->text = std::string(src_.substr(pos_, stop - pos_));
                t->parent = raw;
                raw->children.push_back(std::move(t));
            }
            if (end == std::string_view::npos) {
                pos_ = src_.size();
            } else {
                const std::size_t gt = src_.find('>', end);
                pos_ = gt == std::string_view::npos ? src_.size() : gt + 1;
            }
            return;
        }
        stack_.push_back(raw);
    }

    // Elements whose start tag ends an open sibling of the same family.
    void implicit_close(std::string_view name) {
        auto close_if_open = [&](std::string_view target, std::string_view boundary) {
            for (std::size_t k = stack_.size(); k-- > 1;) {
                if (stack_[k]->name == target) {
                    stack_.resize(k);
                    return;
                }
                if (stack_[k]->name == boundary) return;
            }
        };
        if (name == "option") close_if_open("option", "select");
        if (name == "li") close_if_open("li", "ul");
        if (name == "tr") close_if_open("tr", "table");
        if (name == "td" || name == "th") {
            close_if_open("td", "tr");
            close_if_open("th", "tr");
        }
    }

    void close_element(const std::string& name) {
        for (std::size_t k = stack_.size(); k-- > 1;) {
            if (stack_[k]->name == name) {
                stack_.resize(k);
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::unique_ptr<Node> root_;
    std::vector<Node*> stack_;
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

void collect_text(const Node& node, std::string& out) {
    if (node.type == Node::Type::Text) {
        out += node.text;
        out.push_back(' ');
        return;
    }
    if (node.type != Node::Type::Element && node.type != Node::Type::Document) return;
    if (node.name == "script" || node.name == "style") return;
    for (const auto& c : node.children) collect_text(*c, out);
}

}  // namespace

const std::string* Node::attr(std::string_view key) const {
    for (const auto& a : attributes)
        if (a.name == key) return a.value ? &*a.value : &a.name;
    return nullptr;
}

std::unique_ptr<Node> parse(std::string_view markup) { return Parser(markup).run(); }

std::string decode_entities(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '&') {
            out.push_back(raw[i]);
            continue;
        }
        const std::size_t semi = raw.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        const std::string_view ent = raw.substr(i + 1, semi - i - 1);
        std::string rep;
        if (ent == "amp") rep = "&";
        else if (ent == "lt") rep = "<";
        else if (ent == "gt") rep = ">";
        else if (ent == "quot") rep = "\"";
        else if (ent == "apos" || ent == "#39") rep = "'";
        else if (ent == "nbsp") rep = " ";
        else if (ent.size() > 1 && ent[0] == '#') {
            std::uint32_t cp = 0;
            bool ok = true;
            const bool hex = ent[1] == 'x' || ent[1] == 'X';
            for (std::size_t k = hex ? 2 : 1; k < ent.size() && ok; ++k) {
                const char c = ent[k];
                if (hex && std::isxdigit(static_cast<unsigned char>(c)))
                    cp = cp * 16 + static_cast<std::uint32_t>(
                                       std::isdigit(static_cast<unsigned char>(c))
                                           ? c - '0'
                                           : std::tolower(static_cast<unsigned char>(c)) - 'a' + 10);
                else if (!hex && std::isdigit(static_cast<unsigned char>(c)))
                    cp = cp * 10 + static_cast<std::uint32_t>(c - '0');
                else
                    ok = false;
            }
            if (ok && cp > 0 && cp < 0x110000) append_utf8(rep, cp);
        }
        if (rep.empty()) {
            out.push_back('&');
            continue;
        }
        out += rep;
        i = semi;
    }
    return out;
}

std::string text_content(const Node& node) {
    std::string raw;
    collect_text(node, raw);
    const std::string decoded = decode_entities(raw);
    std::string out;
    bool space = false;
    for (char c : decoded) {
        if (is_space(c)) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace smartflow::html
