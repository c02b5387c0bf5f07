#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "smartflow/html_prep.hpp"

namespace smartflow::html {

namespace {

constexpr std::string_view kVoid[] = {"area", "base", "br", "col", "embed", "hr", "img",
                                      "input", "link", "meta", "param", "source", "track", "wbr"};

bool is_void(std::string_view name) {
    return std::find(std::begin(kVoid), std::end(kVoid), name) != std::end(kVoid);
}

bool is_whitelisted(std::string_view attr) {
    const auto& wl = attribute_whitelist();
    return std::find(wl.begin(), wl.end(), attr) != wl.end();
}

// Attribute values made only of these characters are written unquoted.
bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ||
           c == ':';
}

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    if (space) out.push_back(' ');
    return out;
}

void serialize(const Node& node, std::string& out);

// Text split by dropped nodes (comments, scripts) is merged before collapsing
// so the output re-parses into the same text node.
void serialize_children(const Node& node, std::string& out) {
    std::string pending;
    const bool raw = node.name == "textarea";
    auto flush = [&] {
        out += raw ? pending : collapse_ws(pending);
        pending.clear();
    };
    for (const auto& c : node.children) {
        if (c->type == Node::Type::Text) {
            pending += c->text;
            continue;
        }
        if (c->type == Node::Type::Comment || c->type == Node::Type::Doctype) continue;
        if (c->type == Node::Type::Element && (c->name == "script" || c->name == "style")) continue;
        flush();
        serialize(*c, out);
    }
    flush();
}

void serialize(const Node& node, std::string& out) {
    switch (node.type) {
        case Node::Type::Comment:
        case Node::Type::Doctype:
            return;
        case Node::Type::Text: {
            const bool raw = node.parent && node.parent->name == "textarea";
            out += raw ? node.text : collapse_ws(node.text);
            return;
        }
        case Node::Type::Document:
            serialize_children(node, out);
            return;
        case Node::Type::Element:
            break;
    }
    if (node.name == "script" || node.name == "style") return;
    out += '<';
    out += node.name;
    for (const auto& a : node.attributes) {
        if (!is_whitelisted(a.name)) continue;
        out += ' ';
        out += a.name;
        if (a.value) {
            out += '=';
            if (!a.value->empty() && std::all_of(a.value->begin(), a.value->end(), is_bare_char)) {
                out += *a.value;
                continue;
            }
            out += '"';
            for (char c : *a.value) {
                if (c == '"') out += "&quot;";
                else out.push_back(c);
            }
            out += '"';
        }
    }
    out += '>';
    if (is_void(node.name)) return;
    serialize_children(node, out);
    out += "</";
    out += node.name;
    out += '>';
}

// Document-order flattening used by the extractor.
void flatten(const Node& node, std::vector<const Node*>& out) {
    out.push_back(&node);
    for (const auto& c : node.children) flatten(*c, out);
}

bool has_ancestor(const Node* n, const Node* anc) {
    for (const Node* p = n->parent; p; p = p->parent)
        if (p == anc) return true;
    return false;
}

const Node* ancestor_named(const Node* n, std::string_view name) {
    for (const Node* p = n->parent; p; p = p->parent)
        if (p->type == Node::Type::Element && p->name == name) return p;
    return nullptr;
}

constexpr std::string_view kBlockContainers[] = {
    "div", "p", "form", "fieldset", "section", "article", "li", "td", "th", "tr",
    "table", "body", "html", "main", "header", "footer", "ul", "ol", "dl", "dd",
    "dt", "nav", "aside", "tbody", "thead"};

const Node* block_container(const Node* n) {
    for (const Node* p = n->parent; p; p = p->parent) {
        if (p->type == Node::Type::Document) return p;
        if (std::find(std::begin(kBlockContainers), std::end(kBlockContainers), p->name) !=
            std::end(kBlockContainers))
            return p;
    }
    return nullptr;
}

std::string attr_or(const Node* n, std::string_view key, std::string_view fallback = {}) {
    const std::string* v = n->attr(key);
    return v ? *v : std::string(fallback);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

enum class ControlClass { Skip, Field, Submit };

ControlClass classify(const Node* n, FieldKind& kind) {
    if (n->type != Node::Type::Element) return ControlClass::Skip;
    if (n->name == "select") {
        kind = FieldKind::Dropdown;
        return ControlClass::Field;
    }
    if (n->name == "textarea") {
        kind = FieldKind::TextArea;
        return ControlClass::Field;
    }
    if (n->name == "button") {
        const std::string type = lower(attr_or(n, "type", "submit"));
        if (type != "submit") return ControlClass::Skip;
        kind = FieldKind::SubmitButton;
        return ControlClass::Submit;
    }
    if (n->name != "input") return ControlClass::Skip;
    const std::string type = lower(attr_or(n, "type", "text"));
    if (type == "hidden" || type == "reset" || type == "button") return ControlClass::Skip;
    if (type == "submit" || type == "image") {
        kind = FieldKind::SubmitButton;
        return ControlClass::Submit;
    }
    if (type == "date") kind = FieldKind::DatePicker;
    else if (type == "radio") kind = FieldKind::Radio;
    else if (type == "checkbox") kind = FieldKind::Checkbox;
    else kind = FieldKind::TextInput;
    return ControlClass::Field;
}

class Extractor {
public:
    explicit Extractor(const Node& root) {
        flatten(root, order_);
        for (std::size_t i = 0; i < order_.size(); ++i) {
            const Node* n = order_[i];
            index_[n] = i;
            if (n->type == Node::Type::Element && n->name == "label") {
                if (const std::string* f = n->attr("for")) {
                    label_for_.emplace(*f, n);
                }
            }
            FieldKind k{};
            if (classify(n, k) != ControlClass::Skip) {
                if (const std::string* id = n->attr("id")) control_ids_.insert(*id);
            }
        }
    }

    std::vector<FormElementDecl> run() {
        std::vector<FormElementDecl> out;
        std::map<std::string, std::size_t> groups;  // "kind:name" -> index in out
        std::set<std::string> used_ids;

        for (const Node* n : order_) {
            FieldKind kind{};
            const ControlClass cls = classify(n, kind);
            if (cls == ControlClass::Skip) continue;

            if (is_choice(kind)) {
                const std::string name = attr_or(n, "name");
                const std::string option = option_text(n);
                if (!name.empty()) {
                    const std::string key = std::string(to_string(kind)) + ":" + name;
                    auto it = groups.find(key);
                    if (it != groups.end()) {
                        auto& decl = out[it->second];
                        decl.options.push_back(option);
                        decl.required = decl.required || n->has_attr("required");
                        continue;
                    }
                    groups.emplace(key, out.size());
                }
                FormElementDecl decl;
                decl.kind = kind;
                decl.options.push_back(option);
                decl.required = n->has_attr("required");
                decl.dom_id = unique_id(name.empty() ? attr_or(n, "id") : name, n, used_ids);
                resolve_group_label(n, decl);
                out.push_back(std::move(decl));
                continue;
            }

            FormElementDecl decl;
            decl.kind = kind;
            decl.required = n->has_attr("required");
            if (const std::string* ph = n->attr("placeholder")) decl.placeholder = *ph;
            std::string base = attr_or(n, "id");
            if (base.empty()) base = attr_or(n, "name");
            decl.dom_id = unique_id(base, n, used_ids);
            if (kind == FieldKind::Dropdown) {
                for (const auto& c : n->children)
                    if (c->type == Node::Type::Element && c->name == "option")
                        decl.options.push_back(text_content(*c));
            }
            if (cls == ControlClass::Submit) {
                std::string text = n->name == "button" ? text_content(*n) : attr_or(n, "value");
                decl.label = text.empty() ? "Submit" : text;
            } else {
                resolve_label(n, decl);
            }
            out.push_back(std::move(decl));
        }
        return out;
    }

private:
    std::string unique_id(std::string base, const Node* n, std::set<std::string>& used) {
        if (base.empty()) base = n->name + "-" + std::to_string(index_.at(n));
        std::string id = base;
        for (int k = 2; used.count(id); ++k) id = base + "-" + std::to_string(k);
        used.insert(id);
        return id;
    }

    std::string option_text(const Node* n) {
        if (const std::string* id = n->attr("id")) {
            auto it = label_for_.find(*id);
            if (it != label_for_.end()) {
                std::string t = text_content(*it->second);
                if (!t.empty()) return t;
            }
        }
        if (const Node* wrap = ancestor_named(n, "label")) {
            std::string t = text_content(*wrap);
            if (!t.empty()) return t;
        }
        return attr_or(n, "value", "on");
    }

    // Last non-empty text node before `n` inside its block container, skipping
    // text owned by other controls, options and labels bound to a control.
    std::string preceding_text(const Node* n) {
        const Node* container = block_container(n);
        if (!container) return {};
        const std::size_t stop = index_.at(n);
        for (std::size_t i = stop; i-- > index_.at(container);) {
            const Node* t = order_[i];
            if (t->type != Node::Type::Text) continue;
            if (!has_ancestor(t, container)) break;
            if (owned_by_control(t)) continue;
            std::string s = text_content(*t);
            if (!s.empty()) return s;
        }
        return {};
    }

    bool owned_by_control(const Node* t) const {
        for (const Node* p = t->parent; p; p = p->parent) {
            if (p->type != Node::Type::Element) continue;
            if (p->name == "option" || p->name == "select" || p->name == "textarea" ||
                p->name == "button" || p->name == "script" || p->name == "style" ||
                p->name == "legend")
                return true;
            if (p->name == "label") {
                const std::string* f = p->attr("for");
                if (f && control_ids_.count(*f)) return true;
            }
        }
        return false;
    }

    void resolve_label(const Node* n, FormElementDecl& decl) {
        if (const std::string* id = n->attr("id")) {
            auto it = label_for_.find(*id);
            if (it != label_for_.end()) {
                decl.label = text_content(*it->second);
                if (!decl.label.empty()) return;
            }
        }
        if (const Node* wrap = ancestor_named(n, "label")) {
            decl.label = text_content(*wrap);
            if (!decl.label.empty()) return;
        }
        decl.label = preceding_text(n);
        if (!decl.label.empty()) return;
        if (decl.placeholder && !trim(*decl.placeholder).empty()) {
            decl.label = trim(*decl.placeholder);
            return;
        }
        decl.label = decl.dom_id;
        decl.label_unresolved = true;
    }

    void resolve_group_label(const Node* first, FormElementDecl& decl) {
        if (const Node* fs = ancestor_named(first, "fieldset")) {
            for (const auto& c : fs->children) {
                if (c->type == Node::Type::Element && c->name == "legend") {
                    decl.label = text_content(*c);
                    if (!decl.label.empty()) return;
                }
            }
        }
        decl.label = preceding_text(first);
        if (!decl.label.empty()) return;
        decl.label = decl.dom_id;
        decl.label_unresolved = true;
    }

    std::vector<const Node*> order_;
    std::map<const Node*, std::size_t> index_;
    std::multimap<std::string, const Node*> label_for_;
    std::set<std::string> control_ids_;
};

void count_controls(const Node& n, std::size_t& count) {
    if (n.type == Node::Type::Element &&
        (n.name == "input" || n.name == "select" || n.name == "textarea" || n.name == "button"))
        ++count;
    for (const auto& c : n.children) count_controls(*c, count);
}

}  // namespace

const std::vector<std::string_view>& attribute_whitelist() {
    static const std::vector<std::string_view> wl = {"id", "name", "type", "value", "placeholder",
                                                     "for", "selected", "checked", "required"};
    return wl;
}

CleanedHtml clean_html(std::string_view raw, std::size_t byte_budget) {
    if (byte_budget == 0) throw Error(ErrorCode::InvalidParameter, "byte budget must be positive");
    const auto doc = parse(raw);
    CleanedHtml out;
    out.original_bytes = raw.size();
    serialize(*doc, out.markup);
    out.cleaned_bytes = out.markup.size();
    if (out.cleaned_bytes > byte_budget)
        throw Error(ErrorCode::BudgetExceeded,
                    "cleaned page is " + std::to_string(out.cleaned_bytes) +
                        " bytes, over the budget of " + std::to_string(byte_budget),
                    std::to_string(out.cleaned_bytes));
    return out;
}

std::vector<FormElementDecl> extract_form_elements(const CleanedHtml& page) {
    const auto doc = parse(page.markup);
    return Extractor(*doc).run();
}

std::size_t count_form_controls(std::string_view markup) {
    const auto doc = parse(markup);
    std::size_t count = 0;
    count_controls(*doc, count);
    return count;
}

}  // namespace smartflow::html
