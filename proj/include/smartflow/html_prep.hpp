#pragma once

// HTML pre-processing: an error-tolerant DOM, the prompt-budget cleaner and
// the deterministic form-element extractor.

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smartflow/core.hpp"

namespace smartflow::html {

struct Attribute {
    std::string name;
    std::optional<std::string> value;
};

struct Node {
    enum class Type { Document, Element, Text, Comment, Doctype };

    Type type = Type::Document;
    std::string name;  // lowercase tag name for elements
    std::string text;  // raw content for text, comment and doctype nodes
    std::vector<Attribute> attributes;
    std::vector<std::unique_ptr<Node>> children;
    Node* parent = nullptr;

    const std::string* attr(std::string_view key) const;
    bool has_attr(std::string_view key) const { return attr(key) != nullptr; }
};

/// Never fails: malformed markup is repaired the way browsers mostly do
/// (unknown end tags ignored, void elements self-close, raw-text elements
/// read up to their end tag). A UTF-8 byte-order mark is dropped.
std::unique_ptr<Node> parse(std::string_view markup);

/// Text with entities decoded and whitespace runs collapsed, trimmed.
std::string text_content(const Node& node);
std::string decode_entities(std::string_view raw);

struct CleanedHtml {
    std::string markup;
    std::size_t original_bytes = 0;
    std::size_t cleaned_bytes = 0;
};

/// Attributes kept by the cleaner.
const std::vector<std::string_view>& attribute_whitelist();

/// Drops script/style/comment/doctype nodes and every non-whitelisted
/// attribute, collapses whitespace in text. Throws Error(BudgetExceeded)
/// with the cleaned byte count in detail() when the result is still larger
/// than `byte_budget`.
CleanedHtml clean_html(std::string_view raw, std::size_t byte_budget);

struct FormElementDecl {
    std::string label;
    FieldKind kind = FieldKind::TextInput;
    std::vector<std::string> options;
    std::optional<std::string> placeholder;
    bool required = false;
    std::string dom_id;
    /// Set when no label, preceding text or placeholder was found and the
    /// dom_id stands in for the label.
    bool label_unresolved = false;

    bool operator==(const FormElementDecl&) const = default;
};

/// Form controls in document order. Radio and checkbox inputs sharing a
/// `name` collapse into one declaration whose options are the member labels.
std::vector<FormElementDecl> extract_form_elements(const CleanedHtml& page);

/// Counts input/select/textarea/button elements.
std::size_t count_form_controls(std::string_view markup);

}  // namespace smartflow::html
