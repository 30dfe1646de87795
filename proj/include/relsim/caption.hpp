#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace relsim {

struct Literal {
    std::string text;
    bool operator==(const Literal&) const = default;
};

struct Placeholder {
    std::string name;
    bool operator==(const Placeholder&) const = default;
};

using Segment = std::variant<Literal, Placeholder>;

/// An anonymous caption: literal text interleaved with `{name}` slots.
class CaptionTemplate {
public:
    const std::string& raw() const noexcept { return raw_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }

    std::size_t placeholder_count() const noexcept;
    std::vector<std::string> placeholder_names() const;

    /// Concatenates segments with placeholders rendered as "{name}".
    std::string render() const;

private:
    friend CaptionTemplate parse_caption(std::string_view text);
    std::string raw_;
    std::vector<Segment> segments_;
};

/// Throws Error with UnbalancedBrace, EmptyPlaceholder or NestedBrace on bad
/// input, and InvalidArgument when text is not valid UTF-8.
CaptionTemplate parse_caption(std::string_view text);

struct BannedHit {
    std::string token;
    std::size_t byte_offset;  // into CaptionTemplate::raw()
    bool operator==(const BannedHit&) const = default;
};

struct AnonymityReport {
    std::vector<BannedHit> banned_hits;
    bool is_anonymous() const noexcept { return banned_hits.empty(); }
};

/// Lowercase tokens that must not appear as whole words in caption literals.
class Lexicon {
public:
    Lexicon() = default;
    explicit Lexicon(const std::vector<std::string>& tokens);

    /// One token per line; blank lines and lines starting with '#' are skipped.
    static Lexicon parse(std::string_view text);
    static Lexicon load(const std::string& path);

    const std::set<std::string>& tokens() const noexcept { return tokens_; }

private:
    std::set<std::string> tokens_;
};

/// Hits are ordered by byte offset, then token.
AnonymityReport validate_anonymity(const CaptionTemplate& caption, const Lexicon& lexicon);

/// Lowercased, whitespace-collapsed literals with placeholders replaced by
/// ⟨0⟩, ⟨1⟩, ... in order of first appearance.
std::string template_signature(const CaptionTemplate& caption);

}  // namespace relsim
