#include "relsim/caption.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "relsim/error.hpp"
#include "relsim/utf8.hpp"

namespace relsim {

namespace {

struct FoldedChar {
    char32_t code_point;
    std::size_t byte_offset;  // relative to the source string
};

std::vector<FoldedChar> fold(std::string_view text) {
    std::vector<FoldedChar> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto d = utf8::decode_at(text, pos);
        if (!d) fail(ErrorCode::InvalidArgument, "invalid UTF-8");
        out.push_back({utf8::fold_case(d->code_point), pos});
        pos += d->length;
    }
    return out;
}

std::string fold_string(std::string_view text) {
    std::string out;
    for (const auto& c : fold(text)) utf8::append(out, c.code_point);
    return out;
}

}  // namespace

std::size_t CaptionTemplate::placeholder_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(), [](const Segment& s) {
        return std::holds_alternative<Placeholder>(s);
    }));
}

std::vector<std::string> CaptionTemplate::placeholder_names() const {
    std::vector<std::string> names;
    for (const auto& s : segments_) {
        if (const auto* p = std::get_if<Placeholder>(&s)) names.push_back(p->name);
    }
    return names;
}

std::string CaptionTemplate::render() const {
    std::string out;
    for (const auto& s : segments_) {
        if (const auto* lit = std::get_if<Literal>(&s)) {
            out += lit->text;
        } else {
            out += '{';
            out += std::get<Placeholder>(s).name;
            out += '}';
        }
    }
    return out;
}

CaptionTemplate parse_caption(std::string_view text) {
    if (!utf8::is_valid(text)) fail(ErrorCode::InvalidArgument, "caption is not valid UTF-8");

    CaptionTemplate t;
    t.raw_ = std::string(text);
    std::string literal;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '}') {
            fail(ErrorCode::UnbalancedBrace, "unmatched '}' at byte " + std::to_string(i));
        }
        if (c != '{') {
            literal.push_back(c);
            ++i;
            continue;
        }
        const std::size_t open = i;
        std::size_t j = i + 1;
        while (j < text.size() && text[j] != '}') {
            if (text[j] == '{') {
                fail(ErrorCode::NestedBrace, "nested '{' at byte " + std::to_string(j));
            }
            ++j;
        }
        if (j == text.size()) {
            fail(ErrorCode::UnbalancedBrace, "unmatched '{' at byte " + std::to_string(open));
        }
        if (j == open + 1) {
            fail(ErrorCode::EmptyPlaceholder, "empty placeholder at byte " + std::to_string(open));
        }
        if (!literal.empty()) {
            t.segments_.emplace_back(Literal{std::move(literal)});
            literal.clear();
        }
        t.segments_.emplace_back(Placeholder{std::string(text.substr(open + 1, j - open - 1))});
        i = j + 1;
    }
    if (!literal.empty()) t.segments_.emplace_back(Literal{std::move(literal)});
    return t;
}

Lexicon::Lexicon(const std::vector<std::string>& tokens) {
    for (const auto& token : tokens) {
        if (token.empty()) fail(ErrorCode::InvalidArgument, "lexicon tokens must be nonempty");
        tokens_.insert(fold_string(token));
    }
}

Lexicon Lexicon::parse(std::string_view text) {
    std::vector<std::string> tokens;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto last = line.find_last_not_of(" \t\r");
        tokens.push_back(line.substr(first, last - first + 1));
    }
    return Lexicon(tokens);
}

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Io, "cannot open lexicon " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

AnonymityReport validate_anonymity(const CaptionTemplate& caption, const Lexicon& lexicon) {
    std::vector<std::pair<std::vector<char32_t>, const std::string*>> needles;
    for (const auto& token : lexicon.tokens()) {
        std::vector<char32_t> cps;
        for (const auto& c : fold(token)) cps.push_back(c.code_point);
        needles.emplace_back(std::move(cps), &token);
    }

    AnonymityReport report;
    std::size_t segment_offset = 0;
    for (const auto& seg : caption.segments()) {
        if (const auto* ph = std::get_if<Placeholder>(&seg)) {
            segment_offset += ph->name.size() + 2;
            continue;
        }
        const auto& text = std::get<Literal>(seg).text;
        const auto chars = fold(text);
        for (const auto& [needle, token] : needles) {
            if (needle.size() > chars.size()) continue;
            for (std::size_t start = 0; start + needle.size() <= chars.size(); ++start) {
                bool match = true;
                for (std::size_t k = 0; k < needle.size() && match; ++k) {
                    match = chars[start + k].code_point == needle[k];
                }
                if (!match) continue;
                const std::size_t end = start + needle.size();
                const bool left_ok = start == 0 || !utf8::is_word_char(chars[start - 1].code_point);
                const bool right_ok = end == chars.size() || !utf8::is_word_char(chars[end].code_point);
                if (left_ok && right_ok) {
                    report.banned_hits.push_back({*token, segment_offset + chars[start].byte_offset});
                }
            }
        }
        segment_offset += text.size();
    }
    std::sort(report.banned_hits.begin(), report.banned_hits.end(),
              [](const BannedHit& a, const BannedHit& b) {
                  return a.byte_offset != b.byte_offset ? a.byte_offset < b.byte_offset
                                                        : a.token < b.token;
              });
    return report;
}

std::string template_signature(const CaptionTemplate& caption) {
    std::string out;
    bool pending_space = false;
    std::map<std::string, std::size_t> markers;
    for (const auto& seg : caption.segments()) {
        if (const auto* ph = std::get_if<Placeholder>(&seg)) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            const auto [it, inserted] = markers.try_emplace(fold_string(ph->name), markers.size());
            out += "⟨" + std::to_string(it->second) + "⟩";
            continue;
        }
        for (const auto& c : fold(std::get<Literal>(seg).text)) {
            if (utf8::is_space(c.code_point)) {
                pending_space = true;
                continue;
            }
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            utf8::append(out, c.code_point);
        }
    }
    return out;
}

}  // namespace relsim
