/*
 * Copyright (C) 2026 The cwasi-cpp Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include <cctype>
#include <optional>
#include <vector>

#include "cwasi/error.hpp"
#include "cwasi/linker.hpp"

namespace cwasi {

namespace {

enum class TokenKind { Open, Close, String, Atom };

struct Token {
    TokenKind kind;
    std::string text; // decoded bytes for strings, raw text for atoms
};

class Lexer {
public:
    explicit Lexer(std::string_view text)
        : text_(text)
    {
    }

    std::optional<Token> next()
    {
        skip_trivia();
        if (pos_ >= text_.size()) {
            return std::nullopt;
        }

        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            return Token {TokenKind::Open, {}};
        }
        if (c == ')') {
            ++pos_;
            return Token {TokenKind::Close, {}};
        }
        if (c == '"') {
            return Token {TokenKind::String, read_string()};
        }

        size_t start = pos_;
        while (pos_ < text_.size() && !is_delimiter(text_[pos_])) {
            ++pos_;
        }
        return Token {TokenKind::Atom, std::string(text_.substr(start, pos_ - start))};
    }

private:
    static bool is_delimiter(char c)
    {
        return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '"' || c == ';';
    }

    void fail(const std::string& what) const
    {
        raise(Errc::UnparsableText, what + " at offset " + std::to_string(pos_));
    }

    void skip_trivia()
    {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (text_.compare(pos_, 2, ";;") == 0) {
                auto eol = text_.find('\n', pos_);
                pos_ = eol == std::string_view::npos ? text_.size() : eol + 1;
            } else if (text_.compare(pos_, 2, "(;") == 0) {
                skip_block_comment();
            } else if (c == ';') {
                // A lone ';' is not valid anywhere in the text format.
                fail("stray ';'");
            } else {
                return;
            }
        }
    }

    void skip_block_comment()
    {
        size_t depth = 0;
        while (pos_ < text_.size()) {
            if (text_.compare(pos_, 2, "(;") == 0) {
                ++depth;
                pos_ += 2;
            } else if (text_.compare(pos_, 2, ";)") == 0) {
                pos_ += 2;
                if (--depth == 0) {
                    return;
                }
            } else {
                ++pos_;
            }
        }
        fail("unterminated block comment");
    }

    static int hex_value(char c)
    {
        if (c >= '0' && c <= '9') {
            return c - '0';
        }
        if (c >= 'a' && c <= 'f') {
            return c - 'a' + 10;
        }
        if (c >= 'A' && c <= 'F') {
            return c - 'A' + 10;
        }
        return -1;
    }

    static void append_utf8(std::string& out, uint32_t cp)
    {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xc0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xe0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        } else {
            out += static_cast<char>(0xf0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        }
    }

    std::string read_string()
    {
        std::string out;
        ++pos_; // opening quote

        while (pos_ < text_.size()) {
            char c = text_[pos_++];
            if (c == '"') {
                return out;
            }
            if (c == '\n') {
                fail("newline in string");
            }
            if (c != '\\') {
                out += c;
                continue;
            }

            if (pos_ >= text_.size()) {
                break;
            }
            char e = text_[pos_++];
            switch (e) {
            case 't':
                out += '\t';
                break;
            case 'n':
                out += '\n';
                break;
            case 'r':
                out += '\r';
                break;
            case '"':
            case '\'':
            case '\\':
                out += e;
                break;
            case 'u': {
                if (pos_ >= text_.size() || text_[pos_] != '{') {
                    fail("malformed \\u escape");
                }
                ++pos_;
                uint32_t cp = 0;
                size_t digits = 0;
                while (pos_ < text_.size() && text_[pos_] != '}') {
                    int v = hex_value(text_[pos_]);
                    if (v < 0 && text_[pos_] != '_') {
                        fail("malformed \\u escape");
                    }
                    if (v >= 0) {
                        cp = cp * 16 + static_cast<uint32_t>(v);
                        ++digits;
                    }
                    if (cp > 0x10ffff) {
                        fail("code point out of range");
                    }
                    ++pos_;
                }
                if (pos_ >= text_.size() || digits == 0) {
                    fail("malformed \\u escape");
                }
                ++pos_;
                append_utf8(out, cp);
                break;
            }
            default: {
                int hi = hex_value(e);
                int lo = pos_ < text_.size() ? hex_value(text_[pos_]) : -1;
                if (hi < 0 || lo < 0) {
                    fail("unknown escape");
                }
                ++pos_;
                out += static_cast<char>(hi * 16 + lo);
            }
            }
        }

        fail("unterminated string");
        return out;
    }

    std::string_view text_;
    size_t pos_ = 0;
};

} // namespace

ImportSet scan_text_imports(std::string_view module_text)
{
    ImportSet imports;

    Lexer lexer(module_text);
    size_t depth = 0;
    size_t lists = 0;
    size_t tokens = 0;
    bool after_open = false;

    enum class State { Idle, SawImport, SawModule } state = State::Idle;
    std::string module_name;

    while (auto token = lexer.next()) {
        ++tokens;
        switch (token->kind) {
        case TokenKind::Open:
            ++depth;
            ++lists;
            after_open = true;
            state = State::Idle;
            continue;
        case TokenKind::Close:
            if (depth == 0) {
                raise(Errc::UnparsableText, "unbalanced ')'");
            }
            --depth;
            state = State::Idle;
            break;
        case TokenKind::Atom:
            state = (after_open && token->text == "import") ? State::SawImport : State::Idle;
            break;
        case TokenKind::String:
            if (state == State::SawImport) {
                module_name = std::move(token->text);
                state = State::SawModule;
            } else if (state == State::SawModule) {
                if (module_name.empty()) {
                    raise(Errc::UnparsableText, "import with an empty module name");
                }
                imports.insert(Import {std::move(module_name), std::move(token->text)});
                module_name.clear();
                state = State::Idle;
            }
            break;
        }
        after_open = false;
    }

    if (depth != 0) {
        raise(Errc::UnparsableText, "unbalanced '('");
    }
    if (lists == 0) {
        raise(Errc::UnparsableText, tokens ? "no s-expression found" : "empty module text");
    }

    return imports;
}

} // namespace cwasi
