#include "iwsi/tokenizer.hpp"

#include <cctype>

#include "iwsi/errors.hpp"

namespace iwsi {

TokenizerMode tokenizer_mode_from_string(const std::string& s) {
    if (s == "word") return TokenizerMode::word;
    if (s == "byte" || s == "char") return TokenizerMode::byte;
    throw Error(ExitCode::precondition, "unknown tokenizer mode: " + s);
}

std::string to_string(TokenizerMode mode) {
    return mode == TokenizerMode::word ? "word" : "byte";
}

const std::string& bos_token() {
    static const std::string t = "\x02";
    return t;
}

const std::string& eos_token() {
    static const std::string t = "\x03";
    return t;
}

std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode) {
    std::vector<std::string> tokens;
    if (mode == TokenizerMode::byte) {
        tokens.reserve(text.size());
        for (char c : text) tokens.emplace_back(1, c);
        return tokens;
    }
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

std::string detokenize(const std::vector<std::string>& tokens, TokenizerMode mode) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (mode == TokenizerMode::word && i > 0) out += ' ';
        out += tokens[i];
    }
    return out;
}

} // namespace iwsi
