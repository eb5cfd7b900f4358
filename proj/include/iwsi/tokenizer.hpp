#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace iwsi {

enum class TokenizerMode { word, byte };

TokenizerMode tokenizer_mode_from_string(const std::string& s);
std::string to_string(TokenizerMode mode);

// Reserved sentinel tokens. bos() only ever appears in contexts, eos() marks
// end of a training text and stops generation.
const std::string& bos_token();
const std::string& eos_token();

// word: split on ASCII whitespace; byte: one token per byte.
std::vector<std::string> tokenize(std::string_view text, TokenizerMode mode);

// Inverse up to whitespace normalization (word mode joins with single spaces).
std::string detokenize(const std::vector<std::string>& tokens, TokenizerMode mode);

} // namespace iwsi
