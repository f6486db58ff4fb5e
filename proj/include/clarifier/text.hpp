#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace clarifier::text {

std::string lower(std::string_view s);
std::string trim(std::string_view s);

/// Lowercase alphanumeric words, punctuation dropped. Apostrophes are kept
/// inside words ("what's").
std::vector<std::string> words(std::string_view s);

/// Answer-normalised tokens: words() minus the articles a/an/the.
std::vector<std::string> normalized_tokens(std::string_view s);

/// Harmonic mean of token precision and recall over multisets of
/// normalized_tokens. Two empty strings score 1.
double token_f1(std::string_view answer, std::string_view gold);

/// Lowercase words joined by '-', used to key scripted transcripts.
std::string slug(std::string_view s);

bool contains_word(std::string_view haystack, std::string_view word);

}  // namespace clarifier::text
