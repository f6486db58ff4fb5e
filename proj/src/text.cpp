#include "clarifier/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace clarifier::text {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c); };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && cur.back() == '\'') cur.pop_back();
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
    };
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (ch == '\'' && !cur.empty()) {
            cur.push_back(ch);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view s) {
    auto w = words(s);
    std::erase_if(w, [](const std::string& t) { return t == "a" || t == "an" || t == "the"; });
    return w;
}

double token_f1(std::string_view answer, std::string_view gold) {
    const auto a = normalized_tokens(answer);
    const auto g = normalized_tokens(gold);
    if (a.empty() && g.empty()) return 1.0;
    if (a.empty() || g.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : g) ++counts[t];
    int common = 0;
    for (const auto& t : a) {
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double precision = static_cast<double>(common) / static_cast<double>(a.size());
    const double recall = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string slug(std::string_view s) {
    std::string out;
    for (const auto& w : words(s)) {
        std::string clean;
        std::copy_if(w.begin(), w.end(), std::back_inserter(clean), [](char c) { return c != '\''; });
        if (clean.empty()) continue;
        if (!out.empty()) out.push_back('-');
        out += clean;
    }
    return out;
}

bool contains_word(std::string_view haystack, std::string_view word) {
    const auto needle = lower(word);
    const auto ws = words(haystack);
    return std::find(ws.begin(), ws.end(), needle) != ws.end();
}

}  // namespace clarifier::text
