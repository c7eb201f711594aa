#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ticap/common.hpp"

namespace ticap {

using WordSet = std::unordered_set<std::string>;

inline WordSet load_wordlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open wordlist file: " + path);
    WordSet out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.insert(lower(line));
    }
    return out;
}

namespace detail {

inline bool looks_like_url(const std::string& tok) {
    return tok.find("://") != std::string::npos || tok.rfind("www.", 0) == 0 ||
           tok.rfind("http", 0) == 0;
}

// ASCII punctuation is stripped; non-ASCII bytes survive so foreign words
// still count as tokens for the language ratio.
inline std::string strip_punct(const std::string& tok) {
    std::string out;
    out.reserve(tok.size());
    for (unsigned char c : tok) {
        if (c >= 0x80 || std::isalnum(c)) out.push_back(static_cast<char>(c));
    }
    return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& raw) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : raw) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace detail

/// Fraction of tokens found in the reference wordlist. The caller drops
/// records whose ratio falls below its threshold. URL-ish tokens are ignored
/// on both sides of the ratio.
inline double detect_language_ratio(const std::vector<std::string>& tokens, const WordSet& wordlist) {
    if (wordlist.empty()) throw ValueError("detect_language_ratio: empty wordlist (EmptyWordlist)");
    std::size_t considered = 0, hits = 0;
    for (const auto& t : tokens) {
        if (detail::looks_like_url(t)) continue;
        std::string w = lower(detail::strip_punct(t));
        if (w.empty()) continue;
        ++considered;
        if (wordlist.count(w)) ++hits;
    }
    if (considered == 0) return 0.0;
    return static_cast<double>(hits) / static_cast<double>(considered);
}

/// Lowercases, removes URLs, punctuation and stop-words, and tokenizes.
/// Returns nothing when no token survives; such records are dropped.
inline std::optional<std::vector<std::string>> clean_text(const std::string& raw, const WordSet& stopwords) {
    std::vector<std::string> out;
    for (auto& tok : detail::whitespace_tokens(raw)) {
        if (detail::looks_like_url(tok)) continue;
        std::string w = lower(detail::strip_punct(tok));
        if (w.empty()) continue;
        if (stopwords.count(w)) continue;
        out.push_back(std::move(w));
    }
    if (out.empty()) return std::nullopt;
    return out;
}

/// Pads with id 0 on the right or truncates to the first n ids.
inline std::vector<int> pad_tokens(const std::vector<int>& ids, std::size_t n) {
    if (n < 1) throw ValueError("pad_tokens: length must be >= 1");
    std::vector<int> out(n, 0);
    const std::size_t keep = std::min(ids.size(), n);
    std::copy(ids.begin(), ids.begin() + keep, out.begin());
    return out;
}

// ---------------------------------------------------------------- lexicon scoring

/// Word-level polarity table in [-1, 1] per word. Used when records carry no
/// precomputed scores.
struct Lexicon {
    std::unordered_map<std::string, double> polarity;

    static Lexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open lexicon file: " + path);
        Lexicon lex;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto fields = split(line, '\t');
            if (fields.size() == 1) fields = split(line, ' ');
            if (fields.size() != 2)
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'word<TAB>polarity'");
            try {
                lex.polarity[lower(fields[0])] = std::stod(fields[1]);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad polarity value '" + fields[1] + "'");
            }
        }
        return lex;
    }

    // Small built-in finance polarity table; enough to score pipelines that
    // ship no external lexicon.
    static Lexicon builtin() {
        Lexicon lex;
        const std::pair<const char*, double> entries[] = {
            {"gain", 1.0},    {"gains", 1.0},   {"rally", 1.0},    {"rallies", 1.0},  {"surge", 1.0},
            {"surges", 1.0},  {"bull", 1.0},    {"bullish", 1.0},  {"rise", 0.8},     {"rises", 0.8},
            {"up", 0.6},      {"strong", 0.6},  {"soar", 1.0},     {"soars", 1.0},    {"optimism", 0.8},
            {"growth", 0.6},  {"profit", 0.8},  {"boom", 0.8},     {"recover", 0.6},  {"recovery", 0.6},
            {"loss", -1.0},   {"losses", -1.0}, {"slump", -1.0},   {"slumps", -1.0},  {"plunge", -1.0},
            {"plunges", -1.0},{"bear", -1.0},   {"bearish", -1.0}, {"fall", -0.8},    {"falls", -0.8},
            {"down", -0.6},   {"weak", -0.6},   {"crash", -1.0},   {"crashes", -1.0}, {"fear", -0.8},
            {"decline", -0.6},{"drop", -0.8},   {"drops", -0.8},   {"selloff", -0.8}, {"panic", -1.0},
        };
        for (auto& [w, p] : entries) lex.polarity[w] = p;
        return lex;
    }
};

struct SentimentTriple {
    double objective = 1.0;
    double subjective = 0.0;
    double sentiment = 0.5;
};

/// Deterministic (objective, subjective, sentiment) scores in [0,1]^3 from
/// word-level polarities: subjectivity is the hit fraction, objectivity its
/// complement, and sentiment the mean polarity mapped affinely by (p+1)/2.
/// No hits yields the neutral triple (1, 0, 0.5).
inline SentimentTriple lexicon_sentiment(const std::vector<std::string>& tokens, const Lexicon& lex) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (const auto& t : tokens) {
        auto it = lex.polarity.find(t);
        if (it != lex.polarity.end()) {
            ++hits;
            sum += it->second;
        }
    }
    if (hits == 0 || tokens.empty()) return {};
    SentimentTriple s;
    s.subjective = static_cast<double>(hits) / static_cast<double>(tokens.size());
    s.objective = 1.0 - s.subjective;
    double mean = sum / static_cast<double>(hits);
    s.sentiment = std::min(1.0, std::max(0.0, (mean + 1.0) / 2.0));
    return s;
}

}  // namespace ticap
