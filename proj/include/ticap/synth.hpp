#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ticap/chart.hpp"
#include "ticap/market.hpp"
#include "ticap/text.hpp"

namespace ticap {

/// Planted-rule synthetic dataset. Each labeled day carries three binary
/// signals: a polar keyword in its document, the direction of its candle
/// body, and the sign of its exchange delta. The label is the majority vote
/// of the three. The exchange sign always equals the label; with
/// probability (1 - agree_prob) exactly one of the other two signals is
/// flipped, so the majority still recovers the label while no single
/// observable channel is perfectly clean.
struct SynthConfig {
    std::size_t count = 1000;
    std::uint64_t seed = 7;
    std::size_t window = 20;      // chart window, also the market warmup length
    std::size_t image_size = 64;  // desk-profile chart edge
    std::size_t embed_dim = 16;
    double agree_prob = 0.95;
    Date start{2018, 1, 1};
};

struct SynthStats {
    std::size_t days = 0;
    std::size_t positives = 0;
};

namespace detail {

inline const std::vector<std::string>& synth_fillers() {
    static const std::vector<std::string> words = {
        "market",  "trading", "session", "volume",   "euro",     "dollar",  "currency", "pair",
        "chart",   "range",   "level",   "price",    "action",   "today",   "traders",  "outlook",
        "forecast","analysis","report",  "data",     "update",   "note",    "macro",    "daily",
        "weekly",  "trend",   "momentum","support",  "resistance", "signal", "close",   "open"};
    return words;
}

inline const std::vector<std::string>& synth_positive() {
    static const std::vector<std::string> words = {"surge", "rally", "bullish", "gain", "soar"};
    return words;
}

inline const std::vector<std::string>& synth_negative() {
    static const std::vector<std::string> words = {"plunge", "slump", "bearish", "loss", "crash"};
    return words;
}

inline const std::vector<std::string>& synth_stopwords() {
    static const std::vector<std::string> words = {"the", "a",  "an", "to", "of", "and",
                                                   "in",  "on", "for", "with", "is", "at"};
    return words;
}

}  // namespace detail

/// Writes corpus.tsv, market.csv, charts/<date>.pgm, plus the support files
/// the preprocessing step needs (stopwords.txt, wordlist.txt,
/// embeddings.txt) and a rule.json sidecar describing the planted rule.
/// Identical (config) input produces byte-identical files.
inline SynthStats generate_synthetic(const std::string& outdir, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    if (cfg.count < 1) throw ValueError("synth: count must be >= 1");
    fs::create_directories(outdir);
    fs::create_directories(fs::path(outdir) / "charts");

    Rng market_rng = Rng(cfg.seed).fork(0x3a11);
    Rng text_rng = Rng(cfg.seed).fork(0x7e47);
    Rng embed_rng = Rng(cfg.seed).fork(0xe3bd);
    Rng rule_rng = Rng(cfg.seed).fork(0x121e);

    const auto& fillers = detail::synth_fillers();
    const auto& pos_kw = detail::synth_positive();
    const auto& neg_kw = detail::synth_negative();
    const auto& stop = detail::synth_stopwords();

    // market path: warmup days first, then one labeled day per sample
    std::vector<MarketDay> days;
    std::vector<int> labels(cfg.count, 0);
    std::vector<int> keyword_bits(cfg.count, 0);
    double prev_close = 1.10;
    const std::size_t total_days = cfg.window + cfg.count;
    for (std::size_t d = 0; d < total_days; ++d) {
        MarketDay day;
        day.date = cfg.start.plus_days(static_cast<long>(d));
        const bool warmup = d < cfg.window;
        int label = 0, s_body = 0;
        if (warmup) {
            s_body = market_rng.uniform() < 0.5 ? 1 : 0;
            label = market_rng.uniform() < 0.5 ? 1 : 0;
        } else {
            const std::size_t i = d - cfg.window;
            label = rule_rng.uniform() < 0.5 ? 1 : 0;
            int s_kw = label;
            s_body = label;
            const double u = rule_rng.uniform();
            if (u >= cfg.agree_prob) {
                // flip exactly one observable signal; exchange keeps the label
                if (u < cfg.agree_prob + (1.0 - cfg.agree_prob) / 2.0)
                    s_kw = 1 - s_kw;
                else
                    s_body = 1 - s_body;
            }
            labels[i] = label;
            keyword_bits[i] = s_kw;
        }
        day.open = prev_close + market_rng.normal(0.0, 0.0008);
        const double body = 0.004 + std::abs(market_rng.normal(0.0, 0.002));
        day.price = day.open + (s_body ? body : -body);
        day.high = std::max(day.open, day.price) + std::abs(market_rng.normal(0.0, 0.001));
        day.low = std::min(day.open, day.price) - std::abs(market_rng.normal(0.0, 0.001));
        const double delta = 0.002 + std::abs(market_rng.normal(0.0, 0.001));
        day.exchange = label ? delta : -delta;
        day.validate();
        prev_close = day.price;
        days.push_back(day);
    }

    // market.csv
    {
        std::ofstream out(fs::path(outdir) / "market.csv", std::ios::binary);
        if (!out) throw IoError("synth: cannot write market.csv");
        out << "date,price,open,high,low,exchange\n";
        char buf[160];
        for (const auto& d : days) {
            std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", d.date.str().c_str(), d.price,
                          d.open, d.high, d.low, d.exchange);
            out << buf;
        }
    }

    // corpus.tsv, one document per labeled day
    std::size_t positives = 0;
    {
        std::ofstream out(fs::path(outdir) / "corpus.tsv", std::ios::binary);
        if (!out) throw IoError("synth: cannot write corpus.tsv");
        for (std::size_t i = 0; i < cfg.count; ++i) {
            const Date date = cfg.start.plus_days(static_cast<long>(cfg.window + i));
            positives += static_cast<std::size_t>(labels[i]);
            const auto& kw = keyword_bits[i] ? pos_kw : neg_kw;
            std::vector<std::string> words;
            const std::size_t n_fill = 6 + text_rng.below(5);
            for (std::size_t w = 0; w < n_fill; ++w) words.push_back(fillers[text_rng.below(fillers.size())]);
            const std::size_t n_kw = 1 + text_rng.below(2);
            for (std::size_t w = 0; w < n_kw; ++w) {
                const std::size_t at = text_rng.below(words.size() + 1);
                words.insert(words.begin() + static_cast<long>(at), kw[text_rng.below(kw.size())]);
            }
            if (text_rng.uniform() < 0.3)
                words.insert(words.begin(), stop[text_rng.below(stop.size())]);
            if (text_rng.uniform() < 0.25) words[text_rng.below(words.size())] += "!";
            if (text_rng.uniform() < 0.2) words.push_back("https://example.com/" + std::to_string(i));
            const char* source = text_rng.uniform() < 0.5 ? "tweet" : "news";
            out << date.str() << '\t' << source << '\t';
            for (std::size_t w = 0; w < words.size(); ++w) out << (w ? " " : "") << words[w];
            out << '\n';
        }
    }

    // charts for every labeled day
    {
        ChartSpec cs;
        cs.width = cfg.image_size;
        cs.height = cfg.image_size;
        cs.window = cfg.window;
        for (std::size_t i = 0; i < cfg.count; ++i) {
            const std::size_t end = cfg.window + i;  // inclusive index of the labeled day
            std::vector<MarketDay> win(days.begin() + static_cast<long>(end + 1 - cfg.window),
                                       days.begin() + static_cast<long>(end + 1));
            const auto img = render_candles(win, cs);
            write_pgm((fs::path(outdir) / "charts" / (days[end].date.str() + ".pgm")).string(), cs.width,
                      cs.height, quantize_image(img));
        }
    }

    // support files for preprocessing
    {
        std::ofstream out(fs::path(outdir) / "stopwords.txt", std::ios::binary);
        for (const auto& w : stop) out << w << '\n';
    }
    {
        std::ofstream out(fs::path(outdir) / "wordlist.txt", std::ios::binary);
        for (const auto& w : fillers) out << w << '\n';
        for (const auto& w : pos_kw) out << w << '\n';
        for (const auto& w : neg_kw) out << w << '\n';
        for (const auto& w : stop) out << w << '\n';
    }
    {
        std::ofstream out(fs::path(outdir) / "embeddings.txt", std::ios::binary);
        char buf[32];
        auto emit = [&](const std::string& word, double anchor) {
            out << word;
            for (std::size_t d = 0; d < cfg.embed_dim; ++d) {
                const double v = (d == 0 ? anchor : 0.0) + embed_rng.normal(0.0, 0.3);
                std::snprintf(buf, sizeof buf, " %.6f", v);
                out << buf;
            }
            out << '\n';
        };
        for (const auto& w : fillers) emit(w, 0.0);
        for (const auto& w : pos_kw) emit(w, 1.2);
        for (const auto& w : neg_kw) emit(w, -1.2);
    }

    // auditable description of the planted rule
    {
        nlohmann::json rule;
        rule["rule"] = "label = majority(polar_keyword_positive, candle_bullish, exchange_positive)";
        rule["exchange_sign_equals_label"] = true;
        rule["agree_prob"] = cfg.agree_prob;
        rule["flip_candidates"] = {"polar_keyword_positive", "candle_bullish"};
        rule["positive_keywords"] = detail::synth_positive();
        rule["negative_keywords"] = detail::synth_negative();
        rule["count"] = cfg.count;
        rule["seed"] = cfg.seed;
        rule["window"] = cfg.window;
        rule["image_size"] = cfg.image_size;
        rule["embed_dim"] = cfg.embed_dim;
        rule["start_date"] = cfg.start.str();
        std::ofstream out(fs::path(outdir) / "rule.json", std::ios::binary);
        out << rule.dump(2) << '\n';
    }

    return {cfg.count, positives};
}

}  // namespace ticap
