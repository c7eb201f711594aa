#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ticap/chart.hpp"
#include "ticap/embedding.hpp"
#include "ticap/market.hpp"
#include "ticap/sample.hpp"
#include "ticap/text.hpp"
#include "ticap/train.hpp"

namespace ticap {

struct PreprocessConfig {
    std::string corpus_path;
    std::string market_path;
    std::string stopwords_path;
    std::string embeddings_path;
    std::string wordlist_path;  // optional; embedding vocabulary + stopwords when empty
    std::string lexicon_path;   // optional; built-in polarity table when empty
    std::string outdir;
    std::uint64_t seed = 0;
    std::size_t n = 71;              // padded sequence length
    std::size_t chart_size = 64;     // chart edge in pixels (desk 64, paper 128)
    std::size_t chart_window = 20;   // days per chart
    double language_threshold = 0.4; // minimum in-wordlist token ratio for tweets
    bool bollinger = false;
};

struct PreprocessStats {
    std::size_t raw_docs = 0;
    std::size_t dropped_language = 0;
    std::size_t dropped_empty = 0;
    std::size_t dropped_no_market = 0;  // no market row or not enough chart history
    std::size_t kept_docs = 0;
    std::size_t samples = 0;
};

/// Corpus + market + embeddings in, manifest + charts + vocabulary out.
///
/// Tweets below the language-ratio threshold are dropped; all records then
/// go through cleaning and empty ones are removed. Each surviving document
/// becomes one sample, paired with its date's market day and that day's
/// chart window. Quote scaling is fitted on the seeded 80/20 training split
/// of the would-be samples; running the training step with the same seed
/// reproduces the identical split, keeping the test split out of the
/// scaling statistics end to end.
inline PreprocessStats run_preprocess(const PreprocessConfig& cfg) {
    namespace fs = std::filesystem;
    PreprocessStats stats;

    const WordSet stopwords = load_wordlist(cfg.stopwords_path);
    const Vocabulary vocab = load_embeddings(cfg.embeddings_path);
    const Lexicon lexicon = cfg.lexicon_path.empty() ? Lexicon::builtin() : Lexicon::load(cfg.lexicon_path);

    WordSet wordlist;
    if (!cfg.wordlist_path.empty()) {
        wordlist = load_wordlist(cfg.wordlist_path);
    } else {
        for (std::size_t i = 2; i < vocab.tokens.size(); ++i) wordlist.insert(vocab.tokens[i]);
        for (const auto& w : stopwords) wordlist.insert(w);
    }

    const std::vector<MarketDay> market = load_market_csv(cfg.market_path);
    std::map<long, std::size_t> day_index;  // date serial -> index into market
    for (std::size_t i = 0; i < market.size(); ++i) day_index[market[i].date.serial()] = i;

    const std::vector<RawDoc> raw = load_corpus(cfg.corpus_path);
    stats.raw_docs = raw.size();

    // language filter (tweets only), then cleaning and empty-record removal
    std::vector<DocumentRecord> docs;
    for (const auto& r : raw) {
        if (r.source == DocumentRecord::Source::tweet) {
            const double ratio = detect_language_ratio(detail::whitespace_tokens(r.text), wordlist);
            if (ratio < cfg.language_threshold) {
                ++stats.dropped_language;
                continue;
            }
        }
        auto tokens = clean_text(r.text, stopwords);
        if (!tokens) {
            ++stats.dropped_empty;
            continue;
        }
        DocumentRecord d;
        d.date = r.date;
        d.source = r.source;
        d.tokens = std::move(*tokens);
        d.sentiment = lexicon_sentiment(d.tokens, lexicon);
        docs.push_back(std::move(d));
    }

    // pair each document with its market day; drop documents whose date has
    // no market row or not enough history for a full chart window
    std::vector<std::pair<DocumentRecord, std::size_t>> paired;
    for (auto& d : docs) {
        auto it = day_index.find(d.date.serial());
        if (it == day_index.end() || it->second + 1 < cfg.chart_window) {
            ++stats.dropped_no_market;
            continue;
        }
        paired.emplace_back(std::move(d), it->second);
    }
    stats.kept_docs = paired.size();
    if (paired.empty()) throw ValueError("preprocess: no samples survived the pipeline (no samples)");

    // quote scaler fitted on the training side of the seeded split
    auto [train_idx, test_idx] = split_80_20(paired.size(), cfg.seed);
    std::vector<MarketDay> train_days;
    train_days.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_days.push_back(market[paired[i].second]);
    const QuoteScaler scaler = QuoteScaler::fit(train_days.begin(), train_days.end());

    fs::create_directories(cfg.outdir);
    fs::create_directories(fs::path(cfg.outdir) / "charts");

    ChartSpec cs;
    cs.width = cfg.chart_size;
    cs.height = cfg.chart_size;
    cs.window = cfg.chart_window;
    cs.bollinger = cfg.bollinger;
    if (cs.bollinger && cs.boll_period > cs.window) cs.boll_period = cs.window;

    // one chart per distinct market day, rendered once
    std::map<std::size_t, std::string> chart_paths;
    for (const auto& [doc, di] : paired) {
        if (chart_paths.count(di)) continue;
        std::vector<MarketDay> win(market.begin() + static_cast<long>(di + 1 - cs.window),
                                   market.begin() + static_cast<long>(di + 1));
        const auto img = render_candles(win, cs);
        const std::string rel = "charts/" + market[di].date.str() + ".pgm";
        write_pgm((fs::path(cfg.outdir) / rel).string(), cs.width, cs.height, quantize_image(img));
        chart_paths[di] = rel;
    }

    std::vector<Sample> samples;
    samples.reserve(paired.size());
    for (const auto& [doc, di] : paired) {
        const MarketDay& day = market[di];
        Sample s;
        s.date = doc.date;
        s.label = map_exchange_label(day.exchange);
        s.numeric = build_numeric_vector(doc, day, scaler);
        s.image_path = chart_paths[di];
        s.token_ids = pad_tokens(vocab.encode(doc.tokens), cfg.n);
        samples.push_back(std::move(s));
    }

    write_manifest((fs::path(cfg.outdir) / "manifest.tsv").string(), samples);
    save_vocabulary((fs::path(cfg.outdir) / "vocabulary.txt").string(), vocab);
    stats.samples = samples.size();
    return stats;
}

}  // namespace ticap
