#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "ticap/common.hpp"
#include "ticap/text.hpp"

namespace ticap {

/// One trading day. `exchange` is the signed daily delta whose sign defines
/// the direction label.
struct MarketDay {
    Date date;
    double price = 0.0;  // closing quote
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double exchange = 0.0;

    void validate(const std::string& context = "") const {
        const double vals[] = {price, open, high, low, exchange};
        for (double v : vals)
            if (!std::isfinite(v)) throw ValueError("market day has non-finite field" + context);
        if (low > std::min(open, price) || high < std::max(open, price))
            throw ValueError("market day violates low <= min(open,close) <= max(open,close) <= high" + context);
    }

    bool bullish() const { return price >= open; }
};

/// 1 if the daily exchange delta is positive, otherwise 0. Zero counts as
/// "no increase".
inline int map_exchange_label(double exchange) {
    if (!std::isfinite(exchange)) throw ValueError("map_exchange_label: non-finite exchange value (NonFinite)");
    return exchange > 0.0 ? 1 : 0;
}

/// CSV with header date,price,open,high,low,exchange. Rows are returned
/// sorted by date.
inline std::vector<MarketDay> load_market_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open market file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty market file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "date,price,open,high,low,exchange")
        throw ParseError(path + ":1: expected header 'date,price,open,high,low,exchange', got '" + line + "'");
    std::vector<MarketDay> days;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split(line, ',');
        const std::string ctx = " (" + path + ":" + std::to_string(lineno) + ")";
        if (f.size() != 6) throw ParseError(path + ":" + std::to_string(lineno) + ": expected 6 fields");
        MarketDay d;
        d.date = Date::parse(f[0], ctx);
        try {
            d.price = std::stod(f[1]);
            d.open = std::stod(f[2]);
            d.high = std::stod(f[3]);
            d.low = std::stod(f[4]);
            d.exchange = std::stod(f[5]);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric field");
        }
        try {
            d.validate(ctx);
        } catch (const ValueError& e) {
            throw ParseError(std::string(e.what()));
        }
        days.push_back(d);
    }
    std::stable_sort(days.begin(), days.end(),
                     [](const MarketDay& a, const MarketDay& b) { return a.date < b.date; });
    return days;
}

// ---------------------------------------------------------------- scaling

/// Per-field min-max scaler for the four quote fields, fitted on the
/// training split only and reused verbatim elsewhere. A field with zero
/// range scales to 0.5.
struct QuoteScaler {
    std::array<double, 4> lo{0, 0, 0, 0};
    std::array<double, 4> hi{1, 1, 1, 1};

    template <class Iter>
    static QuoteScaler fit(Iter first, Iter last) {
        QuoteScaler s;
        bool any = false;
        for (Iter it = first; it != last; ++it) {
            const MarketDay& d = *it;
            const double v[4] = {d.price, d.open, d.high, d.low};
            for (int k = 0; k < 4; ++k) {
                if (!any || v[k] < s.lo[k]) s.lo[k] = v[k];
                if (!any || v[k] > s.hi[k]) s.hi[k] = v[k];
            }
            if (!any) {
                for (int k = 0; k < 4; ++k) {
                    s.lo[k] = v[k];
                    s.hi[k] = v[k];
                }
                any = true;
            }
        }
        return s;
    }

    std::array<double, 4> scale(const MarketDay& d) const {
        const double v[4] = {d.price, d.open, d.high, d.low};
        std::array<double, 4> out{};
        for (int k = 0; k < 4; ++k) {
            const double range = hi[k] - lo[k];
            out[k] = range > 0.0 ? (v[k] - lo[k]) / range : 0.5;
        }
        return out;
    }
};

/// One opinion or news item after cleaning.
struct DocumentRecord {
    enum class Source { tweet, news };
    Date date;
    std::vector<std::string> tokens;  // non-empty; empty records are dropped upstream
    Source source = Source::tweet;
    SentimentTriple sentiment;
};

/// The 7-vector (objective, subjective, sentiment, price, open, high, low)
/// for a document paired with its trading day. Quote fields arrive through
/// the fitted scaler.
inline std::array<double, 7> build_numeric_vector(const DocumentRecord& doc, const MarketDay& day,
                                                  const QuoteScaler& scaler) {
    if (doc.date != day.date)
        throw ValueError("build_numeric_vector: document date " + doc.date.str() + " != market date " +
                         day.date.str() + " (DateMismatch)");
    const auto q = scaler.scale(day);
    return {doc.sentiment.objective, doc.sentiment.subjective, doc.sentiment.sentiment,
            q[0], q[1], q[2], q[3]};
}

}  // namespace ticap
