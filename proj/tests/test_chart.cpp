#include <catch2/catch.hpp>

#include <filesystem>
#include <set>

#include "ticap/chart.hpp"

using namespace ticap;
namespace fs = std::filesystem;

namespace {

// fixed 20-day walk; the golden hash below was frozen from a visually
// inspected render of exactly this sequence
std::vector<MarketDay> fixture_days() {
    std::vector<MarketDay> days;
    Rng rng(5);
    double close = 1.20;
    for (int i = 0; i < 20; ++i) {
        MarketDay d;
        d.date = Date{2019, 3, 1}.plus_days(i);
        d.open = close + rng.uniform(-0.004, 0.004);
        d.price = d.open + rng.uniform(-0.012, 0.012);
        d.high = std::max(d.open, d.price) + rng.uniform(0.0, 0.005);
        d.low = std::min(d.open, d.price) - rng.uniform(0.0, 0.005);
        d.exchange = d.price - d.open;
        close = d.price;
        days.push_back(d);
    }
    return days;
}

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

TEST_CASE("renderer validates the window length", "[chart]") {
    ChartSpec cs;
    cs.window = 20;
    CHECK_THROWS_AS(render_candles(std::vector<MarketDay>(3), cs), ValueError);
}

TEST_CASE("all-flat single day renders a mid-height tick line", "[chart]") {
    ChartSpec cs;
    cs.window = 1;
    MarketDay d{Date{2020, 1, 1}, 1.0, 1.0, 1.0, 1.0, 0.0};
    auto img = render_candles({d}, cs);
    std::size_t lit = 0, lit_row = 0;
    for (std::size_t y = 0; y < cs.height; ++y)
        for (std::size_t x = 0; x < cs.width; ++x)
            if (img[y * cs.width + x] != cs.background) {
                ++lit;
                lit_row = y;
            }
    CHECK(lit == cs.width);  // exactly one full row
    // renderer snaps pixels with round-half-up
    CHECK(lit_row == static_cast<std::size_t>(std::floor((cs.height - 1) / 2.0 + 0.5)));
}

TEST_CASE("a doji inside a varied window draws a one-pixel-high body", "[chart]") {
    auto days = fixture_days();
    days[7].open = days[7].price;  // doji: zero body height
    days[7].high = days[7].open + 0.001;
    days[7].low = days[7].open - 0.001;
    ChartSpec cs;
    auto img = render_candles(days, cs);
    const long x0 = static_cast<long>(std::floor(7.0 * cs.width / 20 + 0.5));
    const long x1 = static_cast<long>(std::floor(8.0 * cs.width / 20 + 0.5)) - 1;
    std::set<std::size_t> body_rows;
    for (std::size_t y = 0; y < cs.height; ++y)
        for (long x = x0; x <= x1; ++x) {
            const double v = img[y * cs.width + static_cast<std::size_t>(x)];
            if (v == cs.bull_level || v == cs.bear_level) body_rows.insert(y);
        }
    CHECK(body_rows.size() == 1);
}

TEST_CASE("monotone rising closes paint only bullish bodies", "[chart]") {
    std::vector<MarketDay> days;
    for (int i = 0; i < 20; ++i) {
        MarketDay d;
        d.date = Date{2019, 3, 1}.plus_days(i);
        d.open = 1.0 + 0.01 * i;
        d.price = d.open + 0.008;  // close above open every day
        d.high = d.price + 0.002;
        d.low = d.open - 0.002;
        d.exchange = 0.008;
        days.push_back(d);
    }
    ChartSpec cs;
    auto img = render_candles(days, cs);
    bool any_bull = false;
    for (double v : img) {
        CHECK(v != cs.bear_level);
        if (v == cs.bull_level) any_bull = true;
    }
    CHECK(any_bull);
}

TEST_CASE("max high row sits above min low row", "[chart]") {
    ChartSpec cs;
    auto img = render_candles(fixture_days(), cs);
    std::size_t top_lit = cs.height, bottom_lit = 0;
    for (std::size_t y = 0; y < cs.height; ++y)
        for (std::size_t x = 0; x < cs.width; ++x)
            if (img[y * cs.width + x] != cs.background) {
                top_lit = std::min(top_lit, y);
                bottom_lit = std::max(bottom_lit, y);
            }
    CHECK(top_lit < bottom_lit);
}

TEST_CASE("bodies stay inside their day's column band", "[chart]") {
    Rng rng(77);
    ChartSpec cs;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<MarketDay> days;
        double close = 1.0 + rng.uniform(0, 0.5);
        for (int i = 0; i < 20; ++i) {
            MarketDay d;
            d.date = Date{2020, 1, 1}.plus_days(i);
            d.open = close + rng.uniform(-0.01, 0.01);
            d.price = d.open + rng.uniform(-0.02, 0.02);
            d.high = std::max(d.open, d.price) + rng.uniform(0, 0.01);
            d.low = std::min(d.open, d.price) - rng.uniform(0, 0.01);
            d.exchange = d.price - d.open;
            close = d.price;
            days.push_back(d);
        }
        auto img = render_candles(days, cs);
        // body pixels of day d may appear only in columns [x0(d), x1(d)]
        for (std::size_t x = 0; x < cs.width; ++x) {
            for (std::size_t y = 0; y < cs.height; ++y) {
                const double v = img[y * cs.width + x];
                if (v != cs.bull_level && v != cs.bear_level) continue;
                const std::size_t day = std::min<std::size_t>(19, x * 20 / cs.width);
                const long x0 = static_cast<long>(std::floor(static_cast<double>(day) * cs.width / 20 + 0.5));
                const long x1 = static_cast<long>(std::floor((day + 1.0) * cs.width / 20 + 0.5)) - 1;
                const bool inside = static_cast<long>(x) >= x0 && static_cast<long>(x) <= x1;
                if (!inside) FAIL("body pixel outside its band at x=" << x);
            }
        }
    }
    SUCCEED();
}

TEST_CASE("render is deterministic and matches the frozen golden hash", "[chart]") {
    ChartSpec cs;
    auto a = quantize_image(render_candles(fixture_days(), cs));
    auto b = quantize_image(render_candles(fixture_days(), cs));
    CHECK(a == b);
    CHECK(fnv1a(a) == 8970782055054606259ULL);
}

TEST_CASE("bollinger overlay draws band pixels deterministically", "[chart]") {
    ChartSpec cs;
    cs.bollinger = true;
    cs.boll_period = 5;
    auto a = render_candles(fixture_days(), cs);
    auto b = render_candles(fixture_days(), cs);
    CHECK(quantize_image(a) == quantize_image(b));
    std::size_t band = 0;
    for (double v : a) band += v == cs.band_level;
    CHECK(band > 50);  // three curves across most of the chart
}

TEST_CASE("bollinger period above the window is rejected", "[chart]") {
    ChartSpec cs;
    cs.window = 10;
    cs.bollinger = true;
    cs.boll_period = 20;
    CHECK_THROWS_AS(render_candles(std::vector<MarketDay>(10), cs), ValueError);
}

TEST_CASE("pixel normalization is value/255", "[chart]") {
    CHECK(normalize_pixel(0) == 0.0);
    CHECK(normalize_pixel(255) == 1.0);
    CHECK(normalize_pixel(128) == Approx(128.0 / 255.0));
}

TEST_CASE("pgm round-trips bytes exactly", "[chart]") {
    ChartSpec cs;
    auto bytes = quantize_image(render_candles(fixture_days(), cs));
    const std::string path = (fs::temp_directory_path() / "ticap_chart_rt.pgm").string();
    write_pgm(path, cs.width, cs.height, bytes);
    PgmImage img = read_pgm(path);
    CHECK(img.width == cs.width);
    CHECK(img.height == cs.height);
    CHECK(img.bytes == bytes);
}
