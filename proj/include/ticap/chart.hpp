#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ticap/market.hpp"

namespace ticap {

/// Render geometry and grayscale levels for a candlestick window. Single
/// channel; bullish and bearish bodies get distinct levels so direction is
/// visible without color. The Bollinger overlay (simple moving average and
/// +-k standard deviation curves) is off by default.
struct ChartSpec {
    std::size_t width = 128;
    std::size_t height = 128;
    std::size_t window = 20;  // days per chart
    double bull_level = 0.85;
    double bear_level = 0.25;
    double wick_level = 0.55;
    double band_level = 0.40;
    double background = 0.0;
    bool bollinger = false;
    std::size_t boll_period = 20;
    double boll_k = 2.0;

    void validate() const {
        if (width < 32 || height < 32) throw ValueError("chart: width and height must be >= 32");
        if (window < 1) throw ValueError("chart: window must be >= 1");
        if (bollinger && boll_period > window)
            throw ValueError("chart: bollinger period must not exceed the window");
        if (bollinger && boll_period < 1) throw ValueError("chart: bollinger period must be >= 1");
    }
};

namespace detail {

// round-half-up keeps pixel snapping identical across platforms
inline long px_round(double x) { return static_cast<long>(std::floor(x + 0.5)); }

inline void draw_segment(std::vector<double>& img, std::size_t W, std::size_t H, long x0, long y0, long x1,
                         long y1, double level) {
    // integer line walk; endpoints clamped to the canvas
    long dx = std::labs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    long dy = -std::labs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    while (true) {
        if (x0 >= 0 && y0 >= 0 && x0 < static_cast<long>(W) && y0 < static_cast<long>(H))
            img[static_cast<std::size_t>(y0) * W + static_cast<std::size_t>(x0)] = level;
        if (x0 == x1 && y0 == y1) break;
        long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

}  // namespace detail

/// Rasterizes one window of trading days into an [H x W] grayscale matrix in
/// [0,1], row 0 at the top. The vertical axis spans [min(low), max(high)]
/// of the window plus a 5% margin on each side; each day owns one column
/// band holding its wick line (low to high) and body rectangle (open to
/// close). A window whose prices are all equal renders as a mid-height line.
/// Identical (days, spec) input produces byte-identical output.
inline std::vector<double> render_candles(const std::vector<MarketDay>& days, const ChartSpec& spec) {
    spec.validate();
    if (days.size() != spec.window)
        throw ValueError("render_candles: got " + std::to_string(days.size()) + " days for a window of " +
                         std::to_string(spec.window) + " (WindowMismatch)");
    for (std::size_t i = 0; i < days.size(); ++i) days[i].validate(" (window day " + std::to_string(i) + ")");

    const std::size_t W = spec.width, H = spec.height;
    std::vector<double> img(W * H, spec.background);

    double lo = days[0].low, hi = days[0].high;
    for (const auto& d : days) {
        lo = std::min(lo, d.low);
        hi = std::max(hi, d.high);
    }

    const long mid_row = detail::px_round((H - 1) / 2.0);
    if (hi <= lo) {
        // flat window: every price maps to one mid-height line
        for (std::size_t x = 0; x < W; ++x) img[static_cast<std::size_t>(mid_row) * W + x] = spec.wick_level;
        return img;
    }

    const double margin = 0.05 * (hi - lo);
    const double plot_lo = lo - margin, plot_hi = hi + margin;
    auto row_of = [&](double price) {
        long r = detail::px_round((plot_hi - price) / (plot_hi - plot_lo) * (H - 1));
        return std::min<long>(std::max<long>(r, 0), static_cast<long>(H - 1));
    };

    std::vector<long> centers(days.size(), 0);
    for (std::size_t d = 0; d < days.size(); ++d) {
        const long x0 = detail::px_round(static_cast<double>(d) * W / days.size());
        const long x1 = std::max(x0, detail::px_round(static_cast<double>(d + 1) * W / days.size()) - 1);
        const long cx = (x0 + x1) / 2;
        centers[d] = cx;

        const long y_high = row_of(days[d].high);
        const long y_low = row_of(days[d].low);
        for (long y = y_high; y <= y_low; ++y)
            img[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(cx)] = spec.wick_level;

        const bool bull = days[d].bullish();
        const double level = bull ? spec.bull_level : spec.bear_level;
        const long y_open = row_of(days[d].open);
        const long y_close = row_of(days[d].price);
        const long y_top = std::min(y_open, y_close);
        const long y_bot = std::max(y_open, y_close);
        const long bx0 = (x1 - x0 >= 2) ? x0 + 1 : x0;
        const long bx1 = (x1 - x0 >= 2) ? x1 - 1 : x1;
        for (long y = y_top; y <= y_bot; ++y)
            for (long x = bx0; x <= bx1; ++x)
                img[static_cast<std::size_t>(y) * W + static_cast<std::size_t>(x)] = level;
    }

    if (spec.bollinger) {
        const std::size_t p = spec.boll_period;
        long prev_x = -1, prev_mid = 0, prev_up = 0, prev_dn = 0;
        for (std::size_t d = p - 1; d < days.size(); ++d) {
            double mean = 0.0;
            for (std::size_t i = d + 1 - p; i <= d; ++i) mean += days[i].price;
            mean /= static_cast<double>(p);
            double var = 0.0;
            for (std::size_t i = d + 1 - p; i <= d; ++i) {
                const double diff = days[i].price - mean;
                var += diff * diff;
            }
            var /= static_cast<double>(p);
            const double sd = std::sqrt(var);
            const long x = centers[d];
            const long y_mid = row_of(mean);
            const long y_up = row_of(mean + spec.boll_k * sd);
            const long y_dn = row_of(mean - spec.boll_k * sd);
            if (prev_x >= 0) {
                detail::draw_segment(img, W, H, prev_x, prev_mid, x, y_mid, spec.band_level);
                detail::draw_segment(img, W, H, prev_x, prev_up, x, y_up, spec.band_level);
                detail::draw_segment(img, W, H, prev_x, prev_dn, x, y_dn, spec.band_level);
            } else {
                detail::draw_segment(img, W, H, x, y_mid, x, y_mid, spec.band_level);
                detail::draw_segment(img, W, H, x, y_up, x, y_up, spec.band_level);
                detail::draw_segment(img, W, H, x, y_dn, x, y_dn, spec.band_level);
            }
            prev_x = x;
            prev_mid = y_mid;
            prev_up = y_up;
            prev_dn = y_dn;
        }
    }
    return img;
}

// ---------------------------------------------------------------- PGM I/O

/// value / 255, exactly.
inline double normalize_pixel(unsigned char byte) { return static_cast<double>(byte) / 255.0; }

inline std::vector<double> normalize_image(const std::vector<unsigned char>& bytes) {
    std::vector<double> out(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = normalize_pixel(bytes[i]);
    return out;
}

inline std::vector<unsigned char> quantize_image(const std::vector<double>& img) {
    std::vector<unsigned char> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        long v = detail::px_round(img[i] * 255.0);
        out[i] = static_cast<unsigned char>(std::min<long>(std::max<long>(v, 0), 255));
    }
    return out;
}

/// Binary 8-bit PGM, magic P5, max value 255.
inline void write_pgm(const std::string& path, std::size_t width, std::size_t height,
                      const std::vector<unsigned char>& bytes) {
    if (bytes.size() != width * height) throw ValueError("write_pgm: byte count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image file: " + path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write on image file: " + path);
}

struct PgmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> bytes;
};

inline PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw ParseError(path + ": not a binary PGM (bad magic '" + magic + "')");
    std::size_t w = 0, h = 0;
    long maxval = 0;
    in >> w >> h >> maxval;
    if (!in || maxval != 255) throw ParseError(path + ": unsupported PGM header");
    in.get();  // single whitespace after header
    PgmImage img;
    img.width = w;
    img.height = h;
    img.bytes.resize(w * h);
    in.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.bytes.size())
        throw ParseError(path + ": truncated PGM payload");
    return img;
}

}  // namespace ticap
