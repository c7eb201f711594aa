#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ticap {

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor/layer extents.
struct ShapeError : Error {
    using Error::Error;
};

// Bad numeric state or argument (non-finite input, non-scalar loss, id out of range).
struct ValueError : Error {
    using Error::Error;
};

// An op produced NaN/Inf; raised at the op so bad values never propagate.
struct NumericError : ValueError {
    using ValueError::ValueError;
};

// Malformed input file; message carries file and line.
struct ParseError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Training loss went NaN; carries the epoch it happened in.
struct DivergenceError : Error {
    int epoch;
    explicit DivergenceError(const std::string& msg, int epoch_index)
        : Error(msg), epoch(epoch_index) {}
};

// ---------------------------------------------------------------- rng
//
// Deterministic splitmix64 stream. All randomness in the library flows from
// one of these, seeded explicitly; forking derives an independent stream so
// unrelated consumers cannot perturb each other's sequences.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one draw per call, spare discarded to keep forks independent of call parity.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    Rng fork(std::uint64_t salt) const {
        Rng r(state_ ^ (0x517cc1b727220a95ULL * (salt + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------- dates

// Calendar day with ISO-8601 text form. Serial number is days since 1970-01-01.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    // days-from-civil (Howard Hinnant's public-domain algorithm)
    long serial() const {
        int y = year;
        const int m = month;
        const int d = day;
        y -= m <= 2;
        const long era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<long>(doe) - 719468;
    }

    static Date from_serial(long z) {
        z += 719468;
        const long era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const long y = static_cast<long>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
    }

    Date plus_days(long n) const { return from_serial(serial() + n); }

    bool operator==(const Date& o) const { return year == o.year && month == o.month && day == o.day; }
    bool operator!=(const Date& o) const { return !(*this == o); }
    bool operator<(const Date& o) const { return serial() < o.serial(); }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(std::string_view s, const std::string& context = "") {
        Date d;
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            throw ParseError("bad date '" + std::string(s) + "'" + context);
        auto num = [&](int off, int len, int& out) {
            auto r = std::from_chars(s.data() + off, s.data() + off + len, out);
            if (r.ec != std::errc() || r.ptr != s.data() + off + len)
                throw ParseError("bad date '" + std::string(s) + "'" + context);
        };
        num(0, 4, d.year);
        num(5, 2, d.month);
        num(8, 2, d.day);
        if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
            throw ParseError("bad date '" + std::string(s) + "'" + context);
        return d;
    }
};

// ---------------------------------------------------------------- threads

// TICAPSULE_THREADS caps worker count; default is hardware concurrency.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("TICAPSULE_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

// Index-parallel loop. Each index must write only to its own slots; results
// are then independent of the thread partition, keeping output deterministic.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned workers = std::min<std::size_t>(thread_budget(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- misc

inline std::string lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace ticap
