#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ticap/chart.hpp"
#include "ticap/market.hpp"

namespace ticap {

/// One training example: a padded token-id sequence, the 7-d numeric vector
/// (objective, subjective, sentiment, price, open, high, low), the chart
/// matrix in [0,1], and the binary direction label.
struct Sample {
    Date date;
    int label = 0;  // 0 or 1
    std::array<double, 7> numeric{};
    std::string image_path;  // relative to the manifest
    std::vector<int> token_ids;
    std::vector<double> image;  // row-major [image_h x image_w], filled on load
    std::size_t image_h = 0;
    std::size_t image_w = 0;

    void check_invariants(std::size_t n) const {
        if (token_ids.size() != n)
            throw ValueError("sample " + date.str() + ": token sequence length " +
                             std::to_string(token_ids.size()) + " != " + std::to_string(n));
        if (label != 0 && label != 1) throw ValueError("sample " + date.str() + ": label must be 0 or 1");
        for (double v : numeric)
            if (!std::isfinite(v)) throw ValueError("sample " + date.str() + ": non-finite numeric field");
        for (double v : image)
            if (!(v >= 0.0 && v <= 1.0))
                throw ValueError("sample " + date.str() + ": image value outside [0,1]");
    }
};

/// A raw corpus line before cleaning.
struct RawDoc {
    Date date;
    DocumentRecord::Source source = DocumentRecord::Source::tweet;
    std::string text;
};

/// UTF-8 corpus, one record per line: date<TAB>source<TAB>text.
inline std::vector<RawDoc> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);
    std::vector<RawDoc> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string ctx = " (" + path + ":" + std::to_string(lineno) + ")";
        auto f = split(line, '\t');
        if (f.size() != 3)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected date<TAB>source<TAB>text");
        RawDoc d;
        d.date = Date::parse(f[0], ctx);
        if (f[1] == "tweet")
            d.source = DocumentRecord::Source::tweet;
        else if (f[1] == "news")
            d.source = DocumentRecord::Source::news;
        else
            throw ParseError(path + ":" + std::to_string(lineno) + ": source must be 'tweet' or 'news', got '" +
                             f[1] + "'");
        d.text = f[2];
        docs.push_back(std::move(d));
    }
    return docs;
}

// ---------------------------------------------------------------- manifest

/// One line per sample, tab-separated: date, label, the 7 numeric fields,
/// image path (relative), space-joined token ids. Numeric fields use %.17g
/// so a rewrite round-trips bit-exactly.
inline void write_manifest(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    char buf[40];
    for (const auto& s : samples) {
        out << s.date.str() << '\t' << s.label;
        for (double v : s.numeric) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << '\t' << buf;
        }
        out << '\t' << s.image_path << '\t';
        for (std::size_t i = 0; i < s.token_ids.size(); ++i) {
            if (i) out << ' ';
            out << s.token_ids[i];
        }
        out << '\n';
    }
}

/// Reads a manifest and, when load_images is set, the PGM files it
/// references (resolved relative to the manifest's directory).
inline std::vector<Sample> load_manifest(const std::string& path, bool load_images = true) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<Sample> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != 11)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 11 tab-separated fields, got " +
                             std::to_string(f.size()));
        Sample s;
        s.date = Date::parse(f[0], " (" + path + ":" + std::to_string(lineno) + ")");
        try {
            s.label = std::stoi(f[1]);
            for (int k = 0; k < 7; ++k) s.numeric[static_cast<std::size_t>(k)] = std::stod(f[2 + k]);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric field");
        }
        s.image_path = f[9];
        for (const auto& tok : split(f[10], ' ')) {
            if (tok.empty()) continue;
            try {
                s.token_ids.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": bad token id '" + tok + "'");
            }
        }
        if (load_images) {
            PgmImage img = read_pgm((base / s.image_path).string());
            s.image_h = img.height;
            s.image_w = img.width;
            s.image = normalize_image(img.bytes);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace ticap
