#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ticap/tensor.hpp"

namespace ticap {

/// Token-to-id map plus the dense vector table. Id 0 is reserved for padding
/// (always the zero vector), id 1 for unknown tokens (one shared vector,
/// initialized to the mean of all loaded vectors). Ids are dense and stable
/// for a given input file.
struct Vocabulary {
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;

    std::unordered_map<std::string, int> ids;
    std::vector<std::string> tokens;   // tokens[i] is the token with id i; [0]="<pad>", [1]="<unk>"
    std::vector<double> matrix;        // row-major [size() x dim]
    std::size_t dim = 0;

    std::size_t size() const { return tokens.size(); }

    int id_of(const std::string& token) const {
        auto it = ids.find(token);
        return it == ids.end() ? unk_id : it->second;
    }

    std::vector<int> encode(const std::vector<std::string>& toks) const {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id_of(t));
        return out;
    }

    const double* row(int id) const { return matrix.data() + static_cast<std::size_t>(id) * dim; }
};

namespace detail {

inline void parse_embedding_line(const std::string& line, const std::string& path, std::size_t lineno,
                                 std::string& token, std::vector<double>& vec) {
    vec.clear();
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected 'token c1 c2 ...'");
    token = line.substr(0, pos);
    const char* p = line.c_str() + pos;
    char* end = nullptr;
    while (*p == ' ') {
        double v = std::strtod(p + 1, &end);
        if (end == p + 1)
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad float in embedding line");
        vec.push_back(v);
        p = end;
    }
    if (*p != '\0' && *p != '\r')
        throw ParseError(path + ":" + std::to_string(lineno) + ": trailing garbage in embedding line");
    if (vec.empty())
        throw ParseError(path + ":" + std::to_string(lineno) + ": no vector components");
}

}  // namespace detail

/// Loads a pretrained embedding file, one `token c1 c2 ... cD` line per
/// token, single-space separated. The dimension is inferred from the first
/// line and enforced afterwards (DimMismatch names the offending line).
/// Duplicate tokens keep the last occurrence and emit a warning.
inline Vocabulary load_embeddings(const std::string& path, std::ostream& warnings = std::cerr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<double>> vecs;
    std::string line, token;
    std::vector<double> vec;
    std::size_t lineno = 0, dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        detail::parse_embedding_line(line, path, lineno, token, vec);
        if (dim == 0) {
            dim = vec.size();
        } else if (vec.size() != dim) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": vector has " + std::to_string(vec.size()) +
                             " components, expected " + std::to_string(dim) + " (DimMismatch)");
        }
        auto [it, fresh] = vecs.emplace(token, vec);
        if (fresh) {
            order.push_back(token);
        } else {
            warnings << "warning: duplicate embedding token '" << token << "' at " << path << ":" << lineno
                     << ", last occurrence wins\n";
            it->second = vec;
        }
    }
    if (order.empty()) throw ParseError(path + ": embedding file has no entries");

    Vocabulary v;
    v.dim = dim;
    v.tokens = {"<pad>", "<unk>"};
    v.tokens.insert(v.tokens.end(), order.begin(), order.end());
    v.matrix.assign(v.tokens.size() * dim, 0.0);
    std::vector<double> mean(dim, 0.0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& src = vecs[order[i]];
        std::copy(src.begin(), src.end(), v.matrix.begin() + (i + 2) * dim);
        for (std::size_t d = 0; d < dim; ++d) mean[d] += src[d];
        v.ids[order[i]] = static_cast<int>(i + 2);
    }
    for (std::size_t d = 0; d < dim; ++d)
        v.matrix[Vocabulary::unk_id * dim + d] = mean[d] / static_cast<double>(order.size());
    return v;
}

/// Writes a vocabulary in the embedding file format, reserved rows included
/// as literal <pad> and <unk> tokens so a round trip is exact.
inline void save_vocabulary(const std::string& path, const Vocabulary& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        out << v.tokens[i];
        for (std::size_t d = 0; d < v.dim; ++d) {
            std::snprintf(buf, sizeof buf, " %.17g", v.matrix[i * v.dim + d]);
            out << buf;
        }
        out << '\n';
    }
}

/// Reads a file produced by save_vocabulary.
inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line, token;
    std::vector<double> vec;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        detail::parse_embedding_line(line, path, lineno, token, vec);
        if (v.dim == 0)
            v.dim = vec.size();
        else if (vec.size() != v.dim)
            throw ParseError(path + ":" + std::to_string(lineno) + ": vector has " + std::to_string(vec.size()) +
                             " components, expected " + std::to_string(v.dim) + " (DimMismatch)");
        v.tokens.push_back(token);
        v.matrix.insert(v.matrix.end(), vec.begin(), vec.end());
    }
    if (v.tokens.size() < 2 || v.tokens[0] != "<pad>" || v.tokens[1] != "<unk>")
        throw ParseError(path + ": vocabulary must start with <pad> and <unk> rows");
    for (std::size_t i = 2; i < v.tokens.size(); ++i) v.ids[v.tokens[i]] = static_cast<int>(i);
    return v;
}

/// Embedding matrix for one padded document: row i is the vector of token i,
/// padding rows are zero. Plain lookup, not a trainable op.
template <class T>
Tensor<T> embed_document(const std::vector<int>& token_ids, const Vocabulary& vocab) {
    std::vector<T> out(token_ids.size() * vocab.dim);
    for (std::size_t i = 0; i < token_ids.size(); ++i) {
        const int id = token_ids[i];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
            throw ValueError("embed_document: token id " + std::to_string(id) + " out of range (IdOutOfRange)");
        const double* src = vocab.row(id);
        for (std::size_t d = 0; d < vocab.dim; ++d) out[i * vocab.dim + d] = static_cast<T>(src[d]);
    }
    return Tensor<T>::constant({token_ids.size(), vocab.dim}, std::move(out));
}

}  // namespace ticap
