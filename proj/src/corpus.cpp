#include "decamp/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

#include "decamp/errors.hpp"
#include "decamp/parallel.hpp"

namespace decamp {

std::vector<std::string> tokenize(const std::string& text, const StopwordSet& stopwords,
                                  std::size_t min_token_len) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.size() >= min_token_len && !stopwords.contains(current)) tokens.push_back(current);
        current.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            current.push_back(static_cast<char>(std::tolower(ch)));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t max_terms) {
    std::unordered_map<std::string, std::int64_t> freq;
    std::unordered_map<std::string, std::int64_t> df;
    for (const auto& doc : docs) {
        std::unordered_set<std::string> seen;
        for (const auto& tok : doc.tokens) {
            ++freq[tok];
            if (seen.insert(tok).second) ++df[tok];
        }
    }
    if (freq.empty()) throw std::invalid_argument("build_vocabulary: corpus has no terms");

    std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_terms) ranked.resize(max_terms);

    Vocabulary vocab;
    vocab.n_docs = static_cast<std::int64_t>(docs.size());
    vocab.terms.reserve(ranked.size());
    vocab.doc_freq.reserve(ranked.size());
    for (const auto& [term, _] : ranked) {
        vocab.terms.push_back(term);
        vocab.doc_freq.push_back(df[term]);
    }
    return vocab;
}

FeatureMatrix tfidf_features(const std::vector<Document>& docs, const Vocabulary& vocab) {
    const std::size_t d = vocab.terms.size();
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(d);
    for (std::size_t t = 0; t < d; ++t) index.emplace(vocab.terms[t], t);

    std::vector<double> idf(d);
    const double n = static_cast<double>(vocab.n_docs);
    for (std::size_t t = 0; t < d; ++t)
        idf[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(vocab.doc_freq[t]))) + 1.0;

    FeatureMatrix features(docs.size(), d);
    parallel_for(docs.size(), [&](std::size_t i) {
        double* row = features.row(i);
        for (const auto& tok : docs[i].tokens) {
            auto it = index.find(tok);
            if (it != index.end()) row[it->second] += 1.0;  // raw term count
        }
        double norm_sq = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            row[t] *= idf[t];
            norm_sq += row[t] * row[t];
        }
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (std::size_t t = 0; t < d; ++t) row[t] *= inv;
        }
    });
    return features;
}

BlobData make_blobs(std::size_t n, std::size_t k, std::size_t d, double spread, std::uint64_t seed) {
    if (k < 1 || n < k) throw std::invalid_argument("make_blobs: requires n >= k >= 1");
    if (d < k) throw std::invalid_argument("make_blobs: requires d >= k for separated centers");
    BlobData blobs;
    blobs.features = FeatureMatrix(n, d);
    blobs.labels.resize(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double scale = spread / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t center = i % k;
        blobs.labels[i] = static_cast<int>(center);
        double* row = blobs.features.row(i);
        row[center] = 1.0;
        for (std::size_t j = 0; j < d; ++j) row[j] += scale * unit(rng);
    }
    l2_normalize_rows(blobs.features);
    return blobs;
}

double row_norm(const Matrix& m, std::size_t i) {
    return std::sqrt(dot(m.row_span(i), m.row_span(i)));
}

void l2_normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double norm = row_norm(m, i);
        if (norm > 0.0) {
            double* row = m.row(i);
            for (std::size_t j = 0; j < m.cols(); ++j) row[j] /= norm;
        }
    }
}

// --- file I/O ----------------------------------------------------------------

namespace {

std::ifstream open_input(const std::string& path, std::ios_base::openmode mode = std::ios_base::in) {
    std::ifstream in(path, mode);
    if (!in) throw FileMissingError("cannot open file: " + path);
    return in;
}

constexpr char kMatrixMagic[4] = {'D', 'C', 'F', 'M'};
constexpr std::uint32_t kMatrixVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        throw FormatError("truncated file: " + path);
    return value;
}

}  // namespace

StopwordSet load_stopwords(const std::string& path) {
    auto in = open_input(path);
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty() && line.front() != '#') set.insert(line);
    }
    return set;
}

std::vector<std::string> read_lines(const std::string& path) {
    auto in = open_input(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

LabelVector load_labels(const std::string& path) {
    auto in = open_input(path);
    LabelVector labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        try {
            labels.push_back(std::stoi(line));
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected an integer label");
        }
    }
    return labels;
}

void save_labels(const std::string& path, const LabelVector& labels) {
    std::ofstream out(path);
    if (!out) throw FileMissingError("cannot write file: " + path);
    for (int label : labels) out << label << '\n';
}

std::vector<Document> load_corpus(const std::string& path, const StopwordSet& stopwords,
                                  std::size_t min_token_len) {
    std::vector<Document> docs;
    int id = 0;
    for (const auto& line : read_lines(path)) {
        docs.push_back({id++, tokenize(line, stopwords, min_token_len)});
    }
    return docs;
}

void save_matrix(const std::string& path, const Matrix& m, std::uint64_t config_hash) {
    std::ofstream out(path, std::ios_base::binary);
    if (!out) throw FileMissingError("cannot write file: " + path);
    out.write(kMatrixMagic, 4);
    write_pod(out, kMatrixVersion);
    write_pod(out, config_hash);
    write_pod(out, static_cast<std::uint64_t>(m.rows()));
    write_pod(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw FormatError("short write: " + path);
}

Matrix load_matrix(const std::string& path, std::uint64_t* config_hash) {
    auto in = open_input(path, std::ios_base::binary);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0)
        throw FormatError("not a matrix file: " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kMatrixVersion)
        throw FormatError("unsupported matrix file version in " + path);
    const auto hash = read_pod<std::uint64_t>(in, path);
    if (config_hash) *config_hash = hash;
    const auto rows = read_pod<std::uint64_t>(in, path);
    const auto cols = read_pod<std::uint64_t>(in, path);
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double))))
        throw FormatError("truncated matrix file: " + path);
    return m;
}

}  // namespace decamp
