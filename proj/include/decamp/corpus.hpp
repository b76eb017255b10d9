#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "decamp/eval_metrics.hpp"
#include "decamp/matrix.hpp"

namespace decamp {

// n x d row matrix; every nonzero row carries unit Euclidean norm.
using FeatureMatrix = Matrix;

struct Document {
    int id = 0;
    std::vector<std::string> tokens;
};

using StopwordSet = std::unordered_set<std::string>;

struct Vocabulary {
    std::vector<std::string> terms;     // descending corpus frequency, ties lexicographic
    std::vector<std::int64_t> doc_freq; // documents containing each term
    std::int64_t n_docs = 0;            // size of the corpus the vocabulary was built from
};

// Lowercases, splits on non-alphanumeric runs, drops stop words and tokens
// shorter than min_token_len. Order preserved, duplicates kept.
std::vector<std::string> tokenize(const std::string& text, const StopwordSet& stopwords,
                                  std::size_t min_token_len = 1);

// Top max_terms terms by total corpus frequency (ties broken lexicographically).
// Throws if the corpus has no terms at all.
Vocabulary build_vocabulary(const std::vector<Document>& docs, std::size_t max_terms = 2000);

// Raw term count times smoothed idf, ln((1+n)/(1+df)) + 1, then l2 row
// normalization. Documents with no in-vocabulary terms keep an all-zero row.
FeatureMatrix tfidf_features(const std::vector<Document>& docs, const Vocabulary& vocab);

// Synthetic clustering data: n l2-normalized nonnegative points around k
// axis-aligned centers (requires d >= k), labels cycle through the centers.
struct BlobData {
    FeatureMatrix features;
    LabelVector labels;
};
BlobData make_blobs(std::size_t n, std::size_t k, std::size_t d, double spread, std::uint64_t seed);

// --- corpus / artifact file I/O ---------------------------------------------

StopwordSet load_stopwords(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);
LabelVector load_labels(const std::string& path);
void save_labels(const std::string& path, const LabelVector& labels);

// One document per line -> tokenized documents. min_token_len defaults to 2
// here: single characters carry no signal in the short-text pipeline.
std::vector<Document> load_corpus(const std::string& path, const StopwordSet& stopwords,
                                  std::size_t min_token_len = 2);

// Binary matrix container, little-endian, versioned header carrying the
// config hash that produced the file.
void save_matrix(const std::string& path, const Matrix& m, std::uint64_t config_hash);
Matrix load_matrix(const std::string& path, std::uint64_t* config_hash = nullptr);

double row_norm(const Matrix& m, std::size_t i);
void l2_normalize_rows(Matrix& m);

}  // namespace decamp
