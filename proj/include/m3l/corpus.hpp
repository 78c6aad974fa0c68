#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "m3l/numkit.hpp"

namespace m3l::corpus {

using numkit::Matrix;
using numkit::SeededRng;

// Frequency-trimmed token list; index order is the on-disk line order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int index) const { return tokens_[static_cast<size_t>(index)]; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // -1 if absent
  int index_of(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Sparse document counts over a vocabulary, entries sorted by term index.
struct BowVector {
  std::vector<std::pair<int, int>> entries;  // (term index, count > 0)

  int total_count() const {
    int t = 0;
    for (const auto& [idx, c] : entries) t += c;
    return t;
  }
};

enum class Modality { text, image };

struct ViewSpec {
  std::string name;
  Modality modality = Modality::text;
  int embedding_dim = 0;
  std::optional<Vocabulary> vocabulary;  // text views only
};

// Aligned multi-view corpus. Row i of every per-view matrix belongs to
// tuple i; text views carry one BowVector per tuple.
struct TupleDataset {
  std::vector<ViewSpec> views;
  std::vector<Matrix> embeddings;              // one per view, tuple_count rows
  std::vector<std::vector<BowVector>> bows;    // per view; empty for image views
  int tuple_count = 0;

  int n_views() const { return static_cast<int>(views.size()); }
  int view_index(const std::string& name) const;  // throws view_not_found
};

// Lowercases and splits on every non-word character. Word characters are
// ASCII alphanumerics plus codepoints >= U+00C0 (exceptions: multiplication
// and division signs, general punctuation U+2000-206F, CJK punctuation
// U+3000-303F). Lowercasing folds ASCII and Latin-1 uppercase; other scripts
// pass through unchanged. Stopwords and single-codepoint tokens are dropped.
std::vector<std::string> tokenize(const std::string& text,
                                  const std::unordered_set<std::string>& stopwords);

// The max_size most frequent tokens, ties broken lexicographically; stored in
// descending-frequency order (lexicographic within equal counts).
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, int max_size);

// Counts of in-vocabulary tokens; OOV tokens are silently dropped.
BowVector to_bow(const std::vector<std::string>& doc, const Vocabulary& vocab);

// EMB1 binary format: "EMB1", u32 LE rows, u32 LE cols, rows*cols float32 LE
// row-major. Round-trips exactly at 32-bit precision.
Matrix load_embeddings(const std::string& path);
void save_embeddings(const Matrix& m, const std::string& path);

std::vector<std::string> load_token_lines(const std::string& path);  // vocab / stopword files
void save_token_lines(const std::vector<std::string>& tokens, const std::string& path);

// BoW file: one document per line, tab-separated idx:count pairs.
std::vector<BowVector> load_bow_file(const std::string& path, int vocab_size);
void save_bow_file(const std::vector<BowVector>& docs, const std::string& path);

// Alignment file: one tuple per line, one 0-based row index per view,
// tab-separated.
std::vector<std::vector<int>> load_alignment(const std::string& path, int n_views);
void save_alignment(const std::vector<std::vector<int>>& rows, const std::string& path);

// Validates and materializes a TupleDataset: with an alignment, rows are
// gathered per view (repeats allowed, as when one article pairs with several
// images); without one, row i of every view forms tuple i.
TupleDataset assemble_dataset(std::vector<ViewSpec> views, const std::vector<Matrix>& embeddings,
                              std::vector<std::vector<BowVector>> bows,
                              const std::vector<std::vector<int>>* alignment);

// Tuples [first, first+count) as a standalone dataset.
TupleDataset subset(const TupleDataset& ds, int first, int count);

struct SyntheticConfig {
  int languages = 2;        // text views
  int image_views = 0;
  int tuples = 500;
  int true_topics = 10;     // K*
  int vocab_size = 200;     // per language
  int embedding_dim = 32;   // shared by all views
  double doc_length = 60.0; // Poisson mean
  double modality_offset = 0.0;  // image views shifted by offset * unit vector
  bool shared_projection = false;  // one embedding map for every view
  uint64_t seed = 0;
};

struct SyntheticData {
  TupleDataset dataset;
  Matrix theta_true;               // tuples x K*
  std::vector<Matrix> phi_true;    // per language, K* x V
};

// Planted-topic comparable corpus: per language phi* ~ Dirichlet(0.05), per
// tuple theta* ~ Dirichlet(0.2); documents are mixture draws of
// Poisson(doc_length) words; every view's embedding is A_v theta* + 0.1 N(0,I)
// with a fixed Gaussian D x K* map per view, image views offset by
// modality_offset along a fixed unit direction. Bit-reproducible per seed.
SyntheticData gen_synthetic(const SyntheticConfig& config);

}  // namespace m3l::corpus
