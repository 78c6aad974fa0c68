#pragma once

#include <string>
#include <vector>

#include "m3l/corpus.hpp"

namespace m3l::eval {

using corpus::BowVector;
using corpus::Matrix;

// Jensen-Shannon divergence in nats (0 log 0 := 0); symmetric, in [0, ln 2].
double jsd(std::span<const double> p, std::span<const double> q);

// Candidates ranked by ascending JSD to each query, ties broken by candidate
// index; MRR = mean over queries of 1/rank(gold).
double mrr(const Matrix& queries, const Matrix& candidates, const std::vector<int>& gold);

// Uninterpolated average precision: per query the mean, over its relevant
// candidates, of precision at that candidate's rank; averaged over queries.
double uap(const Matrix& queries, const Matrix& candidates,
           const std::vector<std::vector<int>>& gold);

// Mean JSD over every (query, relevant candidate) gold pair.
double mean_gold_jsd(const Matrix& queries, const Matrix& candidates,
                     const std::vector<std::vector<int>>& gold);

struct CoherenceResult {
  std::vector<double> per_topic;
  double mean = 0.0;
};

// Document-level NPMI over the top words of each topic: npmi(i, j) =
// log((p(i,j)+eps) / (p(i) p(j))) / -log(p(i,j)+eps), marginals floored at
// eps so corpus-absent words stay finite (their pairs take the degenerate
// smoothed value rather than raising); results clamped to [-1, 1]. Word id
// -1 stands for a token absent from the reference vocabulary.
CoherenceResult npmi_coherence(const std::vector<std::vector<int>>& topic_word_ids,
                               const std::vector<BowVector>& docs, double epsilon = 1e-12);

// Mean JSD over tuples and unordered view pairs; matrices are per-view
// theta tables with one row per tuple.
double aligned_pair_jsd(const std::vector<Matrix>& theta_per_view);

// Theta TSV: one row per item, id column (the 0-based row index) then K
// values in shortest round-trip decimal.
void save_theta_tsv(const Matrix& thetas, const std::string& path);
Matrix load_theta_tsv(const std::string& path);

// Gold TSV: query_id <TAB> relevant_id[,relevant_id...]. Ids are row indices
// into the query/candidate theta tables.
void save_gold_tsv(const std::vector<std::vector<int>>& gold, const std::string& path);
std::vector<std::vector<int>> load_gold_tsv(const std::string& path, int n_queries, int n_candidates);

// Top-words TSV: topic id then the words, tab-separated.
void save_topics_tsv(const std::vector<std::vector<std::string>>& topics, const std::string& path);

}  // namespace m3l::eval
