#pragma once

#include <functional>
#include <vector>

#include "m3l/corpus.hpp"

namespace m3l::pltm {

using corpus::Matrix;
using corpus::TupleDataset;

struct PltmHyper {
  double alpha = 0.0;  // <= 0 means the classical default 50/K
  double eta = 0.01;
  int iterations = 1000;
  int burn_in = 800;
  int sample_lag = 10;

  void validate() const;
  double resolved_alpha(int n_topics) const {
    return alpha > 0.0 ? alpha : 50.0 / static_cast<double>(n_topics);
  }
};

// Collapsed-sampler state. The tuple-topic table is shared across languages;
// each language keeps its own topic-word and topic-total tables.
struct PltmState {
  int n_tuples = 0;
  int n_topics = 0;
  std::vector<int> vocab_sizes;                        // per language
  std::vector<std::vector<std::vector<int>>> words;    // [lang][tuple] -> word ids
  std::vector<std::vector<std::vector<int>>> topics;   // assignments, same shape
  std::vector<std::vector<long long>> tuple_topic;     // [tuple][k]
  std::vector<std::vector<long long>> lang_topic_word; // [lang][k * V_l + w]
  std::vector<std::vector<long long>> lang_topic;      // [lang][k]

  long long topic_word(int lang, int k, int w) const {
    return lang_topic_word[static_cast<size_t>(lang)]
                          [static_cast<size_t>(k) * static_cast<size_t>(vocab_sizes[static_cast<size_t>(lang)]) +
                           static_cast<size_t>(w)];
  }
};

// Uniform-random assignment per token (BoW counts expanded in term order),
// counts rebuilt from the assignments.
PltmState pltm_init(const TupleDataset& dataset, int n_topics, const PltmHyper& hyper, uint64_t seed);

// Unnormalized p(k) = (n_tk + alpha) * (n_lkw + eta) / (n_lk + eta V_l) with
// the resampled token already removed from the counts.
std::vector<double> gibbs_conditional(const PltmState& state, int tuple, int lang, int word,
                                      double alpha, double eta);

// Throws on any count-table inconsistency.
void validate_counts(const PltmState& state);

struct PltmResult {
  std::vector<Matrix> phi;  // per language, n_topics x V_l
  Matrix theta;             // n_tuples x n_topics
  PltmState state;
};

using SweepCallback = std::function<void(const PltmState&, int sweep)>;

// Full sweeps in (tuple, language, token) order; after burn-in every
// sample_lag-th sweep contributes smoothed phi and theta estimates, and the
// outputs average those samples. The callback, when set, runs after every
// sweep.
PltmResult pltm_train(const TupleDataset& dataset, int n_topics, const PltmHyper& hyper, uint64_t seed,
                      const SweepCallback& on_sweep = nullptr);

// Fold-in for held-out tuples with phi frozen: 200 sweeps of
// p(k) ~ (n_tk + alpha) * phi_lkw per tuple, theta averaged over the last
// 100. heldout is [language][tuple], tuples aligned across languages.
// Each tuple runs on its own derived seed.
Matrix pltm_infer(const std::vector<Matrix>& phi, const std::vector<std::vector<corpus::BowVector>>& heldout,
                  const PltmHyper& hyper, uint64_t seed);

}  // namespace m3l::pltm
