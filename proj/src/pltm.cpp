#include "m3l/pltm.hpp"

#include <algorithm>
#include <cmath>

namespace m3l::pltm {

using corpus::BowVector;
using corpus::Modality;
using numkit::SeededRng;

void PltmHyper::validate() const {
  if (eta <= 0.0) fail(ErrorCode::config_bad_value, "pltm eta must be > 0");
  if (iterations < 1) fail(ErrorCode::config_bad_value, "pltm iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) {
    fail(ErrorCode::config_bad_value, "pltm burn_in must be in [0, iterations)");
  }
  if (sample_lag < 1) fail(ErrorCode::config_bad_value, "pltm sample_lag must be >= 1");
}

namespace {

std::vector<int> expand_bow(const BowVector& bow) {
  std::vector<int> words;
  words.reserve(static_cast<size_t>(bow.total_count()));
  for (const auto& [idx, count] : bow.entries) {
    for (int c = 0; c < count; ++c) words.push_back(idx);
  }
  return words;
}

int sample_unnormalized(SeededRng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(weights.size()) - 1;
}

struct TextViews {
  std::vector<int> view_ids;  // indices into the dataset views
};

TextViews text_views(const TupleDataset& dataset) {
  TextViews out;
  for (int v = 0; v < dataset.n_views(); ++v) {
    if (dataset.views[static_cast<size_t>(v)].modality == Modality::text) out.view_ids.push_back(v);
  }
  if (out.view_ids.empty()) fail(ErrorCode::empty_dataset, "pltm needs at least one text view");
  return out;
}

void remove_token(PltmState& st, int lang, int tuple, int word, int topic) {
  --st.tuple_topic[static_cast<size_t>(tuple)][static_cast<size_t>(topic)];
  --st.lang_topic_word[static_cast<size_t>(lang)]
                      [static_cast<size_t>(topic) * static_cast<size_t>(st.vocab_sizes[static_cast<size_t>(lang)]) +
                       static_cast<size_t>(word)];
  --st.lang_topic[static_cast<size_t>(lang)][static_cast<size_t>(topic)];
}

void add_token(PltmState& st, int lang, int tuple, int word, int topic) {
  ++st.tuple_topic[static_cast<size_t>(tuple)][static_cast<size_t>(topic)];
  ++st.lang_topic_word[static_cast<size_t>(lang)]
                      [static_cast<size_t>(topic) * static_cast<size_t>(st.vocab_sizes[static_cast<size_t>(lang)]) +
                       static_cast<size_t>(word)];
  ++st.lang_topic[static_cast<size_t>(lang)][static_cast<size_t>(topic)];
}

}  // namespace

PltmState pltm_init(const TupleDataset& dataset, int n_topics, const PltmHyper& hyper, uint64_t seed) {
  if (n_topics < 1) fail(ErrorCode::bad_argument, "pltm: n_topics must be >= 1");
  hyper.validate();
  const TextViews tv = text_views(dataset);
  const int n_langs = static_cast<int>(tv.view_ids.size());

  PltmState st;
  st.n_tuples = dataset.tuple_count;
  st.n_topics = n_topics;
  st.tuple_topic.assign(static_cast<size_t>(st.n_tuples), std::vector<long long>(static_cast<size_t>(n_topics), 0));

  SeededRng rng(seed);
  for (int l = 0; l < n_langs; ++l) {
    const int view = tv.view_ids[static_cast<size_t>(l)];
    const int v_size = dataset.views[static_cast<size_t>(view)].vocabulary->size();
    st.vocab_sizes.push_back(v_size);
    st.lang_topic_word.emplace_back(static_cast<size_t>(n_topics) * static_cast<size_t>(v_size), 0);
    st.lang_topic.emplace_back(static_cast<size_t>(n_topics), 0);
    std::vector<std::vector<int>> lang_words;
    std::vector<std::vector<int>> lang_topics;
    lang_words.reserve(static_cast<size_t>(st.n_tuples));
    for (int t = 0; t < st.n_tuples; ++t) {
      lang_words.push_back(expand_bow(dataset.bows[static_cast<size_t>(view)][static_cast<size_t>(t)]));
      std::vector<int> assignment(lang_words.back().size());
      for (size_t p = 0; p < assignment.size(); ++p) {
        assignment[p] = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_topics)));
      }
      lang_topics.push_back(std::move(assignment));
    }
    st.words.push_back(std::move(lang_words));
    st.topics.push_back(std::move(lang_topics));
  }

  for (int l = 0; l < n_langs; ++l) {
    for (int t = 0; t < st.n_tuples; ++t) {
      const auto& w = st.words[static_cast<size_t>(l)][static_cast<size_t>(t)];
      const auto& z = st.topics[static_cast<size_t>(l)][static_cast<size_t>(t)];
      for (size_t p = 0; p < w.size(); ++p) add_token(st, l, t, w[p], z[p]);
    }
  }
  return st;
}

std::vector<double> gibbs_conditional(const PltmState& state, int tuple, int lang, int word,
                                      double alpha, double eta) {
  const int k_topics = state.n_topics;
  const double v_size = static_cast<double>(state.vocab_sizes[static_cast<size_t>(lang)]);
  std::vector<double> p(static_cast<size_t>(k_topics));
  for (int k = 0; k < k_topics; ++k) {
    const double doc_part = static_cast<double>(state.tuple_topic[static_cast<size_t>(tuple)][static_cast<size_t>(k)]) + alpha;
    const double word_part = static_cast<double>(state.topic_word(lang, k, word)) + eta;
    const double norm = static_cast<double>(state.lang_topic[static_cast<size_t>(lang)][static_cast<size_t>(k)]) + eta * v_size;
    p[static_cast<size_t>(k)] = doc_part * word_part / norm;
  }
  return p;
}

void validate_counts(const PltmState& state) {
  const int n_langs = static_cast<int>(state.words.size());
  // per-tuple totals match the token counts across languages
  for (int t = 0; t < state.n_tuples; ++t) {
    long long expect = 0;
    for (int l = 0; l < n_langs; ++l) expect += static_cast<long long>(state.words[static_cast<size_t>(l)][static_cast<size_t>(t)].size());
    long long got = 0;
    for (long long c : state.tuple_topic[static_cast<size_t>(t)]) {
      if (c < 0) fail(ErrorCode::bad_argument, "pltm: negative tuple-topic count");
      got += c;
    }
    if (got != expect) fail(ErrorCode::bad_argument, "pltm: tuple-topic counts do not sum to token count");
  }
  // language topic-word rows match topic totals
  for (int l = 0; l < n_langs; ++l) {
    const int v_size = state.vocab_sizes[static_cast<size_t>(l)];
    for (int k = 0; k < state.n_topics; ++k) {
      long long row = 0;
      for (int w = 0; w < v_size; ++w) {
        const long long c = state.topic_word(l, k, w);
        if (c < 0) fail(ErrorCode::bad_argument, "pltm: negative topic-word count");
        row += c;
      }
      if (row != state.lang_topic[static_cast<size_t>(l)][static_cast<size_t>(k)]) {
        fail(ErrorCode::bad_argument, "pltm: topic-word row does not match topic total");
      }
    }
  }
}

PltmResult pltm_train(const TupleDataset& dataset, int n_topics, const PltmHyper& hyper, uint64_t seed,
                      const SweepCallback& on_sweep) {
  PltmState st = pltm_init(dataset, n_topics, hyper, numkit::derive_seed(seed, "pltm_init"));
  SeededRng rng(numkit::derive_seed(seed, "pltm_sweeps"));
  const double alpha = hyper.resolved_alpha(n_topics);
  const int n_langs = static_cast<int>(st.words.size());

  std::vector<Matrix> phi_acc;
  for (int l = 0; l < n_langs; ++l) phi_acc.emplace_back(n_topics, st.vocab_sizes[static_cast<size_t>(l)]);
  Matrix theta_acc(st.n_tuples, n_topics);
  int n_samples = 0;

  for (int sweep = 1; sweep <= hyper.iterations; ++sweep) {
    for (int t = 0; t < st.n_tuples; ++t) {
      for (int l = 0; l < n_langs; ++l) {
        auto& words = st.words[static_cast<size_t>(l)][static_cast<size_t>(t)];
        auto& topics = st.topics[static_cast<size_t>(l)][static_cast<size_t>(t)];
        for (size_t p = 0; p < words.size(); ++p) {
          remove_token(st, l, t, words[p], topics[p]);
          const auto cond = gibbs_conditional(st, t, l, words[p], alpha, hyper.eta);
          topics[p] = sample_unnormalized(rng, cond);
          add_token(st, l, t, words[p], topics[p]);
        }
      }
    }
    if (sweep > hyper.burn_in && (sweep - hyper.burn_in - 1) % hyper.sample_lag == 0) {
      ++n_samples;
      for (int l = 0; l < n_langs; ++l) {
        const double v_size = static_cast<double>(st.vocab_sizes[static_cast<size_t>(l)]);
        for (int k = 0; k < n_topics; ++k) {
          const double norm = static_cast<double>(st.lang_topic[static_cast<size_t>(l)][static_cast<size_t>(k)]) +
                              hyper.eta * v_size;
          auto row = phi_acc[static_cast<size_t>(l)].row(k);
          for (int w = 0; w < st.vocab_sizes[static_cast<size_t>(l)]; ++w) {
            row[static_cast<size_t>(w)] += (static_cast<double>(st.topic_word(l, k, w)) + hyper.eta) / norm;
          }
        }
      }
      for (int t = 0; t < st.n_tuples; ++t) {
        long long tokens = 0;
        for (long long c : st.tuple_topic[static_cast<size_t>(t)]) tokens += c;
        const double norm = static_cast<double>(tokens) + alpha * static_cast<double>(n_topics);
        auto row = theta_acc.row(t);
        for (int k = 0; k < n_topics; ++k) {
          row[static_cast<size_t>(k)] +=
              (static_cast<double>(st.tuple_topic[static_cast<size_t>(t)][static_cast<size_t>(k)]) + alpha) / norm;
        }
      }
    }
    if (on_sweep) on_sweep(st, sweep);
  }

  PltmResult out;
  for (auto& phi : phi_acc) {
    for (auto& x : phi.data) x /= static_cast<double>(n_samples);
  }
  for (auto& x : theta_acc.data) x /= static_cast<double>(n_samples);
  out.phi = std::move(phi_acc);
  out.theta = std::move(theta_acc);
  out.state = std::move(st);
  return out;
}

Matrix pltm_infer(const std::vector<Matrix>& phi, const std::vector<std::vector<BowVector>>& heldout,
                  const PltmHyper& hyper, uint64_t seed) {
  if (phi.empty()) fail(ErrorCode::empty_input, "pltm_infer: no topic-word tables");
  const int n_langs = static_cast<int>(phi.size());
  if (static_cast<int>(heldout.size()) != n_langs) {
    fail(ErrorCode::dim_mismatch, "pltm_infer: held-out languages vs phi tables");
  }
  const int n_topics = phi[0].rows;
  for (const auto& p : phi) {
    if (p.rows != n_topics) fail(ErrorCode::dim_mismatch, "pltm_infer: phi tables disagree on topics");
  }
  const size_t n_tuples = heldout[0].size();
  for (const auto& docs : heldout) {
    if (docs.size() != n_tuples) fail(ErrorCode::row_count_mismatch, "pltm_infer: held-out tuples misaligned");
  }
  const double alpha = hyper.resolved_alpha(n_topics);
  constexpr int kFoldInSweeps = 200;
  constexpr int kFoldInAveraged = 100;

  Matrix thetas(static_cast<int>(n_tuples), n_topics);
  std::vector<double> cond(static_cast<size_t>(n_topics));
  for (size_t t = 0; t < n_tuples; ++t) {
    SeededRng rng(numkit::derive_seed(seed, "fold-in:" + std::to_string(t)));
    std::vector<std::vector<int>> words;
    std::vector<std::vector<int>> topics;
    std::vector<long long> doc_topic(static_cast<size_t>(n_topics), 0);
    long long tokens = 0;
    for (int l = 0; l < n_langs; ++l) {
      words.push_back(expand_bow(heldout[static_cast<size_t>(l)][t]));
      std::vector<int> assignment(words.back().size());
      for (auto& z : assignment) {
        z = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_topics)));
        ++doc_topic[static_cast<size_t>(z)];
        ++tokens;
      }
      topics.push_back(std::move(assignment));
      for (int w : words.back()) {
        if (w < 0 || w >= phi[static_cast<size_t>(l)].cols) {
          fail(ErrorCode::index_out_of_range, "pltm_infer: word id outside phi vocabulary");
        }
      }
    }

    std::vector<double> theta_sum(static_cast<size_t>(n_topics), 0.0);
    for (int sweep = 1; sweep <= kFoldInSweeps; ++sweep) {
      for (int l = 0; l < n_langs; ++l) {
        const Matrix& phi_l = phi[static_cast<size_t>(l)];
        auto& w = words[static_cast<size_t>(l)];
        auto& z = topics[static_cast<size_t>(l)];
        for (size_t p = 0; p < w.size(); ++p) {
          --doc_topic[static_cast<size_t>(z[p])];
          for (int k = 0; k < n_topics; ++k) {
            cond[static_cast<size_t>(k)] = (static_cast<double>(doc_topic[static_cast<size_t>(k)]) + alpha) *
                                           phi_l(k, w[p]);
          }
          z[p] = sample_unnormalized(rng, cond);
          ++doc_topic[static_cast<size_t>(z[p])];
        }
      }
      if (sweep > kFoldInSweeps - kFoldInAveraged) {
        const double norm = static_cast<double>(tokens) + alpha * static_cast<double>(n_topics);
        for (int k = 0; k < n_topics; ++k) {
          theta_sum[static_cast<size_t>(k)] +=
              (static_cast<double>(doc_topic[static_cast<size_t>(k)]) + alpha) / norm;
        }
      }
    }
    auto row = thetas.row(static_cast<int>(t));
    for (int k = 0; k < n_topics; ++k) {
      row[static_cast<size_t>(k)] = theta_sum[static_cast<size_t>(k)] / static_cast<double>(kFoldInAveraged);
    }
  }
  return thetas;
}

}  // namespace m3l::pltm
