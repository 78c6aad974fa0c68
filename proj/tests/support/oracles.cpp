#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace m3l::test {

using corpus::Matrix;
using corpus::TupleDataset;
using numkit::SeededRng;
using numkit::Vector;

double infonce_enumeration(const std::vector<std::vector<Vector>>& thetas, double tau,
                           bool include_self) {
  const int n_tuples = static_cast<int>(thetas.size());
  const int n_views = static_cast<int>(thetas[0].size());
  if (n_tuples < 2) return 0.0;
  auto dot = [](const Vector& a, const Vector& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  double total = 0.0;
  for (int i = 0; i < n_tuples; ++i) {
    for (int a = 0; a < n_views; ++a) {
      for (int b = 0; b < n_views; ++b) {
        if (a == b) continue;
        double den = 0.0;
        for (int j = 0; j < n_tuples; ++j) {
          for (int c = 0; c < n_views; ++c) {
            for (int d = 0; d < n_views; ++d) {
              if (!include_self && j == i && c == d) continue;
              den += std::exp(dot(thetas[static_cast<size_t>(i)][static_cast<size_t>(c)],
                                  thetas[static_cast<size_t>(j)][static_cast<size_t>(d)]) /
                              tau);
            }
          }
        }
        const double positive = std::exp(dot(thetas[static_cast<size_t>(i)][static_cast<size_t>(a)],
                                             thetas[static_cast<size_t>(i)][static_cast<size_t>(b)]) /
                                         tau);
        total += -std::log(positive / den);
      }
    }
  }
  return total;
}

namespace {

double jsd_naive(std::span<const double> p, std::span<const double> q) {
  double out = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) out += 0.5 * p[k] * std::log(p[k] / m);
    if (q[k] > 0.0) out += 0.5 * q[k] * std::log(q[k] / m);
  }
  return out;
}

// 1 + number of candidates strictly better than `target` under (jsd, index)
int rank_of(std::span<const double> query, const Matrix& candidates, int target) {
  const double d_target = jsd_naive(query, candidates.row(target));
  int better = 0;
  for (int c = 0; c < candidates.rows; ++c) {
    const double d = jsd_naive(query, candidates.row(c));
    if (d < d_target || (d == d_target && c < target)) ++better;
  }
  return better + 1;
}

}  // namespace

double mrr_bruteforce(const Matrix& queries, const Matrix& candidates, const std::vector<int>& gold) {
  double sum = 0.0;
  for (int q = 0; q < queries.rows; ++q) {
    sum += 1.0 / static_cast<double>(rank_of(queries.row(q), candidates, gold[static_cast<size_t>(q)]));
  }
  return sum / static_cast<double>(queries.rows);
}

double uap_bruteforce(const Matrix& queries, const Matrix& candidates,
                      const std::vector<std::vector<int>>& gold) {
  double sum_ap = 0.0;
  for (int q = 0; q < queries.rows; ++q) {
    const auto& relevant = gold[static_cast<size_t>(q)];
    double ap = 0.0;
    for (int r : relevant) {
      const int rank_r = rank_of(queries.row(q), candidates, r);
      // precision at rank_r: relevant items ranked at or above r
      int hits = 0;
      for (int other : relevant) {
        if (rank_of(queries.row(q), candidates, other) <= rank_r) ++hits;
      }
      ap += static_cast<double>(hits) / static_cast<double>(rank_r);
    }
    sum_ap += ap / static_cast<double>(relevant.size());
  }
  return sum_ap / static_cast<double>(queries.rows);
}

std::vector<int> max_assignment(const std::vector<std::vector<double>>& score) {
  const int n = static_cast<int>(score.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Hungarian with potentials on the negated scores (1-based internals)
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = -score[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[static_cast<size_t>(j)] > 0) result[static_cast<size_t>(p[static_cast<size_t>(j)]) - 1] = j - 1;
  }
  return result;
}

std::vector<double> reference_single_view_elbo(const TupleDataset& dataset, int n_topics,
                                               int hidden_dim, int epochs, int batch_size,
                                               uint64_t seed, double learning_rate) {
  const int n_tuples = dataset.tuple_count;
  const int dim = dataset.views[0].embedding_dim;
  const int v_size = dataset.views[0].vocabulary->size();
  const int kk = n_topics;
  const int hh = hidden_dim;
  const Matrix& emb = dataset.embeddings[0];
  const auto& bows = dataset.bows[0];

  // parameter blocks, flat, in the trainer's visit order
  std::vector<double> w1(static_cast<size_t>(hh) * dim), b1(static_cast<size_t>(hh), 0.0);
  std::vector<double> wmu(static_cast<size_t>(kk) * hh), bmu(static_cast<size_t>(kk), 0.0);
  std::vector<double> wlv(static_cast<size_t>(kk) * hh), blv(static_cast<size_t>(kk), 0.0);
  std::vector<double> beta(static_cast<size_t>(kk) * v_size);

  {
    SeededRng init_rng(numkit::derive_seed(seed, "init"));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(dim));
    const double sh = 1.0 / std::sqrt(static_cast<double>(hh));
    for (auto& x : w1) x = s1 * init_rng.normal();
    for (auto& x : wmu) x = sh * init_rng.normal();
    for (auto& x : wlv) x = sh * init_rng.normal();
    for (auto& x : beta) x = 0.02 * init_rng.normal();
  }

  const double prior_var = 1.0 - 1.0 / static_cast<double>(kk);
  const double log_prior_var = std::log(prior_var);

  // one flat Adam state across all blocks, visit order
  const size_t n_params = w1.size() + b1.size() + wmu.size() + bmu.size() + wlv.size() + blv.size() + beta.size();
  std::vector<double> adam_m(n_params, 0.0), adam_v(n_params, 0.0);
  long long t_step = 0;
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  std::vector<double*> blocks = {w1.data(), b1.data(), wmu.data(), bmu.data(), wlv.data(), blv.data(), beta.data()};
  std::vector<size_t> sizes = {w1.size(), b1.size(), wmu.size(), bmu.size(), wlv.size(), blv.size(), beta.size()};

  SeededRng shuffle_rng(numkit::derive_seed(seed, "shuffle"));
  SeededRng eps_rng(numkit::derive_seed(seed, "eps"));

  std::vector<int> order(static_cast<size_t>(n_tuples));
  for (int i = 0; i < n_tuples; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<double> epoch_totals;
  std::vector<double> g_w1(w1.size()), g_b1(b1.size()), g_wmu(wmu.size()), g_bmu(bmu.size());
  std::vector<double> g_wlv(wlv.size()), g_blv(blv.size()), g_beta(beta.size());
  std::vector<double*> g_blocks = {g_w1.data(), g_b1.data(), g_wmu.data(), g_bmu.data(),
                                   g_wlv.data(), g_blv.data(), g_beta.data()};

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (int i = n_tuples - 1; i >= 1; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<uint64_t>(i) + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    double epoch_total = 0.0;
    for (int start = 0; start < n_tuples; start += batch_size) {
      const int stop = std::min(start + batch_size, n_tuples);
      for (auto& g : {std::ref(g_w1), std::ref(g_b1), std::ref(g_wmu), std::ref(g_bmu), std::ref(g_wlv),
                      std::ref(g_blv), std::ref(g_beta)}) {
        std::fill(g.get().begin(), g.get().end(), 0.0);
      }
      double recon_batch = 0.0;
      double prior_batch = 0.0;

      for (int pos = start; pos < stop; ++pos) {
        const int id = order[static_cast<size_t>(pos)];
        std::vector<double> eps(static_cast<size_t>(kk));
        for (auto& e : eps) e = eps_rng.normal();
        const double* x = emb.data.data() + static_cast<size_t>(id) * dim;

        // forward
        std::vector<double> a1(static_cast<size_t>(hh)), h(static_cast<size_t>(hh));
        for (int j = 0; j < hh; ++j) {
          double acc = 0.0;
          for (int d = 0; d < dim; ++d) acc += w1[static_cast<size_t>(j) * dim + d] * x[d];
          a1[static_cast<size_t>(j)] = acc + b1[static_cast<size_t>(j)];
          h[static_cast<size_t>(j)] = a1[static_cast<size_t>(j)] > 30.0
                                          ? a1[static_cast<size_t>(j)]
                                          : std::log1p(std::exp(a1[static_cast<size_t>(j)]));
        }
        std::vector<double> mu(static_cast<size_t>(kk)), lv(static_cast<size_t>(kk)), sigma(static_cast<size_t>(kk));
        std::vector<double> z(static_cast<size_t>(kk)), theta(static_cast<size_t>(kk));
        for (int k = 0; k < kk; ++k) {
          double am = 0.0, al = 0.0;
          for (int j = 0; j < hh; ++j) {
            am += wmu[static_cast<size_t>(k) * hh + j] * h[static_cast<size_t>(j)];
          }
          for (int j = 0; j < hh; ++j) {
            al += wlv[static_cast<size_t>(k) * hh + j] * h[static_cast<size_t>(j)];
          }
          mu[static_cast<size_t>(k)] = am + bmu[static_cast<size_t>(k)];
          lv[static_cast<size_t>(k)] = al + blv[static_cast<size_t>(k)];
          sigma[static_cast<size_t>(k)] = std::exp(0.5 * lv[static_cast<size_t>(k)]);
          z[static_cast<size_t>(k)] = mu[static_cast<size_t>(k)] + sigma[static_cast<size_t>(k)] * eps[static_cast<size_t>(k)];
        }
        double z_max = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < kk; ++k) z_max = std::max(z_max, z[static_cast<size_t>(k)]);
        double z_sum = 0.0;
        for (int k = 0; k < kk; ++k) z_sum += std::exp(z[static_cast<size_t>(k)] - z_max);
        const double z_lse = z_max + std::log(z_sum);
        for (int k = 0; k < kk; ++k) theta[static_cast<size_t>(k)] = std::exp(z[static_cast<size_t>(k)] - z_lse);

        // reconstruction
        const auto& bow = bows[static_cast<size_t>(id)];
        std::vector<double> g_theta(static_cast<size_t>(kk), 0.0);
        if (!bow.entries.empty()) {
          std::vector<double> logits(static_cast<size_t>(v_size), 0.0);
          for (int k = 0; k < kk; ++k) {
            const double tk = theta[static_cast<size_t>(k)];
            for (int w = 0; w < v_size; ++w) {
              logits[static_cast<size_t>(w)] += tk * beta[static_cast<size_t>(k) * v_size + w];
            }
          }
          double l_max = -std::numeric_limits<double>::infinity();
          for (int w = 0; w < v_size; ++w) l_max = std::max(l_max, logits[static_cast<size_t>(w)]);
          double l_sum = 0.0;
          for (int w = 0; w < v_size; ++w) l_sum += std::exp(logits[static_cast<size_t>(w)] - l_max);
          const double l_lse = l_max + std::log(l_sum);
          std::vector<double> log_probs(static_cast<size_t>(v_size));
          for (int w = 0; w < v_size; ++w) log_probs[static_cast<size_t>(w)] = logits[static_cast<size_t>(w)] - l_lse;

          double total_count = 0.0;
          for (const auto& [idx, count] : bow.entries) {
            recon_batch -= static_cast<double>(count) * log_probs[static_cast<size_t>(idx)];
            total_count += static_cast<double>(count);
          }
          std::vector<double> g_logits(static_cast<size_t>(v_size));
          for (int w = 0; w < v_size; ++w) {
            g_logits[static_cast<size_t>(w)] = total_count * std::exp(log_probs[static_cast<size_t>(w)]);
          }
          for (const auto& [idx, count] : bow.entries) {
            g_logits[static_cast<size_t>(idx)] -= static_cast<double>(count);
          }
          for (int k = 0; k < kk; ++k) {
            const double tk = theta[static_cast<size_t>(k)];
            double acc = 0.0;
            for (int w = 0; w < v_size; ++w) {
              const double gl = g_logits[static_cast<size_t>(w)];
              acc += beta[static_cast<size_t>(k) * v_size + w] * gl;
              g_beta[static_cast<size_t>(k) * v_size + w] += tk * gl;
            }
            g_theta[static_cast<size_t>(k)] += acc;
          }
        }

        // prior KL and its grads
        std::vector<double> g_mu(static_cast<size_t>(kk)), g_lv(static_cast<size_t>(kk));
        for (int k = 0; k < kk; ++k) {
          const double var = std::exp(lv[static_cast<size_t>(k)]);
          const double dm = mu[static_cast<size_t>(k)] - 0.0;
          prior_batch += 0.5 * (log_prior_var - lv[static_cast<size_t>(k)] + (var + dm * dm) / prior_var - 1.0);
          g_mu[static_cast<size_t>(k)] = dm / prior_var;
          g_lv[static_cast<size_t>(k)] = 0.5 * (var / prior_var - 1.0);
        }

        // softmax and reparameterization backward
        double inner = 0.0;
        for (int k = 0; k < kk; ++k) inner += g_theta[static_cast<size_t>(k)] * theta[static_cast<size_t>(k)];
        for (int k = 0; k < kk; ++k) {
          const double gz = theta[static_cast<size_t>(k)] * (g_theta[static_cast<size_t>(k)] - inner);
          g_mu[static_cast<size_t>(k)] += gz;
          g_lv[static_cast<size_t>(k)] += gz * eps[static_cast<size_t>(k)] * 0.5 * sigma[static_cast<size_t>(k)];
        }

        // heads
        std::vector<double> g_h(static_cast<size_t>(hh), 0.0);
        for (int k = 0; k < kk; ++k) {
          const double gmk = g_mu[static_cast<size_t>(k)];
          const double glk = g_lv[static_cast<size_t>(k)];
          for (int j = 0; j < hh; ++j) {
            g_h[static_cast<size_t>(j)] += wmu[static_cast<size_t>(k) * hh + j] * gmk +
                                           wlv[static_cast<size_t>(k) * hh + j] * glk;
            g_wmu[static_cast<size_t>(k) * hh + j] += gmk * h[static_cast<size_t>(j)];
            g_wlv[static_cast<size_t>(k) * hh + j] += glk * h[static_cast<size_t>(j)];
          }
          g_bmu[static_cast<size_t>(k)] += gmk;
          g_blv[static_cast<size_t>(k)] += glk;
        }

        // hidden layer
        for (int j = 0; j < hh; ++j) {
          const double aj = a1[static_cast<size_t>(j)];
          const double gate = aj >= 0.0 ? 1.0 / (1.0 + std::exp(-aj)) : std::exp(aj) / (1.0 + std::exp(aj));
          const double ga = g_h[static_cast<size_t>(j)] * gate;
          for (int d = 0; d < dim; ++d) g_w1[static_cast<size_t>(j) * dim + d] += ga * x[d];
          g_b1[static_cast<size_t>(j)] += ga;
        }
      }

      epoch_total += recon_batch + prior_batch + 0.0 + 50.0 * 0.0;

      // Adam over the flat parameter vector
      ++t_step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_step));
      size_t offset = 0;
      for (size_t blk = 0; blk < blocks.size(); ++blk) {
        double* p = blocks[blk];
        const double* g = g_blocks[blk];
        for (size_t idx = 0; idx < sizes[blk]; ++idx) {
          double& m = adam_m[offset + idx];
          double& v = adam_v[offset + idx];
          m = beta1 * m + (1.0 - beta1) * g[idx];
          v = beta2 * v + (1.0 - beta2) * g[idx] * g[idx];
          const double m_hat = m / c1;
          const double v_hat = v / c2;
          p[idx] -= learning_rate * m_hat / (std::sqrt(v_hat) + adam_eps);
        }
        offset += sizes[blk];
      }
    }
    epoch_totals.push_back(epoch_total);
  }
  return epoch_totals;
}

}  // namespace m3l::test
