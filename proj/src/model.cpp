#include "m3l/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace m3l::model {

std::string to_string(Architecture arch) {
  return arch == Architecture::m3l_contrast ? "m3l_contrast" : "zeroshot";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "m3l_contrast") return Architecture::m3l_contrast;
  if (s == "zeroshot") return Architecture::zeroshot;
  fail(ErrorCode::config_bad_value, "unknown architecture '" + s + "'");
}

void ModelConfig::validate() const {
  if (n_topics < 2) fail(ErrorCode::config_bad_value, "n_topics must be >= 2");
  if (hidden_dim < 1) fail(ErrorCode::config_bad_value, "hidden_dim must be >= 1");
  if (temperature <= 0.0) fail(ErrorCode::config_bad_value, "temperature must be > 0");
  if (contrastive_weight < 0.0) fail(ErrorCode::config_bad_value, "contrastive_weight must be >= 0");
  if (inference_samples < 1) fail(ErrorCode::config_bad_value, "inference_samples must be >= 1");
  if (!prior_mean.empty() && static_cast<int>(prior_mean.size()) != n_topics) {
    fail(ErrorCode::config_bad_value, "prior_mean must have n_topics entries");
  }
  if (!prior_variance.empty()) {
    if (static_cast<int>(prior_variance.size()) != n_topics) {
      fail(ErrorCode::config_bad_value, "prior_variance must have n_topics entries");
    }
    for (double v : prior_variance) {
      if (v <= 0.0) fail(ErrorCode::config_bad_value, "prior_variance entries must be > 0");
    }
  }
}

Vector ModelConfig::resolved_prior_mean() const {
  if (!prior_mean.empty()) return prior_mean;
  return Vector(static_cast<size_t>(n_topics), 0.0);
}

Vector ModelConfig::resolved_prior_variance() const {
  if (!prior_variance.empty()) return prior_variance;
  return Vector(static_cast<size_t>(n_topics), 1.0 - 1.0 / static_cast<double>(n_topics));
}

void visit_params(ModelParams& params, const std::function<void(std::vector<double>&)>& fn) {
  for (auto& enc : params.encoders) {
    fn(enc.w1.data);
    fn(enc.b1);
    fn(enc.w_mu.data);
    fn(enc.b_mu);
    fn(enc.w_lv.data);
    fn(enc.b_lv);
  }
  for (auto& dec : params.decoders) {
    if (dec.has_value()) fn(dec->beta.data);
  }
}

void visit_params(const ModelParams& params, const std::function<void(const std::vector<double>&)>& fn) {
  for (const auto& enc : params.encoders) {
    fn(enc.w1.data);
    fn(enc.b1);
    fn(enc.w_mu.data);
    fn(enc.b_mu);
    fn(enc.w_lv.data);
    fn(enc.b_lv);
  }
  for (const auto& dec : params.decoders) {
    if (dec.has_value()) fn(dec->beta.data);
  }
}

namespace {

void fill_normal(Matrix& m, SeededRng& rng, double stddev) {
  for (auto& x : m.data) x = stddev * rng.normal();
}

EncoderParams zero_encoder(int hidden, int dim, int k) {
  EncoderParams enc;
  enc.w1 = Matrix(hidden, dim);
  enc.b1 = Vector(static_cast<size_t>(hidden), 0.0);
  enc.w_mu = Matrix(k, hidden);
  enc.b_mu = Vector(static_cast<size_t>(k), 0.0);
  enc.w_lv = Matrix(k, hidden);
  enc.b_lv = Vector(static_cast<size_t>(k), 0.0);
  return enc;
}

ModelParams zero_like(const ModelParams& params) {
  ModelParams g;
  for (const auto& enc : params.encoders) {
    g.encoders.push_back(zero_encoder(enc.w1.rows, enc.w1.cols, static_cast<int>(enc.b_mu.size())));
  }
  for (const auto& dec : params.decoders) {
    if (dec.has_value()) {
      g.decoders.emplace_back(DecoderParams{Matrix(dec->beta.rows, dec->beta.cols)});
    } else {
      g.decoders.emplace_back(std::nullopt);
    }
  }
  return g;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, const std::vector<ViewSpec>& views, uint64_t seed) {
  config.validate();
  if (views.empty()) fail(ErrorCode::empty_dataset, "init_params: no views");
  const int k = config.n_topics;
  const int hidden = config.hidden_dim;
  const bool zeroshot = config.architecture == Architecture::zeroshot;
  if (zeroshot && views.size() != 1) {
    fail(ErrorCode::arch_mismatch, "zeroshot architecture takes exactly one view");
  }

  SeededRng rng(seed);
  ModelParams params;
  for (const auto& view : views) {
    EncoderParams enc = zero_encoder(hidden, view.embedding_dim, k);
    fill_normal(enc.w1, rng, 1.0 / std::sqrt(static_cast<double>(view.embedding_dim)));
    fill_normal(enc.w_mu, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
    fill_normal(enc.w_lv, rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
    params.encoders.push_back(std::move(enc));
  }
  for (const auto& view : views) {
    if (view.modality == corpus::Modality::text) {
      if (!view.vocabulary.has_value()) fail(ErrorCode::missing_bow, "text view '" + view.name + "' has no vocabulary");
      DecoderParams dec{Matrix(k, view.vocabulary->size())};
      fill_normal(dec.beta, rng, 0.02);
      params.decoders.emplace_back(std::move(dec));
    } else {
      params.decoders.emplace_back(std::nullopt);
    }
  }
  return params;
}

GaussianPosterior encode(const EncoderParams& enc, std::span<const double> x) {
  if (static_cast<int>(x.size()) != enc.w1.cols) {
    fail(ErrorCode::dim_mismatch, "encode: input dim " + std::to_string(x.size()) + " vs encoder dim " +
                                      std::to_string(enc.w1.cols));
  }
  Vector a1 = numkit::matvec(enc.w1, x);
  for (size_t i = 0; i < a1.size(); ++i) a1[i] += enc.b1[i];
  const Vector h = numkit::softplus(a1);
  GaussianPosterior post;
  post.mu = numkit::matvec(enc.w_mu, h);
  for (size_t i = 0; i < post.mu.size(); ++i) post.mu[i] += enc.b_mu[i];
  post.logvar = numkit::matvec(enc.w_lv, h);
  for (size_t i = 0; i < post.logvar.size(); ++i) post.logvar[i] += enc.b_lv[i];
  return post;
}

std::pair<Vector, Vector> reparameterize(const GaussianPosterior& post, std::span<const double> eps) {
  if (eps.size() != post.mu.size()) fail(ErrorCode::dim_mismatch, "reparameterize: eps size mismatch");
  Vector z(post.mu.size());
  for (size_t i = 0; i < z.size(); ++i) {
    z[i] = post.mu[i] + std::exp(0.5 * post.logvar[i]) * eps[i];
  }
  return {z, numkit::softmax(z)};
}

double reconstruction_nll(const DecoderParams& dec, std::span<const double> theta, const BowVector& bow) {
  if (bow.entries.empty()) return 0.0;
  if (static_cast<int>(theta.size()) != dec.beta.rows) {
    fail(ErrorCode::dim_mismatch, "reconstruction_nll: theta size vs decoder topics");
  }
  const int v_size = dec.beta.cols;
  Vector logits(static_cast<size_t>(v_size), 0.0);
  for (int k = 0; k < dec.beta.rows; ++k) {
    const double tk = theta[static_cast<size_t>(k)];
    const auto row = dec.beta.row(k);
    for (int v = 0; v < v_size; ++v) logits[static_cast<size_t>(v)] += tk * row[static_cast<size_t>(v)];
  }
  const Vector log_probs = numkit::log_softmax(logits);
  double nll = 0.0;
  for (const auto& [idx, count] : bow.entries) {
    nll -= static_cast<double>(count) * log_probs[static_cast<size_t>(idx)];
  }
  return nll;
}

double prior_kl(const GaussianPosterior& post, const ModelConfig& config) {
  const Vector pm = config.resolved_prior_mean();
  const Vector pv = config.resolved_prior_variance();
  if (post.mu.size() != pm.size()) fail(ErrorCode::dim_mismatch, "prior_kl: posterior size vs n_topics");
  double kl = 0.0;
  for (size_t i = 0; i < post.mu.size(); ++i) {
    const double var = std::exp(post.logvar[i]);
    const double dm = post.mu[i] - pm[i];
    kl += std::log(pv[i]) - post.logvar[i] + (var + dm * dm) / pv[i] - 1.0;
  }
  return 0.5 * kl;
}

double pairwise_gaussian_kl(const GaussianPosterior& p, const GaussianPosterior& q) {
  if (p.mu.size() != q.mu.size()) fail(ErrorCode::dim_mismatch, "pairwise_gaussian_kl: dimension mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < p.mu.size(); ++i) {
    const double dm = p.mu[i] - q.mu[i];
    kl += q.logvar[i] - p.logvar[i] + (std::exp(p.logvar[i]) + dm * dm) * std::exp(-q.logvar[i]) - 1.0;
  }
  return 0.5 * kl;
}

namespace {

// Shared forward/backward workhorse for the contrastive term. Similarities
// are theta dot products over tau; each anchor's denominator is evaluated as
// a log-sum-exp so extreme temperatures stay finite. grad, when given,
// receives d(loss)/d(theta) accumulated in place.
double infonce_impl(const std::vector<std::vector<Vector>>& thetas, double tau, bool include_self,
                    std::vector<std::vector<Vector>>* grad) {
  const int n_tuples = static_cast<int>(thetas.size());
  if (n_tuples < 1) fail(ErrorCode::empty_input, "infonce_batch: empty batch");
  const int n_views = static_cast<int>(thetas[0].size());
  if (n_views < 2) fail(ErrorCode::bad_argument, "infonce_batch: needs at least two views");
  for (const auto& tuple : thetas) {
    if (static_cast<int>(tuple.size()) != n_views) fail(ErrorCode::bad_argument, "infonce_batch: ragged batch");
  }
  if (n_tuples == 1) return 0.0;  // no negative pairs

  const int slots = n_tuples * n_views;
  auto slot = [n_views](int tuple, int view) { return tuple * n_views + view; };
  std::vector<double> sims(static_cast<size_t>(slots) * static_cast<size_t>(slots));
  for (int p = 0; p < slots; ++p) {
    const auto& tp = thetas[static_cast<size_t>(p / n_views)][static_cast<size_t>(p % n_views)];
    for (int q = p; q < slots; ++q) {
      const auto& tq = thetas[static_cast<size_t>(q / n_views)][static_cast<size_t>(q % n_views)];
      const double s = numkit::dot(tp, tq) / tau;
      sims[static_cast<size_t>(p) * slots + q] = s;
      sims[static_cast<size_t>(q) * slots + p] = s;
    }
  }
  auto sim = [&](int i, int c, int j, int d) {
    return sims[static_cast<size_t>(slot(i, c)) * slots + slot(j, d)];
  };

  const int positives_per_tuple = n_views * (n_views - 1);
  double loss = 0.0;
  for (int i = 0; i < n_tuples; ++i) {
    // log D_i via max-shifted sum over the allowed (j, c, d) triples
    double max_sim = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < n_views; ++c) {
      for (int j = 0; j < n_tuples; ++j) {
        for (int d = 0; d < n_views; ++d) {
          if (!include_self && j == i && c == d) continue;
          max_sim = std::max(max_sim, sim(i, c, j, d));
        }
      }
    }
    double denom = 0.0;
    for (int c = 0; c < n_views; ++c) {
      for (int j = 0; j < n_tuples; ++j) {
        for (int d = 0; d < n_views; ++d) {
          if (!include_self && j == i && c == d) continue;
          denom += std::exp(sim(i, c, j, d) - max_sim);
        }
      }
    }
    const double lse = max_sim + std::log(denom);

    for (int a = 0; a < n_views; ++a) {
      for (int b = 0; b < n_views; ++b) {
        if (a == b) continue;
        loss += lse - sim(i, a, i, b);
        if (grad != nullptr) {
          // d/d theta of the -similarity part of this positive term
          auto& ga = (*grad)[static_cast<size_t>(i)][static_cast<size_t>(a)];
          auto& gb = (*grad)[static_cast<size_t>(i)][static_cast<size_t>(b)];
          const auto& ta = thetas[static_cast<size_t>(i)][static_cast<size_t>(a)];
          const auto& tb = thetas[static_cast<size_t>(i)][static_cast<size_t>(b)];
          for (size_t k = 0; k < ta.size(); ++k) {
            ga[k] -= tb[k] / tau;
            gb[k] -= ta[k] / tau;
          }
        }
      }
    }

    if (grad != nullptr) {
      // d/d theta of positives_per_tuple * log D_i
      const double scale = static_cast<double>(positives_per_tuple) / tau;
      for (int c = 0; c < n_views; ++c) {
        const auto& tc = thetas[static_cast<size_t>(i)][static_cast<size_t>(c)];
        auto& gc = (*grad)[static_cast<size_t>(i)][static_cast<size_t>(c)];
        for (int j = 0; j < n_tuples; ++j) {
          for (int d = 0; d < n_views; ++d) {
            if (!include_self && j == i && c == d) continue;
            const double w = std::exp(sim(i, c, j, d) - lse) * scale;
            const auto& td = thetas[static_cast<size_t>(j)][static_cast<size_t>(d)];
            auto& gd = (*grad)[static_cast<size_t>(j)][static_cast<size_t>(d)];
            for (size_t k = 0; k < tc.size(); ++k) {
              gc[k] += w * td[k];
              gd[k] += w * tc[k];
            }
          }
        }
      }
    }
  }
  return loss;
}

struct ViewForward {
  Vector x;       // input embedding
  Vector a1;      // pre-activation of the hidden layer
  Vector h;       // softplus(a1)
  GaussianPosterior post;
  Vector sigma;   // exp(logvar / 2)
  Vector z;
  Vector theta;
};

ViewForward forward_view(const EncoderParams& enc, std::span<const double> x, std::span<const double> eps) {
  ViewForward f;
  f.x.assign(x.begin(), x.end());
  f.a1 = numkit::matvec(enc.w1, x);
  for (size_t i = 0; i < f.a1.size(); ++i) f.a1[i] += enc.b1[i];
  f.h = numkit::softplus(f.a1);
  f.post.mu = numkit::matvec(enc.w_mu, f.h);
  for (size_t i = 0; i < f.post.mu.size(); ++i) f.post.mu[i] += enc.b_mu[i];
  f.post.logvar = numkit::matvec(enc.w_lv, f.h);
  for (size_t i = 0; i < f.post.logvar.size(); ++i) f.post.logvar[i] += enc.b_lv[i];
  f.sigma.resize(f.post.logvar.size());
  for (size_t i = 0; i < f.sigma.size(); ++i) f.sigma[i] = std::exp(0.5 * f.post.logvar[i]);
  f.z.resize(f.post.mu.size());
  for (size_t i = 0; i < f.z.size(); ++i) f.z[i] = f.post.mu[i] + f.sigma[i] * eps[i];
  f.theta = numkit::softmax(f.z);
  return f;
}

void check_batch(const ModelParams& params, const TupleBatch& batch, const EpsDraws& eps,
                 const ModelConfig& config) {
  if (batch.data == nullptr || batch.ids.empty()) fail(ErrorCode::empty_input, "empty batch");
  const int n_views = batch.data->n_views();
  if (config.architecture == Architecture::zeroshot) {
    if (params.encoders.size() != 1 || n_views != 1) {
      fail(ErrorCode::arch_mismatch, "zeroshot model trains on exactly one view");
    }
  } else if (static_cast<int>(params.encoders.size()) != n_views) {
    fail(ErrorCode::dim_mismatch, "params cover " + std::to_string(params.encoders.size()) + " views, batch has " +
                                      std::to_string(n_views));
  }
  if (static_cast<int>(eps.size()) != batch.size()) fail(ErrorCode::dim_mismatch, "eps draws vs batch size");
  for (const auto& per_view : eps) {
    if (static_cast<int>(per_view.size()) != n_views) fail(ErrorCode::dim_mismatch, "eps draws vs view count");
    for (const auto& e : per_view) {
      if (static_cast<int>(e.size()) != config.n_topics) fail(ErrorCode::dim_mismatch, "eps draw vs n_topics");
    }
  }
  for (int id : batch.ids) {
    if (id < 0 || id >= batch.data->tuple_count) fail(ErrorCode::index_out_of_range, "batch tuple id out of range");
  }
}

}  // namespace

double infonce_batch(const std::vector<std::vector<Vector>>& thetas, double tau, bool include_self) {
  if (tau <= 0.0) fail(ErrorCode::bad_argument, "infonce_batch: tau must be positive");
  return infonce_impl(thetas, tau, include_self, nullptr);
}

LossBreakdown total_loss(const ModelParams& params, const TupleBatch& batch, const EpsDraws& eps,
                         const ModelConfig& config) {
  check_batch(params, batch, eps, config);
  const TupleDataset& data = *batch.data;
  const int n_views = data.n_views();
  const int n_items = batch.size();
  const bool zeroshot = config.architecture == Architecture::zeroshot;

  LossBreakdown out;
  std::vector<std::vector<Vector>> thetas(static_cast<size_t>(n_items));
  std::vector<std::vector<GaussianPosterior>> posts(static_cast<size_t>(n_items));

  for (int i = 0; i < n_items; ++i) {
    const int id = batch.ids[static_cast<size_t>(i)];
    for (int v = 0; v < n_views; ++v) {
      const int enc_idx = zeroshot ? 0 : v;
      const ViewForward f = forward_view(params.encoders[static_cast<size_t>(enc_idx)],
                                         data.embeddings[static_cast<size_t>(v)].row(id),
                                         eps[static_cast<size_t>(i)][static_cast<size_t>(v)]);
      if (data.views[static_cast<size_t>(v)].modality == corpus::Modality::text) {
        const auto& dec = params.decoders[static_cast<size_t>(zeroshot ? 0 : v)];
        if (!dec.has_value()) fail(ErrorCode::missing_bow, "text view without decoder");
        out.recon_nll += reconstruction_nll(*dec, f.theta, data.bows[static_cast<size_t>(v)][static_cast<size_t>(id)]);
      }
      out.prior_kl += prior_kl(f.post, config);
      thetas[static_cast<size_t>(i)].push_back(f.theta);
      posts[static_cast<size_t>(i)].push_back(f.post);
    }
    for (int a = 0; a < n_views; ++a) {
      for (int b = 0; b < n_views; ++b) {
        if (a == b) continue;
        out.pairwise_kl += pairwise_gaussian_kl(posts[static_cast<size_t>(i)][static_cast<size_t>(a)],
                                                posts[static_cast<size_t>(i)][static_cast<size_t>(b)]);
      }
    }
  }
  if (n_views >= 2) {
    out.contrastive = infonce_impl(thetas, config.temperature, config.include_denominator_self_terms, nullptr);
  }
  out.total = out.recon_nll + out.prior_kl + out.pairwise_kl + config.contrastive_weight * out.contrastive;
  return out;
}

BackwardResult backward(const ModelParams& params, const TupleBatch& batch, const EpsDraws& eps,
                        const ModelConfig& config) {
  check_batch(params, batch, eps, config);
  const TupleDataset& data = *batch.data;
  const int n_views = data.n_views();
  const int n_items = batch.size();
  const int k_topics = config.n_topics;
  const bool zeroshot = config.architecture == Architecture::zeroshot;
  const double s_weight = config.contrastive_weight;

  const Vector pm = config.resolved_prior_mean();
  const Vector pv = config.resolved_prior_variance();

  BackwardResult res;
  res.grads = zero_like(params);

  // forward pass, keeping intermediates
  std::vector<std::vector<ViewForward>> fwd(static_cast<size_t>(n_items));
  std::vector<std::vector<Vector>> thetas(static_cast<size_t>(n_items));
  for (int i = 0; i < n_items; ++i) {
    const int id = batch.ids[static_cast<size_t>(i)];
    for (int v = 0; v < n_views; ++v) {
      const int enc_idx = zeroshot ? 0 : v;
      fwd[static_cast<size_t>(i)].push_back(forward_view(params.encoders[static_cast<size_t>(enc_idx)],
                                                         data.embeddings[static_cast<size_t>(v)].row(id),
                                                         eps[static_cast<size_t>(i)][static_cast<size_t>(v)]));
      thetas[static_cast<size_t>(i)].push_back(fwd[static_cast<size_t>(i)].back().theta);
    }
  }

  // contrastive loss and its gradient in theta space
  std::vector<std::vector<Vector>> g_theta(static_cast<size_t>(n_items));
  std::vector<std::vector<Vector>> g_mu(static_cast<size_t>(n_items));
  std::vector<std::vector<Vector>> g_lv(static_cast<size_t>(n_items));
  for (int i = 0; i < n_items; ++i) {
    g_theta[static_cast<size_t>(i)].assign(static_cast<size_t>(n_views), Vector(static_cast<size_t>(k_topics), 0.0));
    g_mu[static_cast<size_t>(i)].assign(static_cast<size_t>(n_views), Vector(static_cast<size_t>(k_topics), 0.0));
    g_lv[static_cast<size_t>(i)].assign(static_cast<size_t>(n_views), Vector(static_cast<size_t>(k_topics), 0.0));
  }
  if (n_views >= 2) {
    res.loss.contrastive =
        infonce_impl(thetas, config.temperature, config.include_denominator_self_terms, &g_theta);
    if (s_weight != 1.0) {
      for (auto& per_item : g_theta) {
        for (auto& g : per_item) {
          for (auto& x : g) x *= s_weight;
        }
      }
    }
  }

  // per-view terms: reconstruction and prior KL
  for (int i = 0; i < n_items; ++i) {
    const int id = batch.ids[static_cast<size_t>(i)];
    for (int v = 0; v < n_views; ++v) {
      const ViewForward& f = fwd[static_cast<size_t>(i)][static_cast<size_t>(v)];
      Vector& gt = g_theta[static_cast<size_t>(i)][static_cast<size_t>(v)];
      Vector& gm = g_mu[static_cast<size_t>(i)][static_cast<size_t>(v)];
      Vector& gl = g_lv[static_cast<size_t>(i)][static_cast<size_t>(v)];

      if (data.views[static_cast<size_t>(v)].modality == corpus::Modality::text) {
        const auto& dec = params.decoders[static_cast<size_t>(zeroshot ? 0 : v)];
        if (!dec.has_value()) fail(ErrorCode::missing_bow, "text view without decoder");
        const BowVector& bow = data.bows[static_cast<size_t>(v)][static_cast<size_t>(id)];
        if (!bow.entries.empty()) {
          const Matrix& beta = dec->beta;
          const int v_size = beta.cols;
          Vector logits(static_cast<size_t>(v_size), 0.0);
          for (int k = 0; k < k_topics; ++k) {
            const double tk = f.theta[static_cast<size_t>(k)];
            const auto brow = beta.row(k);
            for (int w = 0; w < v_size; ++w) logits[static_cast<size_t>(w)] += tk * brow[static_cast<size_t>(w)];
          }
          const Vector log_probs = numkit::log_softmax(logits);
          double total_count = 0.0;
          for (const auto& [idx, count] : bow.entries) {
            res.loss.recon_nll -= static_cast<double>(count) * log_probs[static_cast<size_t>(idx)];
            total_count += static_cast<double>(count);
          }
          // d loss / d logits = total_count * softmax(logits) - counts
          Vector g_logits(static_cast<size_t>(v_size));
          for (int w = 0; w < v_size; ++w) {
            g_logits[static_cast<size_t>(w)] = total_count * std::exp(log_probs[static_cast<size_t>(w)]);
          }
          for (const auto& [idx, count] : bow.entries) {
            g_logits[static_cast<size_t>(idx)] -= static_cast<double>(count);
          }
          Matrix& g_beta = res.grads.decoders[static_cast<size_t>(zeroshot ? 0 : v)]->beta;
          for (int k = 0; k < k_topics; ++k) {
            const auto brow = beta.row(k);
            auto grow = g_beta.row(k);
            const double tk = f.theta[static_cast<size_t>(k)];
            double acc = 0.0;
            for (int w = 0; w < v_size; ++w) {
              const double gl_w = g_logits[static_cast<size_t>(w)];
              acc += brow[static_cast<size_t>(w)] * gl_w;
              grow[static_cast<size_t>(w)] += tk * gl_w;
            }
            gt[static_cast<size_t>(k)] += acc;
          }
        }
      }

      // prior KL: d/d mu = (mu - m0)/v0, d/d logvar = (exp(logvar)/v0 - 1)/2
      for (int k = 0; k < k_topics; ++k) {
        const double var = std::exp(f.post.logvar[static_cast<size_t>(k)]);
        const double dm = f.post.mu[static_cast<size_t>(k)] - pm[static_cast<size_t>(k)];
        res.loss.prior_kl += 0.5 * (std::log(pv[static_cast<size_t>(k)]) - f.post.logvar[static_cast<size_t>(k)] +
                                    (var + dm * dm) / pv[static_cast<size_t>(k)] - 1.0);
        gm[static_cast<size_t>(k)] += dm / pv[static_cast<size_t>(k)];
        gl[static_cast<size_t>(k)] += 0.5 * (var / pv[static_cast<size_t>(k)] - 1.0);
      }
    }
  }

  // pairwise KL over ordered view pairs inside each tuple
  for (int i = 0; i < n_items; ++i) {
    for (int a = 0; a < n_views; ++a) {
      for (int b = 0; b < n_views; ++b) {
        if (a == b) continue;
        const GaussianPosterior& p = fwd[static_cast<size_t>(i)][static_cast<size_t>(a)].post;
        const GaussianPosterior& q = fwd[static_cast<size_t>(i)][static_cast<size_t>(b)].post;
        Vector& gma = g_mu[static_cast<size_t>(i)][static_cast<size_t>(a)];
        Vector& gmb = g_mu[static_cast<size_t>(i)][static_cast<size_t>(b)];
        Vector& gla = g_lv[static_cast<size_t>(i)][static_cast<size_t>(a)];
        Vector& glb = g_lv[static_cast<size_t>(i)][static_cast<size_t>(b)];
        for (int k = 0; k < k_topics; ++k) {
          const double dm = p.mu[static_cast<size_t>(k)] - q.mu[static_cast<size_t>(k)];
          const double var_p = std::exp(p.logvar[static_cast<size_t>(k)]);
          const double inv_var_q = std::exp(-q.logvar[static_cast<size_t>(k)]);
          res.loss.pairwise_kl += 0.5 * (q.logvar[static_cast<size_t>(k)] - p.logvar[static_cast<size_t>(k)] +
                                         (var_p + dm * dm) * inv_var_q - 1.0);
          gma[static_cast<size_t>(k)] += dm * inv_var_q;
          gmb[static_cast<size_t>(k)] -= dm * inv_var_q;
          gla[static_cast<size_t>(k)] += 0.5 * (var_p * inv_var_q - 1.0);
          glb[static_cast<size_t>(k)] += 0.5 * (1.0 - (var_p + dm * dm) * inv_var_q);
        }
      }
    }
  }

  // theta -> z -> (mu, logvar) -> encoder weights
  for (int i = 0; i < n_items; ++i) {
    for (int v = 0; v < n_views; ++v) {
      const ViewForward& f = fwd[static_cast<size_t>(i)][static_cast<size_t>(v)];
      const int enc_idx = zeroshot ? 0 : v;
      const EncoderParams& enc = params.encoders[static_cast<size_t>(enc_idx)];
      EncoderParams& g_enc = res.grads.encoders[static_cast<size_t>(enc_idx)];
      const Vector& gt = g_theta[static_cast<size_t>(i)][static_cast<size_t>(v)];
      Vector& gm = g_mu[static_cast<size_t>(i)][static_cast<size_t>(v)];
      Vector& gl = g_lv[static_cast<size_t>(i)][static_cast<size_t>(v)];

      // softmax backward: g_z = theta * (g_theta - g_theta . theta)
      double inner = 0.0;
      for (int k = 0; k < k_topics; ++k) inner += gt[static_cast<size_t>(k)] * f.theta[static_cast<size_t>(k)];
      const Vector& e = eps[static_cast<size_t>(i)][static_cast<size_t>(v)];
      for (int k = 0; k < k_topics; ++k) {
        const double gz = f.theta[static_cast<size_t>(k)] * (gt[static_cast<size_t>(k)] - inner);
        gm[static_cast<size_t>(k)] += gz;
        gl[static_cast<size_t>(k)] += gz * e[static_cast<size_t>(k)] * 0.5 * f.sigma[static_cast<size_t>(k)];
      }

      // heads: mu = w_mu h + b_mu, logvar = w_lv h + b_lv
      const int hidden = static_cast<int>(f.h.size());
      Vector g_h(static_cast<size_t>(hidden), 0.0);
      for (int k = 0; k < k_topics; ++k) {
        const double gmk = gm[static_cast<size_t>(k)];
        const double glk = gl[static_cast<size_t>(k)];
        const auto wmu_row = enc.w_mu.row(k);
        const auto wlv_row = enc.w_lv.row(k);
        auto gmu_row = g_enc.w_mu.row(k);
        auto glv_row = g_enc.w_lv.row(k);
        for (int j = 0; j < hidden; ++j) {
          g_h[static_cast<size_t>(j)] += wmu_row[static_cast<size_t>(j)] * gmk + wlv_row[static_cast<size_t>(j)] * glk;
          gmu_row[static_cast<size_t>(j)] += gmk * f.h[static_cast<size_t>(j)];
          glv_row[static_cast<size_t>(j)] += glk * f.h[static_cast<size_t>(j)];
        }
        g_enc.b_mu[static_cast<size_t>(k)] += gmk;
        g_enc.b_lv[static_cast<size_t>(k)] += glk;
      }

      // hidden layer: h = softplus(w1 x + b1)
      const Vector gate = numkit::softplus_grad(f.a1);
      const int dim = static_cast<int>(f.x.size());
      for (int j = 0; j < hidden; ++j) {
        const double ga = g_h[static_cast<size_t>(j)] * gate[static_cast<size_t>(j)];
        auto g_row = g_enc.w1.row(j);
        for (int d = 0; d < dim; ++d) g_row[static_cast<size_t>(d)] += ga * f.x[static_cast<size_t>(d)];
        g_enc.b1[static_cast<size_t>(j)] += ga;
      }
    }
  }

  res.loss.total = res.loss.recon_nll + res.loss.prior_kl + res.loss.pairwise_kl +
                   config.contrastive_weight * res.loss.contrastive;
  return res;
}

Vector infer_theta(const ModelParams& params, int view, std::span<const double> x, int n_samples,
                   SeededRng& rng) {
  if (view < 0 || view >= static_cast<int>(params.encoders.size())) {
    fail(ErrorCode::view_not_found, "infer_theta: no encoder for view index " + std::to_string(view));
  }
  const GaussianPosterior post = encode(params.encoders[static_cast<size_t>(view)], x);
  const size_t k = post.mu.size();
  if (n_samples <= 0) {
    return numkit::softmax(post.mu);
  }
  Vector mean(k, 0.0);
  Vector z(k);
  for (int s = 0; s < n_samples; ++s) {
    for (size_t i = 0; i < k; ++i) z[i] = post.mu[i] + std::exp(0.5 * post.logvar[i]) * rng.normal();
    const Vector theta = numkit::softmax(z);
    for (size_t i = 0; i < k; ++i) mean[i] += theta[i];
  }
  for (size_t i = 0; i < k; ++i) mean[i] /= static_cast<double>(n_samples);
  return mean;
}

Vector infer_crossview_zeroshot(const ModelParams& params, const ModelConfig& config,
                                std::span<const double> x, int n_samples, SeededRng& rng) {
  if (config.architecture != Architecture::zeroshot) {
    fail(ErrorCode::arch_mismatch, "infer_crossview_zeroshot requires the zeroshot architecture");
  }
  return infer_theta(params, 0, x, n_samples, rng);
}

std::vector<std::vector<std::string>> top_words(const DecoderParams& dec, const corpus::Vocabulary& vocab,
                                                int top_k) {
  if (vocab.size() != dec.beta.cols) fail(ErrorCode::dim_mismatch, "top_words: vocabulary vs decoder width");
  if (top_k < 1 || top_k > dec.beta.cols) fail(ErrorCode::bad_argument, "top_words: top_k out of range");
  std::vector<std::vector<std::string>> topics;
  topics.reserve(static_cast<size_t>(dec.beta.rows));
  std::vector<int> order(static_cast<size_t>(dec.beta.cols));
  for (int k = 0; k < dec.beta.rows; ++k) {
    const auto row = dec.beta.row(k);
    for (int v = 0; v < dec.beta.cols; ++v) order[static_cast<size_t>(v)] = v;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (row[static_cast<size_t>(a)] != row[static_cast<size_t>(b)]) {
        return row[static_cast<size_t>(a)] > row[static_cast<size_t>(b)];
      }
      return vocab.token(a) < vocab.token(b);
    });
    std::vector<std::string> words;
    words.reserve(static_cast<size_t>(top_k));
    for (int j = 0; j < top_k; ++j) words.push_back(vocab.token(order[static_cast<size_t>(j)]));
    topics.push_back(std::move(words));
  }
  return topics;
}

}  // namespace m3l::model
