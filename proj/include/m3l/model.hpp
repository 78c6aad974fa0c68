#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "m3l/corpus.hpp"
#include "m3l/numkit.hpp"

namespace m3l::model {

using corpus::BowVector;
using corpus::TupleDataset;
using corpus::ViewSpec;
using numkit::Matrix;
using numkit::SeededRng;
using numkit::Vector;

enum class Architecture { m3l_contrast, zeroshot };

std::string to_string(Architecture arch);
Architecture architecture_from_string(const std::string& s);

struct ModelConfig {
  int n_topics = 100;
  int hidden_dim = 100;
  double temperature = 0.07;
  double contrastive_weight = 50.0;
  int inference_samples = 20;
  // Empty means the defaults: zero mean and (1 - 1/K) variance per component,
  // the logistic-normal stand-in for a symmetric Dirichlet prior.
  Vector prior_mean;
  Vector prior_variance;
  bool include_denominator_self_terms = false;
  Architecture architecture = Architecture::m3l_contrast;

  void validate() const;
  Vector resolved_prior_mean() const;
  Vector resolved_prior_variance() const;
};

// Per-view inference network: one hidden layer with softplus, then linear
// heads for the Gaussian mean and log-variance.
struct EncoderParams {
  Matrix w1;   // hidden x D
  Vector b1;   // hidden
  Matrix w_mu;  // K x hidden
  Vector b_mu;  // K
  Matrix w_lv;  // K x hidden
  Vector b_lv;  // K
};

struct DecoderParams {
  Matrix beta;  // K x V, unnormalized topic-word weights
};

// One encoder per view (exactly one in the zeroshot architecture) and one
// decoder per text view, indexed like the views they belong to.
struct ModelParams {
  std::vector<EncoderParams> encoders;
  std::vector<std::optional<DecoderParams>> decoders;
};

// Walks every parameter matrix/vector in a fixed order (per encoder: w1, b1,
// w_mu, b_mu, w_lv, b_lv; then each decoder beta). The optimizer and the
// serializer both rely on this order.
void visit_params(ModelParams& params, const std::function<void(std::vector<double>&)>& fn);
void visit_params(const ModelParams& params, const std::function<void(const std::vector<double>&)>& fn);

struct GaussianPosterior {
  Vector mu;
  Vector logvar;
};

struct LossBreakdown {
  double recon_nll = 0.0;
  double prior_kl = 0.0;
  double pairwise_kl = 0.0;
  double contrastive = 0.0;  // unweighted InfoNCE
  double total = 0.0;        // recon + prior + pairwise + s * contrastive
};

// References one batch of tuples inside a dataset.
struct TupleBatch {
  const TupleDataset* data = nullptr;
  std::vector<int> ids;

  int size() const { return static_cast<int>(ids.size()); }
};

// Noise draws for the reparameterization trick: eps[item][view] is a K-vector.
using EpsDraws = std::vector<std::vector<Vector>>;

// Weight entries ~ N(0, 1/fan_in) with fan_in = input dimension, biases zero,
// decoder weights ~ N(0, 0.02^2). Draw order: per view w1, w_mu, w_lv
// (row-major), then per text view beta; one splitmix stream for the seed.
ModelParams init_params(const ModelConfig& config, const std::vector<ViewSpec>& views, uint64_t seed);

GaussianPosterior encode(const EncoderParams& enc, std::span<const double> x);

// z = mu + exp(logvar/2) * eps; theta = softmax(z).
std::pair<Vector, Vector> reparameterize(const GaussianPosterior& post, std::span<const double> eps);

// -w . log softmax(theta^T beta) over the vocabulary axis.
double reconstruction_nll(const DecoderParams& dec, std::span<const double> theta, const BowVector& bow);

double prior_kl(const GaussianPosterior& post, const ModelConfig& config);

// Closed-form KL between diagonal Gaussians, KL(p || q). Asymmetric.
double pairwise_gaussian_kl(const GaussianPosterior& p, const GaussianPosterior& q);

// InfoNCE over a batch: sum over tuples i and ordered view pairs (a, b) of
// -log( exp(theta_i^a . theta_i^b / tau) / D_i ) where D_i sums
// exp(theta_i^c . theta_j^d / tau) over every tuple j and view pair (c, d),
// excluding exact self pairs (j == i and c == d) unless include_self.
// A single-tuple batch has no negatives and contributes exactly 0.
double infonce_batch(const std::vector<std::vector<Vector>>& thetas, double tau, bool include_self);

LossBreakdown total_loss(const ModelParams& params, const TupleBatch& batch, const EpsDraws& eps,
                         const ModelConfig& config);

struct BackwardResult {
  LossBreakdown loss;
  ModelParams grads;  // same shapes as the parameters
};

// Analytic gradient of total_loss with the eps draws held fixed.
BackwardResult backward(const ModelParams& params, const TupleBatch& batch, const EpsDraws& eps,
                        const ModelConfig& config);

// Mean of softmax(mu + sigma * eps) over n_samples draws; n_samples == 0 is
// the deterministic mode softmax(mu).
Vector infer_theta(const ModelParams& params, int view, std::span<const double> x, int n_samples,
                   SeededRng& rng);

// Zero-shot path: any embedding of matching width through the single trained
// encoder. Requires the zeroshot architecture.
Vector infer_crossview_zeroshot(const ModelParams& params, const ModelConfig& config,
                                std::span<const double> x, int n_samples, SeededRng& rng);

// Per topic, the top_k vocabulary entries by decoder weight, descending;
// ties resolved lexicographically.
std::vector<std::vector<std::string>> top_words(const DecoderParams& dec, const corpus::Vocabulary& vocab,
                                                int top_k);

}  // namespace m3l::model
