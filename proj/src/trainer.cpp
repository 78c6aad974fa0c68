#include "m3l/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "io_util.hpp"

namespace m3l::train {

using namespace m3l::detail;
using corpus::Matrix;
using corpus::Modality;
using corpus::TupleDataset;
using corpus::ViewSpec;
using numkit::SeededRng;
using numkit::Vector;

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::config_bad_value, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::config_bad_value, "batch_size must be >= 1");
  if (arch == Architecture::zeroshot && zeroshot_train_view.empty()) {
    fail(ErrorCode::config_bad_value, "zeroshot architecture needs zeroshot_train_view");
  }
  adam.validate();
}

namespace {

std::vector<std::span<double>> param_segments(ModelParams& params) {
  std::vector<std::span<double>> segs;
  model::visit_params(params, [&](std::vector<double>& v) { segs.emplace_back(v); });
  return segs;
}

std::vector<std::span<const double>> grad_segments(const ModelParams& params) {
  std::vector<std::span<const double>> segs;
  model::visit_params(params, [&](const std::vector<double>& v) { segs.emplace_back(v); });
  return segs;
}

size_t count_params(const ModelParams& params) {
  size_t n = 0;
  model::visit_params(params, [&](const std::vector<double>& v) { n += v.size(); });
  return n;
}

TupleDataset single_view_dataset(const TupleDataset& ds, int view) {
  TupleDataset out;
  out.views = {ds.views[static_cast<size_t>(view)]};
  out.embeddings = {ds.embeddings[static_cast<size_t>(view)]};
  out.bows = {ds.bows[static_cast<size_t>(view)]};
  out.tuple_count = ds.tuple_count;
  return out;
}

}  // namespace

TrainResult train(const TupleDataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (dataset.tuple_count < 1 || dataset.n_views() < 1) {
    fail(ErrorCode::empty_dataset, "train: dataset has no tuples");
  }
  if (model_config.architecture != train_config.arch) {
    fail(ErrorCode::arch_mismatch, "model and trainer disagree on the architecture");
  }

  const bool zeroshot = train_config.arch == Architecture::zeroshot;
  TupleDataset reduced;
  const TupleDataset* work = &dataset;
  if (zeroshot) {
    reduced = single_view_dataset(dataset, dataset.view_index(train_config.zeroshot_train_view));
    work = &reduced;
  }

  TrainResult result;
  result.bundle.config = model_config;
  result.bundle.train_config = train_config;
  result.bundle.views = work->views;
  result.bundle.params =
      model::init_params(model_config, work->views, numkit::derive_seed(train_config.seed, "init"));

  SeededRng shuffle_rng(numkit::derive_seed(train_config.seed, "shuffle"));
  SeededRng eps_rng(numkit::derive_seed(train_config.seed, "eps"));

  ModelParams& params = result.bundle.params;
  optim::AdamState adam(count_params(params), train_config.adam);
  const auto p_segs = param_segments(params);

  const int n_tuples = work->tuple_count;
  const int n_views = work->n_views();
  const int k_topics = model_config.n_topics;
  std::vector<int> order(static_cast<size_t>(n_tuples));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    if (train_config.shuffle) {
      for (int i = n_tuples - 1; i >= 1; --i) {
        const int j = static_cast<int>(shuffle_rng.uniform_int(static_cast<uint64_t>(i) + 1));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
      }
    }
    LossBreakdown sums;
    for (int start = 0; start < n_tuples; start += train_config.batch_size) {
      const int stop = std::min(start + train_config.batch_size, n_tuples);
      model::TupleBatch batch;
      batch.data = work;
      batch.ids.assign(order.begin() + start, order.begin() + stop);

      model::EpsDraws eps(static_cast<size_t>(batch.size()));
      for (auto& per_view : eps) {
        per_view.reserve(static_cast<size_t>(n_views));
        for (int v = 0; v < n_views; ++v) {
          per_view.push_back(numkit::sample_standard_normal(eps_rng, k_topics));
        }
      }

      const model::BackwardResult res = model::backward(params, batch, eps, model_config);
      sums.recon_nll += res.loss.recon_nll;
      sums.prior_kl += res.loss.prior_kl;
      sums.pairwise_kl += res.loss.pairwise_kl;
      sums.contrastive += res.loss.contrastive;
      sums.total += res.loss.total;

      adam.step(p_segs, grad_segments(res.grads));
    }
    result.history.epochs.push_back(sums);
  }
  return result;
}

namespace {

constexpr uint32_t kBundleVersion = 1;

void write_emb1_block(std::ostream& out, const Matrix& m) {
  out.write("EMB1", 4);
  write_u32(out, static_cast<uint32_t>(m.rows));
  write_u32(out, static_cast<uint32_t>(m.cols));
  for (double v : m.data) write_f32(out, static_cast<float>(v));
}

void write_vector_block(std::ostream& out, const Vector& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.data = v;
  write_emb1_block(out, m);
}

Matrix read_emb1_block(std::istream& in, const std::string& what) {
  char magic[4];
  if (!in.read(magic, 4)) fail(ErrorCode::truncated, "truncated bundle at " + what);
  if (std::string_view(magic, 4) != "EMB1") fail(ErrorCode::bad_magic, "bad block magic at " + what);
  uint32_t rows, cols;
  if (!read_u32(in, rows) || !read_u32(in, cols)) fail(ErrorCode::truncated, "truncated bundle at " + what);
  if (rows == 0 || cols == 0) fail(ErrorCode::zero_dims, "zero-sized block at " + what);
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (size_t i = 0; i < m.size(); ++i) {
    float f;
    if (!read_f32(in, f)) fail(ErrorCode::truncated, "truncated bundle payload at " + what);
    m.data[i] = static_cast<double>(f);
  }
  return m;
}

Vector read_vector_block(std::istream& in, const std::string& what, size_t expect) {
  const Matrix m = read_emb1_block(in, what);
  if (m.rows != 1 || m.size() != expect) fail(ErrorCode::dim_mismatch, "unexpected vector shape at " + what);
  return m.data;
}

std::string join_doubles(const Vector& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

Vector split_doubles(const std::string& s, const std::string& context) {
  Vector out;
  for (const auto& part : split(s, ',')) out.push_back(parse_double(part, context));
  return out;
}

std::string config_block(const ModelBundle& bundle) {
  const ModelConfig& mc = bundle.config;
  const TrainConfig& tc = bundle.train_config;
  std::string text;
  auto put = [&](const std::string& key, const std::string& value) { text += key + "=" + value + "\n"; };
  put("architecture", model::to_string(mc.architecture));
  put("n_topics", std::to_string(mc.n_topics));
  put("hidden_dim", std::to_string(mc.hidden_dim));
  put("temperature", format_double(mc.temperature));
  put("contrastive_weight", format_double(mc.contrastive_weight));
  put("inference_samples", std::to_string(mc.inference_samples));
  put("include_denominator_self_terms", mc.include_denominator_self_terms ? "true" : "false");
  if (!mc.prior_mean.empty()) put("prior_mean", join_doubles(mc.prior_mean));
  if (!mc.prior_variance.empty()) put("prior_variance", join_doubles(mc.prior_variance));
  put("epochs", std::to_string(tc.epochs));
  put("batch_size", std::to_string(tc.batch_size));
  put("seed", std::to_string(tc.seed));
  put("shuffle", tc.shuffle ? "true" : "false");
  if (!tc.zeroshot_train_view.empty()) put("zeroshot_train_view", tc.zeroshot_train_view);
  put("learning_rate", format_double(tc.adam.learning_rate));
  put("adam_beta1", format_double(tc.adam.beta1));
  put("adam_beta2", format_double(tc.adam.beta2));
  put("adam_eps", format_double(tc.adam.epsilon));
  put("grad_clip_norm", format_double(tc.adam.clip_norm));
  return text;
}

void apply_config_line(ModelBundle& bundle, const std::string& key, const std::string& value) {
  ModelConfig& mc = bundle.config;
  TrainConfig& tc = bundle.train_config;
  const std::string ctx = "bundle config key " + key;
  if (key == "architecture") {
    mc.architecture = model::architecture_from_string(value);
    tc.arch = mc.architecture;
  } else if (key == "n_topics") {
    mc.n_topics = static_cast<int>(parse_int(value, ctx));
  } else if (key == "hidden_dim") {
    mc.hidden_dim = static_cast<int>(parse_int(value, ctx));
  } else if (key == "temperature") {
    mc.temperature = parse_double(value, ctx);
  } else if (key == "contrastive_weight") {
    mc.contrastive_weight = parse_double(value, ctx);
  } else if (key == "inference_samples") {
    mc.inference_samples = static_cast<int>(parse_int(value, ctx));
  } else if (key == "include_denominator_self_terms") {
    mc.include_denominator_self_terms = value == "true";
  } else if (key == "prior_mean") {
    mc.prior_mean = split_doubles(value, ctx);
  } else if (key == "prior_variance") {
    mc.prior_variance = split_doubles(value, ctx);
  } else if (key == "epochs") {
    tc.epochs = static_cast<int>(parse_int(value, ctx));
  } else if (key == "batch_size") {
    tc.batch_size = static_cast<int>(parse_int(value, ctx));
  } else if (key == "seed") {
    tc.seed = static_cast<uint64_t>(parse_int(value, ctx));
  } else if (key == "shuffle") {
    tc.shuffle = value == "true";
  } else if (key == "zeroshot_train_view") {
    tc.zeroshot_train_view = value;
  } else if (key == "learning_rate") {
    tc.adam.learning_rate = parse_double(value, ctx);
  } else if (key == "adam_beta1") {
    tc.adam.beta1 = parse_double(value, ctx);
  } else if (key == "adam_beta2") {
    tc.adam.beta2 = parse_double(value, ctx);
  } else if (key == "adam_eps") {
    tc.adam.epsilon = parse_double(value, ctx);
  } else if (key == "grad_clip_norm") {
    tc.adam.clip_norm = parse_double(value, ctx);
  } else {
    fail(ErrorCode::config_unknown_key, "unknown bundle config key '" + key + "'");
  }
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::string& path) {
  const int n_views = static_cast<int>(bundle.views.size());
  if (n_views == 0 || bundle.params.encoders.size() != bundle.views.size()) {
    fail(ErrorCode::bad_argument, "save_model: bundle views and encoders disagree");
  }
  atomic_write(path, [&](std::ostream& out) {
    out.write("MDL1", 4);
    write_u32(out, kBundleVersion);
    write_u32(out, static_cast<uint32_t>(bundle.config.n_topics));
    write_u32(out, static_cast<uint32_t>(n_views));
    for (int v = 0; v < n_views; ++v) {
      const ViewSpec& spec = bundle.views[static_cast<size_t>(v)];
      const model::EncoderParams& enc = bundle.params.encoders[static_cast<size_t>(v)];
      write_u8(out, spec.modality == Modality::text ? 0 : 1);
      write_lp_string(out, spec.name);
      write_u32(out, static_cast<uint32_t>(spec.embedding_dim));
      write_emb1_block(out, enc.w1);
      write_vector_block(out, enc.b1);
      write_emb1_block(out, enc.w_mu);
      write_vector_block(out, enc.b_mu);
      write_emb1_block(out, enc.w_lv);
      write_vector_block(out, enc.b_lv);
      if (spec.modality == Modality::text) {
        const auto& dec = bundle.params.decoders[static_cast<size_t>(v)];
        if (!dec.has_value() || !spec.vocabulary.has_value()) {
          fail(ErrorCode::missing_bow, "save_model: text view '" + spec.name + "' lacks decoder or vocabulary");
        }
        write_emb1_block(out, dec->beta);
        write_u32(out, static_cast<uint32_t>(spec.vocabulary->size()));
        for (const auto& tok : spec.vocabulary->tokens()) write_lp_string(out, tok);
      }
    }
    write_lp_string(out, config_block(bundle));
  });
}

ModelBundle load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_open, "cannot open model bundle: " + path);
  char magic[4];
  if (!in.read(magic, 4)) fail(ErrorCode::truncated, "truncated bundle header: " + path);
  if (std::string_view(magic, 4) != "MDL1") fail(ErrorCode::bad_magic, "not an MDL1 bundle: " + path);
  uint32_t version, k_topics, n_views;
  if (!read_u32(in, version) || !read_u32(in, k_topics) || !read_u32(in, n_views)) {
    fail(ErrorCode::truncated, "truncated bundle header: " + path);
  }
  if (version != kBundleVersion) {
    fail(ErrorCode::bad_version, "unsupported bundle version " + std::to_string(version) + " in " + path);
  }
  if (k_topics == 0 || n_views == 0) fail(ErrorCode::zero_dims, "bundle declares zero topics or views: " + path);

  ModelBundle bundle;
  for (uint32_t v = 0; v < n_views; ++v) {
    const std::string what = "view " + std::to_string(v) + " of " + path;
    uint8_t modality;
    if (!read_u8(in, modality)) fail(ErrorCode::truncated, "truncated bundle at " + what);
    if (modality > 1) fail(ErrorCode::parse_error, "bad modality tag at " + what);
    ViewSpec spec;
    spec.modality = modality == 0 ? Modality::text : Modality::image;
    if (!read_lp_string(in, spec.name)) fail(ErrorCode::truncated, "truncated bundle at " + what);
    uint32_t dim;
    if (!read_u32(in, dim)) fail(ErrorCode::truncated, "truncated bundle at " + what);
    if (dim == 0) fail(ErrorCode::zero_dims, "zero embedding dim at " + what);
    spec.embedding_dim = static_cast<int>(dim);

    model::EncoderParams enc;
    enc.w1 = read_emb1_block(in, what + " w1");
    enc.b1 = read_vector_block(in, what + " b1", static_cast<size_t>(enc.w1.rows));
    enc.w_mu = read_emb1_block(in, what + " w_mu");
    enc.b_mu = read_vector_block(in, what + " b_mu", static_cast<size_t>(k_topics));
    enc.w_lv = read_emb1_block(in, what + " w_lv");
    enc.b_lv = read_vector_block(in, what + " b_lv", static_cast<size_t>(k_topics));
    if (enc.w1.cols != spec.embedding_dim || enc.w_mu.rows != static_cast<int>(k_topics) ||
        enc.w_lv.rows != static_cast<int>(k_topics) || enc.w_mu.cols != enc.w1.rows ||
        enc.w_lv.cols != enc.w1.rows) {
      fail(ErrorCode::dim_mismatch, "inconsistent encoder shapes at " + what);
    }
    bundle.params.encoders.push_back(std::move(enc));

    if (spec.modality == Modality::text) {
      model::DecoderParams dec;
      dec.beta = read_emb1_block(in, what + " beta");
      if (dec.beta.rows != static_cast<int>(k_topics)) fail(ErrorCode::dim_mismatch, "decoder topics at " + what);
      uint32_t vocab_size;
      if (!read_u32(in, vocab_size)) fail(ErrorCode::truncated, "truncated bundle at " + what);
      if (static_cast<int>(vocab_size) != dec.beta.cols) {
        fail(ErrorCode::dim_mismatch, "vocabulary size vs decoder width at " + what);
      }
      std::vector<std::string> tokens(vocab_size);
      for (auto& tok : tokens) {
        if (!read_lp_string(in, tok)) fail(ErrorCode::truncated, "truncated vocabulary at " + what);
      }
      spec.vocabulary = corpus::Vocabulary(std::move(tokens));
      bundle.params.decoders.emplace_back(std::move(dec));
    } else {
      bundle.params.decoders.emplace_back(std::nullopt);
    }
    bundle.views.push_back(std::move(spec));
  }

  std::string config_text;
  if (!read_lp_string(in, config_text)) fail(ErrorCode::truncated, "truncated config block: " + path);
  for (const auto& raw : split(config_text, '\n')) {
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) fail(ErrorCode::parse_error, "bad config line '" + raw + "' in " + path);
    apply_config_line(bundle, raw.substr(0, eq), raw.substr(eq + 1));
  }
  if (bundle.config.n_topics != static_cast<int>(k_topics)) {
    fail(ErrorCode::parse_error, "bundle header and config disagree on n_topics: " + path);
  }
  return bundle;
}

void save_history_tsv(const TrainHistory& history, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    out << "#epoch\trecon_nll\tprior_kl\tpairwise_kl\tcontrastive\ttotal\n";
    for (size_t e = 0; e < history.epochs.size(); ++e) {
      const LossBreakdown& row = history.epochs[e];
      out << e << '\t' << format_double(row.recon_nll) << '\t' << format_double(row.prior_kl) << '\t'
          << format_double(row.pairwise_kl) << '\t' << format_double(row.contrastive) << '\t'
          << format_double(row.total) << '\n';
    }
  });
}

}  // namespace m3l::train
