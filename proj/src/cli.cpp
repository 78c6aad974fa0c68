#include "m3l/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "io_util.hpp"
#include "m3l/eval.hpp"

namespace m3l::cli {

namespace fs = std::filesystem;
using namespace m3l::detail;
using corpus::Matrix;
using corpus::Modality;
using corpus::TupleDataset;
using corpus::ViewSpec;
using numkit::SeededRng;

namespace {

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text,
                                                               const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> entries;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    std::string line = strip_cr(raw);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t");
      if (first == std::string::npos) return std::string();
      const auto last = s.find_last_not_of(" \t");
      return s.substr(first, last - first + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorCode::parse_error, "expected key=value at " + origin + ":" + std::to_string(line_no));
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  fail(ErrorCode::config_bad_value, "key '" + key + "' wants true or false, got '" + value + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_open, "cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  for (const auto& [key, value] : parse_kv_text(text, "config")) {
    const std::string ctx = "config key " + key;
    if (key == "seed") {
      cfg.trainer.seed = static_cast<uint64_t>(parse_int(value, ctx));
    } else if (key == "architecture") {
      cfg.model.architecture = model::architecture_from_string(value);
      cfg.trainer.arch = cfg.model.architecture;
    } else if (key == "n_topics") {
      cfg.model.n_topics = static_cast<int>(parse_int(value, ctx));
    } else if (key == "hidden_dim") {
      cfg.model.hidden_dim = static_cast<int>(parse_int(value, ctx));
    } else if (key == "temperature") {
      cfg.model.temperature = parse_double(value, ctx);
    } else if (key == "contrastive_weight") {
      cfg.model.contrastive_weight = parse_double(value, ctx);
    } else if (key == "inference_samples") {
      cfg.model.inference_samples = static_cast<int>(parse_int(value, ctx));
    } else if (key == "include_denominator_self_terms") {
      cfg.model.include_denominator_self_terms = parse_bool(value, key);
    } else if (key == "prior_mean") {
      cfg.model.prior_mean.clear();
      for (const auto& part : split(value, ',')) cfg.model.prior_mean.push_back(parse_double(part, ctx));
    } else if (key == "prior_variance") {
      cfg.model.prior_variance.clear();
      for (const auto& part : split(value, ',')) cfg.model.prior_variance.push_back(parse_double(part, ctx));
    } else if (key == "epochs") {
      cfg.trainer.epochs = static_cast<int>(parse_int(value, ctx));
    } else if (key == "batch_size") {
      cfg.trainer.batch_size = static_cast<int>(parse_int(value, ctx));
    } else if (key == "shuffle") {
      cfg.trainer.shuffle = parse_bool(value, key);
    } else if (key == "zeroshot_train_view") {
      cfg.trainer.zeroshot_train_view = value;
    } else if (key == "learning_rate") {
      cfg.trainer.adam.learning_rate = parse_double(value, ctx);
    } else if (key == "adam_beta1") {
      cfg.trainer.adam.beta1 = parse_double(value, ctx);
    } else if (key == "adam_beta2") {
      cfg.trainer.adam.beta2 = parse_double(value, ctx);
    } else if (key == "adam_eps") {
      cfg.trainer.adam.epsilon = parse_double(value, ctx);
    } else if (key == "grad_clip_norm") {
      cfg.trainer.adam.clip_norm = parse_double(value, ctx);
    } else if (key == "pltm_alpha") {
      cfg.pltm.alpha = parse_double(value, ctx);
    } else if (key == "pltm_eta") {
      cfg.pltm.eta = parse_double(value, ctx);
    } else if (key == "pltm_iterations") {
      cfg.pltm.iterations = static_cast<int>(parse_int(value, ctx));
    } else if (key == "pltm_burn_in") {
      cfg.pltm.burn_in = static_cast<int>(parse_int(value, ctx));
    } else if (key == "pltm_sample_lag") {
      cfg.pltm.sample_lag = static_cast<int>(parse_int(value, ctx));
    } else {
      fail(ErrorCode::config_unknown_key, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return parse_run_config(read_file(path));
}

TupleDataset load_dataset(const std::string& path) {
  fs::path manifest(path);
  if (fs::is_directory(manifest)) manifest /= "dataset.cfg";
  const fs::path base = manifest.parent_path();
  const auto resolve = [&](const std::string& rel) { return (base / rel).string(); };

  std::vector<std::string> names;
  std::map<std::string, std::map<std::string, std::string>> view_keys;
  std::string alignment_path;
  for (const auto& [key, value] : parse_kv_text(read_file(manifest.string()), manifest.string())) {
    if (key == "views") {
      for (const auto& name : split(value, ',')) {
        if (name.empty()) fail(ErrorCode::config_bad_value, "empty view name in manifest");
        names.push_back(name);
      }
    } else if (key == "alignment") {
      alignment_path = value;
    } else if (key.starts_with("view.")) {
      const auto rest = key.substr(5);
      const auto dot = rest.rfind('.');
      if (dot == std::string::npos) fail(ErrorCode::config_unknown_key, "bad manifest key '" + key + "'");
      view_keys[rest.substr(0, dot)][rest.substr(dot + 1)] = value;
    } else {
      fail(ErrorCode::config_unknown_key, "unknown manifest key '" + key + "'");
    }
  }
  if (names.empty()) fail(ErrorCode::config_bad_value, "manifest has no views");

  std::vector<ViewSpec> specs;
  std::vector<Matrix> embeddings;
  std::vector<std::vector<corpus::BowVector>> bows;
  for (const auto& name : names) {
    auto it = view_keys.find(name);
    if (it == view_keys.end()) fail(ErrorCode::config_bad_value, "manifest lists view '" + name + "' without keys");
    auto& fields = it->second;
    for (const auto& [field, value] : fields) {
      if (field != "modality" && field != "embeddings" && field != "bow" && field != "vocab") {
        fail(ErrorCode::config_unknown_key, "unknown manifest key 'view." + name + "." + field + "'");
      }
    }
    ViewSpec spec;
    spec.name = name;
    const auto modality = fields.count("modality") ? fields["modality"] : std::string("text");
    if (modality == "text") {
      spec.modality = Modality::text;
    } else if (modality == "image") {
      spec.modality = Modality::image;
    } else {
      fail(ErrorCode::config_bad_value, "view '" + name + "': modality must be text or image");
    }
    if (!fields.count("embeddings")) fail(ErrorCode::config_bad_value, "view '" + name + "' needs embeddings=");
    embeddings.push_back(corpus::load_embeddings(resolve(fields["embeddings"])));
    if (spec.modality == Modality::text) {
      if (!fields.count("vocab") || !fields.count("bow")) {
        fail(ErrorCode::config_bad_value, "text view '" + name + "' needs vocab= and bow=");
      }
      spec.vocabulary = corpus::Vocabulary(corpus::load_token_lines(resolve(fields["vocab"])));
      bows.push_back(corpus::load_bow_file(resolve(fields["bow"]), spec.vocabulary->size()));
    } else {
      if (fields.count("vocab") || fields.count("bow")) {
        fail(ErrorCode::config_bad_value, "image view '" + name + "' cannot take vocab= or bow=");
      }
      bows.emplace_back();
    }
    specs.push_back(std::move(spec));
  }

  if (alignment_path.empty()) {
    return corpus::assemble_dataset(std::move(specs), embeddings, std::move(bows), nullptr);
  }
  const auto alignment = corpus::load_alignment(resolve(alignment_path), static_cast<int>(names.size()));
  return corpus::assemble_dataset(std::move(specs), embeddings, std::move(bows), &alignment);
}

int exit_code_for(ErrorCode code) { return 10 + static_cast<int>(code); }

namespace {

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void cmd_preprocess(const std::vector<std::string>& doc_files, const std::vector<std::string>& stop_files,
                    int vocab_size, const std::string& out_dir) {
  if (doc_files.empty()) fail(ErrorCode::bad_argument, "preprocess: at least one --docs file required");
  if (!stop_files.empty() && stop_files.size() != doc_files.size()) {
    fail(ErrorCode::bad_argument, "preprocess: --stopwords count must match --docs count");
  }
  fs::create_directories(out_dir);

  std::set<std::string> stems;
  std::vector<std::vector<std::vector<std::string>>> tokenized;  // per language, per line
  size_t n_lines = 0;
  for (size_t l = 0; l < doc_files.size(); ++l) {
    const std::string stem = stem_of(doc_files[l]);
    if (!stems.insert(stem).second) {
      fail(ErrorCode::bad_argument, "preprocess: duplicate document file stem '" + stem + "'");
    }
    std::unordered_set<std::string> stopwords;
    if (!stop_files.empty()) {
      for (const auto& w : corpus::load_token_lines(stop_files[l])) stopwords.insert(w);
    }
    std::ifstream in(doc_files[l]);
    if (!in) fail(ErrorCode::io_open, "cannot open " + doc_files[l]);
    std::vector<std::vector<std::string>> docs;
    std::string line;
    while (std::getline(in, line)) docs.push_back(corpus::tokenize(strip_cr(line), stopwords));
    if (l == 0) {
      n_lines = docs.size();
    } else if (docs.size() != n_lines) {
      fail(ErrorCode::line_count_mismatch, "'" + doc_files[l] + "' has " + std::to_string(docs.size()) +
                                               " lines, expected " + std::to_string(n_lines));
    }
    tokenized.push_back(std::move(docs));
  }
  if (n_lines == 0) fail(ErrorCode::empty_corpus, "preprocess: document files are empty");

  for (size_t l = 0; l < doc_files.size(); ++l) {
    const std::string stem = stem_of(doc_files[l]);
    const corpus::Vocabulary vocab = corpus::build_vocabulary(tokenized[l], vocab_size);
    std::vector<corpus::BowVector> bows;
    bows.reserve(tokenized[l].size());
    for (const auto& doc : tokenized[l]) bows.push_back(corpus::to_bow(doc, vocab));
    corpus::save_token_lines(vocab.tokens(), (fs::path(out_dir) / (stem + ".vocab.txt")).string());
    corpus::save_bow_file(bows, (fs::path(out_dir) / (stem + ".bow.tsv")).string());
  }
}

void write_manifest(const corpus::TupleDataset& ds, const std::string& dir) {
  std::string text = "views=";
  for (size_t v = 0; v < ds.views.size(); ++v) {
    if (v) text += ',';
    text += ds.views[v].name;
  }
  text += '\n';
  for (const auto& view : ds.views) {
    const bool text_view = view.modality == Modality::text;
    text += "view." + view.name + ".modality=" + (text_view ? "text" : "image") + "\n";
    text += "view." + view.name + ".embeddings=" + view.name + ".emb\n";
    if (text_view) {
      text += "view." + view.name + ".bow=" + view.name + ".bow.tsv\n";
      text += "view." + view.name + ".vocab=" + view.name + ".vocab.txt\n";
    }
  }
  atomic_write((fs::path(dir) / "dataset.cfg").string(), [&](std::ostream& out) { out << text; });
}

void write_dataset_files(const corpus::TupleDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  for (int v = 0; v < ds.n_views(); ++v) {
    const auto& view = ds.views[static_cast<size_t>(v)];
    corpus::save_embeddings(ds.embeddings[static_cast<size_t>(v)], (fs::path(dir) / (view.name + ".emb")).string());
    if (view.modality == Modality::text) {
      corpus::save_token_lines(view.vocabulary->tokens(), (fs::path(dir) / (view.name + ".vocab.txt")).string());
      corpus::save_bow_file(ds.bows[static_cast<size_t>(v)], (fs::path(dir) / (view.name + ".bow.tsv")).string());
    }
  }
  write_manifest(ds, dir);
}

void cmd_gen_synth(const corpus::SyntheticConfig& cfg, int holdout, const std::string& out_dir) {
  if (holdout < 0) fail(ErrorCode::bad_argument, "gen-synth: --holdout must be >= 0");
  corpus::SyntheticConfig full = cfg;
  full.tuples = cfg.tuples + holdout;
  const corpus::SyntheticData data = corpus::gen_synthetic(full);

  const corpus::TupleDataset train_split = holdout > 0 ? corpus::subset(data.dataset, 0, cfg.tuples) : data.dataset;
  write_dataset_files(train_split, out_dir);
  Matrix theta_train(cfg.tuples, data.theta_true.cols);
  std::copy_n(data.theta_true.data.begin(), theta_train.size(), theta_train.data.begin());
  eval::save_theta_tsv(theta_train, (fs::path(out_dir) / "truth_theta.tsv").string());
  for (int l = 0; l < cfg.languages; ++l) {
    corpus::save_embeddings(data.phi_true[static_cast<size_t>(l)],
                            (fs::path(out_dir) / ("truth_phi.lang" + std::to_string(l) + ".emb")).string());
  }

  if (holdout > 0) {
    const std::string held_dir = (fs::path(out_dir) / "holdout").string();
    write_dataset_files(corpus::subset(data.dataset, cfg.tuples, holdout), held_dir);
    Matrix theta_held(holdout, data.theta_true.cols);
    std::copy_n(data.theta_true.data.begin() + theta_train.size(), theta_held.size(), theta_held.data.begin());
    eval::save_theta_tsv(theta_held, (fs::path(held_dir) / "truth_theta.tsv").string());
  }
}

void cmd_train(const std::string& data_path, const std::string& config_path, const std::string& model_out,
               const std::string& history_out) {
  const RunConfig cfg = load_run_config(config_path);
  const TupleDataset dataset = load_dataset(data_path);
  const train::TrainResult result = train::train(dataset, cfg.model, cfg.trainer);
  train::save_model(result.bundle, model_out);
  if (!history_out.empty()) train::save_history_tsv(result.history, history_out);
}

int resolve_bundle_view(const train::ModelBundle& bundle, const std::string& view_name) {
  if (bundle.config.architecture == model::Architecture::zeroshot) {
    return 0;  // single encoder; any embedding of matching width goes through it
  }
  if (view_name.empty()) fail(ErrorCode::bad_argument, "--view is required for this model");
  for (size_t v = 0; v < bundle.views.size(); ++v) {
    if (bundle.views[v].name == view_name) return static_cast<int>(v);
  }
  fail(ErrorCode::view_not_found, "model bundle has no view named '" + view_name + "'");
}

Matrix infer_matrix(const train::ModelBundle& bundle, int view, const Matrix& embeddings, int samples,
                    uint64_t seed) {
  SeededRng rng(numkit::derive_seed(seed, "infer"));
  Matrix thetas(embeddings.rows, bundle.config.n_topics);
  for (int r = 0; r < embeddings.rows; ++r) {
    const numkit::Vector theta =
        model::infer_theta(bundle.params, view, embeddings.row(r), samples, rng);
    std::copy(theta.begin(), theta.end(), thetas.row(r).begin());
  }
  return thetas;
}

void cmd_infer(const std::string& model_path, const std::string& emb_path, const std::string& view_name,
               const std::string& out_path, int samples, uint64_t seed) {
  const train::ModelBundle bundle = train::load_model(model_path);
  const Matrix embeddings = corpus::load_embeddings(emb_path);
  const int view = resolve_bundle_view(bundle, view_name);
  const int n_samples = samples >= 0 ? samples : bundle.config.inference_samples;
  eval::save_theta_tsv(infer_matrix(bundle, view, embeddings, n_samples, seed), out_path);
}

void cmd_pltm_train(const std::string& data_path, const std::string& config_path, const std::string& out_dir) {
  const RunConfig cfg = load_run_config(config_path);
  const TupleDataset dataset = load_dataset(data_path);
  const pltm::PltmResult result =
      pltm::pltm_train(dataset, cfg.model.n_topics, cfg.pltm, cfg.trainer.seed);
  fs::create_directories(out_dir);
  int text_index = 0;
  for (int v = 0; v < dataset.n_views(); ++v) {
    if (dataset.views[static_cast<size_t>(v)].modality != Modality::text) continue;
    eval::save_theta_tsv(result.phi[static_cast<size_t>(text_index)],
                         (fs::path(out_dir) / ("phi." + dataset.views[static_cast<size_t>(v)].name + ".tsv")).string());
    ++text_index;
  }
  eval::save_theta_tsv(result.theta, (fs::path(out_dir) / "theta.tsv").string());
}

void cmd_pltm_infer(const std::vector<std::string>& phi_paths, const std::vector<std::string>& bow_paths,
                    const std::string& config_path, const std::string& out_path) {
  if (phi_paths.empty() || phi_paths.size() != bow_paths.size()) {
    fail(ErrorCode::bad_argument, "pltm infer: --phi and --bow must pair up");
  }
  const RunConfig cfg = load_run_config(config_path);
  std::vector<Matrix> phi;
  std::vector<std::vector<corpus::BowVector>> heldout;
  for (size_t l = 0; l < phi_paths.size(); ++l) {
    phi.push_back(eval::load_theta_tsv(phi_paths[l]));
    heldout.push_back(corpus::load_bow_file(bow_paths[l], phi.back().cols));
  }
  eval::save_theta_tsv(pltm::pltm_infer(phi, heldout, cfg.pltm, cfg.trainer.seed), out_path);
}

void cmd_eval_retrieval(const std::string& queries_path, const std::string& candidates_path,
                        const std::string& gold_path, const std::string& metric) {
  const Matrix queries = eval::load_theta_tsv(queries_path);
  const Matrix candidates = eval::load_theta_tsv(candidates_path);
  const auto gold = eval::load_gold_tsv(gold_path, queries.rows, candidates.rows);
  if (metric == "mrr") {
    std::vector<int> single;
    single.reserve(gold.size());
    for (const auto& rel : gold) {
      if (rel.size() != 1) {
        fail(ErrorCode::config_bad_value, "mrr expects exactly one relevant id per query");
      }
      single.push_back(rel[0]);
    }
    std::cout << "mrr=" << format_double(eval::mrr(queries, candidates, single)) << "\n";
  } else if (metric == "uap") {
    std::cout << "uap=" << format_double(eval::uap(queries, candidates, gold)) << "\n";
  } else {
    fail(ErrorCode::bad_argument, "--metric must be mrr or uap");
  }
  std::cout << "mean_jsd=" << format_double(eval::mean_gold_jsd(queries, candidates, gold)) << "\n";
}

std::vector<std::vector<int>> top_word_ids(const Matrix& beta, const corpus::Vocabulary& vocab, int top_n) {
  std::vector<std::vector<int>> ids;
  std::vector<int> order(static_cast<size_t>(beta.cols));
  for (int k = 0; k < beta.rows; ++k) {
    const auto row = beta.row(k);
    for (int v = 0; v < beta.cols; ++v) order[static_cast<size_t>(v)] = v;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (row[static_cast<size_t>(a)] != row[static_cast<size_t>(b)]) {
        return row[static_cast<size_t>(a)] > row[static_cast<size_t>(b)];
      }
      return vocab.token(a) < vocab.token(b);
    });
    ids.emplace_back(order.begin(), order.begin() + top_n);
  }
  return ids;
}

void cmd_eval_coherence(const std::string& model_path, const std::string& view_name,
                        const std::string& bow_path, int top_n) {
  const train::ModelBundle bundle = train::load_model(model_path);
  int view = -1;
  for (size_t v = 0; v < bundle.views.size(); ++v) {
    if (bundle.views[v].name == view_name) view = static_cast<int>(v);
  }
  if (view < 0) fail(ErrorCode::view_not_found, "model bundle has no view named '" + view_name + "'");
  const auto& spec = bundle.views[static_cast<size_t>(view)];
  const auto& dec = bundle.params.decoders[static_cast<size_t>(view)];
  if (spec.modality != Modality::text || !dec.has_value()) {
    fail(ErrorCode::bad_argument, "coherence needs a text view with a decoder");
  }
  if (top_n < 2 || top_n > spec.vocabulary->size()) {
    fail(ErrorCode::bad_argument, "--top-n must be in [2, vocabulary size]");
  }
  const auto docs = corpus::load_bow_file(bow_path, spec.vocabulary->size());
  if (docs.empty()) fail(ErrorCode::empty_corpus, "reference BoW corpus is empty: " + bow_path);
  const auto result = eval::npmi_coherence(top_word_ids(dec->beta, *spec.vocabulary, top_n), docs);
  for (size_t k = 0; k < result.per_topic.size(); ++k) {
    std::cout << "topic_" << k << "=" << format_double(result.per_topic[k]) << "\n";
  }
  std::cout << "mean_npmi=" << format_double(result.mean) << "\n";
}

void cmd_export(const std::string& model_path, const std::string& view_name, int top_k,
                const std::string& topics_out, const std::string& emb_path, const std::string& theta_out,
                int samples, uint64_t seed) {
  if (topics_out.empty() && theta_out.empty()) {
    fail(ErrorCode::bad_argument, "export: nothing to do; give --topics-out and/or --theta-out");
  }
  const train::ModelBundle bundle = train::load_model(model_path);
  if (!topics_out.empty()) {
    int view = -1;
    for (size_t v = 0; v < bundle.views.size(); ++v) {
      if (bundle.views[v].name == view_name) view = static_cast<int>(v);
    }
    if (view < 0) fail(ErrorCode::view_not_found, "model bundle has no view named '" + view_name + "'");
    const auto& spec = bundle.views[static_cast<size_t>(view)];
    const auto& dec = bundle.params.decoders[static_cast<size_t>(view)];
    if (spec.modality != Modality::text || !dec.has_value()) {
      fail(ErrorCode::bad_argument, "export --topics-out needs a text view");
    }
    eval::save_topics_tsv(model::top_words(*dec, *spec.vocabulary, top_k), topics_out);
  }
  if (!theta_out.empty()) {
    if (emb_path.empty()) fail(ErrorCode::bad_argument, "export --theta-out needs --embeddings");
    const Matrix embeddings = corpus::load_embeddings(emb_path);
    const int view = resolve_bundle_view(bundle, view_name);
    const int n_samples = samples >= 0 ? samples : bundle.config.inference_samples;
    eval::save_theta_tsv(infer_matrix(bundle, view, embeddings, n_samples, seed), theta_out);
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"multilingual and multimodal neural topic modelling on precomputed embeddings"};
  app.require_subcommand(1);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "tokenize documents and write vocabulary + BoW files");
  std::vector<std::string> doc_files, stop_files;
  int vocab_size = 2000;
  std::string out_dir;
  pre->add_option("--docs", doc_files, "document file, one per language (one doc per line)")->required();
  pre->add_option("--stopwords", stop_files, "stopword file per language, matched by position");
  pre->add_option("--vocab-size", vocab_size, "most-frequent words kept per language");
  pre->add_option("--out", out_dir, "output directory")->required();

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a planted-topic synthetic dataset");
  corpus::SyntheticConfig synth;
  int holdout = 0;
  std::string gen_out;
  gen->add_option("--languages", synth.languages, "number of text views");
  gen->add_option("--image-views", synth.image_views, "number of image views");
  gen->add_option("--tuples", synth.tuples, "training tuples");
  gen->add_option("--holdout", holdout, "extra held-out tuples written to <out>/holdout");
  gen->add_option("--true-topics", synth.true_topics, "planted topic count");
  gen->add_option("--vocab-size", synth.vocab_size, "vocabulary size per language");
  gen->add_option("--dim", synth.embedding_dim, "embedding dimension for every view");
  gen->add_option("--doc-length", synth.doc_length, "Poisson mean document length");
  gen->add_option("--modality-offset", synth.modality_offset, "gap added to image-view embeddings");
  gen->add_flag("--shared-projection", synth.shared_projection, "use one embedding map for all views");
  gen->add_option("--seed", synth.seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "train a topic model on a dataset manifest");
  std::string tr_data, tr_config, tr_out, tr_history;
  tr->add_option("--data", tr_data, "dataset directory or manifest path")->required();
  tr->add_option("--config", tr_config, "run configuration file (key=value)");
  tr->add_option("--out", tr_out, "output model bundle (MDL1)")->required();
  tr->add_option("--history", tr_history, "loss-history TSV output");

  // infer
  auto* inf = app.add_subcommand("infer", "write topic distributions for an embedding file");
  std::string inf_model, inf_emb, inf_view, inf_out;
  int inf_samples = -1;
  uint64_t inf_seed = 0;
  inf->add_option("--model", inf_model, "model bundle")->required();
  inf->add_option("--embeddings", inf_emb, "EMB1 embedding file")->required();
  inf->add_option("--view", inf_view, "view whose inference network to use (zeroshot bundles ignore this)");
  inf->add_option("--out", inf_out, "theta TSV output")->required();
  inf->add_option("--samples", inf_samples, "posterior samples to average (default: bundle setting; 0 = mean only)");
  inf->add_option("--seed", inf_seed, "sampling seed");

  // pltm
  auto* pl = app.add_subcommand("pltm", "polylingual topic model baseline (collapsed Gibbs)");
  pl->require_subcommand(1);
  auto* plt = pl->add_subcommand("train", "train on the text views of a dataset");
  std::string plt_data, plt_config, plt_out;
  plt->add_option("--data", plt_data, "dataset directory or manifest path")->required();
  plt->add_option("--config", plt_config, "run configuration file");
  plt->add_option("--out-dir", plt_out, "directory for phi.<view>.tsv and theta.tsv")->required();
  auto* pli = pl->add_subcommand("infer", "fold-in held-out tuples against frozen phi tables");
  std::vector<std::string> pli_phi, pli_bow;
  std::string pli_config, pli_out;
  pli->add_option("--phi", pli_phi, "phi TSV per language, in view order")->required();
  pli->add_option("--bow", pli_bow, "held-out BoW file per language, tuples aligned by line")->required();
  pli->add_option("--config", pli_config, "run configuration file");
  pli->add_option("--out", pli_out, "theta TSV output")->required();

  // eval-retrieval
  auto* evr = app.add_subcommand("eval-retrieval", "score cross-view retrieval from theta TSVs");
  std::string evr_queries, evr_candidates, evr_gold, evr_metric = "mrr";
  evr->add_option("--queries", evr_queries, "query theta TSV")->required();
  evr->add_option("--candidates", evr_candidates, "candidate theta TSV")->required();
  evr->add_option("--gold", evr_gold, "gold TSV (query_id <TAB> relevant_id[,relevant_id...])")->required();
  evr->add_option("--metric", evr_metric, "mrr or uap");

  // eval-coherence
  auto* evc = app.add_subcommand("eval-coherence", "NPMI topic coherence against a BoW corpus");
  std::string evc_model, evc_view, evc_bow;
  int evc_top_n = 10;
  evc->add_option("--model", evc_model, "model bundle")->required();
  evc->add_option("--view", evc_view, "text view name")->required();
  evc->add_option("--bow", evc_bow, "reference BoW corpus (the training BoW file)")->required();
  evc->add_option("--top-n", evc_top_n, "words per topic");

  // export
  auto* exp = app.add_subcommand("export", "write top-words and/or theta TSVs for external plotting");
  std::string exp_model, exp_view, exp_topics, exp_emb, exp_theta;
  int exp_top_k = 10;
  int exp_samples = -1;
  uint64_t exp_seed = 0;
  exp->add_option("--model", exp_model, "model bundle")->required();
  exp->add_option("--view", exp_view, "view name");
  exp->add_option("--top-k", exp_top_k, "words per topic for --topics-out");
  exp->add_option("--topics-out", exp_topics, "top-words TSV output");
  exp->add_option("--embeddings", exp_emb, "EMB1 file to infer topic distributions for");
  exp->add_option("--theta-out", exp_theta, "theta TSV output");
  exp->add_option("--samples", exp_samples, "posterior samples (default: bundle setting)");
  exp->add_option("--seed", exp_seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*pre) {
      cmd_preprocess(doc_files, stop_files, vocab_size, out_dir);
    } else if (*gen) {
      cmd_gen_synth(synth, holdout, gen_out);
    } else if (*tr) {
      cmd_train(tr_data, tr_config, tr_out, tr_history);
    } else if (*inf) {
      cmd_infer(inf_model, inf_emb, inf_view, inf_out, inf_samples, inf_seed);
    } else if (*plt) {
      cmd_pltm_train(plt_data, plt_config, plt_out);
    } else if (*pli) {
      cmd_pltm_infer(pli_phi, pli_bow, pli_config, pli_out);
    } else if (*evr) {
      cmd_eval_retrieval(evr_queries, evr_candidates, evr_gold, evr_metric);
    } else if (*evc) {
      cmd_eval_coherence(evc_model, evc_view, evc_bow, evc_top_n);
    } else if (*exp) {
      cmd_export(exp_model, exp_view, exp_top_k, exp_topics, exp_emb, exp_theta, exp_samples, exp_seed);
    }
  } catch (const Error& e) {
    std::cerr << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace m3l::cli
