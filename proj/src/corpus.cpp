#include "m3l/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "io_util.hpp"

namespace m3l::corpus {

using namespace m3l::detail;

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    auto [it, inserted] = index_.emplace(tokens_[static_cast<size_t>(i)], i);
    if (!inserted) fail(ErrorCode::bad_argument, "duplicate vocabulary token: " + tokens_[static_cast<size_t>(i)]);
  }
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

int TupleDataset::view_index(const std::string& name) const {
  for (int v = 0; v < n_views(); ++v) {
    if (views[static_cast<size_t>(v)].name == name) return v;
  }
  fail(ErrorCode::view_not_found, "no view named '" + name + "'");
}

namespace {

// Decodes one UTF-8 codepoint starting at i; malformed bytes decode as a
// single-byte replacement that never counts as a word character.
std::pair<uint32_t, int> next_codepoint(const std::string& s, size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  int len = 0;
  uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1Fu;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0Fu;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07u;
  } else {
    return {0xFFFDu, 1};
  }
  if (i + static_cast<size_t>(len) > s.size()) return {0xFFFDu, 1};
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
    if ((b & 0xC0) != 0x80) return {0xFFFDu, 1};
    cp = (cp << 6) | (b & 0x3Fu);
  }
  return {cp, len};
}

bool is_word_char(uint32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp < 0xC0) return false;                   // Latin-1 punctuation block
  if (cp == 0xD7 || cp == 0xF7) return false;    // multiplication / division signs
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  return true;
}

uint32_t lower(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
  return cp;
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text,
                                  const std::unordered_set<std::string>& stopwords) {
  std::vector<std::string> tokens;
  std::string current;
  int current_cps = 0;
  auto flush = [&] {
    if (current_cps >= 2 && !stopwords.contains(current)) tokens.push_back(current);
    current.clear();
    current_cps = 0;
  };
  size_t i = 0;
  while (i < text.size()) {
    const auto [cp, len] = next_codepoint(text, i);
    if (is_word_char(cp)) {
      append_utf8(current, lower(cp));
      ++current_cps;
    } else {
      flush();
    }
    i += static_cast<size_t>(len);
  }
  flush();
  return tokens;
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs, int max_size) {
  if (max_size < 1) fail(ErrorCode::bad_argument, "build_vocabulary: max_size must be >= 1");
  std::map<std::string, long long> counts;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) ++counts[tok];
  }
  if (counts.empty()) fail(ErrorCode::empty_corpus, "build_vocabulary: no tokens in corpus");
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) > max_size) ranked.resize(static_cast<size_t>(max_size));
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, c] : ranked) tokens.push_back(std::move(tok));
  return Vocabulary(std::move(tokens));
}

BowVector to_bow(const std::vector<std::string>& doc, const Vocabulary& vocab) {
  std::map<int, int> counts;
  for (const auto& tok : doc) {
    const int idx = vocab.index_of(tok);
    if (idx >= 0) ++counts[idx];
  }
  BowVector bow;
  bow.entries.assign(counts.begin(), counts.end());
  return bow;
}

Matrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_open, "cannot open embedding file: " + path);
  char magic[4];
  if (!in.read(magic, 4)) fail(ErrorCode::truncated, "truncated EMB1 header: " + path);
  if (std::string_view(magic, 4) != "EMB1") fail(ErrorCode::bad_magic, "not an EMB1 file: " + path);
  uint32_t rows, cols;
  if (!read_u32(in, rows) || !read_u32(in, cols)) fail(ErrorCode::truncated, "truncated EMB1 header: " + path);
  if (rows == 0 || cols == 0) fail(ErrorCode::zero_dims, "EMB1 file has zero dimension: " + path);
  Matrix m(static_cast<int>(rows), static_cast<int>(cols));
  for (size_t i = 0; i < m.size(); ++i) {
    float f;
    if (!read_f32(in, f)) fail(ErrorCode::truncated, "EMB1 payload shorter than header promises: " + path);
    m.data[i] = static_cast<double>(f);
  }
  return m;
}

void save_embeddings(const Matrix& m, const std::string& path) {
  if (m.rows == 0 || m.cols == 0) fail(ErrorCode::zero_dims, "refusing to write empty matrix: " + path);
  atomic_write(path, [&](std::ostream& out) {
    out.write("EMB1", 4);
    write_u32(out, static_cast<uint32_t>(m.rows));
    write_u32(out, static_cast<uint32_t>(m.cols));
    for (double v : m.data) write_f32(out, static_cast<float>(v));
  });
}

std::vector<std::string> load_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_open, "cannot open token file: " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(strip_cr(line));
  // a trailing newline is not an extra empty token
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return tokens;
}

void save_token_lines(const std::vector<std::string>& tokens, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& t : tokens) out << t << '\n';
  });
}

std::vector<BowVector> load_bow_file(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_open, "cannot open BoW file: " + path);
  std::vector<BowVector> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    BowVector bow;
    if (!line.empty()) {
      for (const auto& field : split(line, '\t')) {
        if (field.empty()) continue;
        const auto colon = field.find(':');
        const std::string ctx = path + ":" + std::to_string(line_no);
        if (colon == std::string::npos) fail(ErrorCode::parse_error, "missing ':' in BoW entry at " + ctx);
        const int idx = static_cast<int>(parse_int(std::string_view(field).substr(0, colon), ctx));
        const int count = static_cast<int>(parse_int(std::string_view(field).substr(colon + 1), ctx));
        if (count <= 0) fail(ErrorCode::parse_error, "nonpositive count in BoW entry at " + ctx);
        if (idx < 0 || (vocab_size > 0 && idx >= vocab_size)) {
          fail(ErrorCode::index_out_of_range, "BoW term index " + std::to_string(idx) + " out of range at " + ctx);
        }
        bow.entries.emplace_back(idx, count);
      }
      std::sort(bow.entries.begin(), bow.entries.end());
    }
    docs.push_back(std::move(bow));
  }
  return docs;
}

void save_bow_file(const std::vector<BowVector>& docs, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& doc : docs) {
      bool first = true;
      for (const auto& [idx, count] : doc.entries) {
        if (!first) out << '\t';
        out << idx << ':' << count;
        first = false;
      }
      out << '\n';
    }
  });
}

std::vector<std::vector<int>> load_alignment(const std::string& path, int n_views) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_open, "cannot open alignment file: " + path);
  std::vector<std::vector<int>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (static_cast<int>(fields.size()) != n_views) {
      fail(ErrorCode::parse_error, "alignment line has " + std::to_string(fields.size()) + " fields, expected " +
                                       std::to_string(n_views) + " at " + ctx);
    }
    std::vector<int> tuple;
    tuple.reserve(fields.size());
    for (const auto& f : fields) {
      const long long v = parse_int(f, ctx);
      if (v < 0) fail(ErrorCode::parse_error, "negative row index at " + ctx);
      tuple.push_back(static_cast<int>(v));
    }
    rows.push_back(std::move(tuple));
  }
  return rows;
}

void save_alignment(const std::vector<std::vector<int>>& rows, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& tuple : rows) {
      for (size_t v = 0; v < tuple.size(); ++v) {
        if (v) out << '\t';
        out << tuple[v];
      }
      out << '\n';
    }
  });
}

TupleDataset assemble_dataset(std::vector<ViewSpec> views, const std::vector<Matrix>& embeddings,
                              std::vector<std::vector<BowVector>> bows,
                              const std::vector<std::vector<int>>* alignment) {
  const int n = static_cast<int>(views.size());
  if (n == 0) fail(ErrorCode::empty_dataset, "assemble_dataset: no views");
  if (static_cast<int>(embeddings.size()) != n || static_cast<int>(bows.size()) != n) {
    fail(ErrorCode::bad_argument, "assemble_dataset: views, embeddings and bows must align");
  }

  for (int v = 0; v < n; ++v) {
    auto& spec = views[static_cast<size_t>(v)];
    const auto& emb = embeddings[static_cast<size_t>(v)];
    if (emb.rows == 0 || emb.cols == 0) fail(ErrorCode::empty_dataset, "view '" + spec.name + "' has no rows");
    if (spec.embedding_dim == 0) spec.embedding_dim = emb.cols;
    if (spec.embedding_dim != emb.cols) {
      fail(ErrorCode::dim_mismatch, "view '" + spec.name + "': embedding dim " + std::to_string(emb.cols) +
                                        " does not match declared " + std::to_string(spec.embedding_dim));
    }
    if (spec.modality == Modality::text) {
      if (!spec.vocabulary.has_value()) fail(ErrorCode::missing_bow, "text view '" + spec.name + "' has no vocabulary");
      if (bows[static_cast<size_t>(v)].empty() && emb.rows > 0) {
        fail(ErrorCode::missing_bow, "text view '" + spec.name + "' has no BoW vectors");
      }
      if (static_cast<int>(bows[static_cast<size_t>(v)].size()) != emb.rows) {
        fail(ErrorCode::row_count_mismatch, "view '" + spec.name + "': " + std::to_string(bows[static_cast<size_t>(v)].size()) +
                                                " BoW rows vs " + std::to_string(emb.rows) + " embedding rows");
      }
      const int vs = spec.vocabulary->size();
      for (const auto& bow : bows[static_cast<size_t>(v)]) {
        for (const auto& [idx, count] : bow.entries) {
          if (idx < 0 || idx >= vs) {
            fail(ErrorCode::index_out_of_range, "view '" + spec.name + "': BoW index " + std::to_string(idx) +
                                                    " outside vocabulary of size " + std::to_string(vs));
          }
        }
      }
    } else if (!bows[static_cast<size_t>(v)].empty()) {
      fail(ErrorCode::bad_argument, "image view '" + spec.name + "' cannot carry BoW vectors");
    }
  }

  TupleDataset ds;
  ds.views = std::move(views);

  if (alignment == nullptr) {
    const int rows = embeddings[0].rows;
    for (int v = 1; v < n; ++v) {
      if (embeddings[static_cast<size_t>(v)].rows != rows) {
        fail(ErrorCode::row_count_mismatch, "view '" + ds.views[static_cast<size_t>(v)].name + "' has " +
                                                std::to_string(embeddings[static_cast<size_t>(v)].rows) +
                                                " rows, expected " + std::to_string(rows));
      }
    }
    ds.embeddings = embeddings;
    ds.bows = std::move(bows);
    ds.tuple_count = rows;
    return ds;
  }

  const int tuples = static_cast<int>(alignment->size());
  if (tuples == 0) fail(ErrorCode::empty_dataset, "alignment defines no tuples");
  ds.tuple_count = tuples;
  ds.embeddings.reserve(static_cast<size_t>(n));
  ds.bows.resize(static_cast<size_t>(n));
  for (int v = 0; v < n; ++v) {
    const auto& emb = embeddings[static_cast<size_t>(v)];
    Matrix gathered(tuples, emb.cols);
    const bool text = ds.views[static_cast<size_t>(v)].modality == Modality::text;
    for (int t = 0; t < tuples; ++t) {
      const int src = (*alignment)[static_cast<size_t>(t)][static_cast<size_t>(v)];
      if (src < 0 || src >= emb.rows) {
        fail(ErrorCode::index_out_of_range, "alignment row " + std::to_string(t) + " references row " +
                                                std::to_string(src) + " of view '" +
                                                ds.views[static_cast<size_t>(v)].name + "' (" +
                                                std::to_string(emb.rows) + " rows)");
      }
      std::copy_n(emb.row(src).begin(), emb.cols, gathered.row(t).begin());
      if (text) ds.bows[static_cast<size_t>(v)].push_back(bows[static_cast<size_t>(v)][static_cast<size_t>(src)]);
    }
    ds.embeddings.push_back(std::move(gathered));
  }
  return ds;
}

TupleDataset subset(const TupleDataset& ds, int first, int count) {
  if (first < 0 || count < 1 || first + count > ds.tuple_count) {
    fail(ErrorCode::index_out_of_range, "subset: range [" + std::to_string(first) + ", " +
                                            std::to_string(first + count) + ") outside " +
                                            std::to_string(ds.tuple_count) + " tuples");
  }
  TupleDataset out;
  out.views = ds.views;
  out.tuple_count = count;
  for (int v = 0; v < ds.n_views(); ++v) {
    const auto& emb = ds.embeddings[static_cast<size_t>(v)];
    Matrix m(count, emb.cols);
    std::copy_n(emb.data.begin() + static_cast<size_t>(first) * emb.cols, m.size(), m.data.begin());
    out.embeddings.push_back(std::move(m));
    if (!ds.bows[static_cast<size_t>(v)].empty()) {
      out.bows.emplace_back(ds.bows[static_cast<size_t>(v)].begin() + first,
                            ds.bows[static_cast<size_t>(v)].begin() + first + count);
    } else {
      out.bows.emplace_back();
    }
  }
  return out;
}

namespace {

int categorical(SeededRng& rng, std::span<const double> probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

std::string synth_token(int index, int width) {
  std::string digits = std::to_string(index);
  const int pad = width - static_cast<int>(digits.size());
  return "w" + std::string(pad > 0 ? static_cast<size_t>(pad) : 0, '0') + digits;
}

}  // namespace

SyntheticData gen_synthetic(const SyntheticConfig& config) {
  if (config.languages < 1 || config.tuples < 1 || config.true_topics < 1 || config.vocab_size < 1 ||
      config.embedding_dim < 1 || config.image_views < 0 || config.doc_length <= 0.0) {
    fail(ErrorCode::bad_argument, "gen_synthetic: counts must be >= 1 (image views >= 0)");
  }
  const int L = config.languages;
  const int M = config.image_views;
  const int T = config.tuples;
  const int K = config.true_topics;
  const int V = config.vocab_size;
  const int D = config.embedding_dim;
  const int n_views = L + M;

  SeededRng rng(config.seed);
  SyntheticData out;

  // topic-word distributions per language
  const numkit::Vector phi_alpha(static_cast<size_t>(V), 0.05);
  for (int l = 0; l < L; ++l) {
    Matrix phi(K, V);
    for (int k = 0; k < K; ++k) rng.dirichlet(phi_alpha, phi.row(k));
    out.phi_true.push_back(std::move(phi));
  }

  // per-view embedding maps
  std::vector<Matrix> proj;
  for (int v = 0; v < n_views; ++v) {
    if (config.shared_projection && v > 0) {
      proj.push_back(proj[0]);
      continue;
    }
    Matrix a(D, K);
    for (auto& x : a.data) x = rng.normal();
    proj.push_back(std::move(a));
  }

  // modality-gap directions for image views
  std::vector<numkit::Vector> offsets;
  for (int m = 0; m < M; ++m) {
    numkit::Vector u = sample_standard_normal(rng, D);
    const double norm = std::sqrt(numkit::dot(u, u));
    for (auto& x : u) x /= norm;
    offsets.push_back(std::move(u));
  }

  // document-topic distributions per tuple
  out.theta_true = Matrix(T, K);
  const numkit::Vector theta_alpha(static_cast<size_t>(K), 0.2);
  for (int t = 0; t < T; ++t) rng.dirichlet(theta_alpha, out.theta_true.row(t));

  // texts
  const int width = static_cast<int>(std::to_string(V - 1).size());
  std::vector<std::string> vocab_tokens;
  vocab_tokens.reserve(static_cast<size_t>(V));
  for (int w = 0; w < V; ++w) vocab_tokens.push_back(synth_token(w, width));

  TupleDataset& ds = out.dataset;
  ds.tuple_count = T;
  for (int l = 0; l < L; ++l) {
    ViewSpec spec;
    spec.name = "lang" + std::to_string(l);
    spec.modality = Modality::text;
    spec.embedding_dim = D;
    spec.vocabulary = Vocabulary(vocab_tokens);
    ds.views.push_back(std::move(spec));
    std::vector<BowVector> docs;
    docs.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) {
      const int len = rng.poisson(config.doc_length);
      std::vector<int> counts(static_cast<size_t>(V), 0);
      for (int i = 0; i < len; ++i) {
        const int k = categorical(rng, out.theta_true.row(t));
        const int w = categorical(rng, out.phi_true[static_cast<size_t>(l)].row(k));
        ++counts[static_cast<size_t>(w)];
      }
      BowVector bow;
      for (int w = 0; w < V; ++w) {
        if (counts[static_cast<size_t>(w)] > 0) bow.entries.emplace_back(w, counts[static_cast<size_t>(w)]);
      }
      docs.push_back(std::move(bow));
    }
    ds.bows.push_back(std::move(docs));
  }
  for (int m = 0; m < M; ++m) {
    ViewSpec spec;
    spec.name = "img" + std::to_string(m);
    spec.modality = Modality::image;
    spec.embedding_dim = D;
    ds.views.push_back(std::move(spec));
    ds.bows.emplace_back();
  }

  // embeddings: A_v theta* + 0.1 noise, image views shifted along their unit direction
  for (int v = 0; v < n_views; ++v) {
    Matrix emb(T, D);
    for (int t = 0; t < T; ++t) {
      const numkit::Vector signal = numkit::matvec(proj[static_cast<size_t>(v)], out.theta_true.row(t));
      auto row = emb.row(t);
      for (int d = 0; d < D; ++d) row[d] = signal[static_cast<size_t>(d)] + 0.1 * rng.normal();
      if (v >= L) {
        const auto& u = offsets[static_cast<size_t>(v - L)];
        for (int d = 0; d < D; ++d) row[d] += config.modality_offset * u[static_cast<size_t>(d)];
      }
    }
    ds.embeddings.push_back(std::move(emb));
  }

  return out;
}

}  // namespace m3l::corpus
