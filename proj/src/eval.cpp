#include "m3l/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "io_util.hpp"

namespace m3l::eval {

using namespace m3l::detail;

double jsd(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorCode::dim_mismatch, "jsd: distribution sizes differ");
  double div = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    if (p[k] > 0.0) div += 0.5 * p[k] * std::log(p[k] / m);
    if (q[k] > 0.0) div += 0.5 * q[k] * std::log(q[k] / m);
  }
  return div;
}

namespace {

// candidate indices ordered by (ascending JSD to the query, then index)
std::vector<int> rank_candidates(std::span<const double> query, const Matrix& candidates) {
  std::vector<double> dist(static_cast<size_t>(candidates.rows));
  for (int c = 0; c < candidates.rows; ++c) dist[static_cast<size_t>(c)] = jsd(query, candidates.row(c));
  std::vector<int> order(static_cast<size_t>(candidates.rows));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dist[static_cast<size_t>(a)] != dist[static_cast<size_t>(b)]) {
      return dist[static_cast<size_t>(a)] < dist[static_cast<size_t>(b)];
    }
    return a < b;
  });
  return order;
}

void check_retrieval_inputs(const Matrix& queries, const Matrix& candidates, size_t gold_size) {
  if (queries.rows == 0 || candidates.rows == 0) fail(ErrorCode::empty_input, "retrieval: empty inputs");
  if (queries.cols != candidates.cols) fail(ErrorCode::dim_mismatch, "retrieval: query and candidate widths differ");
  if (gold_size != static_cast<size_t>(queries.rows)) {
    fail(ErrorCode::dim_mismatch, "retrieval: one gold entry per query required");
  }
}

}  // namespace

double mrr(const Matrix& queries, const Matrix& candidates, const std::vector<int>& gold) {
  check_retrieval_inputs(queries, candidates, gold.size());
  double sum = 0.0;
  for (int qi = 0; qi < queries.rows; ++qi) {
    const int target = gold[static_cast<size_t>(qi)];
    if (target < 0 || target >= candidates.rows) fail(ErrorCode::index_out_of_range, "mrr: gold index out of range");
    const auto order = rank_candidates(queries.row(qi), candidates);
    for (size_t r = 0; r < order.size(); ++r) {
      if (order[r] == target) {
        sum += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  return sum / static_cast<double>(queries.rows);
}

double uap(const Matrix& queries, const Matrix& candidates, const std::vector<std::vector<int>>& gold) {
  check_retrieval_inputs(queries, candidates, gold.size());
  double sum_ap = 0.0;
  for (int qi = 0; qi < queries.rows; ++qi) {
    const auto& relevant = gold[static_cast<size_t>(qi)];
    if (relevant.empty()) fail(ErrorCode::empty_input, "uap: query with empty relevant set");
    std::set<int> rel;
    for (int r : relevant) {
      if (r < 0 || r >= candidates.rows) fail(ErrorCode::index_out_of_range, "uap: gold index out of range");
      rel.insert(r);
    }
    const auto order = rank_candidates(queries.row(qi), candidates);
    double ap = 0.0;
    int hits = 0;
    for (size_t r = 0; r < order.size(); ++r) {
      if (rel.contains(order[r])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    sum_ap += ap / static_cast<double>(rel.size());
  }
  return sum_ap / static_cast<double>(queries.rows);
}

double mean_gold_jsd(const Matrix& queries, const Matrix& candidates,
                     const std::vector<std::vector<int>>& gold) {
  check_retrieval_inputs(queries, candidates, gold.size());
  double sum = 0.0;
  long long pairs = 0;
  for (int qi = 0; qi < queries.rows; ++qi) {
    for (int r : gold[static_cast<size_t>(qi)]) {
      if (r < 0 || r >= candidates.rows) fail(ErrorCode::index_out_of_range, "gold index out of range");
      sum += jsd(queries.row(qi), candidates.row(r));
      ++pairs;
    }
  }
  if (pairs == 0) fail(ErrorCode::empty_input, "mean_gold_jsd: no gold pairs");
  return sum / static_cast<double>(pairs);
}

CoherenceResult npmi_coherence(const std::vector<std::vector<int>>& topic_word_ids,
                               const std::vector<BowVector>& docs, double epsilon) {
  if (docs.empty()) fail(ErrorCode::empty_corpus, "npmi: empty reference corpus");
  if (topic_word_ids.empty()) fail(ErrorCode::empty_input, "npmi: no topics");
  for (const auto& topic : topic_word_ids) {
    if (topic.size() < 2) fail(ErrorCode::bad_argument, "npmi: topics need at least two words");
  }

  // per-word sorted lists of documents containing it
  int max_id = -1;
  for (const auto& topic : topic_word_ids) {
    for (int w : topic) max_id = std::max(max_id, w);
  }
  std::vector<std::vector<int>> doc_lists(static_cast<size_t>(max_id + 1));
  for (int d = 0; d < static_cast<int>(docs.size()); ++d) {
    for (const auto& [idx, count] : docs[static_cast<size_t>(d)].entries) {
      if (idx <= max_id) doc_lists[static_cast<size_t>(idx)].push_back(d);
    }
  }
  const double n_docs = static_cast<double>(docs.size());

  auto marginal = [&](int w) {
    if (w < 0 || w > max_id) return 0.0;
    return static_cast<double>(doc_lists[static_cast<size_t>(w)].size()) / n_docs;
  };
  auto joint = [&](int a, int b) {
    if (a < 0 || b < 0) return 0.0;
    const auto& da = doc_lists[static_cast<size_t>(a)];
    const auto& db = doc_lists[static_cast<size_t>(b)];
    size_t i = 0, j = 0, both = 0;
    while (i < da.size() && j < db.size()) {
      if (da[i] == db[j]) {
        ++both;
        ++i;
        ++j;
      } else if (da[i] < db[j]) {
        ++i;
      } else {
        ++j;
      }
    }
    return static_cast<double>(both) / n_docs;
  };

  CoherenceResult out;
  for (const auto& topic : topic_word_ids) {
    double sum = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < topic.size(); ++i) {
      for (size_t j = i + 1; j < topic.size(); ++j) {
        const double pij = joint(topic[i], topic[j]) + epsilon;
        const double pi = std::max(marginal(topic[i]), epsilon);
        const double pj = std::max(marginal(topic[j]), epsilon);
        const double value = std::log(pij / (pi * pj)) / -std::log(pij);
        sum += std::clamp(value, -1.0, 1.0);
        ++pairs;
      }
    }
    out.per_topic.push_back(sum / static_cast<double>(pairs));
  }
  out.mean = std::accumulate(out.per_topic.begin(), out.per_topic.end(), 0.0) /
             static_cast<double>(out.per_topic.size());
  return out;
}

double aligned_pair_jsd(const std::vector<Matrix>& theta_per_view) {
  if (theta_per_view.size() < 2) fail(ErrorCode::bad_argument, "aligned_pair_jsd: needs at least two views");
  const int rows = theta_per_view[0].rows;
  for (const auto& m : theta_per_view) {
    if (m.rows != rows || m.cols != theta_per_view[0].cols) {
      fail(ErrorCode::dim_mismatch, "aligned_pair_jsd: theta tables disagree in shape");
    }
  }
  if (rows == 0) fail(ErrorCode::empty_input, "aligned_pair_jsd: no tuples");
  double sum = 0.0;
  long long pairs = 0;
  for (int t = 0; t < rows; ++t) {
    for (size_t a = 0; a < theta_per_view.size(); ++a) {
      for (size_t b = a + 1; b < theta_per_view.size(); ++b) {
        sum += jsd(theta_per_view[a].row(t), theta_per_view[b].row(t));
        ++pairs;
      }
    }
  }
  return sum / static_cast<double>(pairs);
}

void save_theta_tsv(const Matrix& thetas, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (int r = 0; r < thetas.rows; ++r) {
      out << r;
      for (int c = 0; c < thetas.cols; ++c) out << '\t' << format_double(thetas(r, c));
      out << '\n';
    }
  });
}

Matrix load_theta_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_open, "cannot open theta TSV: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (fields.size() < 2) fail(ErrorCode::parse_error, "theta row needs an id and values at " + ctx);
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (size_t f = 1; f < fields.size(); ++f) row.push_back(parse_double(fields[f], ctx));
    if (width == 0) {
      width = row.size();
    } else if (row.size() != width) {
      fail(ErrorCode::parse_error, "ragged theta TSV at " + ctx);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::empty_input, "theta TSV has no rows: " + path);
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(width));
  for (size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin(), rows[r].end(), m.row(static_cast<int>(r)).begin());
  }
  return m;
}

void save_gold_tsv(const std::vector<std::vector<int>>& gold, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (size_t q = 0; q < gold.size(); ++q) {
      out << q << '\t';
      for (size_t i = 0; i < gold[q].size(); ++i) {
        if (i) out << ',';
        out << gold[q][i];
      }
      out << '\n';
    }
  });
}

std::vector<std::vector<int>> load_gold_tsv(const std::string& path, int n_queries, int n_candidates) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_open, "cannot open gold TSV: " + path);
  std::vector<std::vector<int>> gold(static_cast<size_t>(n_queries));
  std::vector<bool> seen(static_cast<size_t>(n_queries), false);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = path + ":" + std::to_string(line_no);
    const auto fields = split(line, '\t');
    if (fields.size() != 2) fail(ErrorCode::parse_error, "gold line needs query and relevant ids at " + ctx);
    const long long q = parse_int(fields[0], ctx);
    if (q < 0 || q >= n_queries) fail(ErrorCode::index_out_of_range, "gold query id out of range at " + ctx);
    if (seen[static_cast<size_t>(q)]) fail(ErrorCode::parse_error, "duplicate gold query id at " + ctx);
    seen[static_cast<size_t>(q)] = true;
    std::vector<int> rel;
    for (const auto& part : split(fields[1], ',')) {
      const long long r = parse_int(part, ctx);
      if (r < 0 || r >= n_candidates) fail(ErrorCode::index_out_of_range, "gold relevant id out of range at " + ctx);
      rel.push_back(static_cast<int>(r));
    }
    if (rel.empty()) fail(ErrorCode::parse_error, "gold line with no relevant ids at " + ctx);
    gold[static_cast<size_t>(q)] = std::move(rel);
  }
  for (int q = 0; q < n_queries; ++q) {
    if (!seen[static_cast<size_t>(q)]) {
      fail(ErrorCode::parse_error, "gold TSV missing query " + std::to_string(q) + ": " + path);
    }
  }
  return gold;
}

void save_topics_tsv(const std::vector<std::vector<std::string>>& topics, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (size_t k = 0; k < topics.size(); ++k) {
      out << k;
      for (const auto& word : topics[k]) out << '\t' << word;
      out << '\n';
    }
  });
}

}  // namespace m3l::eval
