#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "m3l/cli.hpp"
#include "m3l/eval.hpp"

using namespace m3l;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("m3l");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

// run with stdout captured
std::pair<int, std::string> run_cli_capture(const std::vector<std::string>& args) {
  std::ostringstream captured;
  std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
  const int rc = run_cli(args);
  std::cout.rdbuf(old);
  return {rc, captured.str()};
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("m3l_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("run config parsing") {
  const auto cfg = cli::parse_run_config(
      "# comment\n"
      "seed = 9\n"
      "n_topics=7\n"
      "temperature=0.5   # inline comment\n"
      "architecture=zeroshot\n"
      "zeroshot_train_view=en\n"
      "pltm_eta=0.02\n");
  CHECK(cfg.trainer.seed == 9);
  CHECK(cfg.model.n_topics == 7);
  CHECK(cfg.model.temperature == 0.5);
  CHECK(cfg.model.architecture == model::Architecture::zeroshot);
  CHECK(cfg.trainer.arch == model::Architecture::zeroshot);
  CHECK(cfg.trainer.zeroshot_train_view == "en");
  CHECK(cfg.pltm.eta == 0.02);
  // untouched keys keep their defaults
  CHECK(cfg.model.hidden_dim == 100);
  CHECK(cfg.trainer.batch_size == 32);
  CHECK(cfg.trainer.adam.learning_rate == 2e-3);

  CHECK_THROWS_AS(cli::parse_run_config("mystery=1\n"), Error);
  CHECK_THROWS_AS(cli::parse_run_config("epochs=abc\n"), Error);
  CHECK_THROWS_AS(cli::parse_run_config("shuffle=maybe\n"), Error);
  try {
    cli::parse_run_config("mystery=1\n");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_unknown_key);
  }
}

TEST_CASE("preprocess writes vocab and bow files") {
  const auto dir = temp_dir("pre");
  write_text(dir / "en.txt", "The plant grows tall\nthe sun shines\nplants need the sun\n");
  write_text(dir / "de.txt", "Die Pflanze wächst\nDie Sonne scheint\nPflanzen brauchen Sonne\n");
  write_text(dir / "en.stop", "the\n");
  write_text(dir / "de.stop", "die\n");

  const int rc = run_cli({"preprocess", "--docs", (dir / "en.txt").string(), "--docs", (dir / "de.txt").string(),
                          "--stopwords", (dir / "en.stop").string(), "--stopwords", (dir / "de.stop").string(),
                          "--vocab-size", "100", "--out", (dir / "out").string()});
  CHECK(rc == 0);
  const auto en_vocab = corpus::load_token_lines((dir / "out" / "en.vocab.txt").string());
  CHECK(en_vocab.size() <= 100);
  CHECK(std::find(en_vocab.begin(), en_vocab.end(), "sun") != en_vocab.end());
  CHECK(std::find(en_vocab.begin(), en_vocab.end(), "the") == en_vocab.end());
  const auto bows = corpus::load_bow_file((dir / "out" / "en.bow.tsv").string(), static_cast<int>(en_vocab.size()));
  CHECK(bows.size() == 3);

  SUBCASE("line count mismatch fails with its own exit code") {
    write_text(dir / "short.txt", "only one line\n");
    const int bad = run_cli({"preprocess", "--docs", (dir / "en.txt").string(), "--docs",
                             (dir / "short.txt").string(), "--out", (dir / "out2").string()});
    CHECK(bad == cli::exit_code_for(ErrorCode::line_count_mismatch));
  }
}

TEST_CASE("gen-synth, train, infer and eval-retrieval run end to end") {
  const auto dir = temp_dir("pipeline");
  const std::string data_dir = (dir / "data").string();
  CHECK(run_cli({"gen-synth", "--languages", "2", "--tuples", "24", "--holdout", "8", "--true-topics", "3",
                 "--vocab-size", "40", "--dim", "8", "--doc-length", "20", "--seed", "5", "--out",
                 data_dir}) == 0);

  write_text(dir / "run.cfg",
             "n_topics=3\n"
             "hidden_dim=10\n"
             "epochs=4\n"
             "batch_size=8\n"
             "seed=11\n");

  const std::string model_path = (dir / "model.mdl1").string();
  const std::string hist_path = (dir / "hist.tsv").string();
  CHECK(run_cli({"train", "--data", data_dir, "--config", (dir / "run.cfg").string(), "--out", model_path,
                 "--history", hist_path}) == 0);
  CHECK(fs::exists(model_path));
  CHECK(fs::exists(hist_path));

  const std::string theta0 = (dir / "theta0.tsv").string();
  const std::string theta1 = (dir / "theta1.tsv").string();
  CHECK(run_cli({"infer", "--model", model_path, "--embeddings", (fs::path(data_dir) / "holdout" / "lang0.emb").string(),
                 "--view", "lang0", "--out", theta0, "--samples", "5", "--seed", "3"}) == 0);
  CHECK(run_cli({"infer", "--model", model_path, "--embeddings", (fs::path(data_dir) / "holdout" / "lang1.emb").string(),
                 "--view", "lang1", "--out", theta1, "--samples", "5", "--seed", "3"}) == 0);

  // identity gold: tuple i in one language matches tuple i in the other
  std::string gold_text;
  for (int i = 0; i < 8; ++i) gold_text += std::to_string(i) + "\t" + std::to_string(i) + "\n";
  write_text(dir / "gold.tsv", gold_text);
  const auto [rc, output] = run_cli_capture({"eval-retrieval", "--queries", theta0, "--candidates", theta1,
                                             "--gold", (dir / "gold.tsv").string(), "--metric", "mrr"});
  CHECK(rc == 0);
  CHECK(output.find("mrr=") == 0);
  CHECK(output.find("mean_jsd=") != std::string::npos);

  SUBCASE("export writes topics and theta tables") {
    const std::string topics = (dir / "topics.tsv").string();
    const std::string theta = (dir / "theta_export.tsv").string();
    CHECK(run_cli({"export", "--model", model_path, "--view", "lang0", "--top-k", "5", "--topics-out", topics,
                   "--embeddings", (fs::path(data_dir) / "lang0.emb").string(), "--theta-out", theta}) == 0);
    const std::string text = file_bytes(topics);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // one line per topic
    CHECK(eval::load_theta_tsv(theta).rows == 24);
  }

  SUBCASE("eval-coherence prints per-topic lines and a mean") {
    const auto [crc, cout_text] = run_cli_capture({"eval-coherence", "--model", model_path, "--view", "lang0",
                                                   "--bow", (fs::path(data_dir) / "lang0.bow.tsv").string(),
                                                   "--top-n", "5"});
    CHECK(crc == 0);
    CHECK(cout_text.find("topic_0=") != std::string::npos);
    CHECK(cout_text.find("topic_2=") != std::string::npos);
    CHECK(cout_text.find("mean_npmi=") != std::string::npos);
  }
}

TEST_CASE("identical theta tables give mrr 1") {
  const auto dir = temp_dir("mrr1");
  numkit::SeededRng rng(13);
  corpus::Matrix thetas(6, 4);
  for (int r = 0; r < 6; ++r) {
    const auto row = numkit::softmax(numkit::sample_standard_normal(rng, 4));
    std::copy(row.begin(), row.end(), thetas.row(r).begin());
  }
  eval::save_theta_tsv(thetas, (dir / "q.tsv").string());
  eval::save_theta_tsv(thetas, (dir / "c.tsv").string());
  std::string gold_text;
  for (int i = 0; i < 6; ++i) gold_text += std::to_string(i) + "\t" + std::to_string(i) + "\n";
  write_text(dir / "gold.tsv", gold_text);

  const auto [rc, output] = run_cli_capture({"eval-retrieval", "--queries", (dir / "q.tsv").string(),
                                             "--candidates", (dir / "c.tsv").string(), "--gold",
                                             (dir / "gold.tsv").string(), "--metric", "mrr"});
  CHECK(rc == 0);
  CHECK(output.find("mrr=1\n") == 0);
}

TEST_CASE("train runs are idempotent byte for byte") {
  const auto dir = temp_dir("determinism");
  const std::string data_dir = (dir / "data").string();
  REQUIRE(run_cli({"gen-synth", "--languages", "2", "--tuples", "16", "--true-topics", "3", "--vocab-size",
                   "30", "--dim", "6", "--doc-length", "15", "--seed", "21", "--out", data_dir}) == 0);
  write_text(dir / "run.cfg", "n_topics=3\nhidden_dim=8\nepochs=2\nbatch_size=8\nseed=77\n");

  for (const std::string tag : {"a", "b"}) {
    REQUIRE(run_cli({"train", "--data", data_dir, "--config", (dir / "run.cfg").string(), "--out",
                     (dir / ("m_" + tag + ".mdl1")).string(), "--history", (dir / ("h_" + tag + ".tsv")).string()}) == 0);
  }
  CHECK(file_bytes((dir / "m_a.mdl1").string()) == file_bytes((dir / "m_b.mdl1").string()));
  CHECK(file_bytes((dir / "h_a.tsv").string()) == file_bytes((dir / "h_b.tsv").string()));
}

TEST_CASE("pltm subcommands run end to end") {
  const auto dir = temp_dir("pltm");
  const std::string data_dir = (dir / "data").string();
  REQUIRE(run_cli({"gen-synth", "--languages", "2", "--tuples", "20", "--holdout", "4", "--true-topics", "3",
                   "--vocab-size", "30", "--dim", "6", "--doc-length", "15", "--seed", "31", "--out",
                   data_dir}) == 0);
  write_text(dir / "run.cfg", "n_topics=3\npltm_iterations=40\npltm_burn_in=20\npltm_sample_lag=4\nseed=5\n");

  const std::string out_dir = (dir / "pltm_out").string();
  CHECK(run_cli({"pltm", "train", "--data", data_dir, "--config", (dir / "run.cfg").string(), "--out-dir",
                 out_dir}) == 0);
  const auto phi0 = eval::load_theta_tsv((fs::path(out_dir) / "phi.lang0.tsv").string());
  CHECK(phi0.rows == 3);
  CHECK(phi0.cols == 30);
  CHECK(eval::load_theta_tsv((fs::path(out_dir) / "theta.tsv").string()).rows == 20);

  const std::string theta_out = (dir / "ho_theta.tsv").string();
  CHECK(run_cli({"pltm", "infer", "--phi", (fs::path(out_dir) / "phi.lang0.tsv").string(), "--phi",
                 (fs::path(out_dir) / "phi.lang1.tsv").string(), "--bow",
                 (fs::path(data_dir) / "holdout" / "lang0.bow.tsv").string(), "--bow",
                 (fs::path(data_dir) / "holdout" / "lang1.bow.tsv").string(), "--config",
                 (dir / "run.cfg").string(), "--out", theta_out}) == 0);
  const auto theta = eval::load_theta_tsv(theta_out);
  CHECK(theta.rows == 4);
  for (int t = 0; t < theta.rows; ++t) {
    double sum = 0.0;
    for (double x : theta.row(t)) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("failures map to distinct exit codes") {
  const auto dir = temp_dir("errors");
  CHECK(run_cli({"infer", "--model", (dir / "absent.mdl1").string(), "--embeddings",
                 (dir / "absent.emb").string(), "--view", "x", "--out", (dir / "o.tsv").string()}) ==
        cli::exit_code_for(ErrorCode::io_open));

  write_text(dir / "bad.cfg", "mystery=1\n");
  const std::string data_dir = (dir / "data").string();
  REQUIRE(run_cli({"gen-synth", "--languages", "1", "--tuples", "4", "--true-topics", "2", "--vocab-size",
                   "10", "--dim", "4", "--doc-length", "8", "--seed", "1", "--out", data_dir}) == 0);
  CHECK(run_cli({"train", "--data", data_dir, "--config", (dir / "bad.cfg").string(), "--out",
                 (dir / "m.mdl1").string()}) == cli::exit_code_for(ErrorCode::config_unknown_key));

  // no partial outputs appear on failure
  CHECK(!fs::exists(dir / "m.mdl1"));
  CHECK(!fs::exists((dir / "m.mdl1").string() + ".tmp"));
}

TEST_CASE("dataset manifest validation") {
  const auto dir = temp_dir("manifest");
  write_text(dir / "dataset.cfg", "views=en\nview.en.modality=text\nview.en.embeddings=en.emb\n");
  CHECK_THROWS_AS(cli::load_dataset(dir.string()), Error);  // text view without vocab/bow

  write_text(dir / "dataset.cfg", "views=en\nview.en.modality=hologram\nview.en.embeddings=en.emb\n");
  try {
    cli::load_dataset(dir.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_bad_value);
  }

  write_text(dir / "dataset.cfg", "views=en\nview.en.wat=1\n");
  try {
    cli::load_dataset(dir.string());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_unknown_key);
  }
}

TEST_SUITE_END();
