#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "m3l/cli.hpp"
#include "m3l/eval.hpp"
#include "m3l/pltm.hpp"
#include "m3l/trainer.hpp"

namespace py = pybind11;

namespace {

using m3l::corpus::BowVector;
using m3l::corpus::Matrix;
using m3l::corpus::TupleDataset;
using m3l::numkit::SeededRng;

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> arr({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
  return arr;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + m.size(), m.data.begin());
  return m;
}

std::vector<BowVector> bows_from_python(const std::vector<std::vector<std::pair<int, int>>>& docs) {
  std::vector<BowVector> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    BowVector bow;
    bow.entries = doc;
    std::sort(bow.entries.begin(), bow.entries.end());
    out.push_back(std::move(bow));
  }
  return out;
}

// Inference wrapper around a trained bundle.
struct Model {
  m3l::train::ModelBundle bundle;

  std::vector<std::string> view_names() const {
    std::vector<std::string> names;
    for (const auto& v : bundle.views) names.push_back(v.name);
    return names;
  }

  int view_index(const std::string& name) const {
    if (bundle.config.architecture == m3l::model::Architecture::zeroshot) return 0;
    for (size_t v = 0; v < bundle.views.size(); ++v) {
      if (bundle.views[v].name == name) return static_cast<int>(v);
    }
    m3l::fail(m3l::ErrorCode::view_not_found, "no view named '" + name + "'");
  }

  py::array_t<double> infer(const std::string& view,
                            const py::array_t<double, py::array::c_style | py::array::forcecast>& x,
                            int samples, uint64_t seed) const {
    const Matrix emb = from_numpy(x);
    const int vi = view_index(view);
    const int n_samples = samples >= 0 ? samples : bundle.config.inference_samples;
    SeededRng rng(m3l::numkit::derive_seed(seed, "infer"));
    Matrix thetas(emb.rows, bundle.config.n_topics);
    for (int r = 0; r < emb.rows; ++r) {
      const auto theta = m3l::model::infer_theta(bundle.params, vi, emb.row(r), n_samples, rng);
      std::copy(theta.begin(), theta.end(), thetas.row(r).begin());
    }
    return to_numpy(thetas);
  }

  std::vector<std::vector<std::string>> top_words(const std::string& view, int top_k) const {
    for (size_t v = 0; v < bundle.views.size(); ++v) {
      if (bundle.views[v].name != view) continue;
      const auto& dec = bundle.params.decoders[v];
      if (!dec.has_value()) m3l::fail(m3l::ErrorCode::bad_argument, "view '" + view + "' has no decoder");
      return m3l::model::top_words(*dec, *bundle.views[v].vocabulary, top_k);
    }
    m3l::fail(m3l::ErrorCode::view_not_found, "no view named '" + view + "'");
  }

  void save(const std::string& path) const { m3l::train::save_model(bundle, path); }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "multilingual/multimodal neural topic model core";

  py::register_exception<m3l::Error>(m, "M3lError");

  py::enum_<m3l::model::Architecture>(m, "Architecture")
      .value("m3l_contrast", m3l::model::Architecture::m3l_contrast)
      .value("zeroshot", m3l::model::Architecture::zeroshot);

  py::class_<m3l::model::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_topics", &m3l::model::ModelConfig::n_topics)
      .def_readwrite("hidden_dim", &m3l::model::ModelConfig::hidden_dim)
      .def_readwrite("temperature", &m3l::model::ModelConfig::temperature)
      .def_readwrite("contrastive_weight", &m3l::model::ModelConfig::contrastive_weight)
      .def_readwrite("inference_samples", &m3l::model::ModelConfig::inference_samples)
      .def_readwrite("prior_mean", &m3l::model::ModelConfig::prior_mean)
      .def_readwrite("prior_variance", &m3l::model::ModelConfig::prior_variance)
      .def_readwrite("include_denominator_self_terms",
                     &m3l::model::ModelConfig::include_denominator_self_terms)
      .def_readwrite("architecture", &m3l::model::ModelConfig::architecture);

  py::class_<m3l::optim::AdamConfig>(m, "AdamConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &m3l::optim::AdamConfig::learning_rate)
      .def_readwrite("beta1", &m3l::optim::AdamConfig::beta1)
      .def_readwrite("beta2", &m3l::optim::AdamConfig::beta2)
      .def_readwrite("epsilon", &m3l::optim::AdamConfig::epsilon)
      .def_readwrite("clip_norm", &m3l::optim::AdamConfig::clip_norm);

  py::class_<m3l::train::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &m3l::train::TrainConfig::epochs)
      .def_readwrite("batch_size", &m3l::train::TrainConfig::batch_size)
      .def_readwrite("seed", &m3l::train::TrainConfig::seed)
      .def_readwrite("shuffle", &m3l::train::TrainConfig::shuffle)
      .def_readwrite("arch", &m3l::train::TrainConfig::arch)
      .def_readwrite("zeroshot_train_view", &m3l::train::TrainConfig::zeroshot_train_view)
      .def_readwrite("adam", &m3l::train::TrainConfig::adam);

  py::class_<m3l::corpus::SyntheticConfig>(m, "SyntheticConfig")
      .def(py::init<>())
      .def_readwrite("languages", &m3l::corpus::SyntheticConfig::languages)
      .def_readwrite("image_views", &m3l::corpus::SyntheticConfig::image_views)
      .def_readwrite("tuples", &m3l::corpus::SyntheticConfig::tuples)
      .def_readwrite("true_topics", &m3l::corpus::SyntheticConfig::true_topics)
      .def_readwrite("vocab_size", &m3l::corpus::SyntheticConfig::vocab_size)
      .def_readwrite("embedding_dim", &m3l::corpus::SyntheticConfig::embedding_dim)
      .def_readwrite("doc_length", &m3l::corpus::SyntheticConfig::doc_length)
      .def_readwrite("modality_offset", &m3l::corpus::SyntheticConfig::modality_offset)
      .def_readwrite("shared_projection", &m3l::corpus::SyntheticConfig::shared_projection)
      .def_readwrite("seed", &m3l::corpus::SyntheticConfig::seed);

  py::class_<m3l::pltm::PltmHyper>(m, "PltmHyper")
      .def(py::init<>())
      .def_readwrite("alpha", &m3l::pltm::PltmHyper::alpha)
      .def_readwrite("eta", &m3l::pltm::PltmHyper::eta)
      .def_readwrite("iterations", &m3l::pltm::PltmHyper::iterations)
      .def_readwrite("burn_in", &m3l::pltm::PltmHyper::burn_in)
      .def_readwrite("sample_lag", &m3l::pltm::PltmHyper::sample_lag);

  py::class_<TupleDataset>(m, "Dataset")
      .def_readonly("tuple_count", &TupleDataset::tuple_count)
      .def_property_readonly("views",
                             [](const TupleDataset& ds) {
                               std::vector<std::string> names;
                               for (const auto& v : ds.views) names.push_back(v.name);
                               return names;
                             })
      .def("embeddings",
           [](const TupleDataset& ds, const std::string& view) {
             return to_numpy(ds.embeddings[static_cast<size_t>(ds.view_index(view))]);
           })
      .def("subset", [](const TupleDataset& ds, int first, int count) {
        return m3l::corpus::subset(ds, first, count);
      });

  m.def("load_dataset", &m3l::cli::load_dataset, py::arg("path"),
        "load a dataset manifest (directory or dataset.cfg path)");

  m.def(
      "gen_synthetic",
      [](const m3l::corpus::SyntheticConfig& cfg) {
        auto data = m3l::corpus::gen_synthetic(cfg);
        std::vector<py::array_t<double>> phi;
        for (const auto& p : data.phi_true) phi.push_back(to_numpy(p));
        return py::make_tuple(std::move(data.dataset), to_numpy(data.theta_true), phi);
      },
      py::arg("config"), "returns (dataset, theta_true, [phi_true per language])");

  py::class_<Model>(m, "Model")
      .def_property_readonly("views", &Model::view_names)
      .def_property_readonly("n_topics", [](const Model& mm) { return mm.bundle.config.n_topics; })
      .def_property_readonly("architecture", [](const Model& mm) { return mm.bundle.config.architecture; })
      .def("infer", &Model::infer, py::arg("view"), py::arg("embeddings"), py::arg("samples") = -1,
           py::arg("seed") = 0)
      .def("top_words", &Model::top_words, py::arg("view"), py::arg("top_k") = 10)
      .def("save", &Model::save, py::arg("path"))
      .def_static("load", [](const std::string& path) { return Model{m3l::train::load_model(path)}; });

  m.def(
      "train",
      [](const TupleDataset& dataset, const m3l::model::ModelConfig& mc, const m3l::train::TrainConfig& tc) {
        auto result = m3l::train::train(dataset, mc, tc);
        py::array_t<double> history({static_cast<py::ssize_t>(result.history.epochs.size()),
                                     static_cast<py::ssize_t>(5)});
        auto h = history.mutable_unchecked<2>();
        for (size_t e = 0; e < result.history.epochs.size(); ++e) {
          const auto& row = result.history.epochs[e];
          h(static_cast<py::ssize_t>(e), 0) = row.recon_nll;
          h(static_cast<py::ssize_t>(e), 1) = row.prior_kl;
          h(static_cast<py::ssize_t>(e), 2) = row.pairwise_kl;
          h(static_cast<py::ssize_t>(e), 3) = row.contrastive;
          h(static_cast<py::ssize_t>(e), 4) = row.total;
        }
        return py::make_tuple(Model{std::move(result.bundle)}, history);
      },
      py::arg("dataset"), py::arg("model_config"), py::arg("train_config"),
      "returns (model, history[epochs x (recon, prior_kl, pairwise_kl, contrastive, total)])");

  m.def(
      "jsd",
      [](const std::vector<double>& p, const std::vector<double>& q) { return m3l::eval::jsd(p, q); },
      py::arg("p"), py::arg("q"));
  m.def(
      "mrr",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& candidates,
         const std::vector<int>& gold) { return m3l::eval::mrr(from_numpy(queries), from_numpy(candidates), gold); },
      py::arg("queries"), py::arg("candidates"), py::arg("gold"));
  m.def(
      "uap",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& candidates,
         const std::vector<std::vector<int>>& gold) {
        return m3l::eval::uap(from_numpy(queries), from_numpy(candidates), gold);
      },
      py::arg("queries"), py::arg("candidates"), py::arg("gold"));
  m.def(
      "aligned_pair_jsd",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& thetas) {
        std::vector<Matrix> tables;
        for (const auto& t : thetas) tables.push_back(from_numpy(t));
        return m3l::eval::aligned_pair_jsd(tables);
      },
      py::arg("theta_per_view"));
  m.def(
      "npmi_coherence",
      [](const std::vector<std::vector<int>>& topics,
         const std::vector<std::vector<std::pair<int, int>>>& docs, double epsilon) {
        const auto result = m3l::eval::npmi_coherence(topics, bows_from_python(docs), epsilon);
        return py::make_tuple(result.per_topic, result.mean);
      },
      py::arg("topics"), py::arg("docs"), py::arg("epsilon") = 1e-12,
      "docs are lists of (term_index, count) pairs; returns (per_topic, mean)");

  m.def(
      "pltm_train",
      [](const TupleDataset& dataset, int n_topics, const m3l::pltm::PltmHyper& hyper, uint64_t seed) {
        auto result = m3l::pltm::pltm_train(dataset, n_topics, hyper, seed);
        std::vector<py::array_t<double>> phi;
        for (const auto& p : result.phi) phi.push_back(to_numpy(p));
        return py::make_tuple(phi, to_numpy(result.theta));
      },
      py::arg("dataset"), py::arg("n_topics"), py::arg("hyper"), py::arg("seed") = 0,
      "returns ([phi per language], theta)");
  m.def(
      "pltm_infer",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& phi,
         const std::vector<std::vector<std::vector<std::pair<int, int>>>>& heldout,
         const m3l::pltm::PltmHyper& hyper, uint64_t seed) {
        std::vector<Matrix> tables;
        for (const auto& p : phi) tables.push_back(from_numpy(p));
        std::vector<std::vector<BowVector>> docs;
        for (const auto& lang : heldout) docs.push_back(bows_from_python(lang));
        return to_numpy(m3l::pltm::pltm_infer(tables, docs, hyper, seed));
      },
      py::arg("phi"), py::arg("heldout"), py::arg("hyper"), py::arg("seed") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv;
        argv.push_back("m3l");
        for (const auto& a : args) argv.push_back(a.c_str());
        return m3l::cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "invoke the command-line interface in-process");
}
