#pragma once

#include <string>
#include <vector>

#include "m3l/model.hpp"
#include "m3l/optim.hpp"

namespace m3l::train {

using model::Architecture;
using model::LossBreakdown;
using model::ModelConfig;
using model::ModelParams;

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  uint64_t seed = 0;
  bool shuffle = true;
  Architecture arch = Architecture::m3l_contrast;
  std::string zeroshot_train_view;  // required for the zeroshot architecture
  optim::AdamConfig adam;

  void validate() const;
};

// Per-epoch loss sums over all batches, recorded before each update.
struct TrainHistory {
  std::vector<LossBreakdown> epochs;
};

// Everything needed to run inference later: the trained parameters, the view
// specs (with vocabularies) and both configs.
struct ModelBundle {
  ModelConfig config;
  TrainConfig train_config;
  std::vector<corpus::ViewSpec> views;
  ModelParams params;
};

struct TrainResult {
  ModelBundle bundle;
  TrainHistory history;
};

// Epoch loop: seeded shuffle (Fisher-Yates, high index down, swap target
// drawn with uniform_int(i+1)), consecutive batches with the short tail kept,
// one fresh eps draw per item and view (items in batch order, views in
// dataset order, K normals each), backward, Adam step. Sub-seeds derive from
// config.seed with tags "init", "shuffle" and "eps". The zeroshot
// architecture trains on the single named view; everything else sees all
// views jointly.
TrainResult train(const corpus::TupleDataset& dataset, const ModelConfig& model_config,
                  const TrainConfig& train_config);

// MDL1 bundle: "MDL1", u32 version, u32 K, u32 n_views; per view a u8
// modality tag (0 text, 1 image), length-prefixed name, u32 embedding dim and
// six EMB1 blocks (w1, b1, w_mu, b_mu, w_lv, b_lv, vectors as 1 x n), plus
// for text views the decoder EMB1 block, u32 vocabulary size and the tokens
// as length-prefixed strings in index order; finally a length-prefixed
// key=value config block. Parameters are stored as float32; save -> load ->
// save is byte-identical.
void save_model(const ModelBundle& bundle, const std::string& path);
ModelBundle load_model(const std::string& path);

// Loss-history TSV: a commented header line, then one row per epoch with
// epoch index, recon_nll, prior_kl, pairwise_kl, contrastive and total in
// shortest round-trip decimal.
void save_history_tsv(const TrainHistory& history, const std::string& path);

}  // namespace m3l::train
