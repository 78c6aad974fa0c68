#pragma once

#include <string>

#include "m3l/corpus.hpp"
#include "m3l/pltm.hpp"
#include "m3l/trainer.hpp"

namespace m3l::cli {

// Flat key=value run configuration ('#' starts a comment). Unknown keys are
// rejected; missing keys keep the documented defaults. One seed key drives
// every component through derived sub-seeds.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig trainer;
  pltm::PltmHyper pltm;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Dataset manifest (same key=value syntax): a `views` name list plus
// view.<name>.modality / .embeddings / .bow / .vocab entries and an optional
// `alignment` path. Relative paths resolve against the manifest location.
// A directory path stands for <dir>/dataset.cfg.
corpus::TupleDataset load_dataset(const std::string& path);

// Entry point behind the m3l binary; returns the process exit code. Domain
// failures map to 10 + the ErrorCode value with a message on stderr.
int run(int argc, const char* const* argv);

int exit_code_for(ErrorCode code);

}  // namespace m3l::cli
