#pragma once

#include <filesystem>
#include <string>

#include "sqdr/trainer.h"
#include "sqdr/vad_model.h"

namespace sqdr {

// Line-oriented `section.key = value` text. Blank lines and lines starting
// with '#' are ignored. Sections: data, frontend, model, train, loss.
//
//   data.train = synthetic:n=256,seed=1,speech_frac=0.5
//   data.val   = /path/to/dir-with-manifest
//   train.seed = 7
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string train_data;
  std::string val_data;  // optional
};

// Throws kInvalidConfig with the line number and key for unknown, duplicate
// or malformed entries, and for a missing data.train.
RunConfig ParseRunConfig(const std::string& text, const std::string& origin = "config");
RunConfig LoadRunConfig(const std::filesystem::path& path);

}  // namespace sqdr
