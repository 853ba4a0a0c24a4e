#pragma once

#include <optional>
#include <string>

#include "morphlm/encoder/config.hpp"
#include "morphlm/pretrain/trainer.hpp"
#include "morphlm/tagger/tagger.hpp"

namespace morphlm::pipeline {

// One JSON preset: model dims, sizing targets, tagger mapping ranges and
// training hyper-parameters.
struct FullConfig {
  encoder::ModelConfig model;
  std::optional<encoder::VocabSizes> vocab_sizes;
  tagger::TaggerConfig tagger;
  pretrain::TrainingConfig training;

  static FullConfig load(const std::string& path);
  static FullConfig from_json(const nlohmann::json& j,
                              const std::string& origin);
};

}  // namespace morphlm::pipeline
