#include "morphlm/pipeline/config.hpp"

#include "morphlm/common.hpp"

namespace morphlm::pipeline {

using nlohmann::json;

namespace {

tagger::SigmoidRange range_from_json(const json& j, const char* key) {
  tagger::SigmoidRange r;
  if (!j.contains(key)) return r;
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 2) {
    throw ConfigError(std::string("sigmoid range '") + key +
                      "' must be [z_A, z_B]");
  }
  r.z_a = arr[0].get<double>();
  r.z_b = arr[1].get<double>();
  if (!(r.z_b > r.z_a)) {
    throw ConfigError(std::string("sigmoid range '") + key +
                      "': require z_B > z_A");
  }
  return r;
}

}  // namespace

FullConfig FullConfig::from_json(const json& j, const std::string& origin) {
  FullConfig c;
  try {
    c.model = encoder::ModelConfig::from_json(j.at("model"));
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": missing 'model' section: " + e.what());
  }
  if (j.contains("vocab_sizes")) {
    c.vocab_sizes = encoder::vocab_sizes_from_json(j.at("vocab_sizes"));
  }
  if (j.contains("tagger")) {
    const auto& t = j.at("tagger");
    if (t.contains("sigmoid_ranges")) {
      const auto& r = t.at("sigmoid_ranges");
      c.tagger.range_m = range_from_json(r, "m");
      c.tagger.range_p = range_from_json(r, "p");
      c.tagger.range_a = range_from_json(r, "a");
    }
    c.tagger.outer_exponent =
        t.value("sigmoid_outer_exponent", c.tagger.outer_exponent);
    c.tagger.alpha = t.value("transition_alpha", c.tagger.alpha);
    c.tagger.triple_min_count =
        t.value("triple_backoff_min_count", c.tagger.triple_min_count);
  }
  if (j.contains("training")) {
    c.training = pretrain::TrainingConfig::from_json(j.at("training"));
  }
  return c;
}

FullConfig FullConfig::load(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": JSON parse error: " + e.what());
  }
  return from_json(doc, path);
}

}  // namespace morphlm::pipeline
