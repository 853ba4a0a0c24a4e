#include "morphlm/encoder/config.hpp"

#include "morphlm/common.hpp"

namespace morphlm::encoder {

using nlohmann::json;

Variant variant_from_string(const std::string& s) {
  if (s == "ASC") return Variant::kAsc;
  if (s == "ADR") return Variant::kAdr;
  if (s == "AVG") return Variant::kAvg;
  if (s == "STEM_ONLY") return Variant::kStemOnly;
  throw ConfigError("unknown variant '" + s +
                    "' (expected ASC, ADR, AVG or STEM_ONLY)");
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::kAsc: return "ASC";
    case Variant::kAdr: return "ADR";
    case Variant::kAvg: return "AVG";
    case Variant::kStemOnly: return "STEM_ONLY";
  }
  throw ConfigError("invalid variant value");
}

namespace {

TierConfig tier_from_json(const json& j, const char* embed_key) {
  TierConfig t;
  t.layers = j.at("layers").get<int>();
  t.heads = j.at("heads").get<int>();
  t.hidden = j.at("hidden").get<int>();
  t.head_size = j.at("head_size").get<int>();
  t.ffn = j.at("ffn").get<int>();
  t.embed_dim = j.at(embed_key).get<int>();
  return t;
}

json tier_to_json(const TierConfig& t, const char* embed_key) {
  json j;
  j["layers"] = t.layers;
  j["heads"] = t.heads;
  j["hidden"] = t.hidden;
  j["head_size"] = t.head_size;
  j["ffn"] = t.ffn;
  j[embed_key] = t.embed_dim;
  return j;
}

void validate_tier(const TierConfig& t, const char* name) {
  if (t.layers < 1 || t.heads < 1 || t.hidden < 1 || t.head_size < 1 ||
      t.ffn < 1 || t.embed_dim < 1) {
    throw ConfigError(std::string(name) + " tier: all extents must be >= 1");
  }
  if (t.heads * t.head_size != t.hidden) {
    throw ConfigError(std::string(name) + " tier: heads*head_size (" +
                      std::to_string(t.heads * t.head_size) +
                      ") must equal hidden (" + std::to_string(t.hidden) +
                      ")");
  }
}

}  // namespace

void ModelConfig::validate() const {
  validate_tier(sentence, "sentence");
  if (variant == Variant::kStemOnly) {
    if (sentence.embed_dim != sentence.hidden) {
      throw ConfigError(
          "STEM_ONLY: stem_embed_dim (" + std::to_string(sentence.embed_dim) +
          ") must equal sentence hidden (" + std::to_string(sentence.hidden) +
          ")");
    }
  } else {
    validate_tier(morpho, "morpho");
    if (morpho.embed_dim != morpho.hidden) {
      throw ConfigError("morph_embed_dim (" +
                        std::to_string(morpho.embed_dim) +
                        ") must equal morpho hidden (" +
                        std::to_string(morpho.hidden) +
                        "): features are used unprojected");
    }
    int expected = feature_slots() * morpho.hidden + sentence.embed_dim;
    if (expected != sentence.hidden) {
      throw ConfigError(
          "dimension identity violated: feature_slots*morpho.hidden + "
          "stem_embed_dim = " +
          std::to_string(feature_slots()) + "*" +
          std::to_string(morpho.hidden) + "+" +
          std::to_string(sentence.embed_dim) + " = " +
          std::to_string(expected) + " != sentence hidden " +
          std::to_string(sentence.hidden));
    }
  }
  if (max_positions < 1) throw ConfigError("max_positions must be >= 1");
  if (relative_bias_buckets < 4 || relative_bias_buckets % 2 != 0) {
    throw ConfigError("relative_bias_buckets must be even and >= 4");
  }
  if (max_affixes < 1) throw ConfigError("max_affixes must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0 || attention_dropout < 0.0 ||
      attention_dropout >= 1.0) {
    throw ConfigError("dropout rates must be in [0,1)");
  }
  if (init_std <= 0.0) throw ConfigError("init_std must be positive");
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (c.variant != Variant::kStemOnly) {
      c.morpho = tier_from_json(j.at("morpho"), "morph_embed_dim");
    } else if (j.contains("morpho")) {
      c.morpho = tier_from_json(j.at("morpho"), "morph_embed_dim");
    }
    c.sentence = tier_from_json(j.at("sentence"), "stem_embed_dim");
    c.max_positions = j.value("max_positions", 512);
    c.relative_bias_buckets = j.value("relative_bias_buckets", 32);
    c.max_affixes = j.value("max_affixes", 12);
    c.dropout = j.value("dropout", 0.1);
    c.attention_dropout = j.value("attention_dropout", 0.1);
    c.init_std = j.value("init_std", 0.02);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

json ModelConfig::to_json() const {
  json j;
  j["variant"] = variant_to_string(variant);
  if (variant != Variant::kStemOnly) {
    j["morpho"] = tier_to_json(morpho, "morph_embed_dim");
  }
  j["sentence"] = tier_to_json(sentence, "stem_embed_dim");
  j["max_positions"] = max_positions;
  j["relative_bias_buckets"] = relative_bias_buckets;
  j["max_affixes"] = max_affixes;
  j["dropout"] = dropout;
  j["attention_dropout"] = attention_dropout;
  j["init_std"] = init_std;
  return j;
}

VocabSizes vocab_sizes_from_json(const json& j) {
  VocabSizes v;
  try {
    v.stems = j.at("stems").get<std::int64_t>();
    v.affix_sets = j.at("affix_sets").get<std::int64_t>();
    v.affixes = j.at("affixes").get<std::int64_t>();
    v.pos_tags = j.at("pos_tags").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad vocab_sizes: ") + e.what());
  }
  if (v.stems < 1 || v.affix_sets < 1 || v.affixes < 1 || v.pos_tags < 1) {
    throw ConfigError("vocab_sizes must all be >= 1");
  }
  return v;
}

json vocab_sizes_to_json(const VocabSizes& v) {
  json j;
  j["stems"] = v.stems;
  j["affix_sets"] = v.affix_sets;
  j["affixes"] = v.affixes;
  j["pos_tags"] = v.pos_tags;
  return j;
}

}  // namespace morphlm::encoder
