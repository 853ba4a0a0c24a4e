#include "morphlm/encoder/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "morphlm/kernel/rng.hpp"

namespace morphlm::encoder {

using kernel::Tape;
using kernel::Tensor;
using kernel::TensorPtr;

namespace {

enum class Init { kNormal, kZero, kOne };

// Every parameter of the model, in a fixed order shared by allocation,
// counting and checkpointing.
template <typename F>
void enumerate_params(const ModelConfig& c, const VocabSizes& v, F&& f) {
  auto layer_params = [&](const std::string& prefix, const TierConfig& t,
                          bool positional) {
    for (int l = 0; l < t.layers; ++l) {
      std::string p = prefix + ".l" + std::to_string(l);
      f(p + ".ln1.gain", std::vector<std::int64_t>{t.hidden}, Init::kOne);
      f(p + ".ln1.bias", std::vector<std::int64_t>{t.hidden}, Init::kZero);
      for (const char* w : {"wq", "wk", "wv", "wo"}) {
        f(p + ".attn." + std::string(w),
          std::vector<std::int64_t>{t.hidden, t.hidden}, Init::kNormal);
      }
      for (const char* b : {"bq", "bk", "bv", "bo"}) {
        f(p + ".attn." + std::string(b), std::vector<std::int64_t>{t.hidden},
          Init::kZero);
      }
      f(p + ".ln2.gain", std::vector<std::int64_t>{t.hidden}, Init::kOne);
      f(p + ".ln2.bias", std::vector<std::int64_t>{t.hidden}, Init::kZero);
      f(p + ".ffn.w1", std::vector<std::int64_t>{t.hidden, t.ffn},
        Init::kNormal);
      f(p + ".ffn.b1", std::vector<std::int64_t>{t.ffn}, Init::kZero);
      f(p + ".ffn.w2", std::vector<std::int64_t>{t.ffn, t.hidden},
        Init::kNormal);
      f(p + ".ffn.b2", std::vector<std::int64_t>{t.hidden}, Init::kZero);
      if (positional) {
        f(p + ".rel_bias",
          std::vector<std::int64_t>{t.heads, c.relative_bias_buckets},
          Init::kZero);
        f(p + ".cls_theta", std::vector<std::int64_t>{t.heads, 2},
          Init::kZero);
      }
    }
    f(prefix + ".final_ln.gain", std::vector<std::int64_t>{t.hidden},
      Init::kOne);
    f(prefix + ".final_ln.bias", std::vector<std::int64_t>{t.hidden},
      Init::kZero);
  };

  bool tiered = c.variant != Variant::kStemOnly;
  if (tiered) {
    int d1 = c.morpho.hidden;
    f("emb.morpho.stem", std::vector<std::int64_t>{v.stems, d1},
      Init::kNormal);
    f("emb.morpho.affix", std::vector<std::int64_t>{v.affixes, d1},
      Init::kNormal);
    f("emb.morpho.pos0", std::vector<std::int64_t>{v.pos_tags + 1, d1},
      Init::kNormal);
    f("emb.morpho.pos1", std::vector<std::int64_t>{v.pos_tags + 1, d1},
      Init::kNormal);
    if (c.variant == Variant::kAdr) {
      f("emb.morpho.pos2", std::vector<std::int64_t>{v.pos_tags + 1, d1},
        Init::kNormal);
    } else if (c.variant == Variant::kAsc) {
      f("emb.morpho.affix_set",
        std::vector<std::int64_t>{v.affix_sets + 1, d1}, Init::kNormal);
    }
    layer_params("morpho", c.morpho, false);
  }

  int d2 = c.sentence.hidden;
  f("emb.sentence.stem", std::vector<std::int64_t>{v.stems, c.sentence.embed_dim},
    Init::kNormal);
  f("cls", std::vector<std::int64_t>{1, d2}, Init::kNormal);
  f("pos.table", std::vector<std::int64_t>{c.max_positions + 1, d2},
    Init::kNormal);
  f("pos.uq", std::vector<std::int64_t>{d2, d2}, Init::kNormal);
  f("pos.uq_b", std::vector<std::int64_t>{d2}, Init::kZero);
  f("pos.uk", std::vector<std::int64_t>{d2, d2}, Init::kNormal);
  f("pos.uk_b", std::vector<std::int64_t>{d2}, Init::kZero);
  layer_params("sentence", c.sentence, true);

  // Tied prediction heads: two-layer transform into the embedding space
  // with a closing layer norm, output matrix shared with the embedding
  // table, separate output bias.
  auto head = [&](const std::string& prefix, int tie, std::int64_t out) {
    f(prefix + ".w1", std::vector<std::int64_t>{d2, d2}, Init::kNormal);
    f(prefix + ".b1", std::vector<std::int64_t>{d2}, Init::kZero);
    f(prefix + ".w2", std::vector<std::int64_t>{d2, tie}, Init::kNormal);
    f(prefix + ".b2", std::vector<std::int64_t>{tie}, Init::kZero);
    f(prefix + ".ln.gain", std::vector<std::int64_t>{tie}, Init::kOne);
    f(prefix + ".ln.bias", std::vector<std::int64_t>{tie}, Init::kZero);
    f(prefix + ".bias", std::vector<std::int64_t>{out}, Init::kZero);
  };
  int stem_tie = tiered ? c.morpho.hidden : c.sentence.embed_dim;
  head("head.stem", stem_tie, v.stems);
  if (c.variant == Variant::kAdr || c.variant == Variant::kAvg) {
    head("head.affix", c.morpho.hidden, v.affixes);
  } else if (c.variant == Variant::kAsc) {
    head("head.affix_set", c.morpho.hidden, v.affix_sets);
  }
}

}  // namespace

int relative_bucket(std::int64_t relative_position, int num_buckets,
                    int max_distance) {
  int half = num_buckets / 2;
  int bucket = relative_position > 0 ? half : 0;
  std::int64_t a = std::llabs(relative_position);
  int max_exact = half / 2;
  if (a < max_exact) {
    return bucket + static_cast<int>(a);
  }
  double log_ratio =
      std::log(static_cast<double>(a) / max_exact) /
      std::log(static_cast<double>(max_distance) / max_exact);
  int mapped =
      max_exact + static_cast<int>(log_ratio * (half - max_exact));
  return bucket + std::min(half - 1, mapped);
}

Model::Model(ModelConfig cfg, VocabSizes vocabs, std::uint64_t seed)
    : cfg_(std::move(cfg)), vocabs_(vocabs) {
  cfg_.validate();
  kernel::Rng rng(derive_seed(seed, "model-init", 0));
  enumerate_params(cfg_, vocabs_, [&](const std::string& name,
                                      const std::vector<std::int64_t>& shape,
                                      Init init) {
    auto t = Tensor::zeros(shape, /*requires_grad=*/true);
    switch (init) {
      case Init::kNormal:
        for (double& x : t->values) x = rng.normal(0.0, cfg_.init_std);
        break;
      case Init::kZero:
        break;
      case Init::kOne:
        std::fill(t->values.begin(), t->values.end(), 1.0);
        break;
    }
    by_name_[name] = params_.size();
    params_.push_back({name, std::move(t)});
  });
}

const TensorPtr& Model::param(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw Error("model parameter '" + name + "' does not exist");
  }
  return params_[it->second].tensor;
}

void Model::zero_grads() {
  for (auto& p : params_) p.tensor->zero_grad();
}

std::int64_t Model::param_count(const ModelConfig& cfg,
                                const VocabSizes& vocabs) {
  cfg.validate();
  std::int64_t total = 0;
  enumerate_params(cfg, vocabs,
                   [&](const std::string&, const std::vector<std::int64_t>& s,
                       Init) {
                     std::int64_t n = 1;
                     for (auto d : s) n *= d;
                     total += n;
                   });
  return total;
}

std::int64_t Model::param_count() const {
  return param_count(cfg_, vocabs_);
}

TensorPtr Model::encoder_layer(Tape& tape, TensorPtr x,
                               const std::string& prefix, int heads,
                               int head_size,
                               const std::vector<TensorPtr>& pos,
                               DropoutStream* drop) const {
  double attn_p = drop ? cfg_.attention_dropout : 0.0;
  double resid_p = drop ? cfg_.dropout : 0.0;
  auto maybe_drop = [&](TensorPtr t, double p) {
    if (p == 0.0 || drop == nullptr) return t;
    return tape.dropout(t, p, drop->next());
  };

  TensorPtr h = tape.layer_norm(x, param(prefix + ".ln1.gain"),
                                param(prefix + ".ln1.bias"));
  TensorPtr q = tape.add_bias(tape.matmul(h, param(prefix + ".attn.wq")),
                              param(prefix + ".attn.bq"));
  TensorPtr k = tape.add_bias(tape.matmul(h, param(prefix + ".attn.wk")),
                              param(prefix + ".attn.bk"));
  TensorPtr v = tape.add_bias(tape.matmul(h, param(prefix + ".attn.wv")),
                              param(prefix + ".attn.bv"));
  // Content scale: 1/sqrt(2*hs) when a positional term is added, else
  // 1/sqrt(hs).
  double scale = pos.empty() ? 1.0 / std::sqrt(static_cast<double>(head_size))
                             : 1.0 / std::sqrt(2.0 * head_size);
  std::vector<TensorPtr> ctx;
  ctx.reserve(heads);
  for (int hd = 0; hd < heads; ++hd) {
    TensorPtr qh = tape.slice_cols(q, hd * head_size, head_size);
    TensorPtr kh = tape.slice_cols(k, hd * head_size, head_size);
    TensorPtr vh = tape.slice_cols(v, hd * head_size, head_size);
    TensorPtr scores =
        tape.scale(tape.matmul(qh, tape.transpose(kh)), scale);
    if (!pos.empty()) scores = tape.add(scores, pos[hd]);
    TensorPtr attn = tape.softmax(scores, -1);
    attn = maybe_drop(attn, attn_p);
    ctx.push_back(tape.matmul(attn, vh));
  }
  TensorPtr merged = heads == 1 ? ctx[0] : tape.concat_cols(ctx);
  TensorPtr o = tape.add_bias(tape.matmul(merged, param(prefix + ".attn.wo")),
                              param(prefix + ".attn.bo"));
  o = maybe_drop(o, resid_p);
  x = tape.add(x, o);

  TensorPtr h2 = tape.layer_norm(x, param(prefix + ".ln2.gain"),
                                 param(prefix + ".ln2.bias"));
  TensorPtr f =
      tape.gelu(tape.add_bias(tape.matmul(h2, param(prefix + ".ffn.w1")),
                              param(prefix + ".ffn.b1")));
  f = tape.add_bias(tape.matmul(f, param(prefix + ".ffn.w2")),
                    param(prefix + ".ffn.b2"));
  f = maybe_drop(f, resid_p);
  return tape.add(x, f);
}

std::vector<TensorPtr> Model::encode_morphology(Tape& tape,
                                                const WordInput& word,
                                                DropoutStream* drop) const {
  if (cfg_.variant == Variant::kStemOnly) {
    throw ConfigError("encode_morphology: STEM_ONLY has no morphology tier");
  }
  if (static_cast<int>(word.affix_ids.size()) > cfg_.max_affixes) {
    throw ValidationError("encode_morphology: word carries " +
                          std::to_string(word.affix_ids.size()) +
                          " affixes, max is " +
                          std::to_string(cfg_.max_affixes));
  }
  // Units are an unordered set; affixes are ordered canonically so that any
  // input permutation produces bit-identical outputs.
  std::vector<std::int64_t> affixes(word.affix_ids.begin(),
                                    word.affix_ids.end());
  std::sort(affixes.begin(), affixes.end());

  std::vector<TensorPtr> blocks;
  std::int64_t tag = word.pos_tag_id;
  blocks.push_back(tape.embedding_lookup(param("emb.morpho.pos0"), {tag}));
  blocks.push_back(tape.embedding_lookup(param("emb.morpho.pos1"), {tag}));
  int stem_row;
  if (cfg_.variant == Variant::kAdr) {
    blocks.push_back(tape.embedding_lookup(param("emb.morpho.pos2"), {tag}));
    stem_row = 3;
  } else if (cfg_.variant == Variant::kAsc) {
    blocks.push_back(tape.embedding_lookup(
        param("emb.morpho.affix_set"),
        {static_cast<std::int64_t>(word.affix_set_id)}));
    stem_row = 3;
  } else {  // AVG: no third input unit
    stem_row = 2;
  }
  blocks.push_back(tape.embedding_lookup(
      param("emb.morpho.stem"), {static_cast<std::int64_t>(word.stem_id)}));
  if (!affixes.empty()) {
    blocks.push_back(tape.embedding_lookup(param("emb.morpho.affix"), affixes));
  }
  TensorPtr x = tape.stack_rows(blocks);
  for (int l = 0; l < cfg_.morpho.layers; ++l) {
    x = encoder_layer(tape, x, "morpho.l" + std::to_string(l),
                      cfg_.morpho.heads, cfg_.morpho.head_size, {}, drop);
  }
  x = tape.layer_norm(x, param("morpho.final_ln.gain"),
                      param("morpho.final_ln.bias"));

  std::vector<TensorPtr> features;
  features.push_back(tape.slice_row(x, 0));
  features.push_back(tape.slice_row(x, 1));
  if (cfg_.variant == Variant::kAvg) {
    if (affixes.empty()) {
      features.push_back(Tensor::zeros({1, cfg_.morpho.hidden}));
    } else {
      features.push_back(tape.mean_rows(tape.slice_rows(
          x, stem_row + 1, static_cast<std::int64_t>(affixes.size()))));
    }
  } else {
    features.push_back(tape.slice_row(x, 2));
  }
  features.push_back(tape.slice_row(x, stem_row));
  return features;
}

TensorPtr Model::assemble_word_vector(Tape& tape,
                                      const std::vector<TensorPtr>& features,
                                      const TensorPtr& stem_embed) const {
  if (cfg_.variant == Variant::kStemOnly) {
    if (!features.empty()) {
      throw ConfigError("assemble_word_vector: STEM_ONLY takes no features");
    }
    return stem_embed;
  }
  if (static_cast<int>(features.size()) != cfg_.feature_slots()) {
    throw ConfigError("assemble_word_vector: expected " +
                      std::to_string(cfg_.feature_slots()) +
                      " feature vectors, got " +
                      std::to_string(features.size()));
  }
  std::vector<TensorPtr> blocks = features;
  blocks.push_back(stem_embed);
  TensorPtr v = tape.concat_cols(blocks);
  if (v->shape[1] != cfg_.sentence.hidden) {
    throw ConfigError("assemble_word_vector: assembled width " +
                      std::to_string(v->shape[1]) + " != sentence hidden " +
                      std::to_string(cfg_.sentence.hidden));
  }
  return v;
}

std::vector<std::int32_t> Model::bucket_matrix(std::int64_t len) const {
  std::vector<std::int32_t> idx(len * len);
  for (std::int64_t i = 0; i < len; ++i) {
    for (std::int64_t j = 0; j < len; ++j) {
      idx[i * len + j] = relative_bucket(j - i, cfg_.relative_bias_buckets,
                                         cfg_.max_positions);
    }
  }
  return idx;
}

EncodedSentence Model::encode(Tape& tape, const std::vector<WordInput>& words,
                              DropoutStream* drop) const {
  if (words.empty()) throw ValidationError("encode: empty sentence");
  if (static_cast<int>(words.size()) > cfg_.max_positions) {
    throw ValidationError("encode: sentence of " +
                          std::to_string(words.size()) +
                          " words exceeds max_positions " +
                          std::to_string(cfg_.max_positions));
  }
  std::vector<TensorPtr> rows;
  rows.push_back(param("cls"));
  for (const WordInput& w : words) {
    TensorPtr stem_embed = tape.embedding_lookup(
        param("emb.sentence.stem"), {static_cast<std::int64_t>(w.stem_id)});
    if (cfg_.variant == Variant::kStemOnly) {
      rows.push_back(assemble_word_vector(tape, {}, stem_embed));
    } else {
      auto feats = encode_morphology(tape, w, drop);
      rows.push_back(assemble_word_vector(tape, feats, stem_embed));
    }
  }
  TensorPtr x = tape.stack_rows(rows);
  std::int64_t len = x->shape[0];

  // Untied positional term, shared across layers: separate embedding table
  // with its own projections. Per-layer bucket bias and CLS overrides are
  // applied on top.
  std::vector<std::int64_t> pos_ids(len);
  for (std::int64_t i = 0; i < len; ++i) pos_ids[i] = i;
  TensorPtr pe = tape.embedding_lookup(param("pos.table"), pos_ids);
  TensorPtr pq =
      tape.add_bias(tape.matmul(pe, param("pos.uq")), param("pos.uq_b"));
  TensorPtr pk =
      tape.add_bias(tape.matmul(pe, param("pos.uk")), param("pos.uk_b"));
  int heads = cfg_.sentence.heads;
  int hs = cfg_.sentence.head_size;
  double alpha = 1.0 / std::sqrt(2.0 * hs);
  std::vector<TensorPtr> pos_base(heads);
  for (int h = 0; h < heads; ++h) {
    TensorPtr pqh = tape.slice_cols(pq, h * hs, hs);
    TensorPtr pkh = tape.slice_cols(pk, h * hs, hs);
    pos_base[h] = tape.scale(tape.matmul(pqh, tape.transpose(pkh)), alpha);
  }
  std::vector<std::int32_t> buckets = bucket_matrix(len);

  for (int l = 0; l < cfg_.sentence.layers; ++l) {
    std::string p = "sentence.l" + std::to_string(l);
    TensorPtr rel = param(p + ".rel_bias");
    TensorPtr theta = param(p + ".cls_theta");
    std::vector<TensorPtr> pos(heads);
    for (int h = 0; h < heads; ++h) {
      TensorPtr biased =
          tape.add_indexed_bias(pos_base[h], tape.slice_row(rel, h), buckets);
      pos[h] = tape.cls_overlay(biased, tape.slice_row(theta, h));
    }
    x = encoder_layer(tape, x, p, heads, hs, pos, drop);
  }
  x = tape.layer_norm(x, param("sentence.final_ln.gain"),
                      param("sentence.final_ln.bias"));
  return EncodedSentence{x};
}

TensorPtr Model::head_transform(Tape& tape, const TensorPtr& rows,
                                const std::string& prefix) const {
  TensorPtr h = tape.gelu(
      tape.add_bias(tape.matmul(rows, param(prefix + ".w1")),
                    param(prefix + ".b1")));
  TensorPtr u = tape.add_bias(tape.matmul(h, param(prefix + ".w2")),
                              param(prefix + ".b2"));
  return tape.layer_norm(u, param(prefix + ".ln.gain"),
                         param(prefix + ".ln.bias"));
}

TensorPtr Model::stem_logits(Tape& tape, const TensorPtr& rows) const {
  TensorPtr u = head_transform(tape, rows, "head.stem");
  const char* table = cfg_.variant == Variant::kStemOnly
                          ? "emb.sentence.stem"
                          : "emb.morpho.stem";
  return tape.add_bias(tape.matmul(u, tape.transpose(param(table))),
                       param("head.stem.bias"));
}

TensorPtr Model::affix_logits(Tape& tape, const TensorPtr& rows) const {
  if (cfg_.variant != Variant::kAdr && cfg_.variant != Variant::kAvg) {
    throw ConfigError("affix_logits: variant has no affix head");
  }
  TensorPtr u = head_transform(tape, rows, "head.affix");
  return tape.add_bias(tape.matmul(u, tape.transpose(param("emb.morpho.affix"))),
                       param("head.affix.bias"));
}

TensorPtr Model::affix_set_logits(Tape& tape, const TensorPtr& rows) const {
  if (cfg_.variant != Variant::kAsc) {
    throw ConfigError("affix_set_logits: variant has no affix-set head");
  }
  TensorPtr u = head_transform(tape, rows, "head.affix_set");
  // The embedding table carries a trailing mask row that is not a
  // prediction target.
  TensorPtr et = tape.transpose(param("emb.morpho.affix_set"));
  TensorPtr real = tape.slice_cols(et, 0, vocabs_.affix_sets);
  return tape.add_bias(tape.matmul(u, real), param("head.affix_set.bias"));
}

std::vector<std::vector<double>> Model::export_positional_bias(
    int length, int layer) const {
  if (length < 1 || length > cfg_.max_positions) {
    throw ValidationError("export_positional_bias: length out of range");
  }
  if (layer < 0 || layer >= cfg_.sentence.layers) {
    throw IndexError("export_positional_bias: layer out of range");
  }
  int d2 = cfg_.sentence.hidden;
  int heads = cfg_.sentence.heads;
  int hs = cfg_.sentence.head_size;
  double alpha = 1.0 / std::sqrt(2.0 * hs);
  const auto& table = param("pos.table")->values;
  const auto& uq = param("pos.uq")->values;
  const auto& uq_b = param("pos.uq_b")->values;
  const auto& uk = param("pos.uk")->values;
  const auto& uk_b = param("pos.uk_b")->values;
  const auto& rel =
      param("sentence.l" + std::to_string(layer) + ".rel_bias")->values;
  int buckets = cfg_.relative_bias_buckets;

  // Word slots start at position index 1 (0 is the CLS slot).
  std::vector<double> pq(length * d2), pk(length * d2);
  for (int i = 0; i < length; ++i) {
    const double* row = table.data() + (i + 1) * d2;
    for (int c = 0; c < d2; ++c) {
      double aq = uq_b[c], ak = uk_b[c];
      for (int r = 0; r < d2; ++r) {
        aq += row[r] * uq[r * d2 + c];
        ak += row[r] * uk[r * d2 + c];
      }
      pq[i * d2 + c] = aq;
      pk[i * d2 + c] = ak;
    }
  }
  std::vector<std::vector<double>> out(heads);
  for (int h = 0; h < heads; ++h) {
    std::vector<double> m(length * length);
    for (int i = 0; i < length; ++i) {
      for (int j = 0; j < length; ++j) {
        double dot = 0.0;
        for (int c = 0; c < hs; ++c) {
          dot += pq[i * d2 + h * hs + c] * pk[j * d2 + h * hs + c];
        }
        int b = relative_bucket(j - i, buckets, cfg_.max_positions);
        m[i * length + j] = alpha * dot + rel[h * buckets + b];
      }
    }
    double mean = 0.0;
    for (double x : m) mean += x;
    mean /= static_cast<double>(m.size());
    double var = 0.0;
    for (double x : m) var += (x - mean) * (x - mean);
    var /= static_cast<double>(m.size());
    if (var < 1e-30) {
      throw ValidationError(
          "export_positional_bias: zero-variance bias matrix");
    }
    double inv = 1.0 / std::sqrt(var);
    for (double& x : m) x = (x - mean) * inv;
    out[h] = std::move(m);
  }
  return out;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[8] = {'M', 'O', 'R', 'P', 'H', 'L', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw LoadError(path + ": truncated checkpoint");
  return v;
}

}  // namespace

void Model::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  nlohmann::json manifest;
  manifest["model"] = cfg_.to_json();
  manifest["vocab_sizes"] = vocab_sizes_to_json(vocabs_);
  std::string mtext = manifest.dump();
  write_pod(out, static_cast<std::uint64_t>(mtext.size()));
  out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  write_pod(out, static_cast<std::uint64_t>(params_.size()));
  for (const auto& p : params_) {
    write_pod(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(out, static_cast<std::uint32_t>(p.tensor->shape.size()));
    for (auto d : p.tensor->shape) write_pod(out, static_cast<std::int64_t>(d));
    out.write(reinterpret_cast<const char*>(p.tensor->values.data()),
              static_cast<std::streamsize>(p.tensor->values.size() *
                                           sizeof(double)));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError(path + ": not a model checkpoint (bad magic)");
  }
  auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw LoadError(path + ": unsupported checkpoint version " +
                    std::to_string(version));
  }
  auto mlen = read_pod<std::uint64_t>(in, path);
  std::string mtext(mlen, '\0');
  in.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw LoadError(path + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtext);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": bad manifest: " + e.what());
  }
  ModelConfig cfg = ModelConfig::from_json(manifest.at("model"));
  VocabSizes vocabs = vocab_sizes_from_json(manifest.at("vocab_sizes"));
  Model model(cfg, vocabs, /*seed=*/0);

  auto n = read_pod<std::uint64_t>(in, path);
  if (n != model.params_.size()) {
    throw LoadError(path + ": parameter count mismatch");
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    auto ndim = read_pod<std::uint32_t>(in, path);
    std::vector<std::int64_t> shape(ndim);
    for (auto& d : shape) d = read_pod<std::int64_t>(in, path);
    auto it = model.by_name_.find(name);
    if (it == model.by_name_.end()) {
      throw LoadError(path + ": unknown parameter '" + name + "'");
    }
    auto& tensor = model.params_[it->second].tensor;
    if (tensor->shape != shape) {
      throw LoadError(path + ": shape mismatch for '" + name + "'");
    }
    in.read(reinterpret_cast<char*>(tensor->values.data()),
            static_cast<std::streamsize>(tensor->values.size() *
                                         sizeof(double)));
    if (!in) throw LoadError(path + ": truncated parameter data");
  }
  return model;
}

}  // namespace morphlm::encoder
