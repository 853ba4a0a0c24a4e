#include "morphlm/pipeline/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "morphlm/common.hpp"
#include "morphlm/pipeline/config.hpp"
#include "morphlm/pipeline/corpus.hpp"
#include "morphlm/pipeline/finetune.hpp"
#include "morphlm/pipeline/metrics.hpp"
#include "morphlm/pretrain/trainer.hpp"

namespace morphlm::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
  } else {
    write_file(out_path, text);
  }
}

morphology::MorphemeCounts load_counts_opt(const std::string& path) {
  if (path.empty()) return {};
  return morphology::MorphemeCounts::load(path);
}

tagger::TaggerConfig tagger_config_opt(const std::string& config_path) {
  if (config_path.empty()) return {};
  return FullConfig::load(config_path).tagger;
}

json analysis_to_json(const morphology::Analysis& a,
                      const morphology::Grammar& g) {
  json j;
  j["surface"] = a.surface;
  j["stem"] = a.stem_text;
  json affixes = json::array();
  for (int m : a.affixes) affixes.push_back(g.morphemes()[m].id);
  j["affixes"] = affixes;
  j["pos_tag"] = g.pos_tags()[a.pos_tag].name;
  j["score"] = a.morph_score;
  j["bpe_fallback"] = a.is_bpe_fallback;
  return j;
}

encoder::VocabSizes sizes_from_vocabs(const vocab::Vocabs& v,
                                      const morphology::Grammar& g) {
  encoder::VocabSizes s;
  s.stems = v.stems.size();
  s.affix_sets = v.affix_sets.size();
  s.affixes = static_cast<std::int64_t>(v.affixes.size());
  s.pos_tags = static_cast<std::int64_t>(g.pos_tags().size());
  return s;
}

pretrain::MaskingIds masking_ids(const encoder::Model& model) {
  pretrain::MaskingIds ids;
  ids.stem_random_hi = static_cast<int>(model.vocab_sizes().stems);
  ids.pos_mask = model.pos_mask_id();
  ids.affix_set_mask = model.affix_set_mask_id();
  return ids;
}

// Shared context for subcommands that preprocess raw text.
struct TextPipeline {
  morphology::Grammar grammar;
  morphology::Analyzer analyzer;
  vocab::Vocabs vocabs;
  tagger::TaggerConfig tagger_cfg;
  tagger::TransitionTables tables;

  TextPipeline(const std::string& grammar_path, const std::string& counts_path,
               const std::string& vocab_dir, const std::string& tables_path,
               const tagger::TaggerConfig& tcfg)
      : grammar(morphology::Grammar::load(grammar_path)),
        analyzer(grammar, load_counts_opt(counts_path)),
        vocabs(vocab::Vocabs::load(vocab_dir)),
        tagger_cfg(tcfg),
        tables(tables_path.empty()
                   ? tagger::TransitionTables::uniform([this] {
                       std::vector<std::string> names;
                       for (const auto& t : grammar.pos_tags())
                         names.push_back(t.name);
                       return names;
                     }())
                   : tagger::TransitionTables::load(tables_path)) {}
};

std::vector<Example> load_task_file(const std::string& path,
                                    const TaskSpec& spec,
                                    std::vector<std::string>& labels,
                                    bool grow_labels, TextPipeline* pipe,
                                    const morphology::Grammar* grammar,
                                    const vocab::Vocabs* vocabs) {
  std::vector<Example> out;
  std::string text = read_file(path);

  auto label_id = [&](const std::string& name, std::size_t line_no) -> int {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == name) return static_cast<int>(i);
    }
    if (!grow_labels) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": label '" + name + "' outside inventory");
    }
    labels.push_back(name);
    return static_cast<int>(labels.size()) - 1;
  };

  if (spec.kind == TaskKind::kSequenceLabeling) {
    // Parsed-corpus format with a sixth label column.
    Example ex;
    std::size_t line_no = 0;
    for (const std::string& line : split(text, '\n')) {
      ++line_no;
      if (line.empty()) {
        if (!ex.tokens.empty()) {
          out.push_back(std::move(ex));
          ex = {};
        }
        continue;
      }
      auto fields = split(line, '\t');
      if (fields.size() != 6) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": expected 6 tab-separated fields");
      }
      std::string label = fields.back();
      fields.pop_back();
      ParsedCorpus one = parse_corpus_text(
          fields[0] + "\t" + fields[1] + "\t" + fields[2] + "\t" + fields[3] +
              "\t" + fields[4] + "\n",
          *grammar, *vocabs, path);
      for (auto& w : one[0]) {
        ex.tokens.push_back(std::move(w));
        ex.word_labels.push_back(label_id(label, line_no));
      }
    }
    if (!ex.tokens.empty()) out.push_back(std::move(ex));
    return out;
  }

  std::size_t line_no = 0;
  for (const std::string& line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    Example ex;
    if (spec.kind == TaskKind::kSentencePair) {
      if (fields.size() != 3) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": expected 'text_a<TAB>text_b<TAB>label'");
      }
      ex.tokens = preprocess_text(fields[0], pipe->analyzer, pipe->vocabs,
                                  pipe->tagger_cfg, pipe->tables);
      vocab::WordPiece sep;
      sep.surface = "[SEP]";
      sep.stem_text = "[SEP]";
      sep.stem_id = vocab::StemVocab::kSep;
      sep.affix_set_id = pipe->vocabs.affix_sets.empty_set_id();
      sep.pos_tag_id = pipe->grammar.fallback_tag();
      sep.is_bpe = true;
      ex.tokens.push_back(sep);
      Sentence b = preprocess_text(fields[1], pipe->analyzer, pipe->vocabs,
                                   pipe->tagger_cfg, pipe->tables);
      ex.tokens.insert(ex.tokens.end(), b.begin(), b.end());
    } else {
      if (fields.size() != 2) {
        throw LoadError(path + ":" + std::to_string(line_no) +
                        ": expected 'text<TAB>label'");
      }
      ex.tokens = preprocess_text(fields[0], pipe->analyzer, pipe->vocabs,
                                  pipe->tagger_cfg, pipe->tables);
    }
    if (ex.tokens.empty()) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": empty text");
    }
    const std::string& label = fields.back();
    if (spec.kind == TaskKind::kRegression) {
      try {
        ex.target = std::stod(label);
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": bad regression target '" + label + "'");
      }
    } else {
      ex.label = label_id(label, line_no);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "morphlm - morphology-aware language model toolkit\n"
      "Rule-driven analysis, unsupervised tagging, affix-set vocabularies "
      "and two-tier masked-LM pretraining at desk scale."};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  std::string config_path;
  int workers = 1;
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--config", config_path, "JSON config preset");
  app.add_option("--workers", workers, "worker threads for preprocessing");

  // analyze
  auto* cmd_analyze = app.add_subcommand("analyze", "parse a single word");
  std::string a_grammar, a_word, a_counts, a_out;
  cmd_analyze->add_option("--grammar", a_grammar, "grammar JSON")->required();
  cmd_analyze->add_option("--word", a_word, "word to analyze")->required();
  cmd_analyze->add_option("--counts", a_counts, "morpheme counts file");
  cmd_analyze->add_option("--out", a_out, "write result here, not stdout");

  // tag
  auto* cmd_tag = app.add_subcommand("tag", "tag sentences");
  std::string t_grammar, t_counts, t_tables, t_text, t_input, t_out;
  cmd_tag->add_option("--grammar", t_grammar, "grammar JSON")->required();
  cmd_tag->add_option("--counts", t_counts, "morpheme counts file");
  cmd_tag->add_option("--tables", t_tables, "transition tables JSON");
  cmd_tag->add_option("--text", t_text, "sentence text");
  cmd_tag->add_option("--input", t_input, "text file to tag");
  cmd_tag->add_option("--out", t_out, "output path");

  // build-vocab
  auto* cmd_bv = app.add_subcommand("build-vocab", "build all vocabularies");
  std::string bv_grammar, bv_counts, bv_input, bv_outdir;
  std::size_t bv_bpe = 200, bv_sets = 1000;
  cmd_bv->add_option("--grammar", bv_grammar, "grammar JSON")->required();
  cmd_bv->add_option("--counts", bv_counts, "morpheme counts file");
  cmd_bv->add_option("--input", bv_input, "raw text corpus")->required();
  cmd_bv->add_option("--out-dir", bv_outdir, "vocabulary directory")
      ->required();
  cmd_bv->add_option("--bpe-size", bv_bpe, "BPE target vocabulary size");
  cmd_bv->add_option("--affix-sets", bv_sets, "affix set vocabulary size N");

  // preprocess
  auto* cmd_pp = app.add_subcommand("preprocess", "raw text -> parsed corpus");
  std::string pp_grammar, pp_counts, pp_input, pp_vocab, pp_out, pp_tables_out;
  cmd_pp->add_option("--grammar", pp_grammar, "grammar JSON")->required();
  cmd_pp->add_option("--counts", pp_counts, "morpheme counts file");
  cmd_pp->add_option("--input", pp_input, "raw text corpus")->required();
  cmd_pp->add_option("--vocab-dir", pp_vocab, "vocabulary directory")
      ->required();
  cmd_pp->add_option("--out", pp_out, "parsed corpus output path");
  cmd_pp->add_option("--tables-out", pp_tables_out,
                     "write estimated transition tables here");

  // pretrain
  auto* cmd_pt = app.add_subcommand("pretrain", "masked-morphology pretraining");
  std::string pt_grammar, pt_vocab, pt_corpus, pt_outdir = "pretrain_out";
  std::int64_t pt_steps = 0;
  cmd_pt->add_option("--grammar", pt_grammar, "grammar JSON")->required();
  cmd_pt->add_option("--vocab-dir", pt_vocab, "vocabulary directory")
      ->required();
  cmd_pt->add_option("--corpus", pt_corpus, "parsed corpus file")->required();
  cmd_pt->add_option("--steps", pt_steps, "training steps")->required();
  cmd_pt->add_option("--out-dir", pt_outdir, "output directory");

  // finetune
  auto* cmd_ft = app.add_subcommand("finetune", "fine-tune on a task");
  std::string ft_ckpt, ft_task = "classification", ft_metric = "accuracy";
  std::string ft_train, ft_dev, ft_grammar, ft_counts, ft_vocab, ft_tables;
  std::string ft_outside = "O", ft_out;
  std::int64_t ft_epochs = 15, ft_batch = 16;
  double ft_lr = 1e-4;
  cmd_ft->add_option("--checkpoint", ft_ckpt, "model checkpoint")->required();
  cmd_ft->add_option("--task", ft_task,
                     "classification | pair | regression | labeling");
  cmd_ft->add_option("--metric", ft_metric,
                     "accuracy | f1 | pearson | spearman");
  cmd_ft->add_option("--train", ft_train, "training TSV")->required();
  cmd_ft->add_option("--dev", ft_dev, "development TSV")->required();
  cmd_ft->add_option("--grammar", ft_grammar, "grammar JSON")->required();
  cmd_ft->add_option("--counts", ft_counts, "morpheme counts file");
  cmd_ft->add_option("--vocab-dir", ft_vocab, "vocabulary directory")
      ->required();
  cmd_ft->add_option("--tables", ft_tables, "transition tables JSON");
  cmd_ft->add_option("--outside-label", ft_outside,
                     "outside label name for labeling F1");
  cmd_ft->add_option("--epochs", ft_epochs, "epochs");
  cmd_ft->add_option("--lr", ft_lr, "peak learning rate");
  cmd_ft->add_option("--batch", ft_batch, "batch size");
  cmd_ft->add_option("--out", ft_out, "metrics output path");

  // export-bias
  auto* cmd_eb = app.add_subcommand("export-bias",
                                    "positional bias matrices as CSV");
  std::string eb_ckpt, eb_outdir = "bias_out";
  int eb_length = 16, eb_layer = 0;
  cmd_eb->add_option("--checkpoint", eb_ckpt, "model checkpoint")->required();
  cmd_eb->add_option("--length", eb_length, "matrix side length");
  cmd_eb->add_option("--layer", eb_layer, "sentence-encoder layer");
  cmd_eb->add_option("--out-dir", eb_outdir, "output directory");

  // param-count
  auto* cmd_pc = app.add_subcommand("param-count",
                                    "total parameter count of a config");
  std::string pc_out;
  cmd_pc->add_option("--out", pc_out, "output path");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_analyze->parsed()) {
      auto grammar = morphology::Grammar::load(a_grammar);
      morphology::Analyzer analyzer(grammar, load_counts_opt(a_counts));
      json arr = json::array();
      for (const auto& a : analyzer.analyze(lowercase(a_word))) {
        arr.push_back(analysis_to_json(a, grammar));
      }
      emit(arr.dump(2), a_out);
      return 0;
    }

    if (cmd_tag->parsed()) {
      if (t_text.empty() == t_input.empty()) {
        std::cerr << "tag: exactly one of --text / --input is required\n";
        return 2;
      }
      auto grammar = morphology::Grammar::load(t_grammar);
      morphology::Analyzer analyzer(grammar, load_counts_opt(t_counts));
      tagger::TaggerConfig tcfg = tagger_config_opt(config_path);
      std::string text = t_text.empty() ? read_file(t_input) : t_text;
      std::vector<std::string> tag_names;
      std::vector<double> precedence;
      for (const auto& t : grammar.pos_tags()) {
        tag_names.push_back(t.name);
        precedence.push_back(t.precedence);
      }
      tagger::TransitionTables tables =
          t_tables.empty() ? tagger::TransitionTables::uniform(tag_names)
                           : tagger::TransitionTables::load(t_tables);
      std::ostringstream ss;
      for (const auto& words : split_sentences(text)) {
        std::vector<std::vector<morphology::Analysis>> sent;
        for (const auto& w : words) sent.push_back(analyzer.analyze(w));
        auto emissions = tagger::emission(analyzer, sent, tcfg);
        auto decoded =
            tagger::decode_bidirectional(emissions, tables, precedence);
        for (std::size_t t = 0; t < words.size(); ++t) {
          ss << words[t] << "\t" << grammar.pos_tags()[decoded.tags[t]].name
             << "\n";
        }
        ss << "\n";
      }
      emit(ss.str(), t_out);
      return 0;
    }

    if (cmd_bv->parsed()) {
      auto grammar = morphology::Grammar::load(bv_grammar);
      morphology::Analyzer analyzer(grammar, load_counts_opt(bv_counts));
      tagger::TaggerConfig tcfg = tagger_config_opt(config_path);
      std::string text = read_file(bv_input);

      vocab::Vocabs vocabs;
      vocabs.bpe = vocab::train_bpe_text(lowercase(text), bv_bpe);
      vocabs.stems = vocab::StemVocab::build(grammar, vocabs.bpe);
      vocabs.affixes = vocab::Vocabs::affix_inventory(grammar);
      for (std::size_t i = 0; i < vocabs.affixes.size(); ++i) {
        vocabs.affix_index[vocabs.affixes[i]] = static_cast<int>(i);
      }

      TaggedCorpus tagged = tag_corpus(text, analyzer, tcfg, workers);
      std::map<std::vector<int>, std::int64_t> combos;
      for (const auto& sent : tagged.chosen) {
        for (const auto& a : sent) {
          if (a.is_bpe_fallback) continue;
          std::vector<int> combo;
          for (int m : a.affixes) {
            combo.push_back(vocabs.affix_index.at(grammar.morphemes()[m].id));
          }
          combos[vocab::AffixSetVocab::canonical(combo)]++;
        }
      }
      vocabs.affix_sets = vocab::AffixSetVocab::build(
          combos, bv_sets, static_cast<int>(vocabs.affixes.size()));
      vocabs.save(bv_outdir);
      tagged.tables.save((fs::path(bv_outdir) / "tables.json").string());

      json summary;
      summary["stems"] = vocabs.stems.size();
      summary["affixes"] = vocabs.affixes.size();
      summary["affix_sets"] = vocabs.affix_sets.size();
      summary["bpe_vocabulary"] = vocabs.bpe.vocabulary().size();
      summary["out_dir"] = bv_outdir;
      emit(summary.dump(2), "");
      return 0;
    }

    if (cmd_pp->parsed()) {
      auto grammar = morphology::Grammar::load(pp_grammar);
      morphology::Analyzer analyzer(grammar, load_counts_opt(pp_counts));
      tagger::TaggerConfig tcfg = tagger_config_opt(config_path);
      auto vocabs = vocab::Vocabs::load(pp_vocab);
      std::string text = read_file(pp_input);
      PreprocessResult res =
          preprocess(text, analyzer, vocabs, tcfg, workers);
      emit(to_parsed_text(res.sentences, grammar), pp_out);
      if (!pp_tables_out.empty()) res.tables.save(pp_tables_out);
      return 0;
    }

    if (cmd_pt->parsed()) {
      if (config_path.empty()) {
        std::cerr << "pretrain: --config is required\n";
        return 2;
      }
      FullConfig cfg = FullConfig::load(config_path);
      auto grammar = morphology::Grammar::load(pt_grammar);
      auto vocabs = vocab::Vocabs::load(pt_vocab);
      ParsedCorpus corpus = load_parsed_corpus(pt_corpus, grammar, vocabs);
      if (corpus.empty()) {
        throw ValidationError("pretrain: corpus has no sentences");
      }
      pretrain::TrainingConfig tc = cfg.training;
      if (app.count("--seed") > 0) tc.seed = seed;
      encoder::Model model(cfg.model, sizes_from_vocabs(vocabs, grammar),
                           tc.seed);
      pretrain::TrainResult res = pretrain::train(
          model, corpus, tc, pt_steps, pt_outdir, masking_ids(model));
      json summary;
      summary["steps"] = pt_steps;
      summary["final_loss"] =
          res.log.empty() ? 0.0 : res.log.back().total;
      summary["final_masked_stem_accuracy"] = res.final_masked_stem_accuracy;
      summary["checkpoint"] = res.checkpoint_path;
      summary["loss_log"] = res.loss_log_path;
      emit(summary.dump(2), "");
      return 0;
    }

    if (cmd_ft->parsed()) {
      TaskSpec spec;
      spec.kind = task_kind_from_string(ft_task);
      spec.metric = task_metric_from_string(ft_metric);
      encoder::Model model = encoder::Model::load(ft_ckpt);

      std::vector<Example> train_set, dev_set;
      morphology::Grammar grammar = morphology::Grammar::load(ft_grammar);
      vocab::Vocabs vocabs = vocab::Vocabs::load(ft_vocab);
      if (spec.kind == TaskKind::kSequenceLabeling) {
        train_set = load_task_file(ft_train, spec, spec.labels, true, nullptr,
                                   &grammar, &vocabs);
        dev_set = load_task_file(ft_dev, spec, spec.labels, false, nullptr,
                                 &grammar, &vocabs);
        for (std::size_t i = 0; i < spec.labels.size(); ++i) {
          if (spec.labels[i] == ft_outside) {
            spec.outside_label = static_cast<int>(i);
          }
        }
      } else {
        TextPipeline pipe(ft_grammar, ft_counts, ft_vocab, ft_tables,
                          tagger_config_opt(config_path));
        train_set = load_task_file(ft_train, spec, spec.labels, true, &pipe,
                                   nullptr, nullptr);
        dev_set = load_task_file(ft_dev, spec, spec.labels, false, &pipe,
                                 nullptr, nullptr);
      }

      FinetuneOptions opt;
      opt.epochs = ft_epochs;
      opt.lr = ft_lr;
      opt.batch = ft_batch;
      opt.seed = seed;
      FinetuneResult res = finetune(model, spec, train_set, dev_set, opt);
      json out;
      out["best_metric"] = res.best_metric;
      out["best_epoch"] = res.best_epoch;
      json epochs = json::array();
      for (const auto& e : res.epochs) {
        json je;
        je["epoch"] = e.epoch;
        je["train_loss"] = e.train_loss;
        if (e.metric_error.empty()) {
          je["dev_metric"] = e.dev_metric;
        } else {
          je["metric_error"] = e.metric_error;
        }
        epochs.push_back(je);
      }
      out["epochs"] = epochs;
      emit(out.dump(2), ft_out);
      // An undefined metric on every epoch is an error, not a result.
      bool all_failed = !res.epochs.empty();
      for (const auto& e : res.epochs) {
        if (e.metric_error.empty()) all_failed = false;
      }
      if (all_failed) {
        std::cerr << "finetune: metric undefined: "
                  << res.epochs.back().metric_error << "\n";
        return 1;
      }
      return 0;
    }

    if (cmd_eb->parsed()) {
      encoder::Model model = encoder::Model::load(eb_ckpt);
      auto matrices = model.export_positional_bias(eb_length, eb_layer);
      fs::create_directories(eb_outdir);
      json files = json::array();
      for (std::size_t h = 0; h < matrices.size(); ++h) {
        std::ostringstream ss;
        for (int i = 0; i < eb_length; ++i) {
          for (int j = 0; j < eb_length; ++j) {
            if (j) ss << ",";
            ss << format_double(matrices[h][i * eb_length + j]);
          }
          ss << "\n";
        }
        std::string path =
            (fs::path(eb_outdir) / ("head_" + std::to_string(h) + ".csv"))
                .string();
        write_file(path, ss.str());
        files.push_back(path);
      }
      json summary;
      summary["files"] = files;
      emit(summary.dump(2), "");
      return 0;
    }

    if (cmd_pc->parsed()) {
      if (config_path.empty()) {
        std::cerr << "param-count: --config is required\n";
        return 2;
      }
      FullConfig cfg = FullConfig::load(config_path);
      if (!cfg.vocab_sizes.has_value()) {
        throw ConfigError(config_path +
                          ": param-count needs a 'vocab_sizes' section");
      }
      std::int64_t count =
          encoder::Model::param_count(cfg.model, *cfg.vocab_sizes);
      emit(std::to_string(count), pc_out);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace morphlm::pipeline
