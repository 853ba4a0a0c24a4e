#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "morphlm/common.hpp"
#include "test_util.hpp"

// End-to-end exercise of every CLI subcommand against the toy fixtures.

namespace fs = std::filesystem;
using morphlm::read_file;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "morphlm_cli_e2e";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  static int counter = 0;
  fs::path out = work_dir() / ("out_" + std::to_string(counter++) + ".txt");
  std::string cmd = std::string(testutil::cli_path()) + " " + args + " > " +
                    out.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(raw);
  if (fs::exists(out)) r.out = read_file(out.string());
  return r;
}

std::string data(const std::string& rel) {
  return testutil::data_dir() + "/" + rel;
}

std::string q(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

TEST_CASE("analyze: parse list on stdout, exit 0") {
  auto r = run("analyze --grammar " + data("toy_grammar.json") +
               " --word twagezeyo --counts " + data("toy_counts.tsv"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("vst_ger") != std::string::npos);
  CHECK(r.out.find("V#FIN") != std::string::npos);

  // Fallback word still exits 0 with a parse list.
  auto fb = run("analyze --grammar " + data("toy_grammar.json") +
                " --word zzzqqq");
  CHECK(fb.exit_code == 0);
  CHECK(fb.out.find("bpe_fallback") != std::string::npos);
}

TEST_CASE("tag: token/tag lines") {
  auto r = run("--config " + data("configs/toy.json") + " tag --grammar " +
               data("toy_grammar.json") + " --counts " +
               data("toy_counts.tsv") + " --text " +
               q("abantu bato baravuga."));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("abantu\tN#AUG") != std::string::npos);
  CHECK(r.out.find("baravuga\tV#FIN") != std::string::npos);
  CHECK(r.out.find(".\tPT#PUNC") != std::string::npos);
}

TEST_CASE("build-vocab, preprocess and pipeline determinism") {
  fs::path vdir = work_dir() / "vocab";
  auto bv = run("--config " + data("configs/toy.json") +
                " build-vocab --grammar " + data("toy_grammar.json") +
                " --counts " + data("toy_counts.tsv") + " --input " +
                data("toy_corpus.txt") + " --out-dir " + vdir.string() +
                " --bpe-size 110 --affix-sets 30");
  CHECK(bv.exit_code == 0);
  CHECK(fs::exists(vdir / "stems.vocab"));
  CHECK(fs::exists(vdir / "affix_sets.vocab"));
  CHECK(fs::exists(vdir / "bpe.model"));
  CHECK(fs::exists(vdir / "tables.json"));

  // The committed fixture was produced by this very command line.
  CHECK(read_file((vdir / "stems.vocab").string()) ==
        read_file(data("toy_vocab/stems.vocab")));
  CHECK(read_file((vdir / "affix_sets.vocab").string()) ==
        read_file(data("toy_vocab/affix_sets.vocab")));

  fs::path p1 = work_dir() / "parsed_w1.tsv";
  fs::path p8 = work_dir() / "parsed_w8.tsv";
  auto r1 = run("--config " + data("configs/toy.json") +
                " --workers 1 preprocess --grammar " +
                data("toy_grammar.json") + " --counts " +
                data("toy_counts.tsv") + " --input " + data("toy_corpus.txt") +
                " --vocab-dir " + vdir.string() + " --out " + p1.string());
  auto r8 = run("--config " + data("configs/toy.json") +
                " --workers 8 preprocess --grammar " +
                data("toy_grammar.json") + " --counts " +
                data("toy_counts.tsv") + " --input " + data("toy_corpus.txt") +
                " --vocab-dir " + vdir.string() + " --out " + p8.string());
  CHECK(r1.exit_code == 0);
  CHECK(r8.exit_code == 0);
  CHECK(read_file(p1.string()) == read_file(p8.string()));
  CHECK(read_file(p1.string()) ==
        read_file(data("golden/toy_corpus.parsed.tsv")));

  // Empty input file: empty corpus, exit 0.
  fs::path empty_in = work_dir() / "empty.txt";
  morphlm::write_file(empty_in.string(), "");
  fs::path empty_out = work_dir() / "empty_parsed.tsv";
  auto re = run("preprocess --grammar " + data("toy_grammar.json") +
                " --input " + empty_in.string() + " --vocab-dir " +
                vdir.string() + " --out " + empty_out.string());
  CHECK(re.exit_code == 0);
  CHECK(read_file(empty_out.string()).empty());
}

TEST_CASE("pretrain: loss CSV with one row per step, then finetune") {
  fs::path outdir = work_dir() / "pretrain";
  auto r = run("--config " + data("configs/toy.json") +
               " --seed 11 pretrain --grammar " + data("toy_grammar.json") +
               " --vocab-dir " + data("toy_vocab") + " --corpus " +
               data("golden/toy_corpus.parsed.tsv") + " --steps 10 --out-dir " +
               outdir.string());
  CHECK(r.exit_code == 0);
  auto lines = morphlm::split(read_file((outdir / "loss_log.csv").string()), '\n');
  CHECK(lines[0] == "step,total,stem_loss,affix_loss,lr");
  int rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (!lines[i].empty()) rows++;
  }
  CHECK(rows == 10);
  CHECK(fs::exists(outdir / "checkpoint.bin"));

  // Fine-tune from the checkpoint on a small classification TSV.
  fs::path train_tsv = work_dir() / "task_train.tsv";
  morphlm::write_file(train_tsv.string(),
                      "abantu bato baravuga.\tpeople\n"
                      "abagabo barakora.\tpeople\n"
                      "ikintu kibi kiragera.\tthings\n"
                      "ibintu biravuga.\tthings\n");
  auto ft = run("finetune --checkpoint " +
                (outdir / "checkpoint.bin").string() +
                " --task classification --metric accuracy --train " +
                train_tsv.string() + " --dev " + train_tsv.string() +
                " --grammar " + data("toy_grammar.json") + " --counts " +
                data("toy_counts.tsv") + " --vocab-dir " + data("toy_vocab") +
                " --tables " + data("toy_vocab/tables.json") +
                " --epochs 2 --lr 0.0003 --batch 2");
  CHECK(ft.exit_code == 0);
  CHECK(ft.out.find("best_metric") != std::string::npos);
  CHECK(ft.out.find("epochs") != std::string::npos);

  // Sentence-pair task: text_a<TAB>text_b<TAB>label.
  fs::path pair_tsv = work_dir() / "task_pair.tsv";
  morphlm::write_file(pair_tsv.string(),
                      "abantu baravuga.\tabantu barakora.\tsame\n"
                      "umuntu aravuga.\tikintu kiragera.\tdifferent\n");
  auto pr = run("finetune --checkpoint " +
                (outdir / "checkpoint.bin").string() +
                " --task pair --metric accuracy --train " +
                pair_tsv.string() + " --dev " + pair_tsv.string() +
                " --grammar " + data("toy_grammar.json") + " --vocab-dir " +
                data("toy_vocab") + " --epochs 1 --batch 2");
  CHECK(pr.exit_code == 0);
  CHECK(pr.out.find("best_metric") != std::string::npos);

  // Labels outside the training inventory are a data error (exit 1).
  fs::path bad_dev = work_dir() / "task_dev_bad.tsv";
  morphlm::write_file(bad_dev.string(), "kora!\tnewlabel\n");
  auto bad = run("finetune --checkpoint " +
                 (outdir / "checkpoint.bin").string() +
                 " --task classification --metric accuracy --train " +
                 train_tsv.string() + " --dev " + bad_dev.string() +
                 " --grammar " + data("toy_grammar.json") + " --vocab-dir " +
                 data("toy_vocab") + " --epochs 1");
  CHECK(bad.exit_code == 1);
  CHECK(bad.out.find("outside inventory") != std::string::npos);

  // Export the positional bias matrices of the pretrained model.
  fs::path bias_dir = work_dir() / "bias";
  auto eb = run("export-bias --checkpoint " +
                (outdir / "checkpoint.bin").string() + " --length 10 " +
                "--out-dir " + bias_dir.string());
  CHECK(eb.exit_code == 0);
  CHECK(fs::exists(bias_dir / "head_0.csv"));
  CHECK(fs::exists(bias_dir / "head_1.csv"));
  auto csv = read_file((bias_dir / "head_0.csv").string());
  CHECK(morphlm::split(csv, '\n').size() >= 10);
}

TEST_CASE("param-count prints the total for a config") {
  auto r = run("--config " + data("configs/paper-asc.json") + " param-count");
  CHECK(r.exit_code == 0);
  long long count = std::stoll(r.out);
  CHECK(count > 90000000);
  CHECK(count < 120000000);
}

TEST_CASE("usage and runtime error exit codes") {
  auto usage = run("--definitely-not-a-flag");
  CHECK(usage.exit_code == 2);

  auto no_sub = run("");
  CHECK(no_sub.exit_code == 2);

  auto missing = run("analyze --grammar /nonexistent.json --word x");
  CHECK(missing.exit_code == 1);
  CHECK(missing.out.find("error") != std::string::npos);

  auto help = run("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("analyze") != std::string::npos);
}
