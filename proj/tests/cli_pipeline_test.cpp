// End-to-end exercise of the termrel binary: synth -> index -> graph ->
// annotate -> train -> eval -> score -> rank, plus exit-code behavior.
// argv[1] is the path to the termrel executable.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::printf("[ok] %s\n", what.c_str());
  } else {
    std::printf("[FAIL] %s\n", what.c_str());
    ++failures;
  }
}

int run(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return rc < 0 ? rc : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_pipeline_test <termrel-binary>\n");
    return 2;
  }
  const std::string termrel = std::string("TERMREL_LOG=error ") + argv[1];
  fs::path dir = fs::temp_directory_path() / "termrel_cli_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();

  std::ofstream(dir / "synth.cfg")
      << "levels=cs:140,ai:60,ml:24\nbackground=140\ncore_ratio=0.55\n"
      << "dim=16\nvocab=800\nnoise=0.05\n";

  check(run(termrel + " synth --spec " + d + "/synth.cfg --seed 7 --out " + d +
            "/data") == 0,
        "synth succeeds");
  check(fs::exists(dir / "data/terms.tsv"), "synth wrote terms.tsv");

  check(run(termrel + " index --terms " + d + "/data/terms.tsv --out " + d +
            "/core.idx") == 0,
        "index succeeds");

  check(run(termrel + " graph --terms " + d + "/data/terms.tsv --index " + d +
            "/core.idx --k 5 --out " + d + "/graph.txt") == 0,
        "graph succeeds");

  check(run(termrel + " annotate --terms " + d + "/data/terms.tsv --tree " + d +
            "/data/tree.tsv --hierarchy " + d + "/data/hierarchy.cfg --out " +
            d + "/labels.tsv") == 0,
        "annotate succeeds");

  const std::string hyper =
      " --hidden 32 --epochs 40 --seed 7 --lr 0.01 --dropout 0.5";
  check(run(termrel + " train --terms " + d + "/data/terms.tsv --vectors " + d +
            "/data/vectors.txt --graph " + d + "/graph.txt --labels " + d +
            "/labels.tsv --mode hicfl --ckpt " + d + "/model.ck" + hyper) == 0,
        "train succeeds");
  check(fs::exists(dir / "model.ck"), "checkpoint written");
  check(fs::exists(dir / "model.ck.log"), "training log written");
  {
    std::string log = slurp(dir / "model.ck.log");
    check(log.find("epoch=1 ") != std::string::npos &&
              log.find("val_pr_auc=") != std::string::npos,
          "training log is line-delimited epoch records");
  }

  check(run(termrel + " eval --terms " + d + "/data/terms.tsv --vectors " + d +
            "/data/vectors.txt --tree " + d + "/data/tree.tsv --hierarchy " +
            d + "/data/hierarchy.cfg --mode hicfl --baselines lr --out " + d +
            "/summary.json --scores " + d + "/scores.tsv" + hyper +
            " > " + d + "/eval.out") == 0,
        "eval succeeds");
  {
    std::string out = slurp(dir / "eval.out");
    check(out.find("test_roc_auc=") != std::string::npos,
          "eval prints key=value metrics");
    check(slurp(dir / "summary.json").find("\"test_pr_auc\"") !=
              std::string::npos,
          "eval writes a machine-readable summary");
  }

  // scoring: one known term, one novel query attached online
  {
    std::ifstream terms(dir / "data/terms.tsv");
    std::string first_line;
    std::getline(terms, first_line);
    std::string known = first_line.substr(0, first_line.find('\t'));
    std::ofstream(dir / "queries.txt") << known << "\nquantum chemistry\n";
  }
  check(run(termrel + " score --ckpt " + d + "/model.ck --terms " + d +
            "/data/terms.tsv --vectors " + d + "/data/vectors.txt --index " +
            d + "/core.idx --graph " + d + "/graph.txt < " + d +
            "/queries.txt > " + d + "/scores.out") == 0,
        "score succeeds");
  {
    std::ifstream in(dir / "scores.out");
    std::string line;
    int lines = 0;
    bool well_formed = true;
    while (std::getline(in, line)) {
      ++lines;
      auto tab = line.find('\t');
      well_formed &= tab != std::string::npos;
      if (tab != std::string::npos) {
        double value = std::atof(line.c_str() + tab + 1);
        well_formed &= value >= 0.0 && value <= 1.0;
      }
    }
    check(lines == 2 && well_formed,
          "score prints surface<TAB>score in [0,1] per query");
  }

  check(run(termrel + " rank --ckpt " + d + "/model.ck --terms " + d +
            "/data/terms.tsv --vectors " + d + "/data/vectors.txt --graph " +
            d + "/graph.txt --bands 1-10,101-110 --out " + d +
            "/ranked.tsv") == 0,
        "rank succeeds");
  {
    std::ifstream in(dir / "ranked.tsv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    check(lines == 20, "rank wrote both bands");
  }

  // positive-unlabeled training from a positives file
  {
    // pick two ml-positive surfaces from the truth labels
    std::ifstream truth(dir / "data/truth_labels.tsv");
    std::ifstream terms(dir / "data/terms.tsv");
    std::vector<std::string> surfaces;
    std::string line;
    while (std::getline(terms, line)) {
      surfaces.push_back(line.substr(0, line.find('\t')));
    }
    std::ofstream pos(dir / "positives.txt");
    int picked = 0;
    while (std::getline(truth, line) && picked < 6) {
      int id = 0, level = 0, value = 0;
      std::sscanf(line.c_str(), "%d\t%d\t%d", &id, &level, &value);
      if (level == 2 && value == 1) {
        pos << surfaces[static_cast<std::size_t>(id)] << "\n";
        ++picked;
      }
    }
  }
  // parent-level labels only (drop the deepest level for the pu run)
  {
    std::ifstream in(dir / "labels.tsv");
    std::ofstream out(dir / "labels_parents.tsv");
    std::string line;
    while (std::getline(in, line)) {
      int id = 0, level = 0, value = 0;
      std::sscanf(line.c_str(), "%d\t%d\t%d", &id, &level, &value);
      if (level < 2) out << line << "\n";
    }
  }
  check(run(termrel + " train --terms " + d + "/data/terms.tsv --vectors " + d +
            "/data/vectors.txt --graph " + d + "/graph.txt --labels " + d +
            "/labels_parents.tsv --mode pu --positives " + d +
            "/positives.txt --ckpt " + d + "/pu.ck --hidden 32 --epochs 20 "
            "--seed 7") == 0,
        "pu train with a positives file succeeds");
  check(fs::exists(dir / "pu.ck"), "pu checkpoint written");

  // missing artifact: exit code 2 naming the producing stage
  check(run(termrel + " graph --terms " + d + "/data/terms.tsv --index " + d +
            "/nope.idx --out " + d + "/g2.txt 2> " + d + "/err.txt") == 2,
        "missing artifact exits with code 2");
  check(slurp(dir / "err.txt").find("termrel index") != std::string::npos,
        "the error names the stage to run");

  // inputs are never mutated: rerunning a stage leaves its inputs intact
  std::string terms_before = slurp(dir / "data/terms.tsv");
  run(termrel + " index --terms " + d + "/data/terms.tsv --out " + d +
      "/core2.idx");
  check(slurp(dir / "data/terms.tsv") == terms_before,
        "stages do not mutate their inputs");

  if (failures == 0) fs::remove_all(dir);
  std::printf(failures == 0 ? "cli pipeline: all checks passed\n"
                            : "cli pipeline: %d failures (dir kept: %s)\n",
              failures, d.c_str());
  return failures == 0 ? 0 : 1;
}
