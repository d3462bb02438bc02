#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "itvreg/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(ITVREG_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("itvreg_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("synth is byte-identical across runs") {
  const auto dir = fresh_dir("synth");
  const char* files[] = {"train.jsonl", "iid.jsonl", "ood.jsonl", "broad.jsonl", "vocab.tsv", "brands.tsv", "config.json"};
  REQUIRE(run("synth --seed 7 --brands 6 --categories 3 --out " + q(dir / "a")).code == 0);
  std::map<std::string, std::string> first;
  for (const char* f : files) first[f] = slurp(dir / "a" / f);
  REQUIRE(run("synth --seed 7 --brands 6 --categories 3 --out " + q(dir / "a")).code == 0);
  for (const char* f : files) {
    CHECK_MESSAGE(slurp(dir / "a" / f) == first[f], f);
    CHECK(!first[f].empty());
  }
  REQUIRE(run("synth --seed 7 --brands 6 --categories 3 --out " + q(dir / "b")).code == 0);
  CHECK(slurp(dir / "b" / "train.jsonl") == first["train.jsonl"]);
  CHECK(json::parse(slurp(dir / "b" / "config.json"))["config_digest"] ==
        json::parse(first["config.json"])["config_digest"]);
  REQUIRE(run("synth --seed 8 --brands 6 --categories 3 --out " + q(dir / "c")).code == 0);
  CHECK(slurp(dir / "c" / "train.jsonl") != first["train.jsonl"]);
  fs::remove_all(dir);
}

TEST_CASE("pretrain, train and eval on both splits") {
  const auto dir = fresh_dir("pipeline");
  REQUIRE(run("synth --seed 3 --brands 6 --categories 3 --queries-per-brand 10 --out " + q(dir)).code == 0);
  const auto pre = run("pretrain-base --corpus " + q(dir / "broad.jsonl") + " --vocab " + q(dir / "vocab.tsv") +
                       " --dim 8 --epochs 1 --out " + q(dir / "base.bin"));
  REQUIRE_MESSAGE(pre.code == 0, pre.output);
  const auto tr = run("train --corpus " + q(dir / "train.jsonl") + " --base " + q(dir / "base.bin") +
                      " --reg none --epochs 2 --out " + q(dir / "ft.bin"));
  REQUIRE_MESSAGE(tr.code == 0, tr.output);
  CHECK(fs::exists(dir / "ft.bin.trace.csv"));
  CHECK(fs::exists(dir / "ft.bin.config.json"));

  for (const char* split : {"iid", "ood"}) {
    const auto out = dir / (std::string(split) + ".json");
    const auto ev = run("eval --model " + q(dir / "ft.bin") + " --corpus " + q(dir / (std::string(split) + ".jsonl")) +
                        " --split " + split + " --baseline " + q(dir / "base.bin") + " --quantile-csv " +
                        q(dir / (std::string(split) + ".q.csv")) + " --json " + q(out));
    REQUIRE_MESSAGE(ev.code == 0, ev.output);
    const auto rep = json::parse(slurp(out));
    CHECK(rep["split"] == split);
    CHECK(rep["precision_at"].contains("1"));
    CHECK(rep["precision_at"].contains("5"));
    CHECK(rep["config_digest"].get<std::string>().size() == 16);
    CHECK(rep["config"]["config_digest"] == rep["config_digest"]);
    CHECK(slurp(dir / (std::string(split) + ".q.csv")).rfind("bin,baseline,method,gain", 0) == 0);
  }

  const auto imp = run("importance --model " + q(dir / "ft.bin") + " --base " + q(dir / "base.bin") + " --corpus " +
                       q(dir / "train.jsonl") + " --out " + q(dir / "imp"));
  REQUIRE_MESSAGE(imp.code == 0, imp.output);
  CHECK(fs::exists(dir / "imp" / "summary.tsv"));

  const auto sw = run("sweep --mode interpolation --model " + q(dir / "ft.bin") + " --iid " + q(dir / "iid.jsonl") +
                      " --ood " + q(dir / "ood.jsonl") + " --fractions 0,0.5,1 --out " + q(dir / "sweep.csv"));
  REQUIRE_MESSAGE(sw.code == 0, sw.output);
  std::istringstream rows(slurp(dir / "sweep.csv"));
  std::string line;
  int n = 0;
  while (std::getline(rows, line)) ++n;
  CHECK(n == 4);
  fs::remove_all(dir);
}

TEST_CASE("config file values apply and flags override them") {
  const auto dir = fresh_dir("config");
  std::ofstream(dir / "cfg.json") << R"({"seed": 7, "brands": 6, "categories": 3})";
  REQUIRE(run("synth --config " + q(dir / "cfg.json") + " --out " + q(dir / "a")).code == 0);
  REQUIRE(run("synth --seed 7 --brands 6 --categories 3 --out " + q(dir / "b")).code == 0);
  CHECK(slurp(dir / "a" / "train.jsonl") == slurp(dir / "b" / "train.jsonl"));
  REQUIRE(run("synth --config " + q(dir / "cfg.json") + " --seed 9 --out " + q(dir / "c")).code == 0);
  CHECK(json::parse(slurp(dir / "c" / "config.json"))["seed"] == 9);

  const auto base = run("synth --seed 7 --brands 6 --categories 3 --out " + q(dir / "d"));
  REQUIRE(base.code == 0);
  REQUIRE(run("synth --config " + q(dir / "d" / "config.json") + " --out " + q(dir / "e")).code == 0);
  CHECK(slurp(dir / "d" / "train.jsonl") == slurp(dir / "e" / "train.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("eval P@1 on a hand-set 3-query fixture") {
  using namespace itvreg;
  const auto dir = fresh_dir("fixture");
  std::ofstream(dir / "c.jsonl") << R"({"kind":"query","id":"qa","text":"red"}
{"kind":"query","id":"qb","text":"blue"}
{"kind":"query","id":"qc","text":"green"}
{"kind":"item","id":"ia","text":"red"}
{"kind":"item","id":"ib","text":"blue"}
{"kind":"item","id":"ic","text":"green blue"}
{"kind":"pair","query":"qa","item":"ia","relevance":1}
{"kind":"pair","query":"qb","item":"ib","relevance":1}
{"kind":"pair","query":"qc","item":"ia","relevance":1}
)";
  const auto corpus = load_corpus(dir / "c.jsonl");
  EmbeddingModel<float> m(corpus.vocab, 2);
  m.table.row(corpus.vocab->id("red")) << 1, 0;
  m.table.row(corpus.vocab->id("blue")) << 0, 1;
  m.table.row(corpus.vocab->id("green")) << 0.8f, 0.6f;
  save_checkpoint(m, dir / "m.bin");
  // qa: ia (1) beats ic -> hit. qb: ib (1) -> hit. qc: ic (.98) beats ia (.8) -> miss.
  const auto ev = run("eval --model " + q(dir / "m.bin") + " --corpus " + q(dir / "c.jsonl") +
                      " --ks 1 --bins 1 --json " + q(dir / "r.json"));
  REQUIRE_MESSAGE(ev.code == 0, ev.output);
  const auto rep = json::parse(slurp(dir / "r.json"));
  CHECK(rep["precision_at"]["1"].get<double>() == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(rep["n_queries"] == 3);
  fs::remove_all(dir);
}

TEST_CASE("errors are single machine-parseable lines with distinct exit codes") {
  const auto dir = fresh_dir("errors");
  auto single_line = [](const Result& r, const std::string& kind) {
    CHECK(r.output.rfind("itvreg: error[" + kind + "]: ", 0) == 0);
    CHECK(std::count(r.output.begin(), r.output.end(), '\n') == 1);
  };
  auto r = run("synth --bogus 1 --out " + q(dir));
  CHECK(r.code == 2);
  single_line(r, "usage");

  r = run("frobnicate");
  CHECK(r.code == 2);

  r = run("train --corpus " + q(dir / "missing.jsonl") + " --base x --out y");
  CHECK(r.code == 2);
  single_line(r, "usage");

  std::ofstream(dir / "bad.jsonl") << "{\"kind\":\"query\",\"id\":\"q\",\"text\":\"a\"}\n{\"kind\":\"pair\",\"query\":\"q\",\"item\":\"ghost\",\"relevance\":1}\n";
  r = run("split --corpus " + q(dir / "bad.jsonl") + " --out " + q(dir / "s"));
  CHECK(r.code == 1);
  single_line(r, "runtime");
  CHECK(r.output.find("ghost") != std::string::npos);

  REQUIRE(run("synth --brands 6 --categories 3 --out " + q(dir / "d")).code == 0);
  std::ofstream(dir / "fake.bin") << "not a checkpoint";
  r = run("train --corpus " + q(dir / "d" / "train.jsonl") + " --base " + q(dir / "fake.bin") + " --reg nope --out " +
          q(dir / "o.bin"));
  CHECK(r.code == 2);
  single_line(r, "usage");

  r = run("synth --brands 2 --categories 3 --out " + q(dir / "e"));
  CHECK(r.code == 1);
  single_line(r, "runtime");
  fs::remove_all(dir);
}

TEST_CASE("help lists defaults") {
  const auto r = run("train --help");
  CHECK(r.code == 0);
  for (const char* s : {"--lambda", "0.1", "--lr", "0.0001", "--mask-fraction", "--reg"})
    CHECK_MESSAGE(r.output.find(s) != std::string::npos, s);
  const auto e = run("eval --help");
  CHECK(e.output.find("--bins") != std::string::npos);
  CHECK(e.output.find("[1,3,5]") != std::string::npos);
}
