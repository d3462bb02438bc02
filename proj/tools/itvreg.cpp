// itvreg: command-line driver for the bi-encoder regularization lab.
//
//   itvreg synth         --out DIR [--seed N --brands B --categories C ...]
//   itvreg split         --corpus FILE --out DIR --held-out CAT...
//   itvreg pretrain-base --corpus FILE --out CKPT [--vocab TSV]
//   itvreg train         --corpus FILE --base CKPT --out CKPT [--reg KIND --lambda L]
//   itvreg eval          --model CKPT --corpus FILE [--json F --csv F]
//   itvreg sweep         interpolation or method x lambda grid
//   itvreg importance    --model CKPT --base CKPT --corpus FILE --out DIR
//
// Every subcommand accepts --config FILE: a flat JSON object whose keys are
// long flag names. Flags given on the command line win over the file.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "itvreg/checkpoint.hpp"
#include "itvreg/eval.hpp"
#include "itvreg/experiment.hpp"
#include "itvreg/interventions.hpp"
#include "itvreg/synthetic.hpp"
#include "itvreg/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace itvreg;
using Model = EmbeddingModel<float>;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_file(const fs::path& p, const std::string& text) { open_out(p) << text; }

// Options whose values are file paths. Inputs enter the digest by content,
// outputs not at all.
const std::set<std::string> kInputPaths{"corpus", "vocab", "base", "init", "model", "baseline", "frequency-corpus",
                                        "iid", "ood", "config"};
const std::set<std::string> kOutputPaths{"out", "trace", "json", "csv", "quantile-csv"};

struct Effective {
  json config;
  std::string digest;
};

json typed(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    auto j = json::parse(v);
    if (j.is_number()) return j;
  } catch (const json::parse_error&) {
  }
  return v;
}

json typed_option(const CLI::Option* opt) {
  std::vector<std::string> parts;
  if (opt->count()) {
    parts = opt->results();
  } else {
    std::string d = opt->get_default_str();
    if (opt->get_type_size() == 0) return d == "true";
    if (d.empty()) return nullptr;
    if (opt->get_items_expected_max() <= 1) return typed(d);
    if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = d.substr(1, d.size() - 2);
    std::stringstream ss(d);
    for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
  }
  if (opt->get_type_size() == 0) return parts.empty() || parts.back() != "false";
  if (opt->get_items_expected_max() <= 1) return parts.empty() ? json(nullptr) : typed(parts.back());
  json arr = json::array();
  for (const auto& p : parts) arr.push_back(typed(p));
  return arr;
}

Effective effective_config(const CLI::App& sub) {
  std::map<std::string, json> values;
  std::string hashed;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    const json value = typed_option(opt);
    values[name] = value;
    std::string v;
    if (value.is_null()) {
    } else if (value.is_array()) {
      for (const auto& x : value) v += (v.empty() ? "" : ",") + (x.is_string() ? x.get<std::string>() : x.dump());
    } else {
      v = value.is_string() ? value.get<std::string>() : value.dump();
    }
    if (kOutputPaths.count(name)) continue;
    if (kInputPaths.count(name) && !v.empty()) {
      std::string content;
      std::stringstream ss(v);
      for (std::string part; std::getline(ss, part, ',');) content += hex64(fnv1a(read_file(part)));
      hashed += name + "=" + content + "\n";
    } else {
      hashed += name + "=" + v + "\n";
    }
  }
  Effective e;
  e.digest = hex64(fnv1a(std::string(sub.get_name()) + "\n" + hashed));
  e.config["command"] = sub.get_name();
  for (const auto& [k, v] : values) e.config[k] = v;
  e.config["config_digest"] = e.digest;
  return e;
}

void write_config(const fs::path& p, const Effective& e) { write_file(p, e.config.dump(2) + "\n"); }

std::vector<std::string> splice_config(std::vector<std::string> args) {
  // args[0] is the program, args[1] the subcommand.
  auto it = std::find(args.begin(), args.end(), "--config");
  std::string path;
  if (it != args.end()) {
    if (std::next(it) == args.end()) throw UsageError("--config needs a file");
    path = *std::next(it);
  } else {
    for (const auto& a : args)
      if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (path.empty()) return args;
  json cfg;
  try {
    cfg = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path + ": invalid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw Error(path + ": config must be a JSON object");
  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || key == "command" || key == "config_digest" || value.is_null() || given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back(flag);
        args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      }
    } else {
      args.push_back(flag);
      args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return args;
}

VocabPtr load_vocab(const fs::path& p) { return std::make_shared<const Vocab>(Vocab::load_tsv(p)); }

Corpus load_into(const fs::path& p, const VocabPtr& vocab) { return load_corpus(p).reindexed(vocab); }

void write_trace(const fs::path& p, const std::vector<EpochLoss>& trace) {
  auto os = open_out(p);
  os << "epoch,erm,penalty,total\n" << std::setprecision(10);
  for (const auto& e : trace) os << e.epoch << ',' << e.erm << ',' << e.penalty << ',' << e.total << '\n';
}

std::vector<int> parse_ks(const std::vector<int>& ks) {
  if (ks.empty()) throw UsageError("--ks needs at least one value");
  for (int k : ks)
    if (k < 1) throw UsageError("--ks values must be >= 1");
  return ks;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  double broad_noise = 0.0;
  std::string out;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* s = &a.spec;
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--seed", s->seed, "Generator seed");
  app.add_option("--brands", s->n_brands, "Number of brands");
  app.add_option("--categories", s->n_categories, "Number of categories");
  app.add_option("--queries-per-brand", s->queries_per_brand, "Queries per brand");
  app.add_option("--noise-tokens", s->noise_tokens, "Size of the noise-token pool");
  app.add_option("--descriptors-per-category", s->descriptors_per_category, "Descriptor tokens per category");
  app.add_option("--descriptors-per-sentence", s->descriptors_per_sentence, "Descriptors per sentence (0 = all)");
  app.add_option("--descriptor-noise", s->descriptor_noise, "Probability a descriptor comes from another category");
  app.add_option("--noise-per-sentence", s->noise_per_sentence, "Noise tokens per sentence");
  app.add_option("--items-per-brand", s->items_per_brand, "Items per brand");
  app.add_option("--ood-queries-per-brand", s->ood_queries_per_brand, "OOD queries per brand");
  app.add_option("--ood-items-per-brand", s->ood_items_per_brand, "OOD-only items per brand");
  app.add_option("--iid-fraction", s->iid_fraction, "Share of queries held out as IID eval");
  app.add_option("--broad-descriptor-noise", a.broad_noise, "Descriptor noise of broad.jsonl");
}

int run_synth(const CLI::App& sub, const SynthArgs& a) {
  const auto eff = effective_config(sub);
  const auto data = synth_generate(a.spec);
  const auto broad = synth_generate(broad_spec_for(a.spec, a.broad_noise));
  const fs::path out = a.out;
  fs::create_directories(out);
  save_corpus(data.split.train, out / "train.jsonl");
  save_corpus(data.split.iid_eval, out / "iid.jsonl");
  save_corpus(data.split.ood_eval, out / "ood.jsonl");
  save_corpus(broad.split.train, out / "broad.jsonl");
  data.split.train.vocab->save_tsv(out / "vocab.tsv");
  auto os = open_out(out / "brands.tsv");
  os << "token\ttrain_category\tood_category\n";
  for (std::size_t b = 0; b < data.brand_tokens.size(); ++b)
    os << data.split.train.vocab->token(data.brand_tokens[b]) << "\tcat" << data.train_category[b] << "\tcat"
       << data.ood_category[b] << '\n';
  write_config(out / "config.json", eff);
  return 0;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  std::string corpus, out;
  std::vector<std::string> held_out;
  std::size_t top_k = 0;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
};

void add_split(CLI::App& app, SplitArgs& a) {
  app.add_option("--corpus", a.corpus, "Input corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--held-out", a.held_out, "Category held out for OOD (repeatable)");
  app.add_option("--held-out-top-k", a.top_k, "Hold out the k most frequent categories instead");
  app.add_option("--train-fraction", a.train_fraction, "Share of in-distribution queries used for training");
  app.add_option("--seed", a.seed, "Shuffle seed");
}

int run_split(const CLI::App& sub, const SplitArgs& a) {
  const auto eff = effective_config(sub);
  SplitSpec spec;
  spec.held_out = a.held_out;
  spec.held_out_top_k = a.top_k;
  spec.train_fraction = a.train_fraction;
  spec.seed = a.seed;
  const auto split = split_by_category(load_corpus(a.corpus), spec);
  const fs::path out = a.out;
  fs::create_directories(out);
  save_corpus(split.train, out / "train.jsonl");
  save_corpus(split.iid_eval, out / "iid.jsonl");
  save_corpus(split.ood_eval, out / "ood.jsonl");
  write_config(out / "config.json", eff);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus, base, init, vocab, out, trace;
  std::string reg = "none", loss = "contrastive", negatives = "in-batch-hardest";
  double lambda = kDefaultLambda;
  std::optional<double> mask_fraction;
  double dropout = kDefaultDropout;
  double itvaug_fraction = 1.0;
  int interventions = 1;
  int epochs = 0;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  int dim = 32;
  int min_freq = 1;
};

void add_optimizer(CLI::App& app, TrainArgs& a) {
  app.add_option("--loss", a.loss, "contrastive | mse");
  app.add_option("--epochs", a.epochs, "Epochs (0 = 200 for contrastive, 5 for mse)");
  app.add_option("--batch-size", a.batch_size, "Mini-batch size");
  app.add_option("--lr", a.adam.learning_rate, "Adam learning rate");
  app.add_option("--beta1", a.adam.beta1, "Adam beta1");
  app.add_option("--beta2", a.adam.beta2, "Adam beta2");
  app.add_option("--eps", a.adam.eps, "Adam epsilon");
  app.add_option("--negatives", a.negatives, "in-batch-hardest | in-batch-random");
  app.add_option("--seed", a.seed, "Training seed");
}

void add_regularizer(CLI::App& app, TrainArgs& a) {
  app.add_option("--reg", a.reg, "none | outreg | itvreg | itvaug | maskreg | simcse");
  app.add_option("--lambda", a.lambda, "Penalty weight");
  app.add_option("--mask-fraction", a.mask_fraction, "Masked share of tokens (default 0.15 for maskreg, 0.5 otherwise)");
  app.add_option("--dropout", a.dropout, "SimCSE dropout rate");
  app.add_option("--itvaug-fraction", a.itvaug_fraction, "Share of queries given an ItvAug pair");
  app.add_option("--interventions", a.interventions, "Interventions per sentence per batch");
}

TrainConfig train_config(const TrainArgs& a) try {
  TrainConfig c;
  c.loss = parse_loss_kind(a.loss);
  c.regularizer.kind = parse_reg_kind(a.reg);
  c.regularizer.lambda = a.lambda;
  c.regularizer.mask_fraction = a.mask_fraction;
  c.regularizer.dropout_rate = a.dropout;
  c.regularizer.itvaug_fraction = a.itvaug_fraction;
  c.regularizer.interventions_per_example = a.interventions;
  c.epochs = a.epochs > 0 ? a.epochs : (c.loss == LossKind::Mse ? kDefaultMseEpochs : kDefaultContrastiveEpochs);
  c.batch_size = a.batch_size;
  c.adam = a.adam;
  c.seed = a.seed;
  c.negatives = parse_negative_strategy(a.negatives);
  c.validate();
  return c;
} catch (const Error& e) {
  throw UsageError(e.what());
}

void add_pretrain(CLI::App& app, TrainArgs& a) {
  app.add_option("--corpus", a.corpus, "Broad pretraining corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--vocab", a.vocab, "Vocabulary TSV (default: built from --corpus)")->check(CLI::ExistingFile);
  app.add_option("--min-freq", a.min_freq, "Minimum token frequency when building the vocabulary");
  app.add_option("--dim", a.dim, "Embedding dimension");
  app.add_option("--init-seed", a.init_seed, "Seed of the uniform initialization");
  app.add_option("--out", a.out, "Output checkpoint")->required();
  app.add_option("--trace", a.trace, "Loss trace CSV (default: <out>.trace.csv)");
  add_optimizer(app, a);
}

int run_pretrain(const CLI::App& sub, const TrainArgs& a) {
  const auto eff = effective_config(sub);
  const auto config = train_config(a);
  const auto raw = load_corpus(a.corpus);
  const VocabPtr vocab = a.vocab.empty() ? std::make_shared<const Vocab>(build_vocab(raw, a.min_freq)) : load_vocab(a.vocab);
  const auto corpus = raw.reindexed(vocab);
  auto init = Model::uniform_init(vocab, a.dim, a.init_seed);
  auto run = train(corpus, init, init.frozen_copy(), config);
  save_checkpoint(run.theta.frozen_copy(), a.out);
  write_trace(a.trace.empty() ? a.out + ".trace.csv" : a.trace, run.trace);
  write_config(a.out + ".config.json", eff);
  return 0;
}

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--corpus", a.corpus, "Training corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--base", a.base, "Frozen base checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--init", a.init, "Initial checkpoint (default: the base)")->check(CLI::ExistingFile);
  app.add_option("--out", a.out, "Output checkpoint")->required();
  app.add_option("--trace", a.trace, "Loss trace CSV (default: <out>.trace.csv)");
  add_regularizer(app, a);
  add_optimizer(app, a);
}

TrainRun<float> train_from(const TrainArgs& a, const TrainConfig& config, const Model& base) {
  const auto corpus = load_into(a.corpus, base.vocab);
  const Model init = a.init.empty() ? base : load_checkpoint(a.init, base.vocab);
  auto run = train(corpus, init, base, config);
  for (const auto& s : run.skipped) std::fprintf(stderr, "skipped: %s\n", s.c_str());
  return run;
}

int run_train(const CLI::App& sub, const TrainArgs& a) {
  const auto eff = effective_config(sub);
  const auto config = train_config(a);
  const auto base = load_checkpoint(a.base);
  auto run = train_from(a, config, base);
  save_checkpoint(run.theta, a.out);
  write_trace(a.trace.empty() ? a.out + ".trace.csv" : a.trace, run.trace);
  write_config(a.out + ".config.json", eff);
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model, corpus, split = "iid", json_out, csv_out, baseline, quantile_csv, frequency_corpus, label;
  std::vector<int> ks = kDefaultKs;
  int bins = kDefaultQuantileBins;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--model", a.model, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", a.corpus, "Evaluation corpus (JSONL)")->required()->check(CLI::ExistingFile);
  app.add_option("--split", a.split, "Split name recorded in the report");
  app.add_option("--ks", a.ks, "Cutoffs for P@k")->delimiter(',');
  app.add_option("--bins", a.bins, "Item-frequency quantile bins");
  app.add_option("--frequency-corpus", a.frequency_corpus, "Corpus whose pair counts define item frequency (default: --corpus)")
      ->check(CLI::ExistingFile);
  app.add_option("--baseline", a.baseline, "Baseline checkpoint for the quantile gain CSV")->check(CLI::ExistingFile);
  app.add_option("--json", a.json_out, "EvalReport JSON output (default: stdout)");
  app.add_option("--csv", a.csv_out, "EvalReport CSV output");
  app.add_option("--quantile-csv", a.quantile_csv, "Per-bin P@1 gain CSV (needs --baseline)");
  app.add_option("--label", a.label, "Label written in the CSV row");
}

int run_eval(const CLI::App& sub, const EvalArgs& a) {
  const auto eff = effective_config(sub);
  const auto ks = parse_ks(a.ks);
  if (!a.quantile_csv.empty() && a.baseline.empty()) throw UsageError("--quantile-csv needs --baseline");
  const auto theta = load_checkpoint(a.model);
  const auto corpus = load_into(a.corpus, theta.vocab);
  const auto freq = a.frequency_corpus.empty() ? corpus : load_into(a.frequency_corpus, theta.vocab);
  Corpus binned = freq;
  for (const auto& [id, s] : corpus.items) binned.items.emplace(id, s);
  const auto bins = item_frequency_quantiles(binned, a.bins);

  auto report = evaluate(theta, corpus, ks, &bins, a.split);
  report.config_digest = eff.digest;
  auto doc = json::parse(eval_report_json(report));
  doc["config"] = eff.config;
  const auto text = doc.dump(2) + "\n";
  if (a.json_out.empty())
    std::cout << text;
  else
    write_file(a.json_out, text);
  if (!a.csv_out.empty()) write_file(a.csv_out, eval_csv_header(ks) + eval_csv_row(report, ks, a.label));
  if (!a.baseline.empty()) {
    const auto base = load_checkpoint(a.baseline, theta.vocab);
    const auto base_report = evaluate(base, corpus, ks, &bins, a.split);
    if (!a.quantile_csv.empty()) {
      auto os = open_out(a.quantile_csv);
      write_quantile_csv(os, base_report, report);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  TrainArgs train;
  std::string mode = "interpolation";
  std::string model, iid, ood, out;
  std::vector<double> fractions{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::string> methods{"none", "outreg", "itvreg", "itvaug", "maskreg", "simcse"};
  std::vector<double> lambdas{0.01, 0.1, 1.0};
  std::vector<int> ks = kDefaultKs;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  app.add_option("--mode", a.mode, "interpolation | grid")->check(CLI::IsMember({"interpolation", "grid"}));
  app.add_option("--model", a.model, "Checkpoint (interpolation mode)")->check(CLI::ExistingFile);
  app.add_option("--iid", a.iid, "IID evaluation corpus")->required()->check(CLI::ExistingFile);
  app.add_option("--ood", a.ood, "OOD pool / evaluation corpus")->required()->check(CLI::ExistingFile);
  app.add_option("--fractions", a.fractions, "OOD fractions (interpolation mode)")->delimiter(',');
  app.add_option("--methods", a.methods, "Regularizers (grid mode)")->delimiter(',');
  app.add_option("--lambdas", a.lambdas, "Penalty weights (grid mode)")->delimiter(',');
  app.add_option("--ks", a.ks, "Cutoffs for P@k")->delimiter(',');
  app.add_option("--out", a.out, "Output CSV")->required();
  app.add_option("--corpus", a.train.corpus, "Training corpus (grid mode)")->check(CLI::ExistingFile);
  app.add_option("--base", a.train.base, "Base checkpoint (grid mode)")->check(CLI::ExistingFile);
  app.add_option("--mask-fraction", a.train.mask_fraction, "Masked share of tokens (default 0.15 for maskreg, 0.5 otherwise)");
  app.add_option("--dropout", a.train.dropout, "SimCSE dropout rate");
  add_optimizer(app, a.train);
}

int run_sweep(const CLI::App& sub, const SweepArgs& a) {
  const auto eff = effective_config(sub);
  const auto ks = parse_ks(a.ks);
  auto os = open_out(a.out);
  write_config(a.out + ".config.json", eff);
  os << std::setprecision(10);
  if (a.mode == "interpolation") {
    if (a.model.empty()) throw UsageError("interpolation mode needs --model");
    const auto theta = load_checkpoint(a.model);
    const auto iid = load_into(a.iid, theta.vocab);
    const auto ood = load_into(a.ood, theta.vocab);
    os << "fraction,n_queries";
    for (int k : ks) os << ",p_at_" << k;
    os << ",auc_005,config_digest\n";
    for (const auto& [f, r] : sweep_interpolation(theta, iid, ood, a.fractions, a.train.seed, ks)) {
      os << f << ',' << r.n_queries;
      for (int k : ks) os << ',' << r.precision_at.at(k);
      os << ',' << (r.auc_005 ? std::to_string(*r.auc_005) : std::string()) << ',' << eff.digest << '\n';
    }
    return 0;
  }
  if (a.train.corpus.empty() || a.train.base.empty()) throw UsageError("grid mode needs --corpus and --base");
  const auto base = load_checkpoint(a.train.base);
  const auto iid = load_into(a.iid, base.vocab);
  const auto ood = load_into(a.ood, base.vocab);
  os << "method,lambda,split,n_queries";
  for (int k : ks) os << ",p_at_" << k;
  os << ",auc_005,config_digest\n";
  for (const auto& m : a.methods) {
    const bool weighted = parse_reg_kind(m) != RegKind::None;
    for (double lam : weighted ? a.lambdas : std::vector<double>{0.0}) {
      TrainArgs t = a.train;
      t.reg = m;
      t.lambda = lam;
      const auto run = train_from(t, train_config(t), base);
      for (const Corpus* c : {&iid, &ood}) {
        const auto r = evaluate(run.theta, *c, ks, nullptr, c == &iid ? "iid" : "ood");
        os << m << ',' << lam << ',' << r.split << ',' << r.n_queries;
        for (int k : ks) os << ',' << r.precision_at.at(k);
        os << ',' << (r.auc_005 ? std::to_string(*r.auc_005) : std::string()) << ',' << eff.digest << '\n';
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ImportanceArgs {
  std::string model, base, corpus, out;
  std::vector<std::string> ids;
  bool items = false;
};

void add_importance(CLI::App& app, ImportanceArgs& a) {
  app.add_option("--model", a.model, "Fine-tuned checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--base", a.base, "Base checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--corpus", a.corpus, "Corpus holding the sentences")->required()->check(CLI::ExistingFile);
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--id", a.ids, "Sentence id to report (repeatable; default: all queries)");
  app.add_flag("--items", a.items, "Report items instead of queries");
}

int run_importance(const CLI::App& sub, const ImportanceArgs& a) {
  const auto eff = effective_config(sub);
  const auto theta = load_checkpoint(a.model);
  const auto base = load_checkpoint(a.base, theta.vocab);
  const auto corpus = load_into(a.corpus, theta.vocab);
  const auto& pool = a.items ? corpus.items : corpus.queries;
  std::vector<std::string> ids = a.ids;
  if (ids.empty())
    for (const auto& [id, s] : pool) ids.push_back(id);
  const fs::path out = a.out;
  fs::create_directories(out);
  std::vector<ImportanceReport> reports;
  for (const auto& id : ids) {
    auto it = pool.find(id);
    if (it == pool.end()) throw Error("no sentence with id '" + id + "'");
    if (it->second.size() < 2) {
      std::fprintf(stderr, "skipped: %s has fewer than 2 tokens\n", id.c_str());
      continue;
    }
    reports.push_back(importance_report(theta, base, it->second));
    auto os = open_out(out / (id + ".tsv"));
    write_importance_tsv(os, reports.back(), *theta.vocab);
  }
  auto os = open_out(out / "summary.tsv");
  write_amplification_summary_tsv(os, summarize_amplification(reports), *theta.vocab);
  write_config(out / "config.json", eff);
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

int fail(const char* kind, const std::string& msg, int code) {
  std::fprintf(stderr, "itvreg: error[%s]: %s\n", kind, one_line(msg).c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-encoder fine-tuning lab with base-model anchored regularizers"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SynthArgs synth;
  SplitArgs split;
  TrainArgs pretrain, trainer;
  EvalArgs eval;
  SweepArgs sweep;
  ImportanceArgs importance;
  pretrain.init_seed = 100;

  auto* s_synth = app.add_subcommand("synth", "Write the synthetic brand/category benchmark");
  auto* s_split = app.add_subcommand("split", "Category hold-out split of a corpus");
  auto* s_pre = app.add_subcommand("pretrain-base", "Manufacture a frozen base model on a broad corpus");
  auto* s_train = app.add_subcommand("train", "Fine-tune against a frozen base model");
  auto* s_eval = app.add_subcommand("eval", "P@k, AUC(0.05) and quantile P@1 of a checkpoint");
  auto* s_sweep = app.add_subcommand("sweep", "OOD interpolation sweep or method x lambda grid");
  auto* s_imp = app.add_subcommand("importance", "Per-token importance scores, model vs base");
  add_synth(*s_synth, synth);
  add_split(*s_split, split);
  add_pretrain(*s_pre, pretrain);
  add_train(*s_train, trainer);
  add_eval(*s_eval, eval);
  add_sweep(*s_sweep, sweep);
  add_importance(*s_imp, importance);
  std::vector<std::string> config_paths(app.get_subcommands({}).size());
  for (std::size_t i = 0; i < config_paths.size(); ++i)
    app.get_subcommands({})[i]
        ->add_option("--config", config_paths[i], "JSON config; flags override its keys")
        ->check(CLI::ExistingFile);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = splice_config(args);
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    app.parse(static_cast<int>(cargs.size()), cargs.data());

    if (*s_synth) return run_synth(*s_synth, synth);
    if (*s_split) return run_split(*s_split, split);
    if (*s_pre) return run_pretrain(*s_pre, pretrain);
    if (*s_train) return run_train(*s_train, trainer);
    if (*s_eval) return run_eval(*s_eval, eval);
    if (*s_sweep) return run_sweep(*s_sweep, sweep);
    if (*s_imp) return run_importance(*s_imp, importance);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  } catch (const UsageError& e) {
    return fail("usage", e.what(), 2);
  } catch (const Error& e) {
    return fail("runtime", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 3);
  }
  return 0;
}
