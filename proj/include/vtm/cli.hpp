// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: prepare, make-toy, train, generate, evaluate, sweep.
// Exit codes: 0 success, 2 usage/input/config errors, 3 training divergence.
// Human-readable logs go to the error stream; data goes to files only.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vtm/checkpoint.hpp"
#include "vtm/config.hpp"
#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/evaluation.hpp"
#include "vtm/metrics.hpp"
#include "vtm/sampling.hpp"
#include "vtm/toy_corpus.hpp"
#include "vtm/trainer.hpp"

namespace vtm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr const char* kDataDirEnv = "VTM_DATA_DIR";

namespace fs = std::filesystem;

inline std::string default_data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string(".");
}

inline std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_ids(const fs::path& path, const std::vector<toy::Example>& examples) {
  std::ofstream out = open_output(path);
  for (const auto& e : examples) out << e.template_id << '\n';
}

// Training settings sized for the toy corpus on one CPU core.
inline TrainConfig toy_train_config() {
  TrainConfig c;
  c.word_dim = 48;
  c.hidden = 64;
  c.table_hidden = 64;
  c.z_dim = 16;
  c.c_dim = 32;
  c.batch_paired = 32;
  c.batch_raw = 32;
  c.learning_rate = 2e-3;
  c.max_epochs = 40;
  c.patience = 10;
  c.min_count = 2;
  return c;
}

inline std::string config_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "# VTM training configuration\n";
  const nlohmann::json j = to_json(c);
  for (const auto& [k, v] : j.items()) {
    if (v.is_string()) {
      if (!v.get<std::string>().empty()) out << k << " = \"" << v.get<std::string>() << "\"\n";
    } else {
      out << k << " = " << v.dump() << '\n';
    }
  }
  return out.str();
}

struct ToyArgs {
  int paired = 1000;
  int raw = 10000;
  int valid = 200;
  int test = 200;
  int templates = 8;
  std::uint64_t seed = 7;
  std::string raw_templates = "overlap";
  std::string out;
};

inline void make_toy(const ToyArgs& a) {
  toy::Options o;
  o.n_paired = a.paired;
  o.n_raw = a.raw;
  o.n_heldout = a.valid + a.test;
  o.n_templates = a.templates;
  o.seed = a.seed;
  if (a.raw_templates == "overlap") o.raw_templates = toy::RawTemplates::overlap;
  else if (a.raw_templates == "disjoint") o.raw_templates = toy::RawTemplates::disjoint;
  else throw ConfigError("raw-templates must be overlap or disjoint");
  const toy::Corpus c = toy::generate(o);
  const auto paired_ids = toy::template_sets(o.n_templates, o.raw_templates).first;
  const fs::path dir = a.out.empty() ? fs::path(default_data_dir()) : fs::path(a.out);
  fs::create_directories(dir);

  auto to_text = [](const std::vector<toy::Example>& ex, bool with_refs, const std::vector<int>& ids) {
    std::vector<PairedText> out;
    for (const auto& e : ex) {
      PairedText p{e.table, e.sentence, {}};
      if (with_refs) {
        for (int k : ids) p.references.push_back(toy::realize(e.table, k));
      }
      out.push_back(std::move(p));
    }
    return out;
  };
  std::vector<toy::Example> valid(c.heldout.begin(), c.heldout.begin() + a.valid);
  std::vector<toy::Example> test(c.heldout.begin() + a.valid, c.heldout.end());
  write_paired_file((dir / "paired.jsonl").string(), to_text(c.paired, false, paired_ids));
  std::vector<Tokens> raw;
  for (const auto& e : c.raw) raw.push_back(e.sentence);
  write_raw_file((dir / "raw.txt").string(), raw);
  write_paired_file((dir / "valid.jsonl").string(), to_text(valid, false, paired_ids));
  write_paired_file((dir / "test.jsonl").string(), to_text(test, true, paired_ids));
  write_ids(dir / "paired.templates.txt", c.paired);
  write_ids(dir / "raw.templates.txt", c.raw);
  write_ids(dir / "valid.templates.txt", valid);
  write_ids(dir / "test.templates.txt", test);

  TrainConfig cfg = toy_train_config();
  cfg.paired_path = "paired.jsonl";
  cfg.raw_path = "raw.txt";
  cfg.valid_path = "valid.jsonl";
  cfg.output_dir = "run";
  std::ofstream t = open_output(dir / "toy.toml");
  t << config_text(cfg);
}

struct PrepareArgs {
  std::string paired, raw, valid, out;
  int min_count = 5;
  int max_length = kDefaultMaxLength;
};

// Tokenised copies of the inputs with delexicalised templates, plus vocab.json.
inline void prepare(const PrepareArgs& a) {
  const auto paired = read_paired_file(a.paired);
  const auto raw = a.raw.empty() ? std::vector<Tokens>{} : read_raw_file(a.raw);
  auto [words, fields] = build_vocabularies(paired, raw, a.min_count);
  const fs::path dir = a.out.empty() ? fs::path(default_data_dir()) : fs::path(a.out);
  fs::create_directories(dir);
  {
    std::ofstream v = open_output(dir / "vocab.json");
    v << nlohmann::json{{"words", words.entries()}, {"fields", fields.entries()}, {"min_count", a.min_count}}.dump()
      << '\n';
  }
  auto emit = [&](const std::vector<PairedText>& src, const fs::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& p : src) {
      Tokens s = truncate(p.sentence, a.max_length);
      Delexicalized d = delexicalize(p.table, s);
      nlohmann::json j{{"table", serialize_table(p.table)}, {"sentence", join(s)}, {"template", join(d.tokens)}};
      out << j.dump() << '\n';
    }
  };
  emit(paired, dir / "paired.prepared.jsonl");
  if (!a.valid.empty()) emit(read_paired_file(a.valid), dir / "valid.prepared.jsonl");
  std::ofstream r = open_output(dir / "raw.prepared.txt");
  for (const auto& s : raw) r << join(truncate(s, a.max_length)) << '\n';
}

struct TrainArgs {
  std::string config;
  std::optional<std::string> mode, out, preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> raw_fraction;
};

inline TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig c = load_config(a.config);
  if (a.preset) {
    // Re-apply the file on top of the preset so file keys still win.
    TrainConfig base;
    apply_preset(base, parse_preset(*a.preset));
    c = load_config(a.config, base);
  }
  if (a.mode) c.mode = parse_mode(*a.mode);
  if (a.seed) c.seed = *a.seed;
  if (a.epochs) c.max_epochs = *a.epochs;
  if (a.raw_fraction) c.raw_fraction = *a.raw_fraction;
  if (a.out) c.output_dir = *a.out;
  validate(c);
  return c;
}

inline void train(const TrainArgs& a, std::ostream& log) {
  const TrainConfig c = resolve_train_config(a);
  if (c.paired_path.empty()) throw ConfigError("config lacks 'paired'");
  const auto paired = read_paired_file(c.paired_path);
  const auto raw = c.raw_path.empty() ? std::vector<Tokens>{} : read_raw_file(c.raw_path);
  const auto valid = c.valid_path.empty() ? std::vector<PairedText>{} : read_paired_file(c.valid_path);
  PreparedData prep = prepare_data(paired, raw, valid, c);
  Model model(model_dims(c, prep.words.size(), prep.fields.size()), c.seed);
  fs::create_directories(c.output_dir);
  std::ofstream steps = open_output(fs::path(c.output_dir) / "steps.csv");
  std::ofstream epochs = open_output(fs::path(c.output_dir) / "epochs.csv");
  log << "training " << mode_name(c.mode) << ": " << prep.data.paired.size() << " paired, " << prep.data.raw.size()
      << " raw, vocab " << prep.words.size() << ", " << model.store.scalar_count() << " parameters\n";
  FitResult r = fit(model, prep.data, c, FitLogs{&steps, &epochs, &log});
  const Adam* opt = r.best_optimizer ? &*r.best_optimizer : nullptr;
  save_checkpoint((fs::path(c.output_dir) / "model.ckpt").string(), model, prep.words, prep.fields, c, r.state, opt);
  log << "best epoch " << r.best_epoch << " valid " << format_double(r.best_score) << '\n';
}

struct DecodeArgs {
  std::string checkpoint, input, out;
  std::string strategy = "greedy";
  std::optional<std::string> generations;
  double temperature = 1.0;
  int beam = 1;
  int n = 1;
  int max_length = kDefaultMaxLength;
  std::uint64_t seed = 1;
  std::vector<double> taus;
};

inline DecodeSpec decode_spec(const DecodeArgs& a, const Checkpoint& ck) {
  DecodeSpec s;
  s.strategy = parse_strategy(a.strategy);
  s.temperature = a.temperature;
  s.beam_width = a.beam;
  s.n = a.n;
  s.max_length = a.max_length;
  s.seed = a.seed;
  s.sample_latent = terms_of(ck.config.mode).latent;
  validate(s);
  return s;
}

inline std::vector<Table> tables_of(const std::vector<PairedText>& items) {
  std::vector<Table> out;
  for (const auto& p : items) out.push_back(p.table);
  return out;
}

inline std::vector<std::vector<Tokens>> references_of(const std::vector<PairedText>& items) {
  std::vector<std::vector<Tokens>> out;
  for (const auto& p : items) out.push_back(vtm::references_of(p));
  return out;
}

inline void generate_cmd(const DecodeArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto items = read_paired_file(a.input);
  const DecodeSpec spec = decode_spec(a, ck);
  std::ofstream out = open_output(a.out);
  for (std::size_t i = 0; i < items.size(); ++i) {
    nlohmann::json outputs = nlohmann::json::array();
    for (const Tokens& s : generate(*ck.model, ck.words, ck.fields, items[i].table, spec, i)) outputs.push_back(join(s));
    out << nlohmann::json{{"table", serialize_table(items[i].table)},
                          {"outputs", outputs},
                          {"strategy", std::string(strategy_name(spec.strategy))},
                          {"seed", spec.seed}}
               .dump()
        << '\n';
  }
}

inline std::vector<std::vector<Tokens>> read_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open generations '" + path + "'");
  std::vector<std::vector<Tokens>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Tokens> row;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      for (const auto& s : j.at("outputs")) row.push_back(tokenize(s.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("malformed generations line: " + std::string(e.what()));
    }
    out.push_back(std::move(row));
  }
  return out;
}

inline void evaluate_cmd(const DecodeArgs& a) {
  const auto items = read_paired_file(a.input);
  std::vector<std::vector<Tokens>> outputs;
  std::optional<double> tau;
  if (a.generations) {
    outputs = read_generations(*a.generations);
    if (outputs.size() != items.size()) throw Error("generations and input differ in length");
  } else {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    const DecodeSpec spec = decode_spec(a, ck);
    if (spec.strategy == Strategy::temperature) tau = spec.temperature;
    outputs = generate_all(*ck.model, ck.words, ck.fields, tables_of(items), spec);
  }
  EvalRow row = score_outputs(outputs, references_of(items));
  row.tau = tau;
  std::ofstream out = open_output(a.out);
  write_report(out, std::vector<EvalRow>{row});
}

inline void sweep_cmd(const DecodeArgs& a) {
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto items = read_paired_file(a.input);
  DecodeSpec spec = decode_spec(a, ck);
  const std::vector<double>& taus = a.taus.empty() ? default_taus() : a.taus;
  const auto rows =
      tradeoff_sweep(*ck.model, ck.words, ck.fields, tables_of(items), references_of(items), taus, a.n, spec);
  std::ofstream out = open_output(a.out);
  write_report(out, rows);
}

inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Variational template machine: table-to-text generation"};
  app.require_subcommand(1);

  ToyArgs toy_args;
  auto* toy_cmd = app.add_subcommand("make-toy", "write a synthetic toy corpus with template-id sidecars");
  toy_cmd->add_option("--paired", toy_args.paired, "paired examples")->capture_default_str();
  toy_cmd->add_option("--raw", toy_args.raw, "raw sentences")->capture_default_str();
  toy_cmd->add_option("--valid", toy_args.valid, "validation examples")->capture_default_str();
  toy_cmd->add_option("--test", toy_args.test, "test examples")->capture_default_str();
  toy_cmd->add_option("--templates", toy_args.templates, "number of sentence frames")->capture_default_str();
  toy_cmd->add_option("--seed", toy_args.seed, "generator seed")->capture_default_str();
  toy_cmd->add_option("--raw-templates", toy_args.raw_templates, "overlap or disjoint")->capture_default_str();
  toy_cmd->add_option("--out", toy_args.out, "output directory (default: $VTM_DATA_DIR or .)");

  PrepareArgs prep_args;
  auto* prep_cmd = app.add_subcommand("prepare", "tokenise, delexicalise and build vocabularies");
  prep_cmd->add_option("--paired", prep_args.paired, "paired JSONL file")->required();
  prep_cmd->add_option("--raw", prep_args.raw, "raw text file");
  prep_cmd->add_option("--valid", prep_args.valid, "validation JSONL file");
  prep_cmd->add_option("--out", prep_args.out, "output directory (default: $VTM_DATA_DIR or .)");
  prep_cmd->add_option("--min-count", prep_args.min_count, "vocabulary threshold")->capture_default_str();
  prep_cmd->add_option("--max-length", prep_args.max_length, "sentence truncation length")->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "fit a model; writes model.ckpt, steps.csv, epochs.csv");
  train_cmd->add_option("--config", train_args.config, "key = value config file")->required();
  train_cmd->add_option("--mode", train_args.mode, "vtm | vtm-noraw | vtm-noraw-noMI | vtm-noraw-noMI-noPT | vtm-noPC | table2seq");
  train_cmd->add_option("--preset", train_args.preset, "spnlg | wiki (config keys override)");
  train_cmd->add_option("--seed", train_args.seed, "seed for initialisation, data order and noise");
  train_cmd->add_option("--epochs", train_args.epochs, "maximum epochs");
  train_cmd->add_option("--raw-fraction", train_args.raw_fraction, "share of raw sentences used");
  train_cmd->add_option("--out", train_args.out, "output directory");

  auto add_decode = [](CLI::App* cmd, DecodeArgs& a, bool need_ckpt) {
    auto* ck = cmd->add_option("--checkpoint", a.checkpoint, "model checkpoint");
    if (need_ckpt) ck->required();
    cmd->add_option("--input", a.input, "JSONL with tables (and references)")->required();
    cmd->add_option("--out", a.out, "output file")->required();
    cmd->add_option("--strategy", a.strategy, "greedy | temperature | beam | beam-sweep")->capture_default_str();
    cmd->add_option("--temperature", a.temperature, "sampling temperature")->capture_default_str();
    cmd->add_option("--beam", a.beam, "beam width")->capture_default_str();
    cmd->add_option("-n,--n", a.n, "outputs per table")->capture_default_str();
    cmd->add_option("--max-length", a.max_length, "maximum output length")->capture_default_str();
    cmd->add_option("--seed", a.seed, "decoding seed")->capture_default_str();
  };
  DecodeArgs gen_args, eval_args, sweep_args;
  auto* gen_cmd = app.add_subcommand("generate", "decode outputs for each input table (JSONL)");
  add_decode(gen_cmd, gen_args, true);
  auto* eval_cmd = app.add_subcommand("evaluate", "BLEU-4 / self-BLEU / ROUGE-L report (CSV)");
  add_decode(eval_cmd, eval_args, false);
  eval_cmd->add_option("--generations", eval_args.generations, "score an existing generate output instead");
  auto* sweep_cmd_app = app.add_subcommand("sweep", "temperature trade-off sweep (CSV)");
  add_decode(sweep_cmd_app, sweep_args, true);
  sweep_args.n = 5;
  sweep_cmd_app->add_option("--taus", sweep_args.taus, "temperatures (default: 0.1 0.2 0.3 0.5 0.6 0.9 1.0)");

  if (argc <= 1) {
    err << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    err << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }
  try {
    if (*toy_cmd) make_toy(toy_args);
    else if (*prep_cmd) prepare(prep_args);
    else if (*train_cmd) train(train_args, err);
    else if (*gen_cmd) generate_cmd(gen_args);
    else if (*eval_cmd) {
      if (eval_args.checkpoint.empty() && !eval_args.generations) throw ConfigError("evaluate needs --checkpoint or --generations");
      evaluate_cmd(eval_args);
    } else if (*sweep_cmd_app) sweep_cmd(sweep_args);
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace vtm::cli
