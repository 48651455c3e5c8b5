// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Three-phase optimisation: a paired step, a raw step and a joint step per
// round, each on fresh batches and each updating only its own parameter
// groups. Validation picks the best epoch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vtm/autodiff.hpp"
#include "vtm/checkpoint.hpp"
#include "vtm/config.hpp"
#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/model.hpp"
#include "vtm/objectives.hpp"
#include "vtm/params.hpp"

namespace vtm {

enum class Phase { paired, raw, joint };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::paired: return "paired";
    case Phase::raw: return "raw";
    case Phase::joint: return "joint";
  }
  return "?";
}

// Parameter groups each phase may move.
inline std::vector<ParamGroup> phase_groups(Phase phase, Mode mode) {
  const ModeTerms t = terms_of(mode);
  if (!t.latent) return {ParamGroup::table_encoder, ParamGroup::generator};
  if (phase == Phase::raw) return {ParamGroup::inference, ParamGroup::generator};
  return {kAllGroups.begin(), kAllGroups.end()};
}

struct Dataset {
  std::vector<PairedExample> paired;
  std::vector<RawExample> raw;
  std::vector<PairedExample> valid;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct ValidationScore {
  double score = 0.0;
  double elbo_p = 0.0;
  double elbo_r = 0.0;
};

class Trainer {
 public:
  Trainer(Model& model, TrainConfig config)
      : model_(model),
        config_(std::move(config)),
        optimizer_(config_.learning_rate),
        noise_rng_(mix_seed(config_.seed, 1)) {
    validate(config_);
  }

  [[nodiscard]] const TrainConfig& config() const { return config_; }
  [[nodiscard]] Adam& optimizer() { return optimizer_; }
  [[nodiscard]] std::mt19937_64& noise_rng() { return noise_rng_; }
  [[nodiscard]] long steps() const { return step_; }

  // Algorithm line 1: paired batch, all groups (table2seq: encoder + decoder).
  LossBreakdown train_step_paired(const PairedBatch& batch) { return step(Phase::paired, &batch, nullptr); }

  // Line 2: raw batch, inference network and generator only.
  LossBreakdown train_step_raw(const RawBatch& batch) {
    if (!terms_of(config_.mode).raw) throw ConfigError("raw step in a paired-only mode");
    return step(Phase::raw, nullptr, &batch);
  }

  // Line 3: full objective. Paired-only modes ignore the raw batch.
  LossBreakdown train_step_joint(const PairedBatch& paired, const RawBatch* raw) {
    const bool use_raw = terms_of(config_.mode).raw;
    if (use_raw && raw == nullptr) throw ConfigError("joint step needs a raw batch in this mode");
    return step(Phase::joint, &paired, use_raw ? raw : nullptr);
  }

  // Loss and gradients without an update; gradients are left in the store.
  LossResult evaluate_gradients(ad::Graph& g, const PairedBatch* paired, const RawBatch* raw) {
    model_.store.zero_grad();
    LossResult r = compute_loss(g, model_, paired, raw, loss_spec(), noise_rng_);
    g.backward(r.total);
    return r;
  }

 private:
  LossSpec loss_spec() const {
    LossSpec s{config_.mode, config_.lambda, 1.0};
    if (config_.kl_warmup_steps > 0) {
      s.kl_weight = std::min(1.0, static_cast<double>(step_ + 1) / static_cast<double>(config_.kl_warmup_steps));
    }
    return s;
  }

  LossBreakdown step(Phase phase, const PairedBatch* paired, const RawBatch* raw) {
    ad::Graph g;
    LossResult r = evaluate_gradients(g, paired, raw);
    if (!r.terms.finite()) throw DivergenceError("non-finite loss at step " + std::to_string(step_) + " (" +
                                                 phase_name(phase) + "): " + r.terms.describe());
    const auto groups = phase_groups(phase, config_.mode);
    auto params = model_.store.members(std::span<const ParamGroup>(groups));
    clip_grad_norm(params, config_.clip_norm);
    optimizer_.step(params);
    ++step_;
    return r.terms;
  }

  Model& model_;
  TrainConfig config_;
  Adam optimizer_;
  std::mt19937_64 noise_rng_;
  long step_ = 0;
};

// Mean validation losses with a fixed noise stream. Paired-only modes score
// ELBO_p; raw modes add ELBO_r computed on the validation sentences.
inline ValidationScore validation_score(const Model& model, std::span<const PairedExample> valid, Mode mode,
                                        int batch_size, std::uint64_t seed) {
  if (valid.empty()) throw Error("empty validation set");
  std::mt19937_64 rng(mix_seed(seed, 2));
  const LossSpec spec{mode, Lambdas{0, 0, 0}, 1.0};
  const bool use_raw = terms_of(mode).raw;
  ValidationScore out;
  std::vector<RawExample> raw;
  if (use_raw) {
    for (const auto& e : valid) raw.push_back(RawExample{e.sentence});
  }
  for (std::size_t start = 0; start < valid.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(valid.size(), start + static_cast<std::size_t>(batch_size)); ++i) {
      idx.push_back(i);
    }
    const double w = static_cast<double>(idx.size());
    PairedBatch pb = make_paired_batch(valid, idx);
    ad::Graph g(false);
    LossBreakdown b;
    {
      LatentNoise n = draw_noise(pb.size(), model.dims(), rng);
      paired_loss(g, model, pb, n, spec, b);
    }
    if (use_raw) {
      RawBatch rb = make_raw_batch(raw, idx);
      LatentNoise n = draw_noise(rb.size(), model.dims(), rng);
      raw_loss(g, model, rb, n, spec, b);
    }
    out.elbo_p += w * b.elbo_p;
    out.elbo_r += w * b.elbo_r;
  }
  out.elbo_p /= static_cast<double>(valid.size());
  out.elbo_r /= static_cast<double>(valid.size());
  out.score = out.elbo_p + (use_raw ? out.elbo_r : 0.0);
  return out;
}

struct EpochRecord {
  int epoch = 0;  // 0 is the untrained model
  ValidationScore valid;
  bool best = false;
  long steps = 0;
};

struct FitResult {
  double best_score = 0.0;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
  TrainingState state;
  std::optional<Adam> best_optimizer;
};

struct FitLogs {
  std::ostream* steps = nullptr;   // per-step CSV
  std::ostream* epochs = nullptr;  // per-epoch CSV
  std::ostream* progress = nullptr;
};

// Cycles independently reshuffled passes over the raw batches.
class RawStream {
 public:
  RawStream(std::span<const RawExample> data, int batch_size, std::uint64_t seed)
      : data_(data), batch_size_(batch_size), seed_(seed) {}

  [[nodiscard]] bool empty() const { return data_.empty(); }

  RawBatch next() {
    if (data_.empty()) throw Error("raw stream has no data");
    if (pos_ >= order_.size()) {
      order_ = shuffled_groups(data_.size(), batch_size_, mix_seed(seed_, pass_++));
      pos_ = 0;
    }
    return make_raw_batch(data_, order_[pos_++]);
  }

 private:
  std::span<const RawExample> data_;
  int batch_size_;
  std::uint64_t seed_;
  std::uint64_t pass_ = 0;
  std::vector<std::vector<std::size_t>> order_;
  std::size_t pos_ = 0;
};

struct PreparedData {
  Dataset data;
  Vocabulary words;
  Vocabulary fields;
};

// Vocabularies come from the training split only; raw sentences beyond
// raw_fraction of the file are dropped.
inline PreparedData prepare_data(std::span<const PairedText> paired, std::span<const Tokens> raw,
                                 std::span<const PairedText> valid, const TrainConfig& config) {
  if (paired.empty()) throw Error("no paired training data");
  const auto keep = static_cast<std::size_t>(std::llround(config.raw_fraction * static_cast<double>(raw.size())));
  std::span<const Tokens> used_raw = terms_of(config.mode).raw ? raw.first(keep) : raw.first(0);
  auto [words, fields] = build_vocabularies(paired, used_raw, config.min_count);
  PreparedData out{{}, std::move(words), std::move(fields)};
  for (const auto& p : paired) out.data.paired.push_back(encode_paired(p, out.words, out.fields, config.max_length));
  for (const auto& r : used_raw) out.data.raw.push_back(encode_raw(r, out.words, config.max_length));
  for (const auto& v : valid) out.data.valid.push_back(encode_paired(v, out.words, out.fields, config.max_length));
  return out;
}

// Trains `model` in place and leaves it at the best validation epoch.
inline FitResult fit(Model& model, const Dataset& data, const TrainConfig& config, const FitLogs& logs = {}) {
  validate(config);
  if (data.paired.empty()) throw Error("no paired training data");
  const ModeTerms terms = terms_of(config.mode);
  if (terms.raw && data.raw.empty()) throw Error("mode " + std::string(mode_name(config.mode)) + " needs raw data");
  const std::span<const PairedExample> valid =
      data.valid.empty() ? std::span<const PairedExample>(data.paired) : std::span<const PairedExample>(data.valid);

  Trainer trainer(model, config);
  RawStream raw_stream(data.raw, config.batch_raw, mix_seed(config.seed, 3));
  int current_epoch = 0;
  if (logs.steps != nullptr) *logs.steps << "step,epoch,phase," << LossBreakdown::csv_header << '\n';
  auto log_step = [&](Phase phase, const LossBreakdown& b) {
    if (logs.steps != nullptr) {
      *logs.steps << trainer.steps() << ',' << current_epoch << ',' << phase_name(phase) << ',' << b.csv_row() << '\n';
    }
  };
  if (logs.epochs != nullptr) *logs.epochs << "epoch,steps,valid_score,valid_elbo_p,valid_elbo_r,best\n";
  auto log_epoch = [&](const EpochRecord& e) {
    if (logs.epochs != nullptr) {
      *logs.epochs << e.epoch << ',' << e.steps << ',' << format_double(e.valid.score) << ','
                   << format_double(e.valid.elbo_p) << ',' << format_double(e.valid.elbo_r) << ','
                   << (e.best ? 1 : 0) << '\n';
    }
    if (logs.progress != nullptr) {
      *logs.progress << "epoch " << e.epoch << " valid " << format_double(e.valid.score) << (e.best ? " *" : "")
                     << '\n';
    }
  };

  FitResult result;
  EpochRecord initial{0, validation_score(model, valid, config.mode, config.batch_paired, config.seed), true, 0};
  result.history.push_back(initial);
  result.best_score = initial.valid.score;
  result.best_epoch = 0;
  log_epoch(initial);
  std::vector<Matrix> best_params = model.store.snapshot();
  std::optional<Adam> best_opt;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    current_epoch = epoch;
    auto batches = make_batches(std::span<const PairedExample>(data.paired), config.batch_paired,
                                mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = 0; i < batches.size(); i += 2) {
      log_step(Phase::paired, trainer.train_step_paired(batches[i]));
      if (terms.raw) log_step(Phase::raw, trainer.train_step_raw(raw_stream.next()));
      const PairedBatch& joint_batch = batches[(i + 1) % batches.size()];
      if (terms.raw) {
        RawBatch rb = raw_stream.next();
        log_step(Phase::joint, trainer.train_step_joint(joint_batch, &rb));
      } else {
        log_step(Phase::joint, trainer.train_step_joint(joint_batch, nullptr));
      }
    }
    EpochRecord rec{epoch, validation_score(model, valid, config.mode, config.batch_paired, config.seed), false,
                    trainer.steps()};
    if (rec.valid.score < result.best_score) {
      rec.best = true;
      result.best_score = rec.valid.score;
      result.best_epoch = epoch;
      best_params = model.store.snapshot();
      best_opt = trainer.optimizer();
      result.state.rng_state = rng_to_string(trainer.noise_rng());
      since_best = 0;
    } else {
      ++since_best;
    }
    result.history.push_back(rec);
    log_epoch(rec);
    if (since_best >= config.patience) break;
  }
  model.store.restore(best_params);
  result.state.best_score = result.best_score;
  result.state.best_epoch = result.best_epoch;
  result.state.epochs_run = static_cast<int>(result.history.size()) - 1;
  if (result.state.rng_state.empty()) result.state.rng_state = rng_to_string(std::mt19937_64(mix_seed(config.seed, 1)));
  result.best_optimizer = std::move(best_opt);
  return result;
}

}  // namespace vtm
