// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Single-file checkpoint: the 8-byte magic "VTMCKPT\0", a little-endian
// uint64 header length, a JSON header (sorted keys), then the raw doubles of
// every array listed in the header's directory, column-major.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vtm/config.hpp"
#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/model.hpp"
#include "vtm/params.hpp"

namespace vtm {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'V', 'T', 'M', 'C', 'K', 'P', 'T', '\0'};

struct TrainingState {
  double best_score = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  std::string rng_state;  // textual mt19937_64 state
};

struct Checkpoint {
  TrainConfig config;
  Vocabulary words;
  Vocabulary fields;
  TrainingState state;
  std::unique_ptr<Model> model;
  std::optional<Adam> optimizer;
};

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream in(s);
  in >> rng;
  if (!in) throw ParseError("corrupt RNG state in checkpoint");
  return rng;
}

inline nlohmann::json dims_to_json(const ModelDims& d) {
  return {{"word_vocab", d.word_vocab}, {"field_vocab", d.field_vocab}, {"word_dim", d.word_dim},
          {"hidden", d.hidden},         {"table_hidden", d.table_hidden}, {"z_dim", d.z_dim},
          {"c_dim", d.c_dim},           {"max_position", d.max_position}};
}

inline ModelDims dims_from_json(const nlohmann::json& j) {
  ModelDims d;
  d.word_vocab = j.at("word_vocab").get<int>();
  d.field_vocab = j.at("field_vocab").get<int>();
  d.word_dim = j.at("word_dim").get<int>();
  d.hidden = j.at("hidden").get<int>();
  d.table_hidden = j.at("table_hidden").get<int>();
  d.z_dim = j.at("z_dim").get<int>();
  d.c_dim = j.at("c_dim").get<int>();
  d.max_position = j.at("max_position").get<int>();
  return d;
}

inline void save_checkpoint(const std::string& path, const Model& model, const Vocabulary& words,
                            const Vocabulary& fields, const TrainConfig& config, const TrainingState& state,
                            const Adam* optimizer) {
  std::vector<const Matrix*> blobs;
  nlohmann::json directory = nlohmann::json::array();
  std::uint64_t offset = 0;
  auto add_array = [&](const std::string& name, const Matrix& m) {
    directory.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
    blobs.push_back(&m);
  };
  for (const ad::Parameter* p : model.store.all()) add_array("param/" + p->name, p->value);
  nlohmann::json adam = nullptr;
  if (optimizer != nullptr) {
    adam = {{"learning_rate", optimizer->learning_rate()}, {"steps", nlohmann::json::object()}};
    for (const auto& [name, s] : optimizer->state()) {
      adam["steps"][name] = s.step;
      add_array("adam_m/" + name, s.m);
      add_array("adam_v/" + name, s.v);
    }
  }
  nlohmann::json header = {{"format", 1},
                           {"config", to_json(config)},
                           {"dims", dims_to_json(model.dims())},
                           {"words", words.entries()},
                           {"fields", fields.entries()},
                           {"best_score", state.best_score},
                           {"best_epoch", state.best_epoch},
                           {"epochs_run", state.epochs_run},
                           {"rng", state.rng_state},
                           {"adam", adam},
                           {"arrays", directory}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Matrix* m : blobs) {
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw ParseError("'" + path + "' is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1ULL << 32)) throw ParseError("corrupt checkpoint header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("corrupt checkpoint header: ") + e.what());
  }
  std::vector<double> data;
  {
    std::uint64_t total = 0;
    for (const auto& a : header.at("arrays")) total += a.at("rows").get<std::uint64_t>() * a.at("cols").get<std::uint64_t>();
    data.resize(total);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw ParseError("truncated checkpoint data");
  }
  auto array = [&](const std::string& name) -> Matrix {
    for (const auto& a : header.at("arrays")) {
      if (a.at("name") == name) {
        const auto rows = a.at("rows").get<Eigen::Index>(), cols = a.at("cols").get<Eigen::Index>();
        const auto off = a.at("offset").get<std::size_t>();
        return Eigen::Map<const Matrix>(data.data() + off, rows, cols);
      }
    }
    throw ParseError("checkpoint lacks array '" + name + "'");
  };
  Checkpoint ck;
  try {
    ck.config = config_from_json(header.at("config"));
    ck.words = Vocabulary(header.at("words").get<Tokens>());
    ck.fields = Vocabulary(header.at("fields").get<Tokens>());
    ck.state.best_score = header.at("best_score").get<double>();
    ck.state.best_epoch = header.at("best_epoch").get<int>();
    ck.state.epochs_run = header.at("epochs_run").get<int>();
    ck.state.rng_state = header.at("rng").get<std::string>();
    ck.model = std::make_unique<Model>(dims_from_json(header.at("dims")), 0);
    for (ad::Parameter* p : ck.model->store.all()) {
      Matrix m = array("param/" + p->name);
      if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
        throw ParseError("checkpoint array '" + p->name + "' has the wrong shape");
      }
      p->value = std::move(m);
    }
    const auto& adam = header.at("adam");
    if (!adam.is_null()) {
      Adam opt(adam.at("learning_rate").get<double>());
      for (const auto& [name, steps] : adam.at("steps").items()) {
        Adam::State s{array("adam_m/" + name), array("adam_v/" + name), steps.get<long>()};
        opt.state()[name] = std::move(s);
      }
      ck.optimizer = std::move(opt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

}  // namespace vtm
