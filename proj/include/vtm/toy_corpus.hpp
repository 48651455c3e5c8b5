// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic restaurant-description corpus with a known template oracle.
// Every sentence is a slot-filled frame, so delexicalization alignments are
// exact and the template that produced any sentence can be recovered.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"

namespace vtm::toy {

struct FieldValues {
  std::string field;
  std::vector<std::string> values;  // space-separated multi-token values allowed
};

inline const std::vector<FieldValues>& fields() {
  static const std::vector<FieldValues> kFields = {
      {"name",
       {"aromi", "bibimbap house", "clowns", "cotto", "fitzbillies", "giraffe", "loch fyne", "strada", "wildwood",
        "zizzi", "blue spice", "midsummer house"}},
      {"eattype", {"pub", "restaurant", "coffee shop", "bistro", "diner", "bar"}},
      {"food", {"french", "italian", "chinese", "japanese", "indian", "english", "mexican", "thai"}},
      {"area", {"riverside", "city centre", "north park", "new york", "old town", "harbour"}},
      {"price", {"cheap", "moderate", "expensive", "low cost", "high end"}},
  };
  return kFields;
}

// Frames reference fields as {field}.
inline const std::vector<std::string>& frames() {
  static const std::vector<std::string> kFrames = {
      "{name} is a {food} place in {area} with {price} prices . it is a {eattype} .",
      "{name} is a {eattype} with {price} prices . it is in {area} . it is a {food} place .",
      "{name} is a {food} {eattype} in {area} and it has {price} prices .",
      "in {area} there is a {eattype} called {name} that serves {food} food at {price} prices .",
      "{name} serves {food} food in {area} . it is a {eattype} with {price} prices .",
      "if you want {food} food at {price} prices , try {name} , a new {eattype} in {area} .",
      "located in {area} , {name} is a {price} {food} {eattype} .",
      "{name} offers {price} {food} food . it is a {eattype} located in {area} .",
      "for {price} {food} food in {area} , visit {eattype} {name} .",
      "{name} , a {eattype} in {area} , has {food} food and {price} prices .",
      "there is a {price} {eattype} named {name} in {area} serving {food} food .",
      "{name} is located in {area} . it serves {food} food . prices are {price} . it is a {eattype} .",
  };
  return kFrames;
}

inline int max_templates() { return static_cast<int>(frames().size()); }

// Whitespace split that leaves {slot} markers intact.
inline Tokens tokenize_frame(std::string_view frame) {
  Tokens out;
  std::string cur;
  for (char c : frame) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Table with one record per value token, positions 1..n within each field.
inline Table make_table(const std::vector<std::pair<std::string, std::string>>& field_value) {
  Table t;
  for (const auto& [field, value] : field_value) {
    int pos = 1;
    for (const std::string& tok : tokenize(value)) t.records.push_back(Record{field, pos++, tok});
  }
  return t;
}

// Slot-fills frame `template_id` with the table's values.
inline Tokens realize(const Table& table, int template_id) {
  if (template_id < 0 || template_id >= max_templates()) throw Error("template id out of range");
  const auto values = field_values(table);
  Tokens out;
  for (const std::string& piece : tokenize_frame(frames()[static_cast<std::size_t>(template_id)])) {
    if (piece.size() > 2 && piece.front() == '{' && piece.back() == '}') {
      const std::string field = piece.substr(1, piece.size() - 2);
      auto it = std::find_if(values.begin(), values.end(), [&](const auto& f) { return f.first == field; });
      if (it == values.end()) throw Error("table lacks field '" + field + "' required by template");
      out.insert(out.end(), it->second.begin(), it->second.end());
    } else {
      out.push_back(piece);
    }
  }
  return out;
}

// Tokens that occur only inside field values, never in frame text.
inline std::set<std::string> value_lexicon() {
  std::set<std::string> frame_words;
  for (const std::string& f : frames()) {
    for (const std::string& piece : tokenize_frame(f)) frame_words.insert(piece);
  }
  std::set<std::string> lex;
  for (const FieldValues& f : fields()) {
    for (const std::string& v : f.values) {
      for (const std::string& t : tokenize(v)) {
        if (!frame_words.contains(t)) lex.insert(t);
      }
    }
  }
  return lex;
}

// Typed delexicalization with each run of one placeholder collapsed, so a
// frame compares equal regardless of how many tokens its values span.
inline Tokens skeleton(const Table& table, std::span<const std::string> sentence) {
  Delexicalized d = delexicalize(table, sentence, PlaceholderStyle::typed);
  Tokens out;
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    const bool placeholder = d.tokens[i].starts_with("<ent:");
    if (placeholder && !out.empty() && out.back() == d.tokens[i]) {
      // Only collapse tokens belonging to the same aligned span.
      bool same_span = false;
      for (const Span& s : d.alignment) {
        if (static_cast<int>(i) > s.start && static_cast<int>(i) < s.start + s.length) same_span = true;
      }
      if (same_span) continue;
    }
    out.push_back(d.tokens[i]);
  }
  return out;
}

inline Tokens frame_skeleton(int template_id) {
  Tokens out;
  for (const std::string& piece : tokenize_frame(frames()[static_cast<std::size_t>(template_id)])) {
    if (piece.size() > 2 && piece.front() == '{' && piece.back() == '}') {
      out.push_back(typed_placeholder(piece.substr(1, piece.size() - 2)));
    } else {
      out.push_back(piece);
    }
  }
  return out;
}

// Id of the frame whose slot-filling with `table` yields `sentence`.
inline std::optional<int> identify_template(const Table& table, std::span<const std::string> sentence,
                                            int n_templates = max_templates()) {
  const Tokens sk = skeleton(table, sentence);
  for (int k = 0; k < n_templates; ++k) {
    if (frame_skeleton(k) == sk) return k;
  }
  return std::nullopt;
}

// A sentence is content-correct when every table field is realized, no
// value-lexicon token survives delexicalization (no wrong or invented
// values), and relexicalizing the template restores the sentence.
inline bool content_correct(const Table& table, std::span<const std::string> sentence) {
  static const std::set<std::string> lexicon = value_lexicon();
  Delexicalized d = delexicalize(table, sentence, PlaceholderStyle::typed);
  for (const std::string& t : d.tokens) {
    if (lexicon.contains(t)) return false;
  }
  std::set<std::string> mentioned;
  for (const Span& s : d.alignment) mentioned.insert(s.field);
  for (const auto& [field, values] : field_values(table)) {
    if (!mentioned.contains(field)) return false;
  }
  return relexicalize(d.tokens, table, d.alignment) == Tokens(sentence.begin(), sentence.end());
}

enum class RawTemplates { overlap, disjoint };

struct Options {
  int n_paired = 1000;
  int n_raw = 10000;
  int n_heldout = 200;
  int n_templates = 8;
  std::uint64_t seed = 7;
  RawTemplates raw_templates = RawTemplates::overlap;
};

struct Example {
  Table table;
  Tokens sentence;
  int template_id = 0;
};

struct Corpus {
  std::vector<Example> paired;
  std::vector<Example> raw;      // tables retained only for the oracle
  std::vector<Example> heldout;  // realized with the paired template set
  int n_templates = 0;
};

inline Table sample_table(std::mt19937_64& rng) {
  std::vector<std::pair<std::string, std::string>> fv;
  for (const FieldValues& f : fields()) {
    std::uniform_int_distribution<std::size_t> pick(0, f.values.size() - 1);
    fv.emplace_back(f.field, f.values[pick(rng)]);
  }
  return make_table(fv);
}

// Template ids available to paired and raw examples under `mode`.
inline std::pair<std::vector<int>, std::vector<int>> template_sets(int n_templates, RawTemplates mode) {
  std::vector<int> all(static_cast<std::size_t>(n_templates));
  for (int i = 0; i < n_templates; ++i) all[static_cast<std::size_t>(i)] = i;
  if (mode == RawTemplates::overlap || n_templates < 2) return {all, all};
  const int half = n_templates / 2;
  return {std::vector<int>(all.begin(), all.begin() + half), std::vector<int>(all.begin() + half, all.end())};
}

inline Corpus generate(const Options& opt) {
  if (opt.n_templates < 1 || opt.n_templates > max_templates()) {
    throw ConfigError("n_templates must be in [1, " + std::to_string(max_templates()) + "]");
  }
  if (opt.n_paired < 0 || opt.n_raw < 0 || opt.n_heldout < 0) throw ConfigError("example counts must be >= 0");
  auto [paired_ids, raw_ids] = template_sets(opt.n_templates, opt.raw_templates);
  std::mt19937_64 rng(opt.seed);
  auto draw = [&](const std::vector<int>& ids) {
    Example e;
    e.table = sample_table(rng);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    e.template_id = ids[pick(rng)];
    e.sentence = realize(e.table, e.template_id);
    return e;
  };
  Corpus c;
  c.n_templates = opt.n_templates;
  for (int i = 0; i < opt.n_paired; ++i) c.paired.push_back(draw(paired_ids));
  for (int i = 0; i < opt.n_raw; ++i) c.raw.push_back(draw(raw_ids));
  for (int i = 0; i < opt.n_heldout; ++i) c.heldout.push_back(draw(paired_ids));
  return c;
}

// Every realization of the example's table, one per template.
inline std::vector<Tokens> all_realizations(const Table& table, int n_templates) {
  std::vector<Tokens> out;
  for (int k = 0; k < n_templates; ++k) out.push_back(realize(table, k));
  return out;
}

}  // namespace vtm::toy
