// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

// Tables, sentences and the datasets built from them: tokenization,
// field_position:value table serialization, delexicalization against table
// values, vocabularies, padded batches and the on-disk corpus formats.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtm/errors.hpp"

namespace vtm {

using Tokens = std::vector<std::string>;

struct Record {
  std::string field;
  int position = 1;
  std::string value;

  friend bool operator==(const Record&, const Record&) = default;
};

struct Table {
  std::vector<Record> records;

  friend bool operator==(const Table&, const Table&) = default;
};

// Lowercases ASCII and splits off punctuation. '.' and ',' stay attached
// when they sit between two digits ("2.5", "1,000").
inline Tokens tokenize(std::string_view text) {
  static constexpr std::string_view kDetached = ",.!?;:()[]\"";
  Tokens out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    const auto uch = static_cast<unsigned char>(ch);
    if (std::isspace(uch)) {
      flush();
      continue;
    }
    if (kDetached.find(ch) != std::string_view::npos) {
      const bool numeric = (ch == '.' || ch == ',') && i > 0 && i + 1 < text.size() &&
                           std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
                           std::isdigit(static_cast<unsigned char>(text[i + 1]));
      if (!numeric) {
        flush();
        out.emplace_back(1, ch);
        continue;
      }
    }
    current.push_back(uch < 128 ? static_cast<char>(std::tolower(uch)) : ch);
  }
  flush();
  return out;
}

inline std::string join(std::span<const std::string> tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Table serialization: tab-separated `field_position:value` entries.

inline Table parse_table(std::string_view line) {
  Table table;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find('\t', start);
    if (end == std::string_view::npos) end = line.size();
    std::string_view entry = line.substr(start, end - start);
    start = end + 1;
    if (entry.empty()) {
      if (end == line.size()) break;
      continue;
    }
    const std::string shown(entry);
    const std::size_t colon = entry.find(':');
    if (colon == std::string_view::npos) throw ParseError("table entry '" + shown + "' has no ':'");
    std::string_view key = entry.substr(0, colon);
    std::string_view value = entry.substr(colon + 1);
    const std::size_t underscore = key.rfind('_');
    if (underscore == std::string_view::npos || underscore == 0) {
      throw ParseError("table entry '" + shown + "' has no field_position key");
    }
    std::string_view field = key.substr(0, underscore);
    std::string_view pos_text = key.substr(underscore + 1);
    if (pos_text.empty() || !std::all_of(pos_text.begin(), pos_text.end(),
                                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ParseError("table entry '" + shown + "' has a non-integer position");
    }
    if (pos_text.size() > 6) throw ParseError("table entry '" + shown + "' has an out-of-range position");
    const int position = std::stoi(std::string(pos_text));
    if (position < 1) throw ParseError("table entry '" + shown + "' has position < 1");
    if (value.empty() || value.find_first_of(" \t\r\n") != std::string_view::npos) {
      throw ParseError("table entry '" + shown + "' must have a single non-empty value token");
    }
    table.records.push_back(Record{std::string(field), position, std::string(value)});
    if (end == line.size()) break;
  }
  if (table.records.empty()) throw ParseError("table line has no entries");

  std::map<std::string, std::set<int>> positions;
  for (const Record& r : table.records) {
    if (!positions[r.field].insert(r.position).second) {
      throw ParseError("field '" + r.field + "' repeats position " + std::to_string(r.position));
    }
  }
  for (const auto& [field, seen] : positions) {
    if (*seen.rbegin() != static_cast<int>(seen.size())) {
      throw ParseError("positions of field '" + field + "' are not contiguous from 1");
    }
  }
  return table;
}

inline std::string serialize_table(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const Record& r = table.records[i];
    if (i > 0) out += '\t';
    out += r.field + "_" + std::to_string(r.position) + ":" + r.value;
  }
  return out;
}

// Lowercases values and field names; the corpus tokenizer lowercases too.
inline Table normalize_table(Table table) {
  auto lower = [](std::string s) {
    for (char& c : s) {
      if (static_cast<unsigned char>(c) < 128) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
  };
  for (Record& r : table.records) {
    r.field = lower(r.field);
    r.value = lower(r.value);
  }
  return table;
}

// Fields in order of first appearance, each with its value tokens ordered by
// position.
inline std::vector<std::pair<std::string, Tokens>> field_values(const Table& table) {
  std::vector<std::pair<std::string, std::vector<std::pair<int, std::string>>>> grouped;
  for (const Record& r : table.records) {
    auto it = std::find_if(grouped.begin(), grouped.end(), [&](const auto& g) { return g.first == r.field; });
    if (it == grouped.end()) {
      grouped.push_back({r.field, {}});
      it = std::prev(grouped.end());
    }
    it->second.emplace_back(r.position, r.value);
  }
  std::vector<std::pair<std::string, Tokens>> out;
  out.reserve(grouped.size());
  for (auto& [field, values] : grouped) {
    std::sort(values.begin(), values.end());
    Tokens tokens;
    for (auto& [pos, value] : values) tokens.push_back(value);
    out.emplace_back(field, std::move(tokens));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Delexicalization.

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEntToken = "<ent>";

enum class PlaceholderStyle { single, typed };

inline std::string typed_placeholder(std::string_view field) { return "<ent:" + std::string(field) + ">"; }

struct Span {
  int start = 0;
  int length = 0;
  std::string field;

  friend bool operator==(const Span&, const Span&) = default;
};

struct Delexicalized {
  Tokens tokens;
  std::vector<Span> alignment;  // sorted by start
};

// Replaces every maximal occurrence of a field's full value sequence with
// placeholders, token for token. Longer spans win; among equal lengths the
// field appearing first in the table wins, then the leftmost start.
inline Delexicalized delexicalize(const Table& table, std::span<const std::string> sentence,
                                  PlaceholderStyle style = PlaceholderStyle::single) {
  const auto fields = field_values(table);
  struct Candidate {
    int length;
    std::size_t field_rank;
    int start;
  };
  std::vector<Candidate> candidates;
  const int n = static_cast<int>(sentence.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const Tokens& value = fields[f].second;
    const int len = static_cast<int>(value.size());
    if (len == 0 || len > n) continue;
    for (int s = 0; s + len <= n; ++s) {
      if (std::equal(value.begin(), value.end(), sentence.begin() + s)) candidates.push_back({len, f, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.length != b.length) return a.length > b.length;
    if (a.field_rank != b.field_rank) return a.field_rank < b.field_rank;
    return a.start < b.start;
  });
  std::vector<bool> taken(sentence.size(), false);
  Delexicalized out{Tokens(sentence.begin(), sentence.end()), {}};
  for (const Candidate& c : candidates) {
    if (std::any_of(taken.begin() + c.start, taken.begin() + c.start + c.length, [](bool t) { return t; })) continue;
    std::fill(taken.begin() + c.start, taken.begin() + c.start + c.length, true);
    const std::string& field = fields[c.field_rank].first;
    const std::string placeholder =
        style == PlaceholderStyle::single ? std::string(kEntToken) : typed_placeholder(field);
    for (int i = c.start; i < c.start + c.length; ++i) out.tokens[static_cast<std::size_t>(i)] = placeholder;
    out.alignment.push_back(Span{c.start, c.length, field});
  }
  std::sort(out.alignment.begin(), out.alignment.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  return out;
}

// Inverse of delexicalize given its alignment.
inline Tokens relexicalize(std::span<const std::string> tmpl, const Table& table, std::span<const Span> alignment) {
  const auto fields = field_values(table);
  Tokens out(tmpl.begin(), tmpl.end());
  for (const Span& span : alignment) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.first == span.field; });
    if (it == fields.end()) throw Error("alignment references field '" + span.field + "' absent from the table");
    if (static_cast<int>(it->second.size()) != span.length || span.start < 0 ||
        span.start + span.length > static_cast<int>(out.size())) {
      throw Error("alignment span for field '" + span.field + "' does not fit the template");
    }
    std::copy(it->second.begin(), it->second.end(), out.begin() + span.start);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary.

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kEnt = 4;
  static constexpr int kReserved = 5;

  Vocabulary() : Vocabulary(Tokens{}) {}

  // `tokens` lists the non-reserved entries in id order.
  explicit Vocabulary(Tokens tokens) {
    id_to_token_ = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
                    std::string(kUnkToken), std::string(kEntToken)};
    for (auto& t : tokens) id_to_token_.push_back(std::move(t));
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      if (!token_to_id_.emplace(id_to_token_[i], static_cast<int>(i)).second) {
        throw ParseError("duplicate vocabulary entry '" + id_to_token_[i] + "'");
      }
    }
  }

  // Tokens with count >= min_count, ordered by descending count then
  // lexicographically. Reserved strings are never counted twice.
  static Vocabulary build(std::span<const Tokens> corpus, int min_count) {
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
    std::unordered_map<std::string, long> counts;
    for (const Tokens& sentence : corpus) {
      for (const std::string& t : sentence) ++counts[t];
    }
    const std::set<std::string> reserved = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
                                            std::string(kUnkToken), std::string(kEntToken)};
    std::vector<std::pair<std::string, long>> kept;
    for (auto& [token, count] : counts) {
      if (count >= min_count && !reserved.contains(token)) kept.emplace_back(token, count);
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    Tokens tokens;
    tokens.reserve(kept.size());
    for (auto& [token, count] : kept) tokens.push_back(token);
    return Vocabulary(std::move(tokens));
  }

  [[nodiscard]] int size() const { return static_cast<int>(id_to_token_.size()); }
  [[nodiscard]] bool contains(std::string_view token) const { return token_to_id_.contains(std::string(token)); }

  [[nodiscard]] int id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  [[nodiscard]] const std::string& token(int id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary id out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  [[nodiscard]] std::vector<int> encode(std::span<const std::string> tokens, bool append_eos) const {
    std::vector<int> ids;
    ids.reserve(tokens.size() + 1);
    for (const auto& t : tokens) ids.push_back(id(t));
    if (append_eos) ids.push_back(kEos);
    return ids;
  }

  // Stops at the first EOS; drops PAD and BOS.
  [[nodiscard]] Tokens decode(std::span<const int> ids) const {
    Tokens out;
    for (int i : ids) {
      if (i == kEos) break;
      if (i == kPad || i == kBos) continue;
      out.push_back(token(i));
    }
    return out;
  }

  // Non-reserved entries in id order.
  [[nodiscard]] Tokens entries() const { return Tokens(id_to_token_.begin() + kReserved, id_to_token_.end()); }

 private:
  Tokens id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

inline Vocabulary build_vocab(std::span<const Tokens> corpus, int min_count) {
  return Vocabulary::build(corpus, min_count);
}

// ---------------------------------------------------------------------------
// Text-level examples and file formats.

struct PairedText {
  Table table;
  Tokens sentence;
  std::vector<Tokens> references;  // empty means {sentence}
};

inline std::vector<Tokens> references_of(const PairedText& p) {
  return p.references.empty() ? std::vector<Tokens>{p.sentence} : p.references;
}

// One JSON object per line: {"table": "...", "sentence": "...",
// optional "references": [...]}.
inline std::vector<PairedText> read_paired_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open paired file '" + path + "'");
  std::vector<PairedText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      PairedText p;
      p.table = normalize_table(parse_table(j.at("table").get<std::string>()));
      p.sentence = tokenize(j.at("sentence").get<std::string>());
      if (j.contains("references")) {
        for (const auto& r : j.at("references")) p.references.push_back(tokenize(r.get<std::string>()));
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline void write_paired_file(const std::string& path, std::span<const PairedText> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const PairedText& p : examples) {
    nlohmann::json j;
    j["table"] = serialize_table(p.table);
    j["sentence"] = join(p.sentence);
    if (!p.references.empty()) {
      nlohmann::json refs = nlohmann::json::array();
      for (const Tokens& r : p.references) refs.push_back(join(r));
      j["references"] = std::move(refs);
    }
    out << j.dump() << '\n';
  }
}

inline std::vector<Tokens> read_raw_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open raw file '" + path + "'");
  std::vector<Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    Tokens t = tokenize(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline void write_raw_file(const std::string& path, std::span<const Tokens> sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const Tokens& s : sentences) out << join(s) << '\n';
}

// ---------------------------------------------------------------------------
// Encoded examples.

inline constexpr int kDefaultMaxLength = 60;

struct EncodedTable {
  std::vector<int> fields;
  std::vector<int> positions;  // 1-based, unclipped
  std::vector<int> values;

  [[nodiscard]] int size() const { return static_cast<int>(fields.size()); }
};

struct PairedExample {
  EncodedTable table;
  std::vector<int> sentence;  // ends with EOS
  std::vector<int> tmpl;      // same length as sentence
};

struct RawExample {
  std::vector<int> sentence;  // ends with EOS
};

inline EncodedTable encode_table(const Table& table, const Vocabulary& words, const Vocabulary& fields) {
  if (table.records.empty()) throw Error("cannot encode an empty table");
  EncodedTable out;
  for (const Record& r : table.records) {
    out.fields.push_back(fields.id(r.field));
    out.positions.push_back(r.position);
    out.values.push_back(words.id(r.value));
  }
  return out;
}

inline Tokens truncate(Tokens tokens, int max_length) {
  if (static_cast<int>(tokens.size()) > max_length) tokens.resize(static_cast<std::size_t>(max_length));
  return tokens;
}

inline PairedExample encode_paired(const PairedText& text, const Vocabulary& words, const Vocabulary& fields,
                                   int max_length = kDefaultMaxLength) {
  Tokens sentence = truncate(text.sentence, max_length);
  if (sentence.empty()) throw Error("paired example has an empty sentence");
  Delexicalized d = delexicalize(text.table, sentence);
  return PairedExample{encode_table(text.table, words, fields), words.encode(sentence, true),
                       words.encode(d.tokens, true)};
}

inline RawExample encode_raw(const Tokens& sentence, const Vocabulary& words, int max_length = kDefaultMaxLength) {
  Tokens t = truncate(sentence, max_length);
  if (t.empty()) throw Error("raw example has an empty sentence");
  return RawExample{words.encode(t, true)};
}

// Word vocabulary over paired sentences, table values and raw sentences;
// field vocabulary over table field names (every field kept).
inline std::pair<Vocabulary, Vocabulary> build_vocabularies(std::span<const PairedText> paired,
                                                            std::span<const Tokens> raw, int min_count) {
  std::vector<Tokens> corpus;
  std::vector<Tokens> field_corpus;
  for (const PairedText& p : paired) {
    corpus.push_back(p.sentence);
    Tokens values, names;
    for (const Record& r : p.table.records) {
      values.push_back(r.value);
      names.push_back(r.field);
    }
    corpus.push_back(std::move(values));
    field_corpus.push_back(std::move(names));
  }
  for (const Tokens& r : raw) corpus.push_back(r);
  if (field_corpus.empty()) field_corpus.push_back({});
  return {Vocabulary::build(corpus, min_count), Vocabulary::build(field_corpus, 1)};
}

// ---------------------------------------------------------------------------
// Batching.

// batch x length token ids with a 0/1 mask; padded entries hold PAD.
struct TokenMatrix {
  int batch = 0;
  int length = 0;
  std::vector<int> ids;  // row-major
  std::vector<std::uint8_t> mask;

  [[nodiscard]] int at(int b, int t) const { return ids[static_cast<std::size_t>(b * length + t)]; }
  [[nodiscard]] bool valid(int b, int t) const { return mask[static_cast<std::size_t>(b * length + t)] != 0; }
  [[nodiscard]] long token_count() const { return std::accumulate(mask.begin(), mask.end(), 0L); }

  [[nodiscard]] std::vector<int> row(int b) const {
    std::vector<int> out;
    for (int t = 0; t < length; ++t) {
      if (valid(b, t)) out.push_back(at(b, t));
    }
    return out;
  }
};

inline TokenMatrix pad_sequences(std::span<const std::vector<int>* const> rows) {
  TokenMatrix m;
  m.batch = static_cast<int>(rows.size());
  for (const auto* r : rows) m.length = std::max(m.length, static_cast<int>(r->size()));
  m.ids.assign(static_cast<std::size_t>(m.batch * m.length), Vocabulary::kPad);
  m.mask.assign(m.ids.size(), 0);
  for (int b = 0; b < m.batch; ++b) {
    const auto& r = *rows[static_cast<std::size_t>(b)];
    for (std::size_t t = 0; t < r.size(); ++t) {
      m.ids[static_cast<std::size_t>(b * m.length) + t] = r[t];
      m.mask[static_cast<std::size_t>(b * m.length) + t] = 1;
    }
  }
  return m;
}

inline TokenMatrix pad_sequences(std::span<const std::vector<int>> rows) {
  std::vector<const std::vector<int>*> ptrs;
  for (const auto& r : rows) ptrs.push_back(&r);
  return pad_sequences(std::span<const std::vector<int>* const>(ptrs));
}

// Records of several tables flattened into `slots` rows per table.
struct TableBatch {
  int slots = 0;
  std::vector<int> counts;
  std::vector<int> fields;     // tables * slots, PAD-filled
  std::vector<int> positions;  // 1-based
  std::vector<int> values;

  [[nodiscard]] int tables() const { return static_cast<int>(counts.size()); }
};

inline TableBatch batch_tables(std::span<const EncodedTable* const> tables) {
  TableBatch tb;
  for (const auto* t : tables) {
    if (t->size() == 0) throw Error("cannot batch an empty table");
    tb.slots = std::max(tb.slots, t->size());
  }
  const std::size_t n = tables.size() * static_cast<std::size_t>(tb.slots);
  tb.fields.assign(n, Vocabulary::kPad);
  tb.positions.assign(n, 1);
  tb.values.assign(n, Vocabulary::kPad);
  for (std::size_t b = 0; b < tables.size(); ++b) {
    const EncodedTable& t = *tables[b];
    tb.counts.push_back(t.size());
    for (int k = 0; k < t.size(); ++k) {
      const std::size_t i = b * static_cast<std::size_t>(tb.slots) + static_cast<std::size_t>(k);
      tb.fields[i] = t.fields[static_cast<std::size_t>(k)];
      tb.positions[i] = t.positions[static_cast<std::size_t>(k)];
      tb.values[i] = t.values[static_cast<std::size_t>(k)];
    }
  }
  return tb;
}

struct PairedBatch {
  std::vector<std::size_t> indices;
  TokenMatrix sentences;
  TokenMatrix templates;
  TableBatch tables;

  [[nodiscard]] int size() const { return sentences.batch; }
};

struct RawBatch {
  std::vector<std::size_t> indices;
  TokenMatrix sentences;

  [[nodiscard]] int size() const { return sentences.batch; }
};

inline PairedBatch make_paired_batch(std::span<const PairedExample> examples, std::vector<std::size_t> indices) {
  std::vector<const std::vector<int>*> sent, tmpl;
  std::vector<const EncodedTable*> tables;
  for (std::size_t i : indices) {
    sent.push_back(&examples[i].sentence);
    tmpl.push_back(&examples[i].tmpl);
    tables.push_back(&examples[i].table);
  }
  PairedBatch b;
  b.sentences = pad_sequences(std::span<const std::vector<int>* const>(sent));
  b.templates = pad_sequences(std::span<const std::vector<int>* const>(tmpl));
  b.tables = batch_tables(std::span<const EncodedTable* const>(tables));
  b.indices = std::move(indices);
  return b;
}

inline RawBatch make_raw_batch(std::span<const RawExample> examples, std::vector<std::size_t> indices) {
  std::vector<const std::vector<int>*> sent;
  for (std::size_t i : indices) sent.push_back(&examples[i].sentence);
  RawBatch b;
  b.sentences = pad_sequences(std::span<const std::vector<int>* const>(sent));
  b.indices = std::move(indices);
  return b;
}

// Seeded shuffle of 0..n-1 cut into consecutive groups of batch_size.
inline std::vector<std::vector<std::size_t>> shuffled_groups(std::size_t n, int batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(batch_size)) {
    groups.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                        order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + static_cast<std::size_t>(batch_size))));
  }
  return groups;
}

inline std::vector<PairedBatch> make_batches(std::span<const PairedExample> examples, int batch_size,
                                             std::uint64_t seed) {
  std::vector<PairedBatch> out;
  for (auto& g : shuffled_groups(examples.size(), batch_size, seed)) out.push_back(make_paired_batch(examples, g));
  return out;
}

inline std::vector<RawBatch> make_batches(std::span<const RawExample> examples, int batch_size, std::uint64_t seed) {
  std::vector<RawBatch> out;
  for (auto& g : shuffled_groups(examples.size(), batch_size, seed)) out.push_back(make_raw_batch(examples, g));
  return out;
}

}  // namespace vtm
