#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "hanet/errors.hpp"
#include "hanet/rng.hpp"

namespace hanet {

// ---------------------------------------------------------------------------
// Tokenization. Rules are deliberately small and frozen:
//   * sentences split on a run of . ! ? followed by whitespace or end of text
//   * tokens are whitespace-separated, lowercased, with leading/trailing
//     punctuation stripped ("service!" -> "service", "a.b" stays "a.b")
//   * empty tokens and empty sentences are dropped
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

inline std::string clean_token(const std::string& raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out;
  out.reserve(e - b);
  for (std::size_t i = b; i < e; ++i)
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[i]))));
  return out;
}

inline std::vector<std::string> tokenize_sentence(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string raw;
  while (in >> raw) {
    std::string tok = clean_token(raw);
    if (!tok.empty()) tokens.push_back(std::move(tok));
  }
  return tokens;
}

}  // namespace detail

inline std::vector<std::vector<std::string>> split_and_tokenize(
    const std::string& text) {
  if (text.empty()) throw DegenerateInputError("split_and_tokenize: empty text");
  std::vector<std::vector<std::string>> sentences;
  std::string current;
  auto flush = [&] {
    auto tokens = detail::tokenize_sentence(current);
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (detail::is_sentence_end(c)) {
      std::size_t j = i;
      while (j + 1 < text.size() && detail::is_sentence_end(text[j + 1])) ++j;
      const bool at_boundary =
          j + 1 >= text.size() ||
          std::isspace(static_cast<unsigned char>(text[j + 1]));
      if (at_boundary) {
        flush();
        i = j;
        continue;
      }
    }
    current.push_back(c);
  }
  flush();
  if (sentences.empty())
    throw DegenerateInputError("split_and_tokenize: no tokens survive");
  return sentences;
}

// ---------------------------------------------------------------------------
// Vocabulary: frequency-filtered, deterministic ids (descending count, ties
// broken lexicographically). Ids 0 and 1 are reserved.
// ---------------------------------------------------------------------------

struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  std::vector<std::string> id_to_token;  // index == id
  std::vector<long> counts;              // aligned with id_to_token
  std::unordered_map<std::string, int> token_to_id;
  int min_count = 5;

  int size() const { return static_cast<int>(id_to_token.size()); }

  int id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }
};

// corpus_tokens: documents -> sentences -> tokens. Tokens occurring fewer
// than min_count times map to UNK.
inline Vocab build_vocab(
    const std::vector<std::vector<std::vector<std::string>>>& corpus_tokens,
    int min_count = 5) {
  std::map<std::string, long> freq;  // ordered map keeps ties deterministic
  for (const auto& doc : corpus_tokens)
    for (const auto& sent : doc)
      for (const auto& tok : sent) ++freq[tok];

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.min_count = min_count;
  v.id_to_token = {"<pad>", "<unk>"};
  v.counts = {0, 0};
  for (auto& [tok, n] : kept) {
    v.token_to_id[tok] = v.size();
    v.id_to_token.push_back(tok);
    v.counts.push_back(n);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Documents and batches
// ---------------------------------------------------------------------------

struct Document {
  std::vector<std::vector<int>> sentences;  // token ids, ragged
  int label = -1;

  int sentence_count() const { return static_cast<int>(sentences.size()); }
};

inline Document numericalize(const std::vector<std::vector<std::string>>& sents,
                             const Vocab& vocab) {
  Document doc;
  for (const auto& s : sents) {
    std::vector<int> ids;
    ids.reserve(s.size());
    for (const auto& tok : s) ids.push_back(vocab.id(tok));
    doc.sentences.push_back(std::move(ids));
  }
  return doc;
}

// One document as the encoder consumes it: token grid plus binary masks.
// Mask entry 1 marks a real token/sentence; everything else is PAD.
struct DocView {
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<int>> word_mask;
  std::vector<int> sent_mask;
  int label = -1;

  int n_sentences() const { return static_cast<int>(tokens.size()); }
};

inline DocView make_view(const Document& doc) {
  DocView v;
  v.label = doc.label;
  for (const auto& s : doc.sentences) {
    v.tokens.push_back(s);
    v.word_mask.emplace_back(s.size(), 1);
    v.sent_mask.push_back(1);
  }
  return v;
}

// Pads a document to n_sent sentences of n_tok tokens each (PAD id 0,
// mask 0 on padding).
inline DocView make_padded_view(const Document& doc, int n_sent, int n_tok) {
  DocView v;
  v.label = doc.label;
  for (int i = 0; i < n_sent; ++i) {
    const bool real = i < doc.sentence_count();
    const auto* s = real ? &doc.sentences[i] : nullptr;
    std::vector<int> toks(n_tok, Vocab::kPad);
    std::vector<int> mask(n_tok, 0);
    if (real) {
      for (std::size_t j = 0; j < s->size(); ++j) {
        toks[j] = (*s)[j];
        mask[j] = 1;
      }
    }
    v.tokens.push_back(std::move(toks));
    v.word_mask.push_back(std::move(mask));
    v.sent_mask.push_back(real ? 1 : 0);
  }
  return v;
}

struct Batch {
  std::vector<DocView> docs;
};

// Bucketing: sort by sentence count, chunk into groups of batch_size, shuffle
// the group order and the docs inside each group, then zero-pad each group to
// its own max sentence/token counts.
inline std::vector<Batch> make_batches(const std::vector<Document>& docs,
                                       int batch_size, SeededRng& rng) {
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be >= 1");
  std::vector<int> order(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return docs[a].sentence_count() < docs[b].sentence_count();
  });

  std::vector<std::vector<int>> groups;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    groups.emplace_back(order.begin() + i, order.begin() + end);
  }
  rng.shuffle(groups);
  for (auto& g : groups) rng.shuffle(g);

  std::vector<Batch> batches;
  for (const auto& g : groups) {
    int max_sent = 0, max_tok = 0;
    for (int di : g) {
      max_sent = std::max(max_sent, docs[di].sentence_count());
      for (const auto& s : docs[di].sentences)
        max_tok = std::max(max_tok, static_cast<int>(s.size()));
    }
    Batch b;
    for (int di : g) b.docs.push_back(make_padded_view(docs[di], max_sent, max_tok));
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// JSON-lines corpus files: one {"label": int, "text": str} object per line.
// ---------------------------------------------------------------------------

struct LabeledText {
  int label = -1;
  std::string text;
};

inline std::vector<LabeledText> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<LabeledText> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("label") || !j.contains("text"))
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": need \"label\" and \"text\"");
    out.push_back({j.at("label").get<int>(), j.at("text").get<std::string>()});
  }
  return out;
}

inline void write_jsonl(const std::string& path,
                        const std::vector<LabeledText>& docs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& d : docs) {
    nlohmann::json j;
    j["label"] = d.label;
    j["text"] = d.text;
    out << j.dump() << "\n";
  }
}

inline void dump_vocab_tsv(const std::string& path, const Vocab& v) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab file: " + path);
  for (int i = 0; i < v.size(); ++i)
    out << v.id_to_token[i] << "\t" << i << "\t" << v.counts[i] << "\n";
}

// Tokenize + numericalize a whole corpus against a vocab.
inline std::vector<Document> numericalize_corpus(
    const std::vector<LabeledText>& raw, const Vocab& vocab) {
  std::vector<Document> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    Document d = numericalize(split_and_tokenize(r.text), vocab);
    d.label = r.label;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic redundancy corpus. Every sentence opens with the same two-token
// distractor; each sentence carries exactly one topic word; the label is the
// number of distinct topic words minus one. Labels are assigned round-robin
// so the distribution is exactly balanced.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int n_docs = 0;
  int n_classes = 0;       // K
  int sentences_min = 1;
  int sentences_max = 0;   // must be >= n_classes
  int n_topics = 8;        // topic inventory size, >= n_classes
  int filler_min = 1;      // noise tokens appended per sentence
  int filler_max = 3;
  int n_fillers = 16;      // filler inventory size
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string> topic_inventory(int n) {
  static const char* kBase[] = {"alpha",  "bravo",   "charlie", "delta",
                                "echo",   "foxtrot", "golf",    "hotel",
                                "india",  "juliet",  "kilo",    "lima",
                                "mike",   "november", "oscar",  "papa"};
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    if (i < static_cast<int>(std::size(kBase))) out.emplace_back(kBase[i]);
    else out.push_back("topic" + std::to_string(i));
  }
  return out;
}

}  // namespace detail

inline std::vector<LabeledText> gen_redundancy_corpus(const GeneratorConfig& cfg) {
  if (cfg.n_classes < 2)
    throw ContractError("gen_redundancy_corpus: need at least 2 classes");
  if (cfg.sentences_max < cfg.n_classes)
    throw ContractError(
        "gen_redundancy_corpus: sentences_max < n_classes is infeasible");
  if (cfg.sentences_min < 1 || cfg.sentences_min > cfg.sentences_max)
    throw ContractError("gen_redundancy_corpus: bad sentence range");
  if (cfg.n_topics < cfg.n_classes)
    throw ContractError("gen_redundancy_corpus: n_topics < n_classes");
  if (cfg.filler_min < 0 || cfg.filler_min > cfg.filler_max)
    throw ContractError("gen_redundancy_corpus: bad filler range");
  if (cfg.n_docs < 0) throw ContractError("gen_redundancy_corpus: n_docs < 0");

  const auto topics = detail::topic_inventory(cfg.n_topics);
  std::vector<std::string> fillers;
  for (int i = 0; i < cfg.n_fillers; ++i)
    fillers.push_back("filler" + std::to_string(i));

  SeededRng rng(cfg.seed);
  std::vector<LabeledText> corpus;
  corpus.reserve(cfg.n_docs);
  for (int doc = 0; doc < cfg.n_docs; ++doc) {
    const int label = doc % cfg.n_classes;
    const int n_distinct = label + 1;
    const int lo = std::max(cfg.sentences_min, n_distinct);
    const int n_sent =
        lo + static_cast<int>(rng.next_below(cfg.sentences_max - lo + 1));

    std::vector<int> topic_ids(topics.size());
    for (std::size_t i = 0; i < topic_ids.size(); ++i)
      topic_ids[i] = static_cast<int>(i);
    rng.shuffle(topic_ids);
    topic_ids.resize(n_distinct);

    std::vector<int> assignment;  // topic per sentence, each chosen topic >= once
    for (int i = 0; i < n_sent; ++i)
      assignment.push_back(i < n_distinct
                               ? topic_ids[i]
                               : topic_ids[rng.next_below(n_distinct)]);
    rng.shuffle(assignment);

    std::string text;
    for (int i = 0; i < n_sent; ++i) {
      if (i) text += " ";
      text += "intro blurb " + topics[assignment[i]];
      const int n_fill = cfg.filler_min + static_cast<int>(rng.next_below(
                                              cfg.filler_max - cfg.filler_min + 1));
      for (int f = 0; f < n_fill; ++f)
        text += " " + fillers[rng.next_below(fillers.size())];
      text += ".";
    }
    corpus.push_back({label, std::move(text)});
  }
  return corpus;
}

// Seeded 90/10-style split; fraction is the tail share (validation).
inline std::pair<std::vector<Document>, std::vector<Document>> split_corpus(
    const std::vector<Document>& docs, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ContractError("split_corpus: fraction must lie in [0, 1)");
  std::vector<int> order(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) order[i] = static_cast<int>(i);
  SeededRng rng = SeededRng::forked(seed, "train-val-split");
  rng.shuffle(order);
  const std::size_t n_val = static_cast<std::size_t>(docs.size() * val_fraction);
  std::pair<std::vector<Document>, std::vector<Document>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < order.size() - n_val) out.first.push_back(docs[order[i]]);
    else out.second.push_back(docs[order[i]]);
  }
  return out;
}

}  // namespace hanet
