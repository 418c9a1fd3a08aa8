#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "latnet/lattice.hpp"

namespace latnet {

// Template grammar for a small flight-information domain. Template words
// starting with '$' are placeholders filled from the filler table; each
// template carries the intent labels of the utterances it generates, and
// its slot labels are the placeholder names it uses.
struct Grammar {
  struct Template {
    std::vector<std::string> words;
    std::vector<std::string> intents;
  };

  std::vector<std::string> intent_names;
  // groups[g] lists indices into templates; corpus generation round-robins
  // over groups so intents stay balanced.
  std::vector<std::vector<int>> groups;
  std::vector<Template> templates;
  std::map<std::string, std::vector<std::vector<std::string>>> fillers;

  static Grammar flight_domain();

  std::vector<std::string> slot_names() const;
  // Every concrete word the grammar can emit (template literals + fillers).
  std::vector<std::string> word_inventory() const;
};

// Word-level corruption model producing confusion-slot lattices. With
// probability p_sub a word's slot holds the true word plus k-1 distractors
// (near neighbors and single-edit strings) weighted by a temperature
// softmax over noisy scores; the true word's score gets true_score_bias, so
// it usually but not always wins. p_del adds skip edges around a word,
// p_ins adds optional filler-word detours.
struct NoiseModel {
  double p_sub = 0.0;
  int k = 3;
  double temperature = 0.8;
  double true_score_bias = 1.0;
  // Score bonus for distractors that are real vocabulary words, mimicking a
  // recognizer language model that prefers words it knows over near-words.
  double vocab_score_bonus = 0.0;
  double p_del = 0.0;
  double p_ins = 0.0;
  std::uint64_t seed = 0;

  void check() const;  // throws Error on out-of-range rates
  // Named presets: "clean" and the three acoustic conditions "cond1",
  // "cond2", "cond3" (calibrated 1-best WER near 15.5, 26.3 and 38.7).
  static NoiseModel preset(const std::string& name);
};

struct Example {
  Lattice lattice;
  std::vector<std::string> reference;
  std::vector<std::string> intents;
  std::vector<std::string> slots;
};

struct LabelInventory {
  std::vector<std::string> intents;
  std::vector<std::string> slots;

  static LabelInventory from_grammar(const Grammar& grammar);
  static LabelInventory load(const std::string& path);
  void save(const std::string& path) const;

  int intent_id(const std::string& name) const;  // throws on unknown
  int slot_id(const std::string& name) const;
};

// Deterministic clean corpus: chain lattices, balanced intents (round-robin
// over intent groups), per-example rng derived from (seed, index).
std::vector<Example> generate_corpus(const Grammar& grammar, int size,
                                     std::uint64_t seed);

// Corruption of one example; salt separates the random streams of examples
// corrupted under the same NoiseModel.
Example corrupt(const Example& example, const Grammar& grammar,
                const NoiseModel& noise, std::uint64_t salt = 0);

std::vector<Example> corrupt_corpus(const std::vector<Example>& corpus,
                                    const Grammar& grammar,
                                    const NoiseModel& noise);

// Levenshtein(hypothesis, reference) / |reference|.
double wer(const std::vector<std::string>& hypothesis,
           const std::vector<std::string>& reference);

// Viterbi labels without the boundary markers.
std::vector<std::string> one_best_words(const Lattice& lattice);

// Corpus-level 1-best WER: total edits over total reference length.
double corpus_one_best_wer(const std::vector<Example>& examples);

struct EvalScores {
  double micro_f1 = 0.0;
  double exact_match = 0.0;
};

// Micro-averaged F1 over label decisions plus exact-set-match accuracy.
EvalScores evaluate(const std::vector<std::set<int>>& predictions,
                    const std::vector<std::set<int>>& gold);

// Subword unit list for the corpus: every character of every word plus the
// top_n most frequent substrings of length 2..max_len (count desc, longer
// first, then lexicographic).
std::vector<std::string> build_subword_vocab(
    const std::vector<std::string>& words, int top_n = 500, int max_len = 6);

// All node labels (specials excluded) plus reference words of a corpus;
// input for build_subword_vocab.
std::vector<std::string> corpus_words(const std::vector<Example>& examples);

// JSON Lines: {"lattice":{...},"reference":[..],"intents":[..],"slots":[..]}
void save_examples(const std::vector<Example>& examples,
                   const std::string& path);
std::vector<Example> load_examples(const std::string& path);

}  // namespace latnet
