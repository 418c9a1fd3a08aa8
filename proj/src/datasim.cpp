#include "latnet/datasim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace latnet {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

template <typename Seq>
int levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace

Grammar Grammar::flight_domain() {
  Grammar g;
  auto add_group = [&g](const std::string& intent,
                        const std::vector<std::pair<std::string,
                                                    std::vector<std::string>>>&
                            templates) {
    g.intent_names.push_back(intent);
    std::vector<int> group;
    for (const auto& [text, intents] : templates) {
      Template t;
      t.words = split_words(text);
      t.intents = intents.empty() ? std::vector<std::string>{intent} : intents;
      group.push_back(static_cast<int>(g.templates.size()));
      g.templates.push_back(std::move(t));
    }
    g.groups.push_back(std::move(group));
  };

  // Every intent shares the same request frames and differs only in its head
  // noun, so the frame words carry no intent signal.  The head nouns form
  // confusion clusters within edit distance 2 of each other (fares, rates,
  // gates, dates / times, miles / meals, seats): under heavy noise they land
  // in each other's candidate pools and the 1-best argmax can surface a rival
  // intent's noun verbatim, while the true noun survives as a lattice node.
  const std::vector<std::pair<std::string, std::string>> topics = {
      {"find_flight", "flights"}, {"fare", "fares"},
      {"ground_fare", "rates"},   {"airport_info", "gates"},
      {"flight_date", "dates"},   {"flight_time", "times"},
      {"distance", "miles"},      {"meal", "meals"},
      {"capacity", "seats"},      {"aircraft_type", "planes"}};
  const std::vector<std::string> frames = {
      "show me KW from $from_city to $to_city",
      "KW from $from_city to $to_city please",
      "what are the KW from $from_city to $to_city",
      "list all KW from $from_city to $to_city on $date",
      "i need KW for the $airline flight from $from_city to $to_city",
      "do you have KW from $from_city to $to_city on a $aircraft",
      "give me the KW for $from_city to $to_city"};
  for (const auto& [intent, keyword] : topics) {
    std::vector<std::pair<std::string, std::vector<std::string>>> templates;
    for (const std::string& frame : frames) {
      std::string text = frame;
      text.replace(text.find("KW"), 2, keyword);
      templates.push_back({text, {}});
    }
    if (intent == "find_flight") {
      templates.push_back(
          {"show me flights and fares from $from_city to $to_city",
           {"find_flight", "fare"}});
    }
    if (intent == "distance") {
      templates.push_back({"how far is it from $from_city to $to_city", {}});
    }
    add_group(intent, templates);
  }

  auto cities = std::vector<std::vector<std::string>>{
      {"boston"},        {"denver"},       {"atlanta"},
      {"dallas"},        {"baltimore"},    {"philadelphia"},
      {"pittsburgh"},    {"oakland"},      {"milwaukee"},
      {"san", "francisco"}, {"new", "york"}, {"salt", "lake", "city"},
      {"washington"},    {"charlotte"},    {"memphis"}};
  g.fillers["from_city"] = cities;
  g.fillers["to_city"] = cities;
  g.fillers["date"] = {{"monday"},   {"tuesday"}, {"wednesday"},
                       {"thursday"}, {"friday"},  {"saturday"},
                       {"sunday"},   {"next", "week"}};
  g.fillers["airline"] = {{"delta"},       {"united"},  {"american"},
                          {"continental"}, {"eastern"}, {"us", "air"}};
  g.fillers["aircraft"] = {{"boeing", "seven", "thirty", "seven"},
                           {"boeing", "seven", "sixty", "seven"},
                           {"airbus"},
                           {"turboprop"},
                           {"dc", "ten"}};
  return g;
}

std::vector<std::string> Grammar::slot_names() const {
  std::vector<std::string> names;
  for (const auto& [name, values] : fillers) names.push_back(name);
  return names;  // std::map iteration is already sorted
}

std::vector<std::string> Grammar::word_inventory() const {
  std::set<std::string> words;
  for (const Template& t : templates) {
    for (const std::string& w : t.words) {
      if (w.empty() || w[0] == '$') continue;
      words.insert(w);
    }
  }
  for (const auto& [name, values] : fillers) {
    for (const auto& value : values) words.insert(value.begin(), value.end());
  }
  return {words.begin(), words.end()};
}

void NoiseModel::check() const {
  if (p_sub < 0.0 || p_sub >= 1.0 || p_del < 0.0 || p_del >= 1.0 ||
      p_ins < 0.0 || p_ins >= 1.0) {
    throw Error("noise rates must be in [0, 1)");
  }
  if (p_sub > 0.0 && k < 2) throw Error("confusion size k must be >= 2");
  if (temperature <= 0.0) throw Error("temperature must be positive");
}

NoiseModel NoiseModel::preset(const std::string& name) {
  NoiseModel n;
  if (name == "clean") {
    n.p_sub = 0.0;
    return n;
  }
  n.k = 4;
  n.vocab_score_bonus = 0.6;
  n.temperature = 2.0;  // weights stay soft; the argmax and WER are unaffected
  if (name == "cond1") {
    n.p_sub = 0.275;
    n.true_score_bias = 0.85;
    return n;
  }
  if (name == "cond2") {
    n.p_sub = 0.3975;
    n.true_score_bias = 0.55;
    return n;
  }
  if (name == "cond3") {
    n.p_sub = 0.5425;
    n.true_score_bias = 0.35;
    return n;
  }
  throw Error("unknown noise preset: " + name);
}

LabelInventory LabelInventory::from_grammar(const Grammar& grammar) {
  LabelInventory inv;
  inv.intents = grammar.intent_names;
  inv.slots = grammar.slot_names();
  return inv;
}

void LabelInventory::save(const std::string& path) const {
  ordered_json j;
  j["intents"] = intents;
  j["slots"] = slots;
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

LabelInventory LabelInventory::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const ordered_json::parse_error& e) {
    throw Error("bad label file " + path + ": " + e.what());
  }
  LabelInventory inv;
  inv.intents = j.at("intents").get<std::vector<std::string>>();
  inv.slots = j.at("slots").get<std::vector<std::string>>();
  return inv;
}

namespace {

int id_in(const std::vector<std::string>& names, const std::string& name,
          const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(std::string("unknown ") + what + ": " + name);
  }
  return static_cast<int>(it - names.begin());
}

}  // namespace

int LabelInventory::intent_id(const std::string& name) const {
  return id_in(intents, name, "intent");
}

int LabelInventory::slot_id(const std::string& name) const {
  return id_in(slots, name, "slot");
}

std::vector<Example> generate_corpus(const Grammar& grammar, int size,
                                     std::uint64_t seed) {
  if (size < 1) throw Error("corpus size must be >= 1");
  if (grammar.groups.empty()) throw Error("grammar has no templates");
  std::vector<Example> out;
  out.reserve(size);
  const int n_groups = static_cast<int>(grammar.groups.size());
  for (int i = 0; i < size; ++i) {
    const auto& group = grammar.groups[i % n_groups];
    const Grammar::Template& tmpl =
        grammar.templates[group[(i / n_groups) % group.size()]];
    std::mt19937_64 rng(mix(seed, i));

    Example e;
    std::vector<std::string> slot_set;
    for (const std::string& w : tmpl.words) {
      if (!w.empty() && w[0] == '$') {
        std::string name = w.substr(1);
        const auto& values = grammar.fillers.at(name);
        std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
        const auto& value = values[pick(rng)];
        e.reference.insert(e.reference.end(), value.begin(), value.end());
        if (std::find(slot_set.begin(), slot_set.end(), name) ==
            slot_set.end()) {
          slot_set.push_back(name);
        }
      } else {
        e.reference.push_back(w);
      }
    }
    e.intents = tmpl.intents;
    e.slots = std::move(slot_set);
    e.lattice = Lattice::chain(e.reference);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

// Candidate confusions for a word: vocabulary words within character edit
// distance 2 (nearest first), then synthetic single edits (vowel swaps,
// one-char deletion, adjacent transposition, doubled final letter).
std::vector<std::string> distractor_pool(const std::string& word,
                                         const std::vector<std::string>& vocab) {
  std::vector<std::pair<int, std::string>> near;
  for (const std::string& v : vocab) {
    if (v == word) continue;
    int d = levenshtein(word, v);
    if (d <= 2) near.push_back({d, v});
  }
  std::sort(near.begin(), near.end());

  std::vector<std::string> pool;
  std::unordered_set<std::string> seen{word};
  auto push = [&](const std::string& cand) {
    if (cand.size() >= 2 && seen.insert(cand).second) pool.push_back(cand);
  };
  for (const auto& [d, v] : near) push(v);

  static const std::string vowels = "aeiou";
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (vowels.find(word[i]) == std::string::npos) continue;
    for (char v : vowels) {
      if (v == word[i]) continue;
      std::string cand = word;
      cand[i] = v;
      push(cand);
    }
  }
  if (word.size() > 2) {
    for (std::size_t i = 0; i < word.size(); ++i) {
      push(word.substr(0, i) + word.substr(i + 1));
    }
  }
  for (std::size_t i = 0; i + 1 < word.size(); ++i) {
    std::string cand = word;
    std::swap(cand[i], cand[i + 1]);
    push(cand);
  }
  push(word + word.back());
  return pool;
}

struct SlotCandidate {
  std::string word;
  double weight;
};

}  // namespace

Example corrupt(const Example& example, const Grammar& grammar,
                const NoiseModel& noise, std::uint64_t salt) {
  noise.check();
  if (example.reference.empty()) throw Error("cannot corrupt an empty example");
  std::mt19937_64 rng(mix(noise.seed, salt));
  // Separate stream so reordering does not disturb score or structure draws.
  std::mt19937_64 order_rng(mix(mix(noise.seed, salt), 0x0D0E));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> score(0.0, 1.0);
  const std::vector<std::string> vocab = grammar.word_inventory();
  const std::unordered_set<std::string> vocab_set(vocab.begin(), vocab.end());
  const int T = static_cast<int>(example.reference.size());

  // Confusion slots.
  std::vector<std::vector<SlotCandidate>> slots(T);
  for (int t = 0; t < T; ++t) {
    const std::string& truth = example.reference[t];
    if (coin(rng) >= noise.p_sub) {
      slots[t] = {{truth, 1.0}};
      continue;
    }
    std::vector<std::string> pool = distractor_pool(truth, vocab);
    std::vector<SlotCandidate> slot{{truth, 0.0}};
    std::vector<double> scores{noise.true_score_bias + score(rng)};
    const int want = std::min<int>(noise.k - 1, static_cast<int>(pool.size()));
    // Draw distractors from the front of the pool (nearest confusions).
    const int window = std::min<int>(pool.size(), 8);
    std::vector<int> picks;
    while (static_cast<int>(picks.size()) < want) {
      std::uniform_int_distribution<int> pick(0, window - 1);
      int idx = pick(rng);
      if (std::find(picks.begin(), picks.end(), idx) == picks.end()) {
        picks.push_back(idx);
      }
    }
    for (int idx : picks) {
      double s = score(rng);
      if (vocab_set.count(pool[idx])) s += noise.vocab_score_bonus;
      slot.push_back({pool[idx], 0.0});
      scores.push_back(s);
    }
    double mx = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double& s : scores) z += (s = std::exp((s - mx) / noise.temperature));
    for (std::size_t c = 0; c < slot.size(); ++c) slot[c].weight = scores[c] / z;
    // Node order within a slot must not identify the true word.
    std::shuffle(slot.begin(), slot.end(), order_rng);
    slots[t] = std::move(slot);
  }

  // Optional deletions (skip edges) and insertions (filler detours).
  std::vector<bool> deleted(T, false);
  if (noise.p_del > 0.0 && T >= 2) {
    for (int t = 0; t < T; ++t) {
      if (t > 0 && deleted[t - 1]) continue;  // no adjacent skips
      deleted[t] = coin(rng) < noise.p_del;
    }
  }
  static const std::vector<std::string> kFillers{"uh", "um", "ah"};
  std::vector<int> inserted(T, -1);  // filler index after slot t
  if (noise.p_ins > 0.0) {
    for (int t = 0; t < T; ++t) {
      if (coin(rng) < noise.p_ins) {
        std::uniform_int_distribution<int> pick(0, (int)kFillers.size() - 1);
        inserted[t] = pick(rng);
      }
    }
  }
  const double kSkipMass = 0.35;
  const double kDetourMass = 0.3;

  // Assemble the lattice: <s>, slot candidates in order, fillers, </s>.
  Lattice lat;
  lat.start = 0;
  lat.nodes.push_back({0, kBosLabel, std::nullopt});
  NodeId next = 1;
  std::vector<std::vector<std::pair<NodeId, double>>> layers(T);
  for (int t = 0; t < T; ++t) {
    for (const SlotCandidate& c : slots[t]) {
      lat.nodes.push_back({next, c.word, std::nullopt});
      layers[t].push_back({next, c.weight});
      ++next;
    }
  }
  const NodeId end_id = next++;
  lat.end = end_id;

  // Per-source-layer target distribution, deletions folded in.
  auto layer_targets = [&](int t) -> std::vector<std::pair<NodeId, double>> {
    if (t >= T) return {{end_id, 1.0}};
    return layers[t];
  };
  std::vector<std::vector<std::pair<NodeId, double>>> targets_after(T + 1);
  for (int s = 0; s <= T; ++s) {
    // Source layer s-1 (s == 0 means the start node) points at layer s.
    if (s < T && deleted[s]) {
      std::vector<std::pair<NodeId, double>> mixed;
      for (auto [id, w] : layer_targets(s)) {
        mixed.push_back({id, (1.0 - kSkipMass) * w});
      }
      for (auto [id, w] : layer_targets(s + 1)) {
        mixed.push_back({id, kSkipMass * w});
      }
      targets_after[s] = std::move(mixed);
    } else {
      targets_after[s] = layer_targets(s);
    }
  }

  for (int s = 0; s <= T; ++s) {
    std::vector<NodeId> sources;
    if (s == 0) {
      sources.push_back(lat.start);
    } else {
      for (auto [id, w] : layers[s - 1]) sources.push_back(id);
    }
    const auto& targets = targets_after[s];
    double factor = 1.0;
    if (s >= 1 && inserted[s - 1] >= 0) {
      // Detour filler between layer s-1 and its targets.
      lat.nodes.push_back({next, kFillers[inserted[s - 1]], std::nullopt});
      for (NodeId u : sources) lat.edges.push_back({u, next, kDetourMass});
      for (auto [id, w] : targets) lat.edges.push_back({next, id, w});
      ++next;
      factor = 1.0 - kDetourMass;
    }
    for (NodeId u : sources) {
      for (auto [id, w] : targets) lat.edges.push_back({u, id, factor * w});
    }
  }
  lat.nodes.push_back({end_id, kEosLabel, std::nullopt});

  std::vector<std::string> violations = validate(lat);
  if (!violations.empty()) {
    throw Error("corrupt produced an invalid lattice: " + violations.front());
  }

  Example out = example;
  out.lattice = std::move(lat);
  return out;
}

std::vector<Example> corrupt_corpus(const std::vector<Example>& corpus,
                                    const Grammar& grammar,
                                    const NoiseModel& noise) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    out.push_back(corrupt(corpus[i], grammar, noise, i));
  }
  return out;
}

double wer(const std::vector<std::string>& hypothesis,
           const std::vector<std::string>& reference) {
  if (reference.empty()) throw Error("wer needs a non-empty reference");
  return static_cast<double>(levenshtein(hypothesis, reference)) /
         static_cast<double>(reference.size());
}

std::vector<std::string> one_best_words(const Lattice& lattice) {
  std::vector<std::string> labels = one_best_path(lattice);
  return {labels.begin() + 1, labels.end() - 1};
}

double corpus_one_best_wer(const std::vector<Example>& examples) {
  if (examples.empty()) throw Error("empty corpus");
  long edits = 0, length = 0;
  for (const Example& e : examples) {
    edits += levenshtein(one_best_words(e.lattice), e.reference);
    length += static_cast<long>(e.reference.size());
  }
  return static_cast<double>(edits) / static_cast<double>(length);
}

EvalScores evaluate(const std::vector<std::set<int>>& predictions,
                    const std::vector<std::set<int>>& gold) {
  if (predictions.size() != gold.size()) {
    throw Error("prediction/gold length mismatch");
  }
  if (predictions.empty()) throw Error("nothing to evaluate");
  long tp = 0, fp = 0, fn = 0, exact = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& g = gold[i];
    for (int label : p) (g.count(label) ? tp : fp) += 1;
    for (int label : g) fn += p.count(label) ? 0 : 1;
    exact += p == g ? 1 : 0;
  }
  EvalScores scores;
  long denom = 2 * tp + fp + fn;
  scores.micro_f1 = denom == 0 ? 1.0 : 2.0 * tp / static_cast<double>(denom);
  scores.exact_match = static_cast<double>(exact) / predictions.size();
  return scores;
}

std::vector<std::string> corpus_words(const std::vector<Example>& examples) {
  std::vector<std::string> words;
  for (const Example& e : examples) {
    words.insert(words.end(), e.reference.begin(), e.reference.end());
    for (const Node& n : e.lattice.nodes) {
      if (n.label == kBosLabel || n.label == kEosLabel) continue;
      words.push_back(n.label);
    }
  }
  return words;
}

std::vector<std::string> build_subword_vocab(
    const std::vector<std::string>& words, int top_n, int max_len) {
  std::set<std::string> chars;
  std::unordered_map<std::string, long> counts;
  for (const std::string& w : words) {
    for (char ch : w) chars.insert(std::string(1, ch));
    const int n = static_cast<int>(w.size());
    for (int len = 2; len <= max_len; ++len) {
      for (int start = 0; start + len <= n; ++start) {
        counts[w.substr(start, len)] += 1;
      }
    }
  }

  struct Ranked {
    long count;
    std::string unit;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(counts.size());
  for (const auto& [unit, count] : counts) ranked.push_back({count, unit});
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.unit.size() != b.unit.size()) return a.unit.size() > b.unit.size();
    return a.unit < b.unit;
  });

  std::vector<std::string> units(chars.begin(), chars.end());
  const int keep = std::min<int>(top_n, static_cast<int>(ranked.size()));
  for (int i = 0; i < keep; ++i) units.push_back(ranked[i].unit);
  return units;
}

void save_examples(const std::vector<Example>& examples,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const Example& e : examples) {
    ordered_json j;
    j["lattice"] = ordered_json::parse(lattice_to_json(e.lattice));
    j["reference"] = e.reference;
    j["intents"] = e.intents;
    j["slots"] = e.slots;
    out << j.dump() << "\n";
  }
}

std::vector<Example> load_examples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<Example> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw ParseError("bad dataset line: " + std::string(e.what()), line_no,
                       1);
    }
    Example e;
    e.lattice = lattice_from_json(j.at("lattice").dump());
    e.reference = j.at("reference").get<std::vector<std::string>>();
    e.intents = j.at("intents").get<std::vector<std::string>>();
    e.slots = j.at("slots").get<std::vector<std::string>>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace latnet
