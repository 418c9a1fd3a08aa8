#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "latnet/tokenizer.hpp"
#include "support/lattice_testkit.hpp"

using namespace latnet;
using namespace latnet::testkit;

TEST_CASE("segment splits by greedy longest prefix") {
  Tokenizer tok({"Mil", "wau", "kee", "Milwau"});
  CHECK(tok.segment("Milwaukee") ==
        std::vector<std::string>{"Milwau", "kee"});
  Tokenizer tok2({"Mil", "wau", "kee"});
  CHECK(tok2.segment("Milwaukee") ==
        std::vector<std::string>{"Mil", "wau", "kee"});
}

TEST_CASE("segment of an in-vocabulary word is the identity") {
  Tokenizer tok({"far", "fa", "f", "a", "r"});
  CHECK(tok.segment("far") == std::vector<std::string>{"far"});
}

TEST_CASE("segment falls back to unk one codepoint at a time") {
  Tokenizer tok({"a"});
  CHECK(tok.segment("ab") == std::vector<std::string>{"a", "<unk>"});
  CHECK(tok.segment("ba") == std::vector<std::string>{"<unk>", "a"});
  // Multi-byte codepoint consumed whole.
  CHECK(tok.segment("\xc3\xa9" "a") == std::vector<std::string>{"<unk>", "a"});
  CHECK_THROWS_AS(tok.segment(""), Error);
}

TEST_CASE("specials are never split") {
  Tokenizer tok({"s", "<", ">", "/"});
  CHECK(tok.segment(kBosLabel) == std::vector<std::string>{kBosLabel});
  CHECK(tok.segment(kEosLabel) == std::vector<std::string>{kEosLabel});
  CHECK(tok.segment(kUnkLabel) == std::vector<std::string>{kUnkLabel});
}

TEST_CASE("piece ids put specials first") {
  Tokenizer tok({"xy", "z"});
  CHECK(tok.id_of(kBosLabel) == tok.bos_id());
  CHECK(tok.id_of(kEosLabel) == tok.eos_id());
  CHECK(tok.id_of(kUnkLabel) == tok.unk_id());
  CHECK(tok.id_of("xy") == 3);
  CHECK(tok.id_of("z") == 4);
  CHECK(tok.id_of("missing") == tok.unk_id());
  CHECK(tok.size() == 5);
}

TEST_CASE("vocabulary file round trip with comments") {
  std::string path = "test_vocab_roundtrip.txt";
  {
    std::ofstream out(path);
    out << "# comment line\nMil\nwau\nkee\n";
  }
  Tokenizer tok = Tokenizer::from_file(path);
  CHECK(tok.segment("Milwaukee") ==
        std::vector<std::string>{"Mil", "wau", "kee"});
  std::string path2 = "test_vocab_saved.txt";
  tok.save(path2);
  Tokenizer again = Tokenizer::from_file(path2);
  CHECK(again.pieces() == tok.pieces());
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("split_nodes turns a word chain into a subword chain") {
  Tokenizer tok({"Mil", "wau", "kee"});
  Lattice lat = Lattice::chain({"Milwaukee"});
  Lattice split = split_nodes(lat, tok);
  REQUIRE(validate(split).empty());
  CHECK(split.nodes.size() == 5);
  CHECK(linearize(split) ==
        std::vector<std::string>{"<s>", "Mil", "wau", "kee", "</s>"});
  for (const Edge& e : split.edges) CHECK(e.prob == 1.0);
  // Every piece remembers the word node it came from.
  int from_word = 0;
  for (const Node& n : split.nodes) {
    if (n.word_origin && *n.word_origin == 1) ++from_word;
  }
  CHECK(from_word == 3);
}

TEST_CASE("split_nodes is the identity when every label is in vocab") {
  Tokenizer tok({"far", "for"});
  Lattice lat = diamond();
  Lattice split = split_nodes(lat, tok);
  CHECK(split.nodes.size() == lat.nodes.size());
  CHECK(split.edges.size() == lat.edges.size());
  CHECK(linearize(split) == linearize(lat));
}

TEST_CASE("split_nodes lengthens only the split branch") {
  Tokenizer tok({"far", "Mil", "wau", "kee"});
  Lattice lat = diamond();
  lat.nodes[2].label = "Milwaukee";
  Lattice split = split_nodes(lat, tok);
  REQUIRE(validate(split).empty());
  CHECK(split.nodes.size() == 6);
  auto ldist = longest_path_distance(split);
  CHECK(ldist.at(split.end) == 4);
  // Branch probabilities survive on the first pieces.
  auto alpha = forward_mass(split);
  CHECK(alpha.at(1) == doctest::Approx(0.6));
  CHECK(alpha.at(2) == doctest::Approx(0.4));
  CHECK(alpha.at(split.end) == doctest::Approx(1.0));
}

namespace {

// Project a subword path back to word-origin ids, deduplicating consecutive
// pieces of the same word.
std::vector<NodeId> project(const std::vector<NodeId>& path,
                            const Lattice& split) {
  std::vector<NodeId> words;
  for (NodeId id : path) {
    const Node& n = split.node_at(id);
    NodeId word = n.word_origin ? *n.word_origin : id;
    if (words.empty() || words.back() != word) words.push_back(word);
  }
  return words;
}

}  // namespace

TEST_CASE("split_nodes preserves the path set and probabilities") {
  Tokenizer tok({"fa", "r", "fo", "to", "fro", "m", "yor", "k", "ne", "w",
                 "cit", "y", "sho", "fare", "fly"});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    Lattice lat = random_lattice(rng);
    Lattice split = split_nodes(lat, tok);
    REQUIRE(validate(split).empty());

    std::map<std::vector<NodeId>, double> before;
    for (const auto& p : all_full_paths(lat)) before[p.nodes] += p.prob;
    std::map<std::vector<NodeId>, double> after;
    for (const auto& p : all_full_paths(split)) {
      after[project(p.nodes, split)] += p.prob;
    }
    REQUIRE(after.size() == before.size());
    for (const auto& [path, prob] : before) {
      REQUIRE(after.count(path) == 1);
      CHECK(std::abs(after.at(path) - prob) < 1e-12);
    }
    CHECK(std::abs(forward_mass(split).at(split.end) - 1.0) < 1e-9);

    // Idempotence: all labels are single pieces already.
    Lattice twice = split_nodes(split, tok);
    CHECK(twice.nodes.size() == split.nodes.size());
    CHECK(twice.edges.size() == split.edges.size());
    CHECK(linearize(twice) == linearize(split));
  }
}
