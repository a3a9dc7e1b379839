#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pee/corpus.hpp"
#include "pee/error.hpp"

using namespace pee::corpus;

namespace {
const std::filesystem::path kData = PEE_TEST_DATA_DIR;
}

TEST_CASE("tokenize") {
  CHECK(tokenize("I like music.") == TokenList{"i", "like", "music", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Wanna come over?") == TokenList{"wanna", "come", "over", "?"});
  CHECK(tokenize("  don't\tstop  ") == TokenList{"don", "'", "t", "stop"});
}

TEST_CASE("tokenize is idempotent under detokenize") {
  std::mt19937_64 rng(4);
  const std::string alphabet = "abcXYZ .,!?'-\t";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng() % 30);
    for (int i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
    const TokenList once = tokenize(text);
    CHECK(tokenize(detokenize(once)) == once);
  }
}

TEST_CASE("stop-words") {
  CHECK(is_stopword("the"));
  CHECK(is_stopword("?!"));
  CHECK_FALSE(is_stopword("vegan"));
  CHECK(stopwords().size() >= 140);
  CHECK(content_tokens({"i", "am", "a", "vegan", "."}) == std::unordered_set<std::string>{"vegan"});
}

TEST_CASE("load_personachat: vegan example conversation") {
  const auto convs = load_personachat(kData / "vegan_dialogue.txt");
  REQUIRE(convs.size() == 1);
  CHECK(convs[0].persona.size() == 4);
  const auto ex = convs[0].examples();
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].history.size() == 1);
  CHECK(ex[1].history.size() == 3);
  CHECK(ex[2].history.size() == 5);
  CHECK(ex[2].history[0] == tokenize("Wanna come over and watch the godfather?"));
  CHECK(ex[2].history[4] == tokenize("I promise there are no animal products in my candy and soda."));
  CHECK(ex[2].response == tokenize("Most candy has some form of dairy. As a vegan I can not have that."));
  for (const auto& e : ex) CHECK(e.history.size() == e.turn);
}

TEST_CASE("parse_personachat: conversations and errors") {
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK(parse_personachat(in).empty());
  }
  SUBCASE("two conversations, silence and partner persona lines") {
    std::istringstream in(
        "1 your persona: i love cats.\n"
        "2 partner's persona: i hate cats.\n"
        "3 __SILENCE__\thi there !\n"
        "4 hello .\tdo you like cats ?\n"
        "1 your persona: i run .\n"
        "2 hey\tyo\n");
    const auto convs = parse_personachat(in);
    REQUIRE(convs.size() == 2);
    CHECK(convs[0].utterances.size() == 3);
    const auto ex0 = convs[0].examples();
    REQUIRE(ex0.size() == 1);
    CHECK(ex0[0].history.size() == 2);
    CHECK(convs[1].id == 1);
    CHECK(expand_examples(convs).size() == 2);
  }
  SUBCASE("malformed line number") {
    std::istringstream in("1 your persona: a.\nx2 hi\tthere\n");
    try {
      parse_personachat(in);
      FAIL("expected ParseError");
    } catch (const pee::ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("missing tab") {
    std::istringstream in("1 your persona: a.\n2 hi there\n");
    try {
      parse_personachat(in);
      FAIL("expected ParseError");
    } catch (const pee::ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}

TEST_CASE("build_vocab") {
  SUBCASE("frequency order") {
    const std::vector<TokenList> corpus{{"a", "a", "a", "b", "b", "c"}, {"a", "a", "b"}};
    const Vocabulary v = build_vocab(corpus, 2 + Vocabulary::kNumReserved, false);
    CHECK(v.size() == 6);
    CHECK(v.contains("a"));
    CHECK(v.contains("b"));
    CHECK_FALSE(v.contains("c"));
    CHECK(v.token(0) == "<pad>");
    CHECK(v.id("zzz") == Vocabulary::kUnk);
  }
  SUBCASE("stop-word removal") {
    TokenList doc(10, "the");
    doc.insert(doc.end(), {"vegan", "vegan"});
    const Vocabulary v = build_vocab({doc}, 10, true);
    CHECK(v.content_size() == 1);
    CHECK(v.contains("vegan"));
  }
  SUBCASE("ties broken lexicographically") {
    const Vocabulary v = build_vocab({{"b", "b", "a", "a"}}, 1 + Vocabulary::kNumReserved, false);
    CHECK(v.contains("a"));
    CHECK_FALSE(v.contains("b"));
  }
  SUBCASE("limit must exceed reserved") {
    CHECK_THROWS_AS(build_vocab({}, 4, false), pee::ContractError);
  }
  SUBCASE("encode/decode") {
    const Vocabulary v = Vocabulary::from_tokens({"hi", "there"});
    CHECK(v.encode({"hi", "you"}) == std::vector<std::size_t>{4, Vocabulary::kUnk});
    CHECK(v.decode({Vocabulary::kSos, 4, 5, Vocabulary::kEos, 4}) == TokenList{"hi", "there"});
  }
}

TEST_CASE("compute_tfidf") {
  const Vocabulary v = Vocabulary::from_tokens({"x", "y"});
  SUBCASE("word in every document is clamped to zero") {
    const auto docs = compute_tfidf({{"x"}, {"x"}}, v);
    CHECK(docs[0].weight(0) == 0.0);
    CHECK(docs[1].empty());
  }
  SUBCASE("hand arithmetic") {
    const auto two = compute_tfidf({{"y", "y"}, {"x"}}, v);
    CHECK(two[0].weight(1) == 0.0);  // 2 * log(2 / 2)
    const auto three = compute_tfidf({{"y", "y"}, {"x"}, {"x"}}, v);
    CHECK(three[0].weight(1) == doctest::Approx(2.0 * std::log(1.5)).epsilon(1e-15));
    CHECK(three[0].weight(1) == doctest::Approx(0.811).epsilon(1e-3));
  }
  SUBCASE("empty document") {
    const auto docs = compute_tfidf({{}, {"x"}, {"y"}}, v);
    CHECK(docs[0].empty());
  }
  SUBCASE("permutation equivariance") {
    const Vocabulary big = Vocabulary::from_tokens({"a", "b", "c", "d"});
    std::vector<TokenList> docs{{"a", "b"}, {"b", "c", "c"}, {"d"}, {"a", "a", "d"}, {"c"}};
    const auto base = compute_tfidf(docs, big);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<TokenList> shuffled;
    for (std::size_t i : perm) shuffled.push_back(docs[i]);
    const auto moved = compute_tfidf(shuffled, big);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(moved[i].entries == base[perm[i]].entries);
  }
}

TEST_CASE("load_embeddings") {
  const Vocabulary v = Vocabulary::from_tokens({"cat", "dog"});
  SUBCASE("restricted to vocab") {
    std::istringstream in("cat 0.1 0.2 0.3\nbird 1 2 3\ndog -1 0 1e-2\n");
    const auto t = parse_embeddings(in, v);
    CHECK(t.dim == 3);
    CHECK(t.size() == 2);
    CHECK(t.find("bird") == nullptr);
    CHECK((*t.find("dog"))[2] == doctest::Approx(0.01));
  }
  SUBCASE("wrong arity names the line") {
    std::istringstream in("cat 0.1 0.2 0.3\ndog 1 2\n");
    try {
      parse_embeddings(in, v);
      FAIL("expected ParseError");
    } catch (const pee::ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("file") {
    const auto t = load_embeddings(kData / "tiny_embeddings.txt", v);
    CHECK(t.size() == 2);
    CHECK(t.dim == 3);
  }
}
