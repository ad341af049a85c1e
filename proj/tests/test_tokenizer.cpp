#include "doctest.h"

#include "charfac/base_model.hpp"
#include "charfac/tokenizer.hpp"

using namespace charfac;

namespace {

Tokenizer small_tokenizer() { return Tokenizer(build_vocabulary({"photo", "pho", "of", "anna", "smith"}), 16); }

}  // namespace

TEST_CASE("encode wraps text in start and end tokens") {
    const auto tok = small_tokenizer();
    const auto ids = tok.encode("Photo of Anna");
    REQUIRE(ids.size() == 5);
    CHECK(ids.front() == tok.bos());
    CHECK(ids.back() == tok.eos());
    CHECK(tok.token(ids[1]) == "photo");
    CHECK(tok.token(ids[2]) == "of");
    CHECK(tok.token(ids[3]) == "anna");
}

TEST_CASE("longest prefix wins and the remainder falls back to characters") {
    const auto tok = small_tokenizer();
    const auto ids = tok.encode_word("photos");
    REQUIRE(ids.size() == 2);
    CHECK(tok.token(ids[0]) == "photo");
    CHECK(tok.token(ids[1]) == "s");
    CHECK(tok.encode_word("SMITH").size() == 1);
}

TEST_CASE("reserved tokens are matched verbatim and never produced by words") {
    const auto tok = small_tokenizer();
    const auto ids = tok.encode("of <id1> <id2>, photo");
    REQUIRE(ids.size() == 7);
    CHECK(ids[2] == tok.placeholder_first());
    CHECK(ids[3] == tok.placeholder_second());
    CHECK(tok.token(ids[4]) == ",");

    const auto plain = tok.encode_word("<id1>");
    CHECK(plain.size() > 1);
    for (auto id : plain) CHECK(id != tok.placeholder_first());
}

TEST_CASE("characters outside the vocabulary become unk") {
    const auto tok = small_tokenizer();
    const auto ids = tok.encode_word("\xc3\xa9");
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == tok.unk());
    CHECK(ids[1] == tok.unk());
}

TEST_CASE("malformed vocabularies are rejected") {
    CHECK_THROWS_AS(Tokenizer({"a", "b"}), FormatError);
    auto vocab = build_vocabulary({"x"});
    vocab.push_back("x");
    CHECK_THROWS_AS(Tokenizer{vocab}, FormatError);
    CHECK_THROWS_AS(Tokenizer(build_vocabulary({}), 2), Error);
}

TEST_CASE("collect_words lowercases and deduplicates") {
    const auto words = collect_words("A Photo, of a PHOTO! x9yz");
    CHECK(words == std::vector<std::string>{"photo", "of", "yz"});
}
