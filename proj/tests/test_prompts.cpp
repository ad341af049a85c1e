#include "doctest.h"

#include "desk_scale.hpp"

#include "charfac/binary_io.hpp"
#include "charfac/context_consistency.hpp"
#include "charfac/training.hpp"

#include <filesystem>
#include <map>

using namespace charfac;
using namespace charfac::testing;

namespace fs = std::filesystem;

namespace {

const fs::path kData = fs::path(CHARFAC_SOURCE_DIR) / "data";

Tokenizer desk_tokenizer() { return Tokenizer(build_vocabulary(desk_words()), 32); }

}  // namespace

TEST_CASE("templates need exactly one marker") {
    const auto tok = desk_tokenizer();
    CHECK(make_template("a photo of {ID}", tok).text == "a photo of {ID}");
    CHECK_THROWS_WITH_AS(make_template("a photo of someone", tok), doctest::Contains("no {ID}"), PromptError);
    CHECK_THROWS_WITH_AS(make_template("{ID} and {ID}", tok), doctest::Contains("2 placeholders"), PromptError);
    CHECK_THROWS_AS(make_template("a <id1> {ID}", tok), PromptError);
}

TEST_CASE("templates longer than the context are rejected") {
    const auto tok = desk_tokenizer();
    std::string text = "{ID}";
    for (int i = 0; i < 40; ++i) text += " photo";
    CHECK_THROWS_WITH_AS(make_template(text, tok), doctest::Contains("context holds 32"), PromptError);
}

TEST_CASE("placeholder tokens sit where the marker was") {
    const auto tok = desk_tokenizer();
    const PromptTemplate t = make_template("a photo of {ID} smiling", tok);
    const auto tokens = tokenize_template(t, tok);
    CHECK(tokens.placeholder == 4);
    CHECK(tokens.ids[4] == tok.placeholder_first());
    CHECK(tokens.ids[5] == tok.placeholder_second());
    CHECK(tokenize_template(make_template("{ID}", tok), tok).placeholder == 1);
    CHECK(t.with_identity_text("Anna Smith") == "a photo of Anna Smith smiling");
    CHECK(tokenize_template(make_template("photo,{ID},photo", tok), tok).placeholder == 3);
}

TEST_CASE("corpus parsing keeps categories and counts placeholder positions") {
    const auto tok = desk_tokenizer();
    const auto corpus = parse_prompt_corpus("# c\nactions\t{ID} reading\n\n{ID} smiling\nbackgrounds\ta photo of {ID}\n", tok);
    REQUIRE(corpus.size() == 3);
    CHECK(corpus.templates[0].category == PromptCategory::Actions);
    CHECK(corpus.templates[1].category == PromptCategory::Unspecified);
    CHECK(corpus.placeholder_positions.at(1) == 2u);
    CHECK(corpus.placeholder_positions.at(4) == 1u);
    CHECK(corpus.hash.size() == 64);
}

TEST_CASE("positional diversity is a normalized entropy") {
    PromptCorpus c;
    CHECK(c.positional_diversity() == 0.0);
    c.placeholder_positions = {{1, 5}};
    CHECK(c.positional_diversity() == 0.0);
    c.placeholder_positions = {{1, 5}, {3, 5}, {7, 5}};
    CHECK(c.positional_diversity() == doctest::Approx(1.0));
    c.placeholder_positions = {{1, 9}, {3, 1}};
    CHECK(c.positional_diversity() < 0.5);
}

TEST_CASE("corpus errors name the offending line") {
    const auto tok = desk_tokenizer();
    CHECK_THROWS_WITH_AS(parse_prompt_corpus("{ID}\nno marker here\n", tok, "p.txt"), doctest::Contains("p.txt:2"),
                         PromptError);
    CHECK_THROWS_WITH_AS(parse_prompt_corpus("weather\t{ID}\n", tok, "p.txt"), doctest::Contains("p.txt:1"),
                         PromptError);
    CHECK_THROWS_AS(parse_prompt_corpus("# only comments\n", tok), PromptError);
    CHECK_THROWS_AS(load_prompt_corpus("/nonexistent/prompts.txt", tok), Error);
}

TEST_CASE("category names round trip") {
    for (auto c : {PromptCategory::Expressions, PromptCategory::Decorations, PromptCategory::Actions,
                   PromptCategory::Attributes, PromptCategory::Backgrounds, PromptCategory::Unspecified}) {
        CHECK(parse_category(to_string(c)) == c);
    }
    CHECK_THROWS_AS(parse_category("misc"), PromptError);
}

TEST_CASE("shipped prompt corpus has 1000 balanced, varied templates") {
    const std::string text = read_file(kData / "prompts.txt");
    const Tokenizer tok(build_vocabulary(collect_words(text)));
    const auto corpus = parse_prompt_corpus(text, tok);
    CHECK(corpus.size() == 1000);
    std::map<PromptCategory, int> per;
    for (const auto& t : corpus.templates) ++per[t.category];
    CHECK(per.size() == 5);
    for (const auto& [cat, n] : per) CHECK(n == 200);
    CHECK(corpus.placeholder_positions.size() > 5);
    CHECK(corpus.positional_diversity() > 0.5);
}

TEST_CASE("shipped evaluation prompts start with the anchor") {
    const std::string text = read_file(kData / "eval_prompts.txt");
    const Tokenizer tok(build_vocabulary(collect_words(text)));
    const auto corpus = parse_prompt_corpus(text, tok);
    CHECK(corpus.size() == 40);
    CHECK(corpus.templates.front().text == "a photo of {ID}");
}

TEST_CASE("shipped name list has 226 men and 100 women, all single-token") {
    const std::string text = read_file(kData / "names.txt");
    const Tokenizer tok(build_vocabulary(collect_words(text)));
    const auto res = load_name_list(kData / "names.txt", tok);
    CHECK(res.entries.size() == 326);
    CHECK(res.rejected.empty());
    const auto split = stratified_split(res.entries, "gender");
    CHECK(split.at("man").size() == 226);
    CHECK(split.at("woman").size() == 100);
}
