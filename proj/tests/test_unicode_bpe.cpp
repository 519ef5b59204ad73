#include <catch_amalgamated.hpp>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "tabllm/bpe.hpp"
#include "tabllm/unicode.hpp"

using namespace tabllm;

TEST_CASE("published assets expose the full vocabulary") {
    const auto& vocab = testutil::gpt2_vocab();
    CHECK(vocab.size() == 50257);
    CHECK(vocab.end_of_text == 50256);
    CHECK(vocab.pad == vocab.end_of_text);
    CHECK(vocab.merge_ranks.size() == 50000);
}

TEST_CASE("byte encoder is a bijection") {
    const auto& enc = BpeVocabulary::byte_encoder();
    const auto& dec = BpeVocabulary::byte_decoder();
    REQUIRE(enc.size() == 256);
    REQUIRE(dec.size() == 256);
    for (int b = 0; b < 256; ++b) CHECK(dec.at(enc[b]) == b);
    CHECK(enc[' '] == 0x120);  // the familiar space mapping
    CHECK(enc['!'] == '!');
}

TEST_CASE("encode matches the pinned reference corpus exactly") {
    const auto& vocab = testutil::gpt2_vocab();
    std::ifstream in(testutil::asset("tests/data/bpe_corpus.json"));
    REQUIRE(in.good());
    nlohmann::json corpus;
    in >> corpus;
    REQUIRE(corpus.size() >= 100);
    size_t mismatches = 0;
    for (const auto& entry : corpus) {
        const auto text = entry.at("text").get<std::string>();
        const auto expected = entry.at("ids").get<std::vector<TokenId>>();
        auto got = encode(text, vocab);
        if (got != expected) {
            ++mismatches;
            UNSCOPED_INFO("mismatch on: " << text);
        }
        CHECK(decode(got, vocab) == text);
    }
    CHECK(mismatches == 0);
}

TEST_CASE("encode basics") {
    const auto& vocab = testutil::gpt2_vocab();
    CHECK(encode("", vocab).empty());
    CHECK(encode("Hello world", vocab) == std::vector<TokenId>{15496, 995});
    CHECK(decode({}, vocab).empty());
    CHECK(decode(encode("Age is 25. Sex is male.", vocab), vocab) == "Age is 25. Sex is male.");
}

TEST_CASE("decode rejects out-of-range ids") {
    const auto& vocab = testutil::gpt2_vocab();
    CHECK_THROWS_AS(decode({50257}, vocab), Error);
    CHECK_THROWS_AS(decode({-1}, vocab), Error);
}

TEST_CASE("asset inconsistencies are rejected") {
    auto vocab_path = testutil::write_temp_file("vocab.json", R"({"a":0,"b":1})");
    auto merges_path = testutil::write_temp_file("merges.txt", "#version: 0.2\na b\n");
    CHECK_THROWS_AS(load_bpe(vocab_path, merges_path), Error);

    auto ok_vocab = testutil::write_temp_file("vocab.json", R"({"a":0,"b":1,"ab":2})");
    auto v = load_bpe(ok_vocab, merges_path);
    CHECK(v.size() == 3);
    CHECK(v.merge_ranks.at("a b") == 0);

    auto empty_merges = testutil::write_temp_file("merges.txt", "#version: 0.2\n");
    auto v2 = load_bpe(ok_vocab, empty_merges);
    CHECK(v2.merge_ranks.empty());
    CHECK(encode("ab", v2) == std::vector<TokenId>{0, 1});  // byte-level fallback

    auto gap_vocab = testutil::write_temp_file("vocab.json", R"({"a":0,"b":2})");
    CHECK_THROWS_AS(load_bpe(gap_vocab, empty_merges), Error);

    auto bad_merges = testutil::write_temp_file("merges.txt", "a b c\n");
    CHECK_THROWS_AS(load_bpe(ok_vocab, bad_merges), Error);
}

TEST_CASE("pad_or_truncate obeys the mask contract") {
    const auto& vocab = testutil::gpt2_vocab();

    auto padded = pad_or_truncate({1, 2, 3, 4, 5}, 8, vocab);
    CHECK(padded.ids == std::vector<TokenId>{1, 2, 3, 4, 5, 50256, 50256, 50256});
    CHECK(padded.attention_mask == std::vector<uint8_t>{1, 1, 1, 1, 1, 0, 0, 0});
    CHECK(padded.true_length == 5);

    std::vector<TokenId> long_ids(1030);
    for (size_t i = 0; i < long_ids.size(); ++i) long_ids[i] = static_cast<TokenId>(i % 100);
    auto truncated = pad_or_truncate(long_ids, 1024, vocab);
    CHECK(truncated.ids.size() == 1024);
    CHECK(truncated.true_length == 1024);
    CHECK(truncated.ids[1023] == long_ids[1023]);  // head kept
    for (uint8_t m : truncated.attention_mask) CHECK(m == 1);

    auto exact = pad_or_truncate({9, 8, 7, 6, 5, 4, 3, 2}, 8, vocab);
    CHECK(exact.ids == std::vector<TokenId>{9, 8, 7, 6, 5, 4, 3, 2});
    CHECK(exact.true_length == 8);

    CHECK_THROWS_AS(pad_or_truncate({1}, 0, vocab), Error);
    CHECK_THROWS_AS(pad_or_truncate({1}, 1025, vocab), Error);
}

TEST_CASE("mask is always a prefix of ones") {
    const auto& vocab = testutil::gpt2_vocab();
    std::mt19937_64 rng(17);
    for (int t = 0; t < 50; ++t) {
        std::vector<TokenId> ids(rng() % 40);
        for (auto& id : ids) id = static_cast<TokenId>(rng() % 50257);
        size_t target = 1 + rng() % 32;
        auto seq = pad_or_truncate(ids, target, vocab);
        bool in_pad = false;
        for (size_t i = 0; i < seq.attention_mask.size(); ++i) {
            if (!seq.attention_mask[i]) in_pad = true;
            CHECK(seq.attention_mask[i] == (in_pad ? 0 : 1));
        }
        CHECK(seq.true_length == std::min(ids.size(), target));
    }
}

TEST_CASE("unicode class predicates agree with the pre-tokenizer expectations") {
    using namespace unicode;
    CHECK(is_letter(U'a'));
    CHECK(is_letter(0x00E9));   // e with acute
    CHECK(is_letter(0x4E2D));   // CJK
    CHECK_FALSE(is_letter(U'3'));
    CHECK(is_number(U'7'));
    CHECK(is_number(0x0661));   // Arabic-Indic digit
    CHECK(is_whitespace(U' '));
    CHECK(is_whitespace(U'\t'));
    CHECK_FALSE(is_whitespace(U'_'));
}

TEST_CASE("utf8 decode tolerates invalid bytes without throwing") {
    std::string bad = "ok\xFF\xFEok";
    auto cps = unicode::decode_utf8(bad);
    CHECK(cps.size() >= 4);
    const auto& vocab = testutil::gpt2_vocab();
    CHECK_NOTHROW(encode(bad, vocab));
}
