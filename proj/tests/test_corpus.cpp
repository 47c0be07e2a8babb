#include "mufu/corpus.hpp"
#include "mufu/error.hpp"
#include "mufu/text.hpp"

#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace mufu;
namespace fs = std::filesystem;

namespace {

struct TempCorpusDir {
    fs::path dir;
    TempCorpusDir() {
        dir = fs::temp_directory_path() /
              ("mufu_corpus_" + std::to_string(::getpid()) + "_" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);
    }
    ~TempCorpusDir() { fs::remove_all(dir); }
    void write(const std::string& code, const std::vector<std::string>& lines) const {
        std::ofstream out(dir / (code + ".txt"), std::ios::binary);
        for (const auto& line : lines) out << line << '\n';
    }
};

} // namespace

TEST_CASE("load_corpus aligns languages and strips trailing whitespace") {
    TempCorpusDir tmp;
    tmp.write("eng_Latn", {"one ", "two\t", "three"});
    tmp.write("deu_Latn", {"eins", "zwei", "drei"});
    const auto corpus = load_corpus(tmp.dir.string(), {"eng_Latn", "deu_Latn"});
    CHECK(corpus.n_sentences == 3);
    CHECK(corpus.sentences("eng_Latn")[0] == "one");
    CHECK(corpus.sentences("eng_Latn")[1] == "two");
    CHECK(corpus.sentences("deu_Latn")[2] == "drei");
}

TEST_CASE("load_corpus reports misaligned files by name") {
    TempCorpusDir tmp;
    tmp.write("a", {"1", "2", "3"});
    tmp.write("b", {"1", "2"});
    CHECK_THROWS_WITH_AS(load_corpus(tmp.dir.string(), {"a", "b"}),
                         doctest::Contains("alignment error"), ParseError);
    try {
        load_corpus(tmp.dir.string(), {"a", "b"});
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("a.txt") != std::string::npos);
        CHECK(msg.find("b.txt") != std::string::npos);
    }
}

TEST_CASE("load_corpus rejects invalid encoding") {
    TempCorpusDir tmp;
    tmp.write("bad", {"fine", "br\xC3(ken"});
    CHECK_THROWS_WITH_AS(load_corpus(tmp.dir.string(), {"bad"}),
                         doctest::Contains("invalid UTF-8"), ParseError);
}

TEST_CASE("split_dev produces the published sizes and a total partition") {
    const auto split = split_dev(997, SplitSizes{}, 42);
    CHECK(split.count(Split::Train) == 787);
    CHECK(split.count(Split::Validation) == 100);
    CHECK(split.count(Split::PromptSelection) == 100);
    CHECK(split.count(Split::FewshotReserve) == 10);
    CHECK(split.assignment.size() == 997);

    // byte-identical across runs
    const auto again = split_dev(997, SplitSizes{}, 42);
    CHECK(split.assignment == again.assignment);
    const auto other = split_dev(997, SplitSizes{}, 43);
    CHECK(split.assignment != other.assignment);
}

TEST_CASE("split_dev covers every index exactly once") {
    const auto split = split_dev(4, SplitSizes{1, 1, 1, 1}, 0);
    std::set<std::size_t> seen;
    for (Split s : {Split::Train, Split::Validation, Split::PromptSelection,
                    Split::FewshotReserve}) {
        for (std::size_t i : split.indices_for(s)) seen.insert(i);
        CHECK(split.count(s) == 1);
    }
    CHECK(seen == std::set<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("split_dev rejects sizes that do not sum to n") {
    CHECK_THROWS_AS(split_dev(996, SplitSizes{}, 0), ValidationError);
}

TEST_CASE("split round-trips through TSV") {
    const auto split = split_dev(20, SplitSizes{14, 2, 2, 2}, 9);
    const std::string path = "/tmp/mufu_split_" + std::to_string(::getpid()) + ".tsv";
    write_split_tsv(path, split);
    const auto back = read_split_tsv(path);
    CHECK(back.assignment == split.assignment);
    std::remove(path.c_str());
}

TEST_CASE("sample_fewshot draws from the reserve only") {
    const auto split = split_dev(997, SplitSizes{}, 42);
    const auto reserve = split.indices_for(Split::FewshotReserve);
    const std::set<std::size_t> reserve_set(reserve.begin(), reserve.end());

    const auto five = sample_fewshot(split, 5, 7);
    CHECK(five.size() == 5);
    CHECK(std::set<std::size_t>(five.begin(), five.end()).size() == 5);
    for (std::size_t i : five) CHECK(reserve_set.count(i));

    CHECK(sample_fewshot(split, 5, 7) == five);

    const auto all = sample_fewshot(split, 10, 3);
    CHECK(std::set<std::size_t>(all.begin(), all.end()) == reserve_set);

    CHECK_THROWS_AS(sample_fewshot(split, 11, 0), InsufficientCandidatesError);
}

TEST_CASE("build_distill_pool reproduces the published pool size") {
    std::vector<std::string> seed, wmt;
    for (int i = 0; i < 6193; ++i) seed.push_back("seed sentence " + std::to_string(i));
    for (int i = 0; i < 9000; ++i) wmt.push_back("wmt sentence " + std::to_string(i));
    const auto pool = build_distill_pool(seed, wmt, {}, 6000, 11);
    CHECK(pool.sentences.size() == 12193);
    CHECK(pool.n_seed == 6193);
    CHECK(pool.n_wmt == 6000);
}

TEST_CASE("build_distill_pool of nothing is empty") {
    const auto pool = build_distill_pool({}, {}, {}, 0, 0);
    CHECK(pool.sentences.empty());
}

TEST_CASE("excluded sentences never enter the pool") {
    std::vector<std::string> wmt;
    std::set<std::string> excluded;
    for (int i = 0; i < 200; ++i) {
        wmt.push_back("line number " + std::to_string(i));
        if (i % 2 == 0) excluded.insert("line   number " + std::to_string(i) + " ");
    }
    const auto pool = build_distill_pool({}, wmt, excluded, 80, 5);
    // brute-force intersection oracle on normalized keys
    std::set<std::string> excluded_keys;
    for (const auto& s : excluded) excluded_keys.insert(text::normalize_for_match(s));
    for (const auto& s : pool.sentences) {
        CHECK_FALSE(excluded_keys.count(text::normalize_for_match(s)));
    }
    CHECK(pool.sentences.size() == 80);

    CHECK_THROWS_AS(build_distill_pool({}, wmt, excluded, 101, 5),
                    InsufficientCandidatesError);
}

TEST_CASE("distill sampling is a pure function of the seed") {
    std::vector<std::string> wmt;
    for (int i = 0; i < 50; ++i) wmt.push_back("s" + std::to_string(i));
    const auto a = build_distill_pool({}, wmt, {}, 20, 99);
    const auto b = build_distill_pool({}, wmt, {}, 20, 99);
    CHECK(a.sentences == b.sentences);
}
