#include "mufu/error.hpp"
#include "mufu/langdist.hpp"
#include "mufu/rng.hpp"

#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

using namespace mufu;

namespace {

LanguageRegistry make_registry(const std::vector<std::string>& codes) {
    LanguageRegistry reg;
    for (const auto& code : codes) {
        LanguageSpec spec;
        spec.code = code;
        spec.display_name = "name of " + code;
        spec.script = "Latin";
        reg.add(spec);
    }
    return reg;
}

std::string temp_path(const std::string& name) {
    return std::string("/tmp/mufu_test_") + std::to_string(::getpid()) + "_" + name;
}

} // namespace

TEST_CASE("combined_distance averages with equal weights") {
    CHECK(combined_distance(0.0, 0.0) == doctest::Approx(0.0));
    CHECK(combined_distance(0.4, 0.6) == doctest::Approx(0.5));
    CHECK(combined_distance(0.13, 0.91) == doctest::Approx(0.52));
    CHECK_THROWS_AS(combined_distance(-0.1, 0.5), ValidationError);
    CHECK_THROWS_AS(combined_distance(0.5, 1.2), ValidationError);
}

TEST_CASE("select_auxiliaries picks the single closest candidate") {
    auto reg = make_registry({"X", "Y", "Z"});
    DistanceTable table;
    table.add("X", "Y", 0.2, 0.2);
    table.add("X", "Z", 0.9, 0.9);
    const auto plan = select_auxiliaries("X", 1, table, reg, 0);
    CHECK(plan.auxiliaries == std::vector<std::string>{"Y"});
    CHECK(plan.provenance.kind == PlanKind::DistanceRanked);
}

TEST_CASE("select_auxiliaries orders farthest to closest with code tie-breaks") {
    auto reg = make_registry({"t", "a", "b", "c", "d", "e"});
    DistanceTable table;
    table.add("t", "a", 0.5, 0.5); // 0.50
    table.add("t", "b", 0.2, 0.2); // 0.20
    table.add("t", "c", 0.5, 0.5); // 0.50 tie with a
    table.add("t", "d", 0.8, 0.8); // 0.80
    table.add("t", "e", 0.1, 0.1); // 0.10
    const auto plan = select_auxiliaries("t", 4, table, reg, 0);
    // four closest: e(.1) b(.2) a(.5) c(.5); farthest->closest with tie a<c
    CHECK(plan.auxiliaries == std::vector<std::string>{"a", "c", "b", "e"});
}

TEST_CASE("select_auxiliaries ordering is non-increasing in combined distance") {
    std::mt19937_64 gen(555);
    for (int round = 0; round < 30; ++round) {
        std::vector<std::string> codes{"tgt"};
        for (int i = 0; i < 12; ++i) codes.push_back("c" + std::to_string(i));
        auto reg = make_registry(codes);
        DistanceTable table;
        std::map<std::string, double> combined;
        for (int i = 0; i < 12; ++i) {
            const double g = static_cast<double>(gen() % 1000) / 999.0;
            const double geo = static_cast<double>(gen() % 1000) / 999.0;
            table.add("tgt", codes[static_cast<std::size_t>(i) + 1], g, geo);
            combined[codes[static_cast<std::size_t>(i) + 1]] = (g + geo) / 2.0;
        }
        const std::size_t k = 1 + gen() % 10;
        const auto plan = select_auxiliaries("tgt", k, table, reg, 0);
        REQUIRE(plan.auxiliaries.size() == k);
        for (std::size_t i = 1; i < plan.auxiliaries.size(); ++i) {
            CHECK(combined[plan.auxiliaries[i - 1]] >= combined[plan.auxiliaries[i]]);
        }
    }
}

TEST_CASE("random fallback is pure in the seed and excludes script variants") {
    std::vector<std::string> codes{"ace_Arab"};
    for (int i = 0; i < 9; ++i) codes.push_back("l" + std::to_string(i) + "_Latn");
    codes.push_back("ace_Latn"); // script variant of the target
    auto reg = make_registry(codes);
    DistanceTable empty;

    const auto p1 = select_auxiliaries("ace_Arab", 3, empty, reg, 7);
    const auto p2 = select_auxiliaries("ace_Arab", 3, empty, reg, 7);
    const auto p3 = select_auxiliaries("ace_Arab", 3, empty, reg, 8);
    CHECK(p1.auxiliaries == p2.auxiliaries);
    CHECK(p1.auxiliaries != p3.auxiliaries);
    CHECK(p1.provenance.kind == PlanKind::RandomFallback);
    CHECK(p1.provenance.seed == 7);
    const std::set<std::string> distinct(p1.auxiliaries.begin(), p1.auxiliaries.end());
    CHECK(distinct.size() == 3);
    CHECK_FALSE(distinct.count("ace_Arab"));
    CHECK_FALSE(distinct.count("ace_Latn"));

    // independent oracle: sorted pool, partial Fisher-Yates on mt19937_64
    std::vector<std::string> pool;
    for (const auto& c : codes) {
        if (c != "ace_Arab" && c.rfind("ace_", 0) != 0) pool.push_back(c);
    }
    std::sort(pool.begin(), pool.end());
    DeterministicRng rng(7);
    const auto expected = sample_without_replacement(pool, 3, rng);
    CHECK(p1.auxiliaries == expected);
}

TEST_CASE("annotate_distance_coverage flags covered targets") {
    auto reg = make_registry({"X", "Y", "Z"});
    DistanceTable table;
    table.add("X", "Y", 0.1, 0.1);
    const auto annotated = annotate_distance_coverage(reg, table);
    CHECK(annotated.at("X").in_distance_table);
    CHECK_FALSE(annotated.at("Y").in_distance_table);
    CHECK_FALSE(annotated.at("Z").in_distance_table);
}

TEST_CASE("insufficient candidates raise") {
    auto reg = make_registry({"X", "Y"});
    DistanceTable table;
    table.add("X", "Y", 0.1, 0.1);
    CHECK_THROWS_AS(select_auxiliaries("X", 2, table, reg, 0), ValidationError);
    auto reg3 = make_registry({"X", "Y", "Z"});
    CHECK_THROWS_AS(select_auxiliaries("X", 2, table, reg3, 0),
                    InsufficientCandidatesError);
}

TEST_CASE("truncate_plan keeps the closest tail") {
    AuxPlan plan;
    plan.target = "t";
    plan.auxiliaries = {"A", "B", "C", "D"};
    CHECK(truncate_plan(plan, 2).auxiliaries == std::vector<std::string>{"C", "D"});
    CHECK(truncate_plan(plan, 4).auxiliaries == plan.auxiliaries);
    CHECK_THROWS_AS(truncate_plan(plan, 5), InsufficientCandidatesError);
    // nesting: truncating twice equals truncating once
    const auto nested = truncate_plan(truncate_plan(plan, 3), 2);
    CHECK(nested.auxiliaries == truncate_plan(plan, 2).auxiliaries);
}

TEST_CASE("fixed_hrl_plan substitutes Arabic in the removed slot") {
    auto reg = make_registry({"ace_Latn", "fra_Latn", "arb_Arab", "nld_Latn", "rus_Cyrl",
                              "zho_Hans", "spa_Latn"});
    const auto for_ace = fixed_hrl_plan("ace_Latn", reg);
    CHECK(for_ace.auxiliaries ==
          std::vector<std::string>{"nld_Latn", "rus_Cyrl", "fra_Latn", "zho_Hans", "spa_Latn"});
    CHECK(for_ace.provenance.kind == PlanKind::FixedHrl);

    const auto for_fra = fixed_hrl_plan("fra_Latn", reg);
    CHECK(for_fra.auxiliaries ==
          std::vector<std::string>{"nld_Latn", "rus_Cyrl", "arb_Arab", "zho_Hans", "spa_Latn"});

    const auto for_arb = fixed_hrl_plan("arb_Arab", reg);
    CHECK(for_arb.auxiliaries == for_ace.auxiliaries);

    CHECK_THROWS_AS(fixed_hrl_plan("unknown", reg), CoverageError);
}

TEST_CASE("merge_hrl_plan yields exactly 25 distinct auxiliaries") {
    // registry of 30: target + HRL five + 24 ranked codes
    std::vector<std::string> codes{"tgt"};
    for (const auto& c : kFixedHrlCodes) codes.push_back(c);
    for (int i = 0; i < 24; ++i) {
        codes.push_back("r" + std::string(i < 10 ? "0" : "") + std::to_string(i));
    }
    auto reg = make_registry(codes);
    DistanceTable table;
    // ranked candidates r00 (closest) .. r23 (farthest)
    for (int i = 0; i < 24; ++i) {
        table.add("tgt", codes[static_cast<std::size_t>(i) + 6], (i + 1) / 100.0,
                  (i + 1) / 100.0);
    }
    // two overlaps: put fra_Latn and nld_Latn among the 20 closest
    table.add("tgt", "fra_Latn", 0.05, 0.05);
    table.add("tgt", "nld_Latn", 0.06, 0.06);

    const auto base = select_auxiliaries("tgt", 20, table, reg, 0);
    REQUIRE(base.auxiliaries.size() == 20);
    const std::set<std::string> base_set(base.auxiliaries.begin(), base.auxiliaries.end());
    REQUIRE(base_set.count("fra_Latn"));
    REQUIRE(base_set.count("nld_Latn"));

    const auto merged = merge_hrl_plan(base, "tgt", table, reg, 0);
    const std::set<std::string> got(merged.auxiliaries.begin(), merged.auxiliaries.end());
    CHECK(merged.auxiliaries.size() == 25);
    CHECK(got.size() == 25);
    CHECK_FALSE(got.count("tgt"));
    CHECK(merged.provenance.kind == PlanKind::MergedHrl);
    // HRL five lead the list
    for (std::size_t i = 0; i < kFixedHrlCodes.size(); ++i) {
        CHECK(merged.auxiliaries[i] == kFixedHrlCodes[i]);
    }

    // brute-force oracle: union of base and HRL, refilled with the next
    // closest unused candidates until 25
    std::set<std::string> expected(base_set);
    expected.insert(kFixedHrlCodes.begin(), kFixedHrlCodes.end());
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& e : table.entries_for("tgt")) ranked.emplace_back(e.combined, e.candidate);
    std::sort(ranked.begin(), ranked.end());
    for (const auto& [dist, code] : ranked) {
        if (expected.size() == 25) break;
        expected.insert(code);
    }
    CHECK(got == expected);
}

TEST_CASE("merge_hrl_plan with a disjoint base needs no refill") {
    std::vector<std::string> codes{"tgt"};
    for (const auto& c : kFixedHrlCodes) codes.push_back(c);
    for (int i = 0; i < 20; ++i) {
        codes.push_back("d" + std::string(i < 10 ? "0" : "") + std::to_string(i));
    }
    auto reg = make_registry(codes);
    AuxPlan base;
    base.target = "tgt";
    base.auxiliaries.assign(codes.begin() + 6, codes.end());
    base.provenance.kind = PlanKind::Registry;
    DistanceTable empty;
    const auto merged = merge_hrl_plan(base, "tgt", empty, reg, 0);
    CHECK(merged.auxiliaries.size() == 25);
    // base order is preserved after the HRL five
    std::vector<std::string> tail(merged.auxiliaries.begin() + 5, merged.auxiliaries.end());
    CHECK(tail == base.auxiliaries);
}

TEST_CASE("merge_hrl_plan raises when the registry is exhausted") {
    std::vector<std::string> codes{"tgt"};
    for (const auto& c : kFixedHrlCodes) codes.push_back(c);
    for (int i = 0; i < 19; ++i) codes.push_back("e" + std::to_string(i));
    auto reg = make_registry(codes); // 25 codes: one short after a 1-overlap
    AuxPlan base;
    base.target = "tgt";
    base.auxiliaries.assign(codes.begin() + 5, codes.end()); // includes spa_Latn
    REQUIRE(base.auxiliaries.size() == 20);
    DistanceTable empty;
    CHECK_THROWS_AS(merge_hrl_plan(base, "tgt", empty, reg, 0),
                    InsufficientCandidatesError);
}

TEST_CASE("bundled auxiliary registry reproduces the published selections") {
    const auto plans = load_aux_registry(std::string(MUFU_DATA_DIR) + "/aux_registry.tsv");
    CHECK(plans.size() == 201);
    for (const auto& [target, plan] : plans) {
        CHECK(plan.auxiliaries.size() == 20);
    }
    const auto& achinese = plans.at("ace_Latn");
    const auto closest5 = truncate_plan(achinese, 5);
    CHECK(closest5.auxiliaries ==
          std::vector<std::string>{"zsm_Latn", "jav_Latn", "sun_Latn", "ind_Latn", "min_Latn"});
    // Balinese row ends with Indonesian
    CHECK(plans.at("ban_Latn").auxiliaries.back() == "ind_Latn");
    // randomly-assigned rows carry their marker
    CHECK(plans.at("azj_Latn").provenance.random_marker);
    CHECK_FALSE(plans.at("ace_Latn").provenance.random_marker);
}

TEST_CASE("language registry TSV rejects duplicates and empty names") {
    const std::string dup = temp_path("reg_dup.tsv");
    {
        std::ofstream out(dup);
        out << "code\tdisplay_name\tscript\tresource_level\n";
        out << "aaa\tA\tLatin\tVL\naaa\tA2\tLatin\tVL\n";
    }
    CHECK_THROWS_WITH_AS(LanguageRegistry::load_tsv(dup), doctest::Contains("duplicate"),
                         ParseError);
    const std::string noname = temp_path("reg_noname.tsv");
    {
        std::ofstream out(noname);
        out << "bbb\t\tLatin\tVL\n";
    }
    CHECK_THROWS_AS(LanguageRegistry::load_tsv(noname), ParseError);
    const std::string badlevel = temp_path("reg_badlevel.tsv");
    {
        std::ofstream out(badlevel);
        out << "ccc\tC\tLatin\tXXL\n";
    }
    CHECK_THROWS_AS(LanguageRegistry::load_tsv(badlevel), ParseError);
    std::remove(dup.c_str());
    std::remove(noname.c_str());
    std::remove(badlevel.c_str());

    const auto bundled =
        LanguageRegistry::load_tsv(std::string(MUFU_DATA_DIR) + "/language_registry.tsv");
    CHECK(bundled.size() == 202); // 201 targets + English
    CHECK(bundled.at("ace_Latn").display_name == "Achinese");
    CHECK(bundled.at("ace_Arab").display_name == "Achinese in Arabic script");
    CHECK(bundled.at("eng_Latn").resource_level == ResourceLevel::High);
}

TEST_CASE("aux registry parsing rejects malformed rows") {
    const std::string empty_path = temp_path("aux_empty.tsv");
    { std::ofstream out(empty_path); }
    CHECK(load_aux_registry(empty_path).empty());

    const std::string short_path = temp_path("aux_short.tsv");
    {
        std::ofstream out(short_path);
        out << "tgt\ta1|a2|a3\t0\n";
    }
    CHECK_THROWS_WITH_AS(load_aux_registry(short_path),
                         doctest::Contains("row 'tgt' has 3 auxiliaries"), ParseError);

    const std::string dup_path = temp_path("aux_dup.tsv");
    {
        std::ofstream out(dup_path);
        for (int row = 0; row < 2; ++row) {
            out << "tgt\t";
            for (int i = 0; i < 20; ++i) out << (i ? "|" : "") << "x" << i;
            out << "\t0\n";
        }
    }
    CHECK_THROWS_WITH_AS(load_aux_registry(dup_path), doctest::Contains("duplicate target"),
                         ParseError);
    std::remove(empty_path.c_str());
    std::remove(short_path.c_str());
    std::remove(dup_path.c_str());
}
