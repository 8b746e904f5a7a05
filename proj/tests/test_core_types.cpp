#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "proplab/core_types.hpp"

using namespace proplab;

TEST_CASE("rank_to_cell row-major mapping") {
    const GridLayout layout{4, 3};
    CHECK(rank_to_cell(1, layout) == GridCell{0, 0});
    CHECK(rank_to_cell(5, layout) == GridCell{1, 0});
    CHECK(rank_to_cell(12, layout) == GridCell{2, 3});
    CHECK_THROWS_AS(rank_to_cell(0, layout), validation_error);
    CHECK_THROWS_AS(rank_to_cell(13, layout), validation_error);
}

TEST_CASE("rank_to_cell round-trips through cell_to_rank on any layout") {
    for (int cols = 1; cols <= 6; ++cols) {
        for (int rows = 1; rows <= 5; ++rows) {
            const GridLayout layout{cols, rows};
            for (int rank = 1; rank <= layout.page_size(); ++rank) {
                CHECK(cell_to_rank(rank_to_cell(rank, layout), layout) == rank);
            }
        }
    }
}

TEST_CASE("bucket_of with the standard buckets") {
    const auto buckets = default_buckets();
    REQUIRE(bucket_of(81, buckets) != nullptr);
    CHECK(bucket_of(81, buckets)->label == "Excellent");
    REQUIRE(bucket_of(60, buckets) != nullptr);
    CHECK(bucket_of(60, buckets)->label == "Fair");
    CHECK(bucket_of(12, buckets) == nullptr);
}

TEST_CASE("overlapping buckets are a configuration error") {
    std::vector<ScoreBucket> bad = {{"a", 0, 50}, {"b", 50, 100}};
    CHECK_THROWS_AS(bucket_of(10, bad), config_error);
    CHECK_THROWS_AS(parse_buckets("0-50,50-100"), config_error);
}

TEST_CASE("parse_buckets") {
    const auto buckets = parse_buckets("81-100,61-80,41-60");
    REQUIRE(buckets.size() == 3);
    CHECK(buckets[0].lo == 81);
    CHECK(buckets[0].hi == 100);
    CHECK(buckets[2].label == "41-60");
    CHECK_THROWS_AS(parse_buckets(""), config_error);
    CHECK_THROWS_AS(parse_buckets("abc"), config_error);
}

TEST_CASE("JSONL round trip preserves every field") {
    Impression imp;
    imp.query_id = "q00001";
    imp.item_id = "i042";
    imp.rank = 5;
    imp.cell = GridCell{1, 0};
    imp.judge_score = 73;
    imp.clicked = true;
    imp.booked = false;
    imp.true_relevance = 0.375;

    const std::string line = impression_to_json_line(imp);
    const Impression back = impression_from_json_line(line);
    CHECK(back.query_id == imp.query_id);
    CHECK(back.item_id == imp.item_id);
    CHECK(back.rank == imp.rank);
    CHECK(back.cell == imp.cell);
    CHECK(back.judge_score == imp.judge_score);
    CHECK(back.clicked == imp.clicked);
    CHECK(back.booked == imp.booked);
    CHECK(back.true_relevance == imp.true_relevance);
}

TEST_CASE("JSONL nulls for unannotated rows") {
    Impression imp;
    imp.query_id = "q";
    imp.item_id = "i";
    const std::string line = impression_to_json_line(imp);
    CHECK(line.find("\"judge_score\":null") != std::string::npos);
    CHECK(line.find("\"true_relevance\":null") != std::string::npos);
    const Impression back = impression_from_json_line(line);
    CHECK(!back.judge_score);
    CHECK(!back.true_relevance);
}

TEST_CASE("validate_log catches inconsistent rows") {
    const GridLayout layout{4, 3};
    Impression good;
    good.query_id = "q";
    good.item_id = "a";
    good.rank = 2;
    good.cell = rank_to_cell(2, layout);

    SUBCASE("booked without click") {
        Impression bad = good;
        bad.booked = true;
        CHECK_THROWS_AS(validate_log({bad}, layout), validation_error);
    }
    SUBCASE("cell inconsistent with rank") {
        Impression bad = good;
        bad.cell = GridCell{2, 2};
        CHECK_THROWS_AS(validate_log({bad}, layout), validation_error);
    }
    SUBCASE("duplicate rank within query") {
        Impression other = good;
        other.item_id = "b";
        CHECK_THROWS_AS(validate_log({good, other}, layout), validation_error);
    }
    SUBCASE("well-formed log passes") {
        Impression other = good;
        other.item_id = "b";
        other.rank = 3;
        other.cell = rank_to_cell(3, layout);
        CHECK_NOTHROW(validate_log({good, other}, layout));
    }
}

TEST_CASE("read_impressions skips blank lines and rejects junk") {
    std::istringstream ok("{\"query_id\":\"q\",\"item_id\":\"i\",\"rank\":1,"
                          "\"row\":0,\"col\":0,\"judge_score\":null,"
                          "\"clicked\":false,\"booked\":false,"
                          "\"true_relevance\":null}\n\n");
    CHECK(read_impressions(ok).size() == 1);

    std::istringstream junk("not json\n");
    CHECK_THROWS_AS(read_impressions(junk), io_error);
}
