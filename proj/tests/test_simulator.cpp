#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "proplab/estimator.hpp"
#include "proplab/simulator.hpp"

using namespace proplab;

namespace {

SimConfig small_config() {
    SimConfig config;
    config.num_queries = 50;
    config.items_per_query = 20;
    config.layout = GridLayout{4, 3};
    config.surface.decay.gamma = 1.0;
    config.policy_noise_sd = 0.3;
    config.seed = 11;
    return config;
}

std::string serialize(const std::vector<Impression>& log) {
    std::string out;
    for (const auto& imp : log) out += impression_to_json_line(imp) + '\n';
    return out;
}

}  // namespace

TEST_CASE("config validation") {
    SimConfig config = small_config();
    config.items_per_query = 11;  // page size is 12
    CHECK_THROWS_AS(validate_config(config), config_error);
    config = small_config();
    config.booking_scale = 1.5;
    CHECK_THROWS_AS(validate_config(config), config_error);
    config = small_config();
    config.relevance_prior = {0.5, 0.2};
    CHECK_THROWS_AS(validate_config(config), config_error);
}

TEST_CASE("zero queries produce an empty log") {
    SimConfig config = small_config();
    config.num_queries = 0;
    const auto out = simulate(config);
    CHECK(out.log.empty());
    CHECK(out.features.empty());
}

TEST_CASE("row count and schema") {
    const SimConfig config = small_config();
    const auto out = simulate(config);
    CHECK(out.log.size() == 50u * 12u);
    CHECK(out.features.size() == out.log.size());
    CHECK_NOTHROW(validate_log(out.log, config.layout));
    for (const auto& imp : out.log) {
        REQUIRE(imp.true_relevance);
        REQUIRE(imp.judge_score);
        if (imp.booked) CHECK(imp.clicked);
    }
}

TEST_CASE("noiseless policy ranks by descending true relevance") {
    SimConfig config = small_config();
    config.policy_noise_sd = 0.0;
    const auto out = simulate(config);
    for (size_t i = 1; i < out.log.size(); ++i) {
        if (out.log[i].query_id != out.log[i - 1].query_id) continue;
        CHECK(*out.log[i].true_relevance <= *out.log[i - 1].true_relevance);
    }
}

TEST_CASE("same config gives byte-identical logs") {
    const SimConfig config = small_config();
    CHECK(serialize(simulate(config).log) == serialize(simulate(config).log));
    SimConfig other = small_config();
    other.seed = 12;
    CHECK(serialize(simulate(other).log) != serialize(simulate(config).log));
}

TEST_CASE("toggling bookings leaves clicks untouched") {
    SimConfig config = small_config();
    config.booking_scale = 0.0;
    const auto without = simulate(config);
    config.booking_scale = 0.9;
    const auto with = simulate(config);
    REQUIRE(without.log.size() == with.log.size());
    for (size_t i = 0; i < with.log.size(); ++i) {
        CHECK(without.log[i].clicked == with.log[i].clicked);
        CHECK(without.log[i].judge_score == with.log[i].judge_score);
    }
}

TEST_CASE("feature layout matches config") {
    SimConfig config = small_config();
    config.features.view_noise_sd = {0.1};
    config.features.policy_residual = true;
    config.features.pure_noise_features = 2;
    const auto out = simulate(config);
    for (const auto& row : out.features) {
        CHECK(row.values.size() == 4u);
    }
}

TEST_CASE("empirical_click_rates") {
    SUBCASE("direct proportion") {
        std::vector<Impression> log;
        for (int i = 0; i < 4; ++i) {
            Impression imp;
            imp.query_id = "q" + std::to_string(i);
            imp.item_id = "a";
            imp.rank = 1;
            imp.judge_score = 70;
            imp.clicked = (i == 0);
            log.push_back(imp);
        }
        const auto table = empirical_click_rates(log, 12);
        CHECK(click_rate(table, 70, 1) == doctest::Approx(0.25));
    }
    SUBCASE("never-observed cell is flagged") {
        std::vector<Impression> log(1);
        log[0].query_id = "q";
        log[0].item_id = "a";
        log[0].rank = 1;
        log[0].judge_score = 70;
        const auto table = empirical_click_rates(log, 12);
        CHECK(table.impressions(33, 5) == 0);
        CHECK_THROWS_AS(click_rate(table, 33, 5, 0.0), numeric_error);
    }
    SUBCASE("unannotated rows are a validation error") {
        std::vector<Impression> log(1);
        log[0].query_id = "q";
        log[0].item_id = "a";
        log[0].rank = 1;
        CHECK_THROWS_AS(empirical_click_rates(log, 12), validation_error);
    }
}

TEST_CASE("conservation per (score, rank) cell") {
    const auto out = simulate(small_config());
    const auto table = ClickRateTable::from_log(out.log, 12);
    long long bookings = 0, clicks = 0;
    for (const auto& imp : out.log) {
        bookings += imp.booked ? 1 : 0;
        clicks += imp.clicked ? 1 : 0;
    }
    CHECK(bookings <= clicks);
    for (int s = 0; s <= 100; ++s) {
        for (int p = 1; p <= 12; ++p) {
            CHECK(table.clicks(s, p) <= table.impressions(s, p));
        }
    }
}

TEST_CASE("matched-score click-rate ratio recovers the surface (oracle)") {
    // Near-random policy so relevance decouples from rank; gamma=1 surface.
    SimConfig config;
    config.num_queries = 100000;
    config.items_per_query = 15;
    config.layout = GridLayout{4, 3};
    config.surface.decay.gamma = 1.0;
    config.policy_noise_sd = 10.0;
    config.calib.noise_sd = 8.0;
    config.seed = 21;
    const auto out = simulate(config);
    const auto table = ClickRateTable::from_log(out.log, 12);

    // Pool a mid band of scores for support.
    long long imp1 = 0, clk1 = 0, imp2 = 0, clk2 = 0;
    for (int s = 45; s <= 65; ++s) {
        imp1 += table.impressions(s, 1);
        clk1 += table.clicks(s, 1);
        imp2 += table.impressions(s, 2);
        clk2 += table.clicks(s, 2);
    }
    REQUIRE(imp1 > 10000);
    const double ratio = (static_cast<double>(clk2) / imp2) /
                         (static_cast<double>(clk1) / imp1);
    CHECK(ratio == doctest::Approx(0.5).epsilon(0.06));  // 0.5 +/- 0.03
}

TEST_CASE("sim config JSON round trip") {
    SimConfig config = small_config();
    config.surface.kind = SurfaceSpec::Kind::Grid;
    config.surface.grid.row_factors = {1.0, 0.7};
    config.surface.grid.column_profiles = {{1.0, 0.8}, {0.6, 0.5}};
    config.layout = GridLayout{2, 2};
    config.items_per_query = 8;
    const auto back = sim_config_from_json_text(sim_config_to_json_text(config));
    CHECK(back.num_queries == config.num_queries);
    CHECK(back.layout == config.layout);
    CHECK(back.surface.grid.row_factors == config.surface.grid.row_factors);
    CHECK(back.surface.grid.column_profiles == config.surface.grid.column_profiles);
    CHECK(back.seed == config.seed);
    CHECK(sim_config_to_json_text(back) == sim_config_to_json_text(config));
}
