#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "seqrand/commands.hpp"

using namespace seqrand;
using namespace seqrand::commands;

TEST(Commands, CsvIsFiniteAndStable) {
    NumericTable t{{"a", "b"}, {{1.0, NAN}, {-0.0, 1.0 / 3.0}, {INFINITY, 2.5e-13}}};
    const std::string csv = to_csv(t);
    EXPECT_EQ(csv, "a,b\n1,0\n0,0.333333333333\n0,2.5e-13\n");
    EXPECT_EQ(to_csv(t), csv);
    const auto j = to_json(t);
    EXPECT_EQ(j.size(), 3u);
    EXPECT_EQ(j[0]["b"], 0.0);
}

TEST(Commands, StatusColumn) {
    NumericTable t{{"x", "status"}, {{0, 0}, {1, 1}}};
    EXPECT_FALSE(t.any_failed());
    t.rows.push_back({2, 3});
    EXPECT_TRUE(t.any_failed());
    EXPECT_EQ(status_code(sdp::SolveStatus::Infeasible), 2);
}

TEST(Commands, Linspace) {
    const auto g = linspace(0.0, 1.0, 5);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 1.0);
    EXPECT_EQ(linspace(0.3, 9.0, 1), std::vector<double>{0.3});
    EXPECT_THROW(linspace(0, 1, 0), ParseError);
}

TEST(Commands, OrderedMapIsDeterministic) {
    const auto out = parallel::ordered_map(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
    try {
        parallel::ordered_map(20, 3, [](std::size_t i) -> int {
            if (i == 7 || i == 13) throw std::runtime_error(std::to_string(i));
            return 0;
        });
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "7");
    }
}

TEST(Commands, BoundaryRows) {
    const double r = std::sqrt(2.0);
    const auto t = boundary({0.0, std::numbers::pi / 8, kQuarterPi});
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_NEAR(t.rows[0][1], 2 * r, 1e-12);
    EXPECT_NEAR(t.rows[0][2], r, 1e-12);
    EXPECT_NEAR(t.rows[1][4], r, 1e-9);
    EXPECT_NEAR(t.rows[1][5], 0.0, 1e-9);
    EXPECT_NEAR(t.rows[2][1], r, 1e-12);
    EXPECT_NEAR(t.rows[2][2], 2 * r, 1e-12);
}

TEST(Commands, ScanThetaRows) {
    const auto t = scan_theta({0.0, 1.0}, {0.0, std::numbers::pi / 8}, 0.0, {}, {}, 2);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_NEAR(t.rows[0][2], 1.0, 1e-3);
    EXPECT_EQ(t.rows[0][5], 1.0);
    EXPECT_NEAR(t.rows[1][2], 2.0, 1e-3);
    EXPECT_EQ(t.rows[1][5], 0.0);
    EXPECT_NEAR(t.rows[2][2], 0.0, 1e-6);
    EXPECT_NEAR(t.rows[3][2], 0.0, 1e-6);
    EXPECT_FALSE(t.any_failed());
}

TEST(Commands, GoldenSectionFindsInteriorOptimum) {
    const auto opt = best_theta(0.01, 0.0, {}, {});
    EXPECT_GT(opt.theta, kSearchLo + 0.01);
    EXPECT_LT(opt.theta, kSearchHi - 0.01);
    // coarse grid oracle
    double grid_best = 0.0;
    for (double th = kSearchLo; th <= kSearchHi; th += 0.05) {
        grid_best = std::max(grid_best, guess(protocol::ProtocolParams{th, 0.01, 0.0}, {}, {}).hmin);
    }
    EXPECT_GE(opt.hmin, grid_best - 1e-3);
}

TEST(Commands, ScanNoiseAtZero) {
    const auto t = scan_noise({0.0}, {}, {}, 1);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_NEAR(t.rows[0][1], 2.0, 1e-3);
    EXPECT_NEAR(t.rows[0][3], 1.0, 1e-9);
    EXPECT_NEAR(t.rows[0][4], 1.0, 1e-3);
}

TEST(Commands, TablesReport) {
    const auto t = tables({npa::ConstraintMode::Summary, 0.0}, {}, 1);
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_NEAR(t.rows[0][4], 2.305, 0.002);
    EXPECT_NEAR(t.rows[0][7], 0.82, 0.03);
    EXPECT_NEAR(t.rows[2][13], 0.72, 0.02);
    EXPECT_FALSE(t.any_failed());
}

TEST(Commands, ValidateReport) {
    const auto good = validate(protocol::correlations_kraus({0.3, 0.01, 0.0}), 1e-12);
    EXPECT_TRUE(good.passed);
    const auto j = to_json(good);
    EXPECT_TRUE(j["passed"].get<bool>());
    const auto bad = validate(scenario::CorrelationTable::from_function([](int, int, int y2, int, int b1, int) {
                                  return (b1 > 0) == (y2 == 0) ? 0.25 : 0.0;
                              }),
                              1e-9);
    EXPECT_FALSE(bad.passed);
    EXPECT_FALSE(to_json(bad)["sequentiality"]["bob1_independent_of_y2"]["passed"].get<bool>());
}
