#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "privmech/distributions.hpp"

using namespace privmech;
using Catch::Approx;

namespace {

// numeric integral of the pdf, independent route for cdf checks
double integrate_pdf(const DistributionSpec& spec, std::size_t k, double a, double b,
                     std::size_t n = 20000) {
    const double h = (b - a) / n;
    double acc = spec.pdf(k, a) + spec.pdf(k, b);
    for (std::size_t i = 1; i < n; ++i) acc += spec.pdf(k, a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// (1 - F)/f with f from a central difference of the cdf
double numeric_virtual(const DistributionSpec& spec, std::size_t k, double v, double h = 1e-6) {
    const double f = (spec.cdf(k, v + h) - spec.cdf(k, v - h)) / (2.0 * h);
    return v - (1.0 - spec.cdf(k, v)) / f;
}

}  // namespace

TEST_CASE("ladder validation") {
    CHECK_NOTHROW(PrivacyLadder({0.1, 0.5, 1.0}, {0.0, 0.0, 0.3}));
    CHECK_THROWS_AS(PrivacyLadder({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(PrivacyLadder({0.5, 0.5}, {0.0, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(PrivacyLadder({0.1, 1.2}, {0.0, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(PrivacyLadder({0.1, 0.5}, {0.2, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(PrivacyLadder({0.1, 0.5}, {-0.1, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(PrivacyLadder({0.1}, {0.0, 0.1}), std::invalid_argument);
}

TEST_CASE("cdf closed forms") {
    const auto uni = DistributionSpec::uniform_scaled({1.0});
    CHECK(uni.cdf(0, 0.25) == Approx(0.25));

    const auto exp1 = DistributionSpec::exponential({1.0});
    CHECK(exp1.cdf(0, 0.0) == 0.0);

    const auto exp2 = DistributionSpec::exponential({2.0});
    CHECK(exp2.cdf(0, 0.5) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    // independent route: integrate the density
    CHECK(exp2.cdf(0, 0.5) == Approx(integrate_pdf(exp2, 0, 0.0, 0.5)).margin(1e-8));

    CHECK_THROWS_AS(uni.cdf(3, 0.1), std::domain_error);
}

TEST_CASE("inv_cdf round trips") {
    const auto uni = DistributionSpec::uniform_scaled({1.0});
    CHECK(uni.inv_cdf(0, 0.3679) == Approx(0.3679));

    const auto exp1 = DistributionSpec::exponential({1.0});
    CHECK(exp1.inv_cdf(0, 0.0) == 0.0);
    CHECK(exp1.inv_cdf(0, 1.0 - std::exp(-2.0)) == Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(exp1.inv_cdf(0, -0.1), std::domain_error);
    CHECK_THROWS_AS(exp1.inv_cdf(0, 1.1), std::domain_error);

    for (double p = 0.0; p <= 1.0; p += 0.01)
        CHECK(exp1.cdf(0, exp1.inv_cdf(0, p)) == Approx(p).margin(1e-9));
}

TEST_CASE("virtual value closed forms and numeric route") {
    const auto uni = DistributionSpec::uniform_scaled({1.0});
    CHECK(uni.virtual_value(0, 0.75) == Approx(0.5));
    CHECK(uni.virtual_value(0, 0.5) == Approx(0.0));

    const auto exp2 = DistributionSpec::exponential({2.0});
    CHECK(exp2.virtual_value(0, 1.0) == Approx(0.5).epsilon(1e-12));
    CHECK(exp2.virtual_value(0, 1.0) == Approx(numeric_virtual(exp2, 0, 1.0)).margin(1e-6));

    CHECK_THROWS_AS(uni.virtual_value(0, 1.5), std::domain_error);
}

TEST_CASE("privacy virtual value and its inverse") {
    const auto uni = DistributionSpec::uniform_scaled({1.0});
    const PrivacyLadder lad({0.5}, {0.3});
    CHECK(privacy_virtual_value(uni, lad, 0, 0.75) == Approx(0.2));

    const PrivacyLadder zero({0.5}, {0.0});
    for (double v = 0.05; v < 1.0; v += 0.05)
        CHECK(privacy_virtual_value(uni, zero, 0, v) == Approx(uni.virtual_value(0, v)));

    const auto exp1 = DistributionSpec::exponential({1.0});
    const PrivacyLadder lad5({0.5}, {0.5});
    CHECK(privacy_virtual_value(exp1, lad5, 0, 2.0) == Approx(0.5).epsilon(1e-12));

    CHECK(inv_privacy_virtual_value(uni, lad, 0, 0.0) == Approx(0.65).margin(1e-9));
    CHECK(inv_privacy_virtual_value(uni, zero, 0, 0.0) == Approx(0.5).margin(1e-9));

    const PrivacyLadder lad2({0.5}, {0.2});
    // closed form v = x + 1/rate + c
    CHECK(inv_privacy_virtual_value(exp1, lad2, 0, 0.3) == Approx(1.5).margin(1e-9));

    CHECK_THROWS_AS(inv_privacy_virtual_value(uni, lad, 0, 5.0), std::range_error);
    CHECK_THROWS_AS(inv_privacy_virtual_value(uni, lad, 0, -5.0), std::range_error);
}

TEST_CASE("inverse round trip on a grid") {
    const auto spec = DistributionSpec::exponential({2.0, 1.0});
    const PrivacyLadder lad({0.2, 0.8}, {0.1, 0.4});
    for (std::size_t k = 0; k < 2; ++k) {
        const double lo = privacy_virtual_value(spec, lad, k, spec.support_min(k));
        const double hi = privacy_virtual_value(spec, lad, k, spec.support_max(k));
        for (int i = 0; i <= 50; ++i) {
            const double x = lo + (hi - lo) * i / 50.0;
            const double v = inv_privacy_virtual_value(spec, lad, k, x);
            CHECK(privacy_virtual_value(spec, lad, k, v) == Approx(x).margin(1e-9));
        }
    }
}

TEST_CASE("hazard order checks") {
    const auto ordered = DistributionSpec::exponential({2.0, 1.0});
    CHECK(check_hazard_order(ordered, 100).ordered);

    const auto unis = DistributionSpec::uniform_scaled({1.0, 2.0});
    CHECK(check_hazard_order(unis, 100).ordered);

    const auto reversed =
        DistributionSpec::exponential({1.0, 2.0}, Validation::structural_only);
    const auto rep = check_hazard_order(reversed, 100);
    CHECK_FALSE(rep.ordered);
    CHECK(rep.worst_gap == Approx(-1.0));

    // strict construction rejects the reversed family outright
    CHECK_THROWS_AS(DistributionSpec::exponential({1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(check_hazard_order(ordered, 1), std::invalid_argument);
}

TEST_CASE("regularity enforcement rejects decreasing-density tables") {
    // density 5 then 1/3: virtual value jumps down at the knot
    TabulatedLevel bad{{0.0, 0.1, 1.0}, {0.0, 0.5, 1.0}};
    CHECK_THROWS_AS(DistributionSpec::tabulated({bad}), std::invalid_argument);

    // non-decreasing density is regular and accepted
    TabulatedLevel good{{0.0, 0.6, 1.0}, {0.0, 0.4, 1.0}};
    CHECK_NOTHROW(DistributionSpec::tabulated({good}));
}

TEST_CASE("tabulated structural validation") {
    CHECK_THROWS_AS(DistributionSpec::tabulated({TabulatedLevel{{0.0, 1.0}, {0.1, 1.0}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec::tabulated({TabulatedLevel{{1.0, 0.0}, {0.0, 1.0}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec::tabulated({TabulatedLevel{{-0.5, 1.0}, {0.0, 1.0}}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(DistributionSpec::tabulated({TabulatedLevel{{0.0}, {0.0}}}),
                    std::invalid_argument);
}

TEST_CASE("tabulated two-knot table reproduces a shifted uniform") {
    const auto spec = DistributionSpec::tabulated({TabulatedLevel{{0.8, 1.0}, {0.0, 1.0}}});
    CHECK(spec.cdf(0, 0.9) == Approx(0.5));
    CHECK(spec.inv_cdf(0, 0.25) == Approx(0.85));
    CHECK(spec.pdf(0, 0.9) == Approx(5.0));
    CHECK(spec.mean(0) == Approx(0.9));
    // virtual value of U[lo,hi] is 2v - hi
    CHECK(spec.virtual_value(0, 0.9) == Approx(0.8));
}

TEST_CASE("virtual values are monotone on a grid for shipped families") {
    const auto specs = {DistributionSpec::uniform_scaled({1.0, 1.7}),
                        DistributionSpec::exponential({2.0, 1.3}),
                        DistributionSpec::tabulated({TabulatedLevel{{0.0, 0.6, 1.0}, {0.0, 0.4, 1.0}},
                                                     TabulatedLevel{{0.0, 0.7, 1.3}, {0.0, 0.4, 1.0}}})};
    for (const auto& spec : specs) {
        for (std::size_t k = 0; k < spec.levels(); ++k) {
            double prev = -1e300;
            for (int i = 0; i < 1000; ++i) {
                const double v = spec.support_min(k) +
                                 (spec.support_max(k) - spec.support_min(k)) * i / 999.0;
                const double phi = spec.virtual_value(k, v);
                CHECK(phi >= prev - 1e-9);
                prev = phi;
            }
        }
    }
}

TEST_CASE("level ordering identity for privacy virtual values") {
    const auto spec = DistributionSpec::uniform_scaled({1.0, 1.5});
    const PrivacyLadder lad({0.2, 0.7}, {0.1, 0.45});
    for (double v = 0.05; v < 1.0; v += 0.05) {
        const double lhs = privacy_virtual_value(spec, lad, 0, v) -
                           privacy_virtual_value(spec, lad, 1, v);
        const double rhs = (spec.virtual_value(0, v) - spec.virtual_value(1, v)) +
                           (lad.cost(1) - lad.cost(0));
        CHECK(lhs == Approx(rhs).margin(1e-12));
    }
}

TEST_CASE("coupled samples") {
    const auto spec = DistributionSpec::uniform_scaled({1.0, 2.0});
    CHECK(sample_coupled(spec, LatentCoupling{0.0}) == std::vector<double>{0.0, 0.0});
    CHECK(sample_coupled(spec, LatentCoupling{1.0}) == std::vector<double>{1.0, 2.0});
    const auto mid = sample_coupled(spec, LatentCoupling{0.5});
    CHECK(mid[0] == Approx(0.5));
    CHECK(mid[1] == Approx(1.0));

    // monotone across levels for every u on a grid (stochastic order)
    const auto exps = DistributionSpec::exponential({2.0, 1.0, 0.5});
    for (int i = 0; i <= 100; ++i) {
        const auto vals = sample_coupled(exps, LatentCoupling{i / 100.0});
        for (std::size_t k = 1; k < vals.size(); ++k) CHECK(vals[k] >= vals[k - 1]);
    }
    CHECK_THROWS_AS(sample_coupled(spec, LatentCoupling{1.5}), std::domain_error);
}

TEST_CASE("prefix keeps the leading levels") {
    const auto spec = DistributionSpec::uniform_scaled({1.0, 1.5, 2.0});
    const auto p2 = spec.prefix(2);
    CHECK(p2.levels() == 2);
    CHECK(p2.support_max(1) == Approx(1.5));
    CHECK_THROWS_AS(spec.prefix(4), std::invalid_argument);
}
