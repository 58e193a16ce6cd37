// Acceptance suite: runs every contract criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code = number of failed
// criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "privmech/privmech.hpp"

using namespace privmech;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int idx, bool ok, const std::string& name, const std::string& detail) {
    if (!ok) ++failures;
    std::printf("[%2d] %s  %-34s %s\n", idx, ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
    return buf;
}

// --------------------------------------------------------------------------

void criterion_1_myerson_identity() {
    const auto t0 = Clock::now();
    const auto spec = DistributionSpec::uniform_scaled({1.0, 2.0});
    const PrivacyLadder lad({0.25, 0.75}, {0.1, 0.5});
    const auto net = expected_net_utility_mc(spec, lad, 2, 1000000, 1, 1);
    const auto vw = virtual_welfare_mc(spec, lad, 2, 1000000, 1, 1);
    const double gap = std::abs(net.mean - vw.mean);
    const double larger = std::max(net.mean, vw.mean);
    const double elapsed = seconds_since(t0);
    report(1, gap <= 0.01 * larger && elapsed < 30.0, "myerson identity (n=2, ell=2)",
           fmt("gap=%.5f allowed=%.5f  [%.1fs]", gap, 0.01 * larger, elapsed));
}

void criterion_2_known_revenue() {
    const auto unit = DistributionSpec::uniform_scaled({1.0});
    const PrivacyLadder free({0.5}, {0.0});
    const auto est = expected_net_utility_mc(unit, free, 2, 1000000, 1, 1);
    const double target = 5.0 / 12.0;
    const bool ok = est.ci95 <= 0.005 && std::abs(est.mean - target) <= est.ci95;
    report(2, ok, "known revenue 5/12 (n=2, U[0,1])",
           fmt("est=%.6f target=%.6f ci95=%.6f", est.mean, target, est.ci95));
}

void criterion_3_truthfulness() {
    const auto t0 = Clock::now();
    const auto unit = DistributionSpec::uniform_scaled({1.0});
    const PrivacyLadder free({0.5}, {0.0});
    const auto audit = truthfulness_audit(unit, free, 2, 50, 10000, 1);
    const double elapsed = seconds_since(t0);
    report(3, audit.max_gain <= 1e-9 && elapsed < 60.0, "truthfulness audit (50 x 10^4)",
           fmt("max gain=%.3g  [%.1fs]", audit.max_gain, elapsed));
}

void criterion_4_prophet_bound() {
    const auto t0 = Clock::now();
    struct Case {
        const char* name;
        RewardDistribution g;
    };
    const std::vector<Case> gs = {{"U[0,1]", RewardDistribution::uniform(0.0, 1.0)},
                                  {"Exp(1)", RewardDistribution::exponential(1.0)},
                                  {"U[-1,1]", RewardDistribution::uniform(-1.0, 1.0)}};
    bool all_ok = true;
    std::string worst;
    double worst_margin = 1e300;
    for (const auto& gc : gs) {
        for (std::size_t n : {1, 2, 5}) {
            for (std::size_t ell : {1, 2, 3}) {
                const auto model = ProphetModel::single(gc.g, n);
                const auto taus = clamp_thresholds_at_zero(prophet_thresholds(model, ell));
                const auto alg = simulate_batched_prophet(model, taus, 1000000, 7, 2);
                const auto opt = prophet_opt(model, 1000000, 7, 2);
                const double bound = 1.0 - std::exp(-static_cast<double>(ell));
                const double ratio = alg.mean / opt.mean;
                const double tol = 3.0 * (alg.ci95 + ratio * opt.ci95) / opt.mean;
                const bool ok = ratio >= bound - tol;
                if (!ok) {
                    all_ok = false;
                    std::printf("     criterion 4 combo FAIL: G=%s n=%zu ell=%zu ratio=%.6f "
                                "bound=%.6f tol=%.6f\n",
                                gc.name, n, ell, ratio, bound, tol);
                }
                if (ratio - bound < worst_margin) {
                    worst_margin = ratio - bound;
                    worst = std::string(gc.name) + " n=" + std::to_string(n) +
                            " ell=" + std::to_string(ell);
                }
            }
        }
    }
    report(4, all_ok, "batched prophet bound (27 combos)",
           fmt("worst margin=%+.5f at ", worst_margin) + worst +
               fmt("  [%.0fs]", seconds_since(t0)));
}

void criterion_5_single_round_inequality() {
    double worst = 1e300;
    for (std::size_t n = 1; n <= 20; ++n) {
        const double x = std::exp(-1.0 / static_cast<double>(n));
        const double lhs = std::min(1.0 - std::pow(x, static_cast<double>(n)), pn(x, n));
        worst = std::min(worst, lhs - (1.0 - std::exp(-1.0)));
    }
    report(5, worst >= -1e-12, "single-round inequality n=1..20",
           fmt("worst slack=%+.3g (needs >= -1e-12)", worst));
}

void criterion_6_indifference_residual() {
    Philox4x32 gen(2024, 0);
    double worst = 0.0;
    std::size_t built = 0, attempts = 0;
    while (built < 100 && attempts < 20000) {
        ++attempts;
        const std::size_t ell = 1 + gen.next_below(5);
        const std::size_t n = 1 + gen.next_below(6);
        const bool scaled = gen.next_below(3) == 0;

        try {
            std::vector<double> costs(ell), eps(ell);
            double c = gen.uniform(0.0, 0.002);
            for (std::size_t k = 0; k < ell; ++k) {
                costs[k] = c;
                c += gen.uniform(1e-5, 0.002);
                eps[k] = (k + 1.0) / (ell + 1.0);
            }
            DistributionSpec spec = [&] {
                if (scaled) {
                    std::vector<double> his(ell);
                    his[0] = gen.uniform(0.8, 1.2);
                    for (std::size_t k = 1; k < ell; ++k)
                        his[k] = his[k - 1] * (1.0 + gen.uniform(0.0, 0.002));
                    return DistributionSpec::uniform_scaled(his);
                }
                std::vector<TabulatedLevel> tabs(ell);
                double lo = gen.uniform(0.6, 0.9);
                double hi = lo + gen.uniform(0.1, lo * 0.9);  // keep lo > hi/2
                for (std::size_t k = 0; k < ell; ++k) {
                    tabs[k] = TabulatedLevel{{lo, hi}, {0.0, 1.0}};
                    lo += gen.uniform(0.0, 0.001);
                    hi += gen.uniform(0.001, 0.002);
                }
                return DistributionSpec::tabulated(tabs);
            }();
            const PrivacyLadder lad(eps, costs);
            const auto model = ProphetModel::from_levels(spec, lad, n);
            const auto tau_hats = equilibrium_thresholds(spec, lad, prophet_thresholds(model, ell));
            const auto sched = prices_from_thresholds(spec, lad, tau_hats, n);
            worst = std::max(worst, indifference_residual(spec, tau_hats, sched, n));
            ++built;
        } catch (const std::invalid_argument&) {
            // degenerate draw (non-monotone thresholds); redraw
        } catch (const std::range_error&) {
        }
    }
    report(6, built == 100 && worst < 1e-9, "indifference residual (100 configs)",
           fmt("built=%.0f worst=%.2g", static_cast<double>(built), worst));
}

void criterion_7_dutch_ratio() {
    const auto t0 = Clock::now();
    const auto spec = DistributionSpec::tabulated({TabulatedLevel{{0.780, 1.000}, {0.0, 1.0}},
                                                   TabulatedLevel{{0.781, 1.001}, {0.0, 1.0}},
                                                   TabulatedLevel{{0.782, 1.002}, {0.0, 1.0}}});
    const PrivacyLadder lad({0.2, 0.5, 0.9}, {0.0001, 0.0002, 0.0003});
    const std::size_t n = 3;
    bool ok = true;
    std::string detail;
    double prev_ratio = 0.0, prev_tol = 0.0;
    for (std::size_t ell : {1, 2, 3}) {
        const auto ps = spec.prefix(ell);
        const auto pl = lad.prefix(ell);
        const auto model = ProphetModel::from_levels(ps, pl, n);
        const auto tau_hats = equilibrium_thresholds(ps, pl, prophet_thresholds(model, ell));
        const auto sched = prices_from_thresholds(ps, pl, tau_hats, n);
        const auto net = dutch_net_utility_mc(ps, pl, tau_hats, sched, n, 1000000, 7, 2);
        const double opt = brute_force_optimal_revenue(ps, pl, n, 20001);
        const double ratio = net.mean / opt;
        const double tol = 3.0 * net.ci95 / opt;
        const double bound = 1.0 - std::exp(-static_cast<double>(ell));
        if (ratio < bound - tol) ok = false;
        if (ell > 1 && ratio < prev_ratio - (tol + prev_tol)) ok = false;
        prev_ratio = ratio;
        prev_tol = tol;
        detail += fmt("ell=%.0f:%.4f/%.4f ", static_cast<double>(ell), ratio, bound);
    }
    report(7, ok, "dutch net-utility ratio (n=3)", detail + fmt(" [%.0fs]", seconds_since(t0)));
}

struct MarketTallies {
    std::uint64_t bb = 0, ir = 0;
};

void criteria_8_9_10_market_bound(MarketTallies& tallies) {
    const auto t0 = Clock::now();
    bool ok = true;
    double worst_margin = 1e300;
    std::size_t worst_idx = 0;
    for (std::size_t idx = 0; idx < 200; ++idx) {
        const auto inst = random_market_instance(1, idx, 4, 4, 3);
        const std::uint64_t seed = 1 + 0x9E3779B97F4A7C15ull * (idx + 1);
        const auto matching = baseline_matching(inst, 0);
        const auto book = build_offer_book(inst, matching, privacy_level_selection(inst, matching));
        const auto alg = welfare_mc(inst, book, 100000, seed, OrderPolicy::uniform_random, 2);
        const auto opt = expected_optimal_welfare_mc(inst, 10000, seed ^ 0x4f5054ull, 2);
        tallies.bb += alg.bb_violations;
        tallies.ir += alg.ir_violations;
        const double margin =
            alg.alg.mean - (opt.mean / 6.0 - 3.0 * (alg.alg.ci95 + opt.ci95 / 6.0));
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_idx = idx;
        }
        if (margin < 0.0) {
            ok = false;
            std::printf("     criterion 8 instance FAIL: idx=%zu alg=%.4f opt=%.4f\n", idx,
                        alg.alg.mean, opt.mean);
        }
    }
    const double elapsed = seconds_since(t0);
    report(8, ok && elapsed < 900.0, "marketplace 1/6 bound (200 instances)",
           fmt("worst margin=%.4f at instance %.0f  [%.0fs]", worst_margin,
               static_cast<double>(worst_idx), elapsed));
}

void criteria_11_12_hand_instance(MarketTallies& tallies) {
    // thinning on a fixed two-sided instance with two posted offers
    bool thin_ok = true;
    std::string thin_detail;
    {
        const auto inst = MarketInstance::with_default_ladders(
            {{DistributionSpec::uniform_scaled({4.0}), DistributionSpec::uniform_scaled({2.0})},
             {DistributionSpec::uniform_scaled({4.0}), DistributionSpec::uniform_scaled({2.0})}},
            {DistributionSpec::uniform_scaled({0.4}), DistributionSpec::uniform_scaled({0.4})});
        const auto matching = baseline_matching(inst, 0);
        const auto book = build_offer_book(inst, matching, privacy_level_selection(inst, matching));
        const auto res = welfare_mc(inst, book, 100000, 3, OrderPolicy::uniform_random, 2);
        tallies.bb += res.bb_violations;
        tallies.ir += res.ir_violations;
        const double se = std::sqrt(0.25 / 100000.0);
        for (std::size_t j = 0; j < inst.m; ++j) {
            if (!book.worth[j]) continue;
            const double freq = static_cast<double>(res.shelf_counts[j]) / 100000.0;
            if (std::abs(freq - 0.5) > 3.0 * se) thin_ok = false;
            thin_detail += fmt("j=%.0f:%.4f ", static_cast<double>(j), freq);
        }
    }

    // hand-computed single-user instance
    const auto hand = MarketInstance::with_default_ladders(
        {{DistributionSpec::uniform_scaled({2.0})}}, {DistributionSpec::uniform_scaled({0.4})});
    const auto book = build_offer_book(hand, {0}, privacy_level_selection(hand, {0}));
    const auto res = welfare_mc(hand, book, 400000, 1, OrderPolicy::uniform_random, 2);
    const auto opt = expected_optimal_welfare_mc(hand, 100000, 9, 2);
    tallies.bb += res.bb_violations;
    tallies.ir += res.ir_violations;

    const double se = std::sqrt(0.25 / 400000.0);
    const double freq = static_cast<double>(res.shelf_counts[0]) / 400000.0;
    const bool thin2 = std::abs(freq - 0.5) <= 3.0 * se;
    report(11, thin_ok && thin2, "market thinning frequency = 1/2",
           thin_detail + fmt("hand:%.4f (3se=%.4f)", freq, 3.0 * se));

    const bool p_ok = std::abs(book.price[0] - 0.5) < 1e-12;
    const bool q_ok = std::abs(book.query_prob[0] - 0.5) < 1e-12;
    const bool alg_ok = res.alg.ci95 <= 0.003 && std::abs(res.alg.mean - 0.59375) <= res.alg.ci95;
    const bool ratio_ok = res.alg.mean >= opt.mean / 6.0;
    report(12, p_ok && q_ok && alg_ok && ratio_ok, "hand instance p=q=1/2, welfare 19/32",
           fmt("p=%.3f q=%.3f alg=%.5f (ci=%.4f, target 0.59375)", book.price[0],
               book.query_prob[0], res.alg.mean, res.alg.ci95));
}

void criteria_9_10_report(const MarketTallies& tallies) {
    report(9, tallies.bb == 0, "budget balance exactness",
           fmt("violations=%.0f across all marketplace trials", static_cast<double>(tallies.bb)));
    report(10, tallies.ir == 0, "ex-post individual rationality",
           fmt("violations=%.0f across all marketplace trials", static_cast<double>(tallies.ir)));
}

void criterion_13_determinism() {
    namespace fs = std::filesystem;
    nlohmann::json j{{"mechanism", "prophet"},
                     {"seed", 7},
                     {"trials", 1000000},
                     {"reward", {{"family", "uniform"}, {"lo", 0.0}, {"hi", 1.0}}},
                     {"n_list", {1}},
                     {"ell_list", {1}}};
    ExperimentConfig cfg = parse_config(j);

    const fs::path base = fs::temp_directory_path() / "privmech_acceptance";
    fs::remove_all(base);
    std::vector<std::string> bodies;
    for (unsigned threads : {1u, 2u, 1u}) {
        cfg.threads = threads;
        cfg.out_dir = (base / ("run_t" + std::to_string(threads) + "_" +
                               std::to_string(bodies.size())))
                          .string();
        run_experiment(cfg);
        std::ifstream in(fs::path(cfg.out_dir) / "results.csv", std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        bodies.push_back(ss.str());
    }
    const bool ok = !bodies[0].empty() && bodies[0] == bodies[1] && bodies[0] == bodies[2];
    fs::remove_all(base);
    report(13, ok, "byte-identical reruns across threads",
           fmt("%.0f bytes per results.csv", static_cast<double>(bodies[0].size())));
}

}  // namespace

int main() {
    std::printf("acceptance suite\n----------------\n");
    const auto t0 = Clock::now();

    criterion_1_myerson_identity();
    criterion_2_known_revenue();
    criterion_3_truthfulness();
    criterion_4_prophet_bound();
    criterion_5_single_round_inequality();
    criterion_6_indifference_residual();
    criterion_7_dutch_ratio();

    MarketTallies tallies;
    criteria_8_9_10_market_bound(tallies);
    criteria_11_12_hand_instance(tallies);
    criteria_9_10_report(tallies);

    criterion_13_determinism();

    std::printf("----------------\n%d of 13 criteria failed  [total %.0fs]\n", failures,
                seconds_since(t0));
    return failures;
}
