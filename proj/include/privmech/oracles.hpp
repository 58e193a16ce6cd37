#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "privmech/distributions.hpp"
#include "privmech/marketplace.hpp"
#include "privmech/rng.hpp"
#include "privmech/stats.hpp"

namespace privmech {

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exhaustive search stays tractable only on desk-scale instances.
struct SmallInstanceBound {
    std::size_t max_n = 4;
    std::size_t max_m = 4;
    std::size_t max_ell = 3;
};

struct BruteForceResult {
    double welfare = 0.0;
    std::vector<Trade> trades;
    std::vector<std::size_t> keep_level;
};

// Exact optimal social welfare of a realization: searches every feasible
// (x, y) -- each transaction sold to one free searcher at one level or kept
// at one level -- via exhaustive recursion over transactions with a
// used-searcher mask (subproblems shared).
inline BruteForceResult brute_force_optimal_welfare(const Realization& r,
                                                    SmallInstanceBound bound = {}) {
    if (r.n > bound.max_n || r.m > bound.max_m || r.ell > bound.max_ell)
        throw BudgetError("brute_force_optimal_welfare: instance exceeds enumeration budget");
    const std::size_t nmask = std::size_t{1} << r.n;

    // best[j][mask]: optimum over transactions j..m-1 with `mask` searchers used
    std::vector<std::vector<double>> best(r.m + 1, std::vector<double>(nmask, 0.0));
    for (std::size_t j = r.m; j-- > 0;) {
        for (std::size_t mask = 0; mask < nmask; ++mask) {
            double opt = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < r.ell; ++k)
                opt = std::max(opt, r.cost(j, k) + best[j + 1][mask]);
            for (std::size_t i = 0; i < r.n; ++i) {
                if (mask & (std::size_t{1} << i)) continue;
                for (std::size_t k = 0; k < r.ell; ++k)
                    opt = std::max(opt,
                                   r.value(i, j, k) + best[j + 1][mask | (std::size_t{1} << i)]);
            }
            best[j][mask] = opt;
        }
    }

    BruteForceResult res;
    res.keep_level.assign(r.m, no_match);
    res.welfare = best[0][0];

    std::size_t mask = 0;
    for (std::size_t j = 0; j < r.m; ++j) {
        const double target = best[j][mask];
        bool chosen = false;
        for (std::size_t k = 0; k < r.ell && !chosen; ++k) {
            if (r.cost(j, k) + best[j + 1][mask] == target) {
                res.keep_level[j] = k;
                chosen = true;
            }
        }
        for (std::size_t i = 0; i < r.n && !chosen; ++i) {
            if (mask & (std::size_t{1} << i)) continue;
            for (std::size_t k = 0; k < r.ell && !chosen; ++k) {
                const std::size_t next = mask | (std::size_t{1} << i);
                if (r.value(i, j, k) + best[j + 1][next] == target) {
                    res.trades.push_back(Trade{i, j, k, 0.0});
                    mask = next;
                    chosen = true;
                }
            }
        }
        if (!chosen) throw std::logic_error("brute_force_optimal_welfare: reconstruction failed");
    }
    validate_feasible(r.n, r.m, r.ell, res.trades, res.keep_level);
    return res;
}

// E[OPT] by Monte Carlo: realizations drawn from the same substream layout
// as welfare_mc, so equal seeds pair the two estimates realization-by-
// realization.
inline Estimate expected_optimal_welfare_mc(const MarketInstance& inst, std::uint64_t trials,
                                            std::uint64_t seed, unsigned threads = 1,
                                            SmallInstanceBound bound = {}) {
    if (trials < 1) throw std::invalid_argument("expected_optimal_welfare_mc: trials must be >= 1");
    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 vs = derive_substream(seed, 4 * t);
        Philox4x32 cs = derive_substream(seed, 4 * t + 1);
        const Realization r = draw_realization(inst, vs, cs);
        a.stat.add(brute_force_optimal_welfare(r, bound).welfare);
    });
    return Estimate::from(acc.stat);
}

// Exact optimal expected net utility of the one-sided auction under coupled
// sampling, by quadrature on the survival function:
//   OPT = integral_0^T (1 - H(t)^n) dt,  H(t) = min_k F_k(phitilde_k^{-1}(t)).
// Independent of the Monte Carlo path it is used to judge.
inline double brute_force_optimal_revenue(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                          std::size_t n, std::size_t quadrature_points = 20001) {
    if (n < 1) throw std::invalid_argument("brute_force_optimal_revenue: n must be >= 1");
    if (quadrature_points < 3)
        throw std::invalid_argument("brute_force_optimal_revenue: too few quadrature points");
    const std::size_t ell = spec.levels();

    std::vector<double> lo_phi(ell), hi_phi(ell);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ell; ++k) {
        lo_phi[k] = privacy_virtual_value(spec, ladder, k, spec.support_min(k));
        hi_phi[k] = privacy_virtual_value(spec, ladder, k, spec.support_max(k));
        top = std::max(top, hi_phi[k]);
    }
    if (!(top > 0.0)) return 0.0;

    auto H = [&](double t) {
        double h = 1.0;
        for (std::size_t k = 0; k < ell; ++k) {
            double g;
            if (t < lo_phi[k])
                g = 0.0;
            else if (t >= hi_phi[k])
                g = 1.0;
            else
                g = spec.cdf(k, inv_privacy_virtual_value(spec, ladder, k, t));
            h = std::min(h, g);
        }
        return h;
    };

    std::size_t intervals = quadrature_points - 1;
    if (intervals % 2) ++intervals;
    const double h = top / static_cast<double>(intervals);
    auto f = [&](double t) { return 1.0 - std::pow(H(t), static_cast<double>(n)); };
    double acc = f(0.0) + f(top);
    for (std::size_t i = 1; i < intervals; ++i)
        acc += f(h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

struct MarketDeviationReport {
    double user_worst_gain = -std::numeric_limits<double>::infinity();
    double searcher_worst_gain = -std::numeric_limits<double>::infinity();
    std::uint64_t trials = 0;
};

namespace detail {

// Absolute user utility: the posted price when sold, the kept cost when not.
inline double user_utility(const MarketOutcome& out, const Realization& r, std::size_t j) {
    if (out.user_receipts[j] > 0.0) return out.user_receipts[j];
    return out.keep_level[j] != no_match ? r.cost(j, out.keep_level[j]) : 0.0;
}

inline double searcher_utility(const MarketOutcome& out, const Realization& r, std::size_t i) {
    for (const auto& t : out.trades)
        if (t.searcher == i) return r.value(i, t.user, t.level) - t.price;
    return 0.0;
}

}  // namespace detail

// Replays each trial's exact coins with one agent's decision altered: users
// flip their query answer, searchers are forced onto each alternative
// transaction (or abstention). Reports the worst utility gain per role.
inline MarketDeviationReport marketplace_deviation_audit(const MarketInstance& inst,
                                                         const OfferBook& book,
                                                         std::uint64_t trials, std::uint64_t seed,
                                                         OrderPolicy policy = OrderPolicy::uniform_random) {
    MarketDeviationReport rep;
    rep.trials = trials;
    for (std::uint64_t t = 0; t < trials; ++t) {
        Philox4x32 vs = derive_substream(seed, 4 * t);
        Philox4x32 cs = derive_substream(seed, 4 * t + 1);
        Philox4x32 coins = derive_substream(seed, 4 * t + 2);
        Philox4x32 ord = derive_substream(seed, 4 * t + 3);
        const Realization r = draw_realization(inst, vs, cs);
        const auto order = detail::trial_order(inst, policy, ord);

        Philox4x32 replay = coins;
        const MarketOutcome truthful = run_marketplace(inst, r, book, order, replay);

        for (std::size_t j = 0; j < inst.m; ++j) {
            if (!book.worth[j]) continue;
            const double base = detail::user_utility(truthful, r, j);
            for (bool accepts : {false, true}) {
                MarketOverrides ov;
                ov.user = j;
                ov.user_accepts = accepts;
                replay = coins;
                const MarketOutcome dev = run_marketplace(inst, r, book, order, replay, &ov);
                rep.user_worst_gain =
                    std::max(rep.user_worst_gain, detail::user_utility(dev, r, j) - base);
            }
        }

        for (std::size_t i = 0; i < inst.n; ++i) {
            const double base = detail::searcher_utility(truthful, r, i);
            for (std::size_t pick = 0; pick <= inst.m; ++pick) {
                MarketOverrides ov;
                ov.searcher = i;
                ov.forced_pick = pick < inst.m ? pick : no_match;
                replay = coins;
                const MarketOutcome dev = run_marketplace(inst, r, book, order, replay, &ov);
                rep.searcher_worst_gain =
                    std::max(rep.searcher_worst_gain, detail::searcher_utility(dev, r, i) - base);
            }
        }
    }
    return rep;
}

}  // namespace privmech
