#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "privmech/distributions.hpp"
#include "privmech/matching.hpp"
#include "privmech/rng.hpp"
#include "privmech/stats.hpp"

namespace privmech {

// Two-sided market (n searchers, m users, ell privacy levels). Every value
// and cost coordinate has its own marginal; draws are independent across
// coordinates, each trial using dedicated substreams.
struct MarketInstance {
    std::size_t n = 0, m = 0, ell = 0;
    std::vector<std::vector<DistributionSpec>> values;  // [i][j], each with ell levels
    std::vector<DistributionSpec> costs;                // [j], each with ell levels
    std::vector<PrivacyLadder> ladders;                 // [j]

    MarketInstance(std::vector<std::vector<DistributionSpec>> values_in,
                   std::vector<DistributionSpec> costs_in, std::vector<PrivacyLadder> ladders_in)
        : values(std::move(values_in)), costs(std::move(costs_in)), ladders(std::move(ladders_in)) {
        n = values.size();
        m = costs.size();
        if (n == 0 || m == 0) throw std::invalid_argument("market: needs n >= 1 and m >= 1");
        ell = costs.front().levels();
        if (ladders.size() != m) throw std::invalid_argument("market: need one ladder per user");
        for (std::size_t j = 0; j < m; ++j) {
            if (costs[j].levels() != ell)
                throw std::invalid_argument("market: cost level count mismatch for user " +
                                            std::to_string(j));
            if (ladders[j].levels() != ell)
                throw std::invalid_argument("market: ladder level count mismatch for user " +
                                            std::to_string(j));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (values[i].size() != m)
                throw std::invalid_argument("market: value spec row length mismatch for searcher " +
                                            std::to_string(i));
            for (std::size_t j = 0; j < m; ++j)
                if (values[i][j].levels() != ell)
                    throw std::invalid_argument("market: value level count mismatch at (" +
                                                std::to_string(i) + "," + std::to_string(j) + ")");
        }
    }

    // Ladders with evenly spaced epsilons and costs set to the cost means.
    static MarketInstance with_default_ladders(std::vector<std::vector<DistributionSpec>> values_in,
                                               std::vector<DistributionSpec> costs_in) {
        const std::size_t m = costs_in.size();
        std::vector<PrivacyLadder> ladders;
        ladders.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t ell = costs_in[j].levels();
            std::vector<double> eps(ell), mean_costs(ell);
            for (std::size_t k = 0; k < ell; ++k) {
                eps[k] = static_cast<double>(k + 1) / static_cast<double>(ell);
                mean_costs[k] = costs_in[j].mean(k);
            }
            ladders.emplace_back(std::move(eps), std::move(mean_costs));
        }
        return MarketInstance(std::move(values_in), std::move(costs_in), std::move(ladders));
    }
};

struct Realization {
    std::size_t n = 0, m = 0, ell = 0;
    std::vector<double> values;  // flat [i][j][k]
    std::vector<double> costs;   // flat [j][k]

    double value(std::size_t i, std::size_t j, std::size_t k) const {
        return values[(i * m + j) * ell + k];
    }
    double cost(std::size_t j, std::size_t k) const { return costs[j * ell + k]; }
};

inline Realization draw_realization(const MarketInstance& inst, Philox4x32& value_stream,
                                    Philox4x32& cost_stream) {
    Realization r;
    r.n = inst.n;
    r.m = inst.m;
    r.ell = inst.ell;
    r.values.resize(inst.n * inst.m * inst.ell);
    r.costs.resize(inst.m * inst.ell);
    for (std::size_t i = 0; i < inst.n; ++i)
        for (std::size_t j = 0; j < inst.m; ++j)
            for (std::size_t k = 0; k < inst.ell; ++k)
                r.values[(i * inst.m + j) * inst.ell + k] =
                    inst.values[i][j].inv_cdf(k, value_stream.next_unit());
    for (std::size_t j = 0; j < inst.m; ++j)
        for (std::size_t k = 0; k < inst.ell; ++k)
            r.costs[j * inst.ell + k] = inst.costs[j].inv_cdf(k, cost_stream.next_unit());
    return r;
}

// Maximum expected-surplus matching at a fixed baseline level; edges with
// non-positive surplus stay unmatched. Returns searcher index per user.
inline std::vector<std::size_t> baseline_matching(const MarketInstance& inst, std::size_t k0) {
    if (k0 >= inst.ell) throw std::domain_error("baseline_matching: bad level index");
    std::vector<std::vector<double>> w(inst.n, std::vector<double>(inst.m));
    for (std::size_t i = 0; i < inst.n; ++i)
        for (std::size_t j = 0; j < inst.m; ++j)
            w[i][j] = std::max(inst.values[i][j].mean(k0) - inst.costs[j].mean(k0), 0.0);
    const auto by_searcher = max_weight_matching(w);
    std::vector<std::size_t> by_user(inst.m, no_match);
    for (std::size_t i = 0; i < inst.n; ++i)
        if (by_searcher[i] != no_match) by_user[by_searcher[i]] = i;
    return by_user;
}

struct LevelSelection {
    std::vector<std::size_t> level;              // per user; 0 when unmatched
    std::vector<std::vector<double>> sw_scores;  // per user x level; empty row when unmatched
};

// Picks k*_j maximizing the ex-ante score
// SW_{j,k} = E[c] + 1{E[v] >= 4 E[c]} * (E[v] - E[c]) / 2, ties to the
// smallest (strongest-privacy) level.
inline LevelSelection privacy_level_selection(const MarketInstance& inst,
                                              const std::vector<std::size_t>& matching) {
    if (matching.size() != inst.m)
        throw std::invalid_argument("privacy_level_selection: matching size mismatch");
    LevelSelection sel;
    sel.level.assign(inst.m, 0);
    sel.sw_scores.resize(inst.m);
    for (std::size_t j = 0; j < inst.m; ++j) {
        const std::size_t i = matching[j];
        if (i == no_match) continue;
        auto& scores = sel.sw_scores[j];
        scores.resize(inst.ell);
        std::size_t best = 0;
        for (std::size_t k = 0; k < inst.ell; ++k) {
            const double ev = inst.values[i][j].mean(k);
            const double ec = inst.costs[j].mean(k);
            scores[k] = ec + (ev >= 4.0 * ec ? 0.5 * (ev - ec) : 0.0);
            if (scores[k] > scores[best]) best = k;
        }
        sel.level[j] = best;
    }
    return sel;
}

struct OfferBook {
    std::vector<std::size_t> matched;  // searcher per user, or no_match
    std::vector<std::size_t> level;    // k*_j per user (0 if unmatched)
    std::vector<char> worth;           // W membership
    std::vector<double> price;         // posted price, 0 unless worth
    std::vector<double> query_prob;    // query probability, 0 unless worth
    std::vector<std::vector<double>> sw_scores;
};

// Worth-matching classification (4x rule), half-expected-value posted
// prices, and query probabilities q_j = 1 / (2 G(p_j)) clamped into (0,1].
inline OfferBook build_offer_book(const MarketInstance& inst,
                                  const std::vector<std::size_t>& matching,
                                  const LevelSelection& sel) {
    OfferBook book;
    book.matched = matching;
    book.level = sel.level;
    book.sw_scores = sel.sw_scores;
    book.worth.assign(inst.m, 0);
    book.price.assign(inst.m, 0.0);
    book.query_prob.assign(inst.m, 0.0);
    for (std::size_t j = 0; j < inst.m; ++j) {
        const std::size_t i = matching[j];
        if (i == no_match) continue;
        const std::size_t k = sel.level[j];
        const double ev = inst.values[i][j].mean(k);
        const double ec = inst.costs[j].mean(k);
        if (!(ev >= 4.0 * ec)) continue;
        book.worth[j] = 1;
        book.price[j] = 0.5 * ev;
        const double mass = inst.costs[j].cdf(k, book.price[j]);
        if (!(mass > 0.0))
            throw std::invalid_argument("build_offer_book: cost support entirely above price for user " +
                                        std::to_string(j));
        book.query_prob[j] = std::clamp(0.5 / mass, 0.0, 1.0);
    }
    return book;
}

struct Trade {
    std::size_t searcher, user, level;
    double price;
};

struct MarketOutcome {
    std::vector<Trade> trades;            // in user order
    std::vector<std::size_t> keep_level;  // per user, no_match when sold
    std::vector<double> searcher_payments;
    std::vector<double> user_receipts;
    std::vector<char> on_shelf;  // per user: offer queried and accepted
    double welfare = 0.0;
    double searcher_welfare = 0.0;  // sum of traded values
    double user_welfare = 0.0;      // sum of kept costs

    // Both totals walk the trade list in the same order so budget balance
    // holds with zero floating-point drift.
    double total_payments() const {
        double s = 0.0;
        for (const auto& t : trades) s += t.price;
        return s;
    }
    double total_receipts() const {
        double s = 0.0;
        for (const auto& t : trades) s += t.price;
        return s;
    }
};

// Shared feasibility validator: unit-demand searchers, every transaction
// either sold once or kept at exactly one level.
inline void validate_feasible(std::size_t n, std::size_t m, std::size_t ell,
                              const std::vector<Trade>& trades,
                              const std::vector<std::size_t>& keep_level) {
    if (keep_level.size() != m) throw std::invalid_argument("outcome: keep vector size mismatch");
    std::vector<unsigned> per_searcher(n, 0), per_user(m, 0);
    for (const auto& t : trades) {
        if (t.searcher >= n || t.user >= m || t.level >= ell)
            throw std::invalid_argument("outcome: trade index out of range");
        ++per_searcher[t.searcher];
        ++per_user[t.user];
    }
    for (std::size_t i = 0; i < n; ++i)
        if (per_searcher[i] > 1) throw std::invalid_argument("outcome: searcher buys twice");
    for (std::size_t j = 0; j < m; ++j) {
        const bool kept = keep_level[j] != no_match;
        if (kept && keep_level[j] >= ell) throw std::invalid_argument("outcome: bad keep level");
        if (per_user[j] + (kept ? 1u : 0u) != 1u)
            throw std::invalid_argument("outcome: transaction " + std::to_string(j) +
                                        " not exactly sold-or-kept");
    }
}

// Realized social welfare: traded values plus kept costs.
inline double social_welfare(const MarketOutcome& out, const Realization& r) {
    validate_feasible(r.n, r.m, r.ell, out.trades, out.keep_level);
    double sw = 0.0;
    for (const auto& t : out.trades) sw += r.value(t.searcher, t.user, t.level);
    for (std::size_t j = 0; j < r.m; ++j)
        if (out.keep_level[j] != no_match) sw += r.cost(j, out.keep_level[j]);
    return sw;
}

// Deviation hooks for the audit oracle; inactive by default.
struct MarketOverrides {
    std::size_t user = no_match;
    bool user_accepts = false;  // forced query answer for `user`
    std::size_t searcher = no_match;
    std::size_t forced_pick = no_match;  // transaction to buy; no_match = abstain
};

// Stage 1: each offer-holding user is queried with probability q_j and
// truthfully accepts when the price covers her realized cost. Stage 2:
// searchers arrive in `order` and buy the utility-maximizing shelf
// transaction, declining when every option is negative.
inline MarketOutcome run_marketplace(const MarketInstance& inst, const Realization& r,
                                     const OfferBook& book, const std::vector<std::size_t>& order,
                                     Philox4x32& coin_rng,
                                     const MarketOverrides* overrides = nullptr) {
    if (order.size() != inst.n) throw std::invalid_argument("run_marketplace: bad order size");
    {
        std::vector<char> seen(inst.n, 0);
        for (std::size_t i : order) {
            if (i >= inst.n || seen[i]) throw std::invalid_argument("run_marketplace: order is not a permutation");
            seen[i] = 1;
        }
    }

    MarketOutcome out;
    out.keep_level.assign(inst.m, no_match);
    out.searcher_payments.assign(inst.n, 0.0);
    out.user_receipts.assign(inst.m, 0.0);
    out.on_shelf.assign(inst.m, 0);

    std::vector<char> available(inst.m, 0);
    for (std::size_t j = 0; j < inst.m; ++j) {
        if (!book.worth[j]) continue;
        const bool queried = coin_rng.next_unit() < book.query_prob[j];
        if (!queried) continue;
        bool accepts = book.price[j] >= r.cost(j, book.level[j]);
        if (overrides && overrides->user == j) accepts = overrides->user_accepts;
        if (accepts) {
            available[j] = 1;
            out.on_shelf[j] = 1;
        }
    }

    for (std::size_t i : order) {
        std::size_t pick = no_match;
        double best = 0.0;
        for (std::size_t j = 0; j < inst.m; ++j) {
            if (!available[j]) continue;
            const double util = r.value(i, j, book.level[j]) - book.price[j];
            if (util >= 0.0 && (pick == no_match || util > best)) {
                pick = j;
                best = util;
            }
        }
        if (overrides && overrides->searcher == i) {
            const std::size_t forced = overrides->forced_pick;
            pick = (forced != no_match && forced < inst.m && available[forced]) ? forced : no_match;
        }
        if (pick == no_match) continue;
        available[pick] = 0;
        out.trades.push_back(Trade{i, pick, book.level[pick], book.price[pick]});
        out.searcher_payments[i] = book.price[pick];
        out.user_receipts[pick] = book.price[pick];
    }

    std::sort(out.trades.begin(), out.trades.end(),
              [](const Trade& a, const Trade& b) { return a.user < b.user; });

    for (std::size_t j = 0; j < inst.m; ++j) {
        if (out.user_receipts[j] > 0.0) continue;  // sold; posted prices are positive
        out.keep_level[j] = book.matched[j] != no_match ? book.level[j] : 0;
    }

    for (const auto& t : out.trades) out.searcher_welfare += r.value(t.searcher, t.user, t.level);
    for (std::size_t j = 0; j < inst.m; ++j)
        if (out.keep_level[j] != no_match) out.user_welfare += r.cost(j, out.keep_level[j]);
    out.welfare = out.searcher_welfare + out.user_welfare;
    return out;
}

enum class OrderPolicy { fixed, uniform_random };

struct WelfareMcResult {
    Estimate alg, alg_searchers, alg_users;
    std::uint64_t bb_violations = 0;
    std::uint64_t ir_violations = 0;
    std::vector<std::uint64_t> shelf_counts;  // per user
    std::uint64_t trials = 0;
};

namespace detail {

struct MarketAcc {
    RunningStat alg, algS, algU;
    std::uint64_t bb = 0, ir = 0;
    std::vector<std::uint64_t> shelf;

    void merge(const MarketAcc& o) {
        alg.merge(o.alg);
        algS.merge(o.algS);
        algU.merge(o.algU);
        bb += o.bb;
        ir += o.ir;
        if (shelf.size() < o.shelf.size()) shelf.resize(o.shelf.size(), 0);
        for (std::size_t j = 0; j < o.shelf.size(); ++j) shelf[j] += o.shelf[j];
    }
};

inline std::vector<std::size_t> trial_order(const MarketInstance& inst, OrderPolicy policy,
                                            Philox4x32& order_stream) {
    std::vector<std::size_t> order(inst.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (policy == OrderPolicy::uniform_random) {
        for (std::size_t i = inst.n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(order_stream.next_below(i));
            std::swap(order[i - 1], order[j]);
        }
    }
    return order;
}

}  // namespace detail

// Monte Carlo over realizations, query coins and arrival orders; splits the
// welfare into searcher side (traded values) and user side (kept costs) and
// tallies budget-balance and individual-rationality violations per trial.
inline WelfareMcResult welfare_mc(const MarketInstance& inst, const OfferBook& book,
                                  std::uint64_t trials, std::uint64_t seed, OrderPolicy policy,
                                  unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("welfare_mc: trials must be >= 1");

    auto acc = parallel_reduce<detail::MarketAcc>(trials, threads, [&](std::uint64_t t,
                                                                       detail::MarketAcc& a) {
        Philox4x32 vs = derive_substream(seed, 4 * t);
        Philox4x32 cs = derive_substream(seed, 4 * t + 1);
        Philox4x32 coins = derive_substream(seed, 4 * t + 2);
        Philox4x32 ord = derive_substream(seed, 4 * t + 3);

        const Realization r = draw_realization(inst, vs, cs);
        const auto order = detail::trial_order(inst, policy, ord);
        const MarketOutcome out = run_marketplace(inst, r, book, order, coins);

        a.alg.add(out.welfare);
        a.algS.add(out.searcher_welfare);
        a.algU.add(out.user_welfare);
        if (out.total_payments() != out.total_receipts()) ++a.bb;
        for (const auto& trade : out.trades) {
            const double v = r.value(trade.searcher, trade.user, trade.level);
            const double c = r.cost(trade.user, trade.level);
            if (!(v >= trade.price && trade.price >= c)) ++a.ir;
        }
        if (a.shelf.size() < inst.m) a.shelf.resize(inst.m, 0);
        for (std::size_t j = 0; j < inst.m; ++j) a.shelf[j] += out.on_shelf[j] ? 1 : 0;
    });

    WelfareMcResult res;
    res.alg = Estimate::from(acc.alg);
    res.alg_searchers = Estimate::from(acc.algS);
    res.alg_users = Estimate::from(acc.algU);
    res.bb_violations = acc.bb;
    res.ir_violations = acc.ir;
    res.shelf_counts = std::vector<std::uint64_t>(acc.shelf.begin(), acc.shelf.end());
    res.shelf_counts.resize(inst.m, 0);
    res.trials = trials;
    return res;
}

}  // namespace privmech
