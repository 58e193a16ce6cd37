#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "privmech/distributions.hpp"
#include "privmech/rng.hpp"
#include "privmech/stats.hpp"

namespace privmech {

// Reported values, one row per searcher, one column per privacy level.
struct SealedBidProfile {
    std::vector<std::vector<double>> values;  // n x ell, all >= 0

    std::size_t searchers() const noexcept { return values.size(); }

    void validate(std::size_t ell) const {
        if (values.empty()) throw std::invalid_argument("profile: needs at least one searcher");
        for (const auto& row : values) {
            if (row.size() != ell)
                throw std::invalid_argument("profile: row length does not match level count");
            for (double v : row)
                if (!(v >= 0.0)) throw std::invalid_argument("profile: negative value");
        }
    }
};

struct AuctionOutcome {
    std::optional<std::size_t> winner;
    std::optional<std::size_t> level;
    double payment = 0.0;
    double user_net_utility = 0.0;  // payment - cost at the sold level, 0 if no sale

    bool sold() const noexcept { return winner.has_value(); }
};

// Winner selection by privacy-enhanced virtual value, threshold payment.
// The winner pays the price whose virtual value matches the best opposing
// tuple (floored at the level reserve); no sale when every tuple is <= 0.
inline AuctionOutcome run_optimal_auction(const SealedBidProfile& profile,
                                          const DistributionSpec& spec,
                                          const PrivacyLadder& ladder, Philox4x32& tie_rng) {
    const std::size_t ell = spec.levels();
    if (ladder.levels() != ell)
        throw std::invalid_argument("run_optimal_auction: ladder/spec level mismatch");
    profile.validate(ell);
    const std::size_t n = profile.searchers();

    std::vector<std::vector<double>> phi(n, std::vector<double>(ell));
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < ell; ++k) {
            phi[i][k] = privacy_virtual_value(spec, ladder, k, profile.values[i][k]);
            best = std::max(best, phi[i][k]);
        }

    AuctionOutcome out;
    if (!(best > 0.0)) return out;

    std::vector<std::pair<std::size_t, std::size_t>> argmax;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < ell; ++k)
            if (phi[i][k] == best) argmax.emplace_back(i, k);
    const auto [wi, wk] =
        argmax.size() == 1 ? argmax[0] : argmax[tie_rng.next_below(argmax.size())];

    // Critical payment: best tuple among the other searchers, floored at 0 so
    // the sale never happens below the level reserve.
    double rival = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == wi) continue;
        for (std::size_t k = 0; k < ell; ++k) rival = std::max(rival, phi[i][k]);
    }

    out.winner = wi;
    out.level = wk;
    out.payment = inv_privacy_virtual_value(spec, ladder, wk, rival);
    out.user_net_utility = out.payment - ladder.cost(wk);
    return out;
}

namespace detail {

inline SealedBidProfile draw_profile(const DistributionSpec& spec, std::size_t n,
                                     Philox4x32& stream) {
    SealedBidProfile profile;
    profile.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        profile.values.push_back(sample_coupled(spec, LatentCoupling{stream.next_unit()}));
    return profile;
}

}  // namespace detail

// Monte Carlo estimate of the user's expected net utility under the optimal
// auction with coupled per-searcher sampling. Trial t draws from substream
// (seed, t), so estimates pair exactly with virtual_welfare_mc at equal seed.
inline Estimate expected_net_utility_mc(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                        std::size_t n, std::uint64_t trials, std::uint64_t seed,
                                        unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("expected_net_utility_mc: trials must be >= 1");
    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 stream = derive_substream(seed, t);
        const SealedBidProfile profile = detail::draw_profile(spec, n, stream);
        const AuctionOutcome out = run_optimal_auction(profile, spec, ladder, stream);
        a.stat.add(out.user_net_utility);
    });
    return Estimate::from(acc.stat);
}

// Monte Carlo estimate of E[max(0, max_{i,k} phi_k(v_ik) - c_k)] over the
// same per-trial substreams as expected_net_utility_mc.
inline Estimate virtual_welfare_mc(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                   std::size_t n, std::uint64_t trials, std::uint64_t seed,
                                   unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("virtual_welfare_mc: trials must be >= 1");
    const std::size_t ell = spec.levels();
    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 stream = derive_substream(seed, t);
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto values = sample_coupled(spec, LatentCoupling{stream.next_unit()});
            for (std::size_t k = 0; k < ell; ++k)
                best = std::max(best, privacy_virtual_value(spec, ladder, k, values[k]));
        }
        a.stat.add(best);
    });
    return Estimate::from(acc.stat);
}

struct TruthfulnessReport {
    double max_gain = -std::numeric_limits<double>::infinity();
    std::size_t searcher = 0;
    std::size_t level = 0;
    double misreport = 0.0;
    std::uint64_t profiles = 0;
};

namespace detail {

inline double searcher_utility(const AuctionOutcome& out, std::size_t i,
                               const std::vector<double>& true_values) {
    if (!out.sold() || *out.winner != i) return 0.0;
    return true_values[*out.level] - out.payment;
}

}  // namespace detail

// Replays sampled profiles with every grid misreport (one entry at a time)
// and reports the maximum utility gain any searcher can realize over truth.
inline TruthfulnessReport truthfulness_audit(const DistributionSpec& spec,
                                             const PrivacyLadder& ladder, std::size_t n,
                                             std::size_t deviation_grid, std::uint64_t trials,
                                             std::uint64_t seed) {
    if (deviation_grid < 2) throw std::invalid_argument("truthfulness_audit: grid must be >= 2");
    const std::size_t ell = spec.levels();
    TruthfulnessReport rep;
    rep.profiles = trials;

    std::vector<std::vector<double>> grids(ell);
    for (std::size_t k = 0; k < ell; ++k) {
        const double lo = spec.support_min(k);
        const double hi = spec.support_max(k);
        grids[k].resize(deviation_grid);
        for (std::size_t g = 0; g < deviation_grid; ++g)
            grids[k][g] = lo + (hi - lo) * static_cast<double>(g) / (deviation_grid - 1);
    }

    for (std::uint64_t t = 0; t < trials; ++t) {
        Philox4x32 stream = derive_substream(seed, t);
        SealedBidProfile profile = detail::draw_profile(spec, n, stream);

        // Identical tie coins across the truthful run and every replay.
        Philox4x32 ties = derive_substream(seed ^ 0x74696573u, t);
        Philox4x32 coin = ties;
        const AuctionOutcome truthful = run_optimal_auction(profile, spec, ladder, coin);

        for (std::size_t i = 0; i < n; ++i) {
            const std::vector<double> true_row = profile.values[i];
            const double base = detail::searcher_utility(truthful, i, true_row);
            for (std::size_t k = 0; k < ell; ++k) {
                const double saved = profile.values[i][k];
                for (double r : grids[k]) {
                    profile.values[i][k] = r;
                    Philox4x32 replay = ties;
                    const AuctionOutcome dev = run_optimal_auction(profile, spec, ladder, replay);
                    const double gain = detail::searcher_utility(dev, i, true_row) - base;
                    if (gain > rep.max_gain) {
                        rep.max_gain = gain;
                        rep.searcher = i;
                        rep.level = k;
                        rep.misreport = r;
                    }
                }
                profile.values[i][k] = saved;
            }
        }
    }
    return rep;
}

}  // namespace privmech
