#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "privmech/distributions.hpp"
#include "privmech/optimal_auction.hpp"
#include "privmech/rng.hpp"
#include "privmech/stats.hpp"

namespace privmech {

// Probability that a reward is the one collected conditional on clearing the
// threshold, under uniform tie-breaking among the clearers:
// P_n(x) = (1/n) * (1 - x^n) / (1 - x), with P_n(1) = 1 by explicit branch.
inline double pn(double x, std::size_t n) {
    if (n < 1) throw std::domain_error("pn: n must be >= 1");
    if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("pn: x out of [0,1]");
    if (n == 1) return 1.0;
    if (x == 1.0) return 1.0;
    if (1.0 - x < 1e-6) {
        // geometric-sum form, stable near the removable singularity
        double acc = 1.0, pw = 1.0;
        for (std::size_t l = 1; l < n; ++l) {
            pw *= x;
            acc += pw;
        }
        return acc / static_cast<double>(n);
    }
    return (1.0 - std::pow(x, static_cast<double>(n))) / (static_cast<double>(n) * (1.0 - x));
}

// Reward-space distribution for one prophet round: either a direct law or
// the image of a valuation level under its privacy-enhanced virtual value.
class RewardDistribution {
    enum class Kind { uniform, exponential, level };

public:
    static RewardDistribution uniform(double lo, double hi) {
        if (!(hi > lo)) throw std::invalid_argument("reward uniform: needs lo < hi");
        RewardDistribution d;
        d.kind_ = Kind::uniform;
        d.a_ = lo;
        d.b_ = hi;
        return d;
    }

    static RewardDistribution exponential(double rate) {
        if (!(rate > 0.0)) throw std::invalid_argument("reward exponential: needs rate > 0");
        RewardDistribution d;
        d.kind_ = Kind::exponential;
        d.a_ = rate;
        return d;
    }

    static RewardDistribution from_level(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                         std::size_t k) {
        RewardDistribution d;
        d.kind_ = Kind::level;
        d.spec_ = std::make_shared<DistributionSpec>(spec);
        d.ladder_ = std::make_shared<PrivacyLadder>(ladder);
        d.level_ = k;
        return d;
    }

    double quantile(double q) const {
        switch (kind_) {
            case Kind::uniform:
                return a_ + (b_ - a_) * q;
            case Kind::exponential:
                return -std::log1p(-std::min(q, 1.0 - 1e-15)) / a_;
            case Kind::level:
                return privacy_virtual_value(*spec_, *ladder_, level_, spec_->inv_cdf(level_, q));
        }
        return 0.0;
    }

    double cdf(double x) const {
        switch (kind_) {
            case Kind::uniform:
                return std::clamp((x - a_) / (b_ - a_), 0.0, 1.0);
            case Kind::exponential:
                return x <= 0.0 ? 0.0 : -std::expm1(-a_ * x);
            case Kind::level: {
                const double lo = privacy_virtual_value(*spec_, *ladder_, level_,
                                                        spec_->support_min(level_));
                const double hi = privacy_virtual_value(*spec_, *ladder_, level_,
                                                        spec_->support_max(level_));
                if (x <= lo) return 0.0;
                if (x >= hi) return 1.0;
                return spec_->cdf(level_, inv_privacy_virtual_value(*spec_, *ladder_, level_, x));
            }
        }
        return 0.0;
    }

private:
    RewardDistribution() = default;
    Kind kind_ = Kind::uniform;
    double a_ = 0.0, b_ = 1.0;
    std::shared_ptr<const DistributionSpec> spec_;
    std::shared_ptr<const PrivacyLadder> ladder_;
    std::size_t level_ = 0;
};

// Threshold-stopping game: n rewards, one reward distribution per round
// (a single entry is shared by every round).
struct ProphetModel {
    std::vector<RewardDistribution> rounds;
    std::size_t n_rewards = 1;

    static ProphetModel single(RewardDistribution g, std::size_t n) {
        ProphetModel m;
        m.rounds.push_back(std::move(g));
        m.n_rewards = n;
        return m;
    }

    static ProphetModel from_levels(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                    std::size_t n) {
        ProphetModel m;
        m.n_rewards = n;
        for (std::size_t k = 0; k < spec.levels(); ++k)
            m.rounds.push_back(RewardDistribution::from_level(spec, ladder, k));
        return m;
    }

    const RewardDistribution& round(std::size_t k) const {
        return rounds.size() == 1 ? rounds.front() : rounds.at(k);
    }

    // Best reward available to one latent draw across all rounds.
    double best_reward(double u) const {
        double best = rounds.front().quantile(u);
        for (std::size_t k = 1; k < rounds.size(); ++k)
            best = std::max(best, rounds[k].quantile(u));
        return best;
    }
};

struct RewardThresholds {
    std::vector<double> taus;  // strictly decreasing
};

// tau_k at the e^{-k/n} quantile of round k's reward distribution.
inline RewardThresholds prophet_thresholds(const ProphetModel& model, std::size_t ell) {
    if (ell < 1) throw std::invalid_argument("prophet_thresholds: ell must be >= 1");
    if (model.n_rewards < 1) throw std::invalid_argument("prophet_thresholds: n must be >= 1");
    RewardThresholds out;
    out.taus.resize(ell);
    for (std::size_t k = 0; k < ell; ++k) {
        const double q = std::exp(-static_cast<double>(k + 1) / static_cast<double>(model.n_rewards));
        out.taus[k] = model.round(k).quantile(q);
        if (k > 0 && !(out.taus[k] < out.taus[k - 1]))
            throw std::invalid_argument("prophet_thresholds: thresholds not strictly decreasing at round " +
                                        std::to_string(k));
    }
    return out;
}

// Floors thresholds at zero and drops the duplicates that arise; rounds at
// an identical threshold collect identically, so this is behavior-preserving.
inline RewardThresholds clamp_thresholds_at_zero(const RewardThresholds& taus) {
    RewardThresholds out;
    for (double t : taus.taus) {
        const double c = std::max(t, 0.0);
        if (out.taus.empty() || c < out.taus.back()) out.taus.push_back(c);
    }
    return out;
}

struct EquilibriumThresholds {
    std::vector<double> tau_hats;  // strictly decreasing, in value space
};

// tau_hat_k = inverse privacy-enhanced virtual value of max(tau_k, 0).
inline EquilibriumThresholds equilibrium_thresholds(const DistributionSpec& spec,
                                                    const PrivacyLadder& ladder,
                                                    const RewardThresholds& taus) {
    if (taus.taus.size() != spec.levels())
        throw std::invalid_argument("equilibrium_thresholds: threshold/level count mismatch");
    EquilibriumThresholds out;
    out.tau_hats.resize(taus.taus.size());
    for (std::size_t k = 0; k < taus.taus.size(); ++k) {
        out.tau_hats[k] = inv_privacy_virtual_value(spec, ladder, k, std::max(taus.taus[k], 0.0));
        if (k > 0 && !(out.tau_hats[k] < out.tau_hats[k - 1]))
            throw std::invalid_argument(
                "equilibrium_thresholds: value thresholds not strictly decreasing at level " +
                std::to_string(k));
    }
    return out;
}

struct PricePrivacySchedule {
    std::vector<double> prices;          // price for round k, paired with level k
    bool single_bidder_collapse = false; // n = 1 makes every price equal tau_hat_ell
};

// Recovers announced prices from the equilibrium thresholds: the last price
// equals the last threshold and earlier prices solve the indifference
// equation backwards. a_k = F_k(tau_hat_k) / F_{k-1}(tau_hat_{k-1}).
inline PricePrivacySchedule prices_from_thresholds(const DistributionSpec& spec,
                                                   const PrivacyLadder& ladder,
                                                   const EquilibriumThresholds& tau_hats,
                                                   std::size_t n) {
    if (n < 1) throw std::invalid_argument("prices_from_thresholds: n must be >= 1");
    const std::size_t ell = tau_hats.tau_hats.size();
    if (ell != spec.levels())
        throw std::invalid_argument("prices_from_thresholds: threshold/level count mismatch");

    std::vector<double> a(ell);
    double prev_mass = 1.0;
    for (std::size_t k = 0; k < ell; ++k) {
        const double mass = spec.cdf(k, tau_hats.tau_hats[k]);
        if (!(mass > 0.0) || mass > prev_mass * (1.0 + 1e-12))
            throw std::invalid_argument("prices_from_thresholds: degenerate threshold at level " +
                                        std::to_string(k));
        a[k] = std::min(mass / prev_mass, 1.0);
        prev_mass = mass;
    }

    PricePrivacySchedule sched;
    sched.prices.resize(ell);
    sched.prices[ell - 1] = tau_hats.tau_hats[ell - 1];
    for (std::size_t k = ell - 1; k-- > 0;) {
        const double coef = std::pow(a[k], static_cast<double>(n - 1)) * pn(a[k + 1], n) / pn(a[k], n);
        sched.prices[k] =
            tau_hats.tau_hats[k] - coef * (tau_hats.tau_hats[k] - sched.prices[k + 1]);
    }
    sched.single_bidder_collapse = (n == 1 && ell > 1);

    if (n >= 2) {
        for (std::size_t k = 0; k + 1 < ell; ++k)
            if (!(sched.prices[k] > sched.prices[k + 1]))
                throw std::invalid_argument("prices_from_thresholds: prices not strictly decreasing at round " +
                                            std::to_string(k));
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ell; ++k) {
            const double phi = privacy_virtual_value(spec, ladder, k, sched.prices[k]);
            if (!(phi < prev))
                throw std::invalid_argument(
                    "prices_from_thresholds: posted virtual values not strictly decreasing at round " +
                    std::to_string(k));
            prev = phi;
        }
    }
    return sched;
}

// Largest absolute residual of the indifference equation over all rounds.
inline double indifference_residual(const DistributionSpec& spec,
                                    const EquilibriumThresholds& tau_hats,
                                    const PricePrivacySchedule& sched, std::size_t n) {
    const std::size_t ell = tau_hats.tau_hats.size();
    double worst = 0.0;
    double prev_mass = 1.0;
    std::vector<double> a(ell);
    for (std::size_t k = 0; k < ell; ++k) {
        const double mass = spec.cdf(k, tau_hats.tau_hats[k]);
        a[k] = mass / prev_mass;
        prev_mass = mass;
    }
    for (std::size_t k = 0; k + 1 < ell; ++k) {
        const double lhs = pn(a[k], n) * (tau_hats.tau_hats[k] - sched.prices[k]);
        const double rhs = std::pow(a[k], static_cast<double>(n - 1)) * pn(a[k + 1], n) *
                           (tau_hats.tau_hats[k] - sched.prices[k + 1]);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

struct DecreasingVirtualsReport {
    bool decreasing = true;       // posted virtual values strictly decreasing
    bool cost_gap_dominates = true;  // c_{k+1} - c_k > sup_v (phi_{k+1} - phi_k)
    double worst_margin = std::numeric_limits<double>::infinity();
};

inline DecreasingVirtualsReport check_decreasing_virtuals(const DistributionSpec& spec,
                                                          const PrivacyLadder& ladder,
                                                          const PricePrivacySchedule& sched,
                                                          std::size_t grid_size) {
    DecreasingVirtualsReport rep;
    const std::size_t ell = sched.prices.size();
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ell; ++k) {
        const double phi = privacy_virtual_value(spec, ladder, k, sched.prices[k]);
        if (!(phi < prev)) rep.decreasing = false;
        prev = phi;
    }
    for (std::size_t k = 0; k + 1 < ell; ++k) {
        const double lo = std::max(spec.support_min(k), spec.support_min(k + 1));
        const double hi = std::min(spec.support_max(k), spec.support_max(k + 1));
        double sup = -std::numeric_limits<double>::infinity();
        const std::size_t pts = std::max<std::size_t>(grid_size, 2);
        for (std::size_t j = 0; j < pts; ++j) {
            const double v =
                std::clamp(lo + (hi - lo) * static_cast<double>(j) / (pts - 1), lo, hi);
            sup = std::max(sup, spec.virtual_value(k + 1, v) - spec.virtual_value(k, v));
        }
        const double margin = (ladder.cost(k + 1) - ladder.cost(k)) - sup;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (!(margin > 0.0)) rep.cost_gap_dominates = false;
    }
    return rep;
}

// Descent simulation: each searcher bids the first round whose value
// threshold her level value clears; the earliest occupied round wins and the
// winner pays that round's posted price.
inline AuctionOutcome run_dutch_auction(const PricePrivacySchedule& sched,
                                        const EquilibriumThresholds& tau_hats,
                                        const PrivacyLadder& ladder,
                                        const std::vector<std::vector<double>>& values,
                                        Philox4x32& tie_rng) {
    const std::size_t ell = sched.prices.size();
    if (tau_hats.tau_hats.size() != ell || ladder.levels() != ell)
        throw std::invalid_argument("run_dutch_auction: schedule/threshold/ladder size mismatch");

    constexpr std::size_t no_bid = static_cast<std::size_t>(-1);
    std::size_t best_round = no_bid;
    std::vector<std::size_t> leaders;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != ell)
            throw std::invalid_argument("run_dutch_auction: value row length mismatch");
        std::size_t round = no_bid;
        for (std::size_t k = 0; k < ell; ++k) {
            if (values[i][k] >= tau_hats.tau_hats[k]) {
                round = k;
                break;
            }
        }
        if (round == no_bid) continue;
        if (best_round == no_bid || round < best_round) {
            best_round = round;
            leaders.assign(1, i);
        } else if (round == best_round) {
            leaders.push_back(i);
        }
    }

    AuctionOutcome out;
    if (best_round == no_bid) return out;
    out.winner = leaders.size() == 1 ? leaders[0] : leaders[tie_rng.next_below(leaders.size())];
    out.level = best_round;
    out.payment = sched.prices[best_round];
    out.user_net_utility = out.payment - ladder.cost(best_round);
    return out;
}

// One pass of the threshold game: draw n latent rewards, scan rounds in
// order and collect uniformly among the clearers of the first occupied round.
inline Estimate simulate_batched_prophet(const ProphetModel& model, const RewardThresholds& taus,
                                         std::uint64_t trials, std::uint64_t seed,
                                         unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("simulate_batched_prophet: trials must be >= 1");
    for (std::size_t k = 0; k + 1 < taus.taus.size(); ++k)
        if (!(taus.taus[k] > taus.taus[k + 1]))
            throw std::invalid_argument("simulate_batched_prophet: thresholds must strictly decrease");
    const std::size_t n = model.n_rewards;
    const std::size_t ell = taus.taus.size();

    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 stream = derive_substream(seed, t);
        thread_local std::vector<double> u;
        u.resize(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = stream.next_unit();

        double collected = 0.0;
        for (std::size_t k = 0; k < ell; ++k) {
            const auto& g = model.round(k);
            std::size_t clearers = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (g.quantile(u[i]) >= taus.taus[k]) ++clearers;
            if (clearers == 0) continue;
            std::uint64_t pick = clearers == 1 ? 0 : stream.next_below(clearers);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = g.quantile(u[i]);
                if (r < taus.taus[k]) continue;
                if (pick == 0) {
                    collected = r;
                    break;
                }
                --pick;
            }
            break;
        }
        a.stat.add(collected);
    });
    return Estimate::from(acc.stat);
}

// OPT = E[max(0, best reward among the n draws over all rounds)], sampled on
// the same per-trial substreams as simulate_batched_prophet.
inline Estimate prophet_opt(const ProphetModel& model, std::uint64_t trials, std::uint64_t seed,
                            unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("prophet_opt: trials must be >= 1");
    const std::size_t n = model.n_rewards;
    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 stream = derive_substream(seed, t);
        double best = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            best = std::max(best, model.best_reward(stream.next_unit()));
        a.stat.add(best);
    });
    return Estimate::from(acc.stat);
}

// Expected user net utility of the descent auction with coupled sampling.
inline Estimate dutch_net_utility_mc(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                     const EquilibriumThresholds& tau_hats,
                                     const PricePrivacySchedule& sched, std::size_t n,
                                     std::uint64_t trials, std::uint64_t seed,
                                     unsigned threads = 1) {
    if (trials < 1) throw std::invalid_argument("dutch_net_utility_mc: trials must be >= 1");
    const std::size_t ell = spec.levels();
    auto acc = parallel_reduce<MeanAcc>(trials, threads, [&](std::uint64_t t, MeanAcc& a) {
        Philox4x32 stream = derive_substream(seed, t);
        thread_local std::vector<std::vector<double>> values;
        values.assign(n, std::vector<double>(ell));
        for (std::size_t i = 0; i < n; ++i) {
            const double u = stream.next_unit();
            for (std::size_t k = 0; k < ell; ++k) values[i][k] = spec.inv_cdf(k, u);
        }
        const AuctionOutcome out = run_dutch_auction(sched, tau_hats, ladder, values, stream);
        a.stat.add(out.user_net_utility);
    });
    return Estimate::from(acc.stat);
}

}  // namespace privmech
