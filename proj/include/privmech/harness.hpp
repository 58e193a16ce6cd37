#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "privmech/config.hpp"
#include "privmech/dutch_auction.hpp"
#include "privmech/marketplace.hpp"
#include "privmech/optimal_auction.hpp"
#include "privmech/oracles.hpp"

namespace privmech {

inline std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct Report {
    std::string mechanism;
    std::uint64_t seed = 0;
    std::vector<EstimateRecord> records;
    std::vector<std::string> warnings;
    std::vector<std::string> check_failures;
    std::map<std::string, std::string> plot_files;  // filename -> csv body

    void add(const char* label, const Estimate& e, std::uint64_t s) {
        records.push_back(EstimateRecord::from(label, e, s));
    }
    void add(std::string label, const Estimate& e, std::uint64_t s) {
        records.push_back(EstimateRecord::from(std::move(label), e, s));
    }
    void add_value(std::string label, double value, std::uint64_t trials, std::uint64_t s) {
        records.push_back(EstimateRecord{std::move(label), value, 0.0, 0.0, trials, s});
    }
    void require(bool ok, const std::string& what) {
        if (!ok) check_failures.push_back(what);
    }

    std::string results_csv() const {
        std::string out = "label,estimate,stderr,ci95,trials,seed\n";
        for (const auto& r : records)
            out += r.label + "," + fmt17(r.estimate) + "," + fmt17(r.std_error) + "," +
                   fmt17(r.ci95) + "," + std::to_string(r.trials) + "," + std::to_string(r.seed) +
                   "\n";
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mechanism"] = mechanism;
        j["seed"] = seed;
        j["records"] = nlohmann::ordered_json::array();
        for (const auto& r : records) {
            nlohmann::ordered_json rec;
            rec["label"] = r.label;
            rec["estimate"] = r.estimate;
            rec["stderr"] = r.std_error;
            rec["ci95"] = r.ci95;
            rec["trials"] = r.trials;
            rec["seed"] = r.seed;
            j["records"].push_back(rec);
        }
        j["warnings"] = warnings;
        j["check_failures"] = check_failures;
        return j;
    }
};

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << body;
}

}  // namespace detail

inline void write_report(const Report& rep, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    detail::write_file(fs::path(out_dir) / "results.csv", rep.results_csv());
    detail::write_file(fs::path(out_dir) / "results.json", rep.to_json().dump(2) + "\n");
    for (const auto& [name, body] : rep.plot_files)
        detail::write_file(fs::path(out_dir) / name, body);
}

// ---------------------------------------------------------------------------
// Randomized small market instances (shared by the market batch runner and
// the verification suites).
inline MarketInstance random_market_instance(std::uint64_t seed, std::uint64_t index,
                                             std::size_t max_n, std::size_t max_m,
                                             std::size_t max_ell) {
    Philox4x32 g = derive_substream(seed ^ 0x6d61726b65746969ull, index);
    const std::size_t n = 1 + static_cast<std::size_t>(g.next_below(max_n));
    const std::size_t m = 1 + static_cast<std::size_t>(g.next_below(max_m));
    const std::size_t ell = 1 + static_cast<std::size_t>(g.next_below(max_ell));

    auto rising_uniform = [&](double lo, double hi, double max_growth) {
        std::vector<double> his(ell);
        his[0] = g.uniform(lo, hi);
        for (std::size_t k = 1; k < ell; ++k) his[k] = his[k - 1] * (1.0 + g.uniform(0.0, max_growth));
        return his;
    };

    std::vector<std::vector<DistributionSpec>> values;
    values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<DistributionSpec> row;
        row.reserve(m);
        for (std::size_t j = 0; j < m; ++j) {
            if (g.next_below(2) == 0) {
                row.push_back(DistributionSpec::uniform_scaled(rising_uniform(0.6, 2.0, 0.25)));
            } else {
                std::vector<double> rates(ell);
                rates[0] = g.uniform(0.8, 2.5);
                for (std::size_t k = 1; k < ell; ++k)
                    rates[k] = rates[k - 1] / (1.0 + g.uniform(0.0, 0.3));
                row.push_back(DistributionSpec::exponential(std::move(rates)));
            }
        }
        values.push_back(std::move(row));
    }
    std::vector<DistributionSpec> costs;
    costs.reserve(m);
    for (std::size_t j = 0; j < m; ++j)
        costs.push_back(DistributionSpec::uniform_scaled(rising_uniform(0.05, 0.6, 0.25)));
    return MarketInstance::with_default_ladders(std::move(values), std::move(costs));
}

// ---------------------------------------------------------------------------
// Mechanism runners

inline void run_optimal_experiment(const ExperimentConfig& cfg, Report& rep) {
    const OptimalConfig& oc = *cfg.optimal;
    const Estimate net = expected_net_utility_mc(oc.values, oc.ladder, oc.n, cfg.trials, cfg.seed,
                                                 cfg.threads);
    const Estimate virt =
        virtual_welfare_mc(oc.values, oc.ladder, oc.n, cfg.trials, cfg.seed, cfg.threads);
    rep.add("expected_net_utility", net, cfg.seed);
    rep.add("virtual_welfare", virt, cfg.seed);

    const double gap = std::abs(net.mean - virt.mean);
    const double allowed = 2.0 * (net.ci95 + virt.ci95);
    rep.add_value("myerson_identity_gap", gap, cfg.trials, cfg.seed);
    rep.add_value("myerson_identity_allowance", allowed, cfg.trials, cfg.seed);
    rep.require(gap <= allowed, "myerson identity gap " + fmt17(gap) + " exceeds " + fmt17(allowed));

    if (oc.audit) {
        const TruthfulnessReport audit = truthfulness_audit(oc.values, oc.ladder, oc.n,
                                                            oc.audit->grid, oc.audit->profiles,
                                                            cfg.seed);
        rep.add_value("audit_max_gain", audit.max_gain, audit.profiles, cfg.seed);
        rep.require(audit.max_gain <= 1e-9,
                    "truthfulness audit gain " + fmt17(audit.max_gain) + " exceeds 1e-9");
    }
}

inline void run_dutch_experiment(const ExperimentConfig& cfg, Report& rep) {
    const DutchConfig& dc = *cfg.dutch;
    std::string plot = "ell,estimate,ci95,opt,ratio\n";
    double prev_ratio = 0.0, prev_tol = 0.0;
    bool first = true;
    for (std::size_t ell : dc.ell_sweep) {
        const DistributionSpec spec = dc.values.prefix(ell);
        const PrivacyLadder ladder = dc.ladder.prefix(ell);
        const ProphetModel model = ProphetModel::from_levels(spec, ladder, dc.n);
        const RewardThresholds taus = prophet_thresholds(model, ell);
        const EquilibriumThresholds tau_hats = equilibrium_thresholds(spec, ladder, taus);
        const PricePrivacySchedule sched = prices_from_thresholds(spec, ladder, tau_hats, dc.n);
        if (sched.single_bidder_collapse)
            rep.warnings.push_back("ell=" + std::to_string(ell) +
                                   ": single bidder collapses every price to the final threshold");

        const double residual = indifference_residual(spec, tau_hats, sched, dc.n);
        rep.add_value("dutch_indifference_residual_ell=" + std::to_string(ell), residual, 1,
                      cfg.seed);
        rep.require(residual < 1e-9, "indifference residual " + fmt17(residual) +
                                         " at ell=" + std::to_string(ell));

        const Estimate net = dutch_net_utility_mc(spec, ladder, tau_hats, sched, dc.n, cfg.trials,
                                                  cfg.seed, cfg.threads);
        const double opt = brute_force_optimal_revenue(spec, ladder, dc.n, dc.opt_quadrature);
        const double ratio = opt > 0.0 ? net.mean / opt : 0.0;
        const double ratio_tol = opt > 0.0 ? 3.0 * net.ci95 / opt : 0.0;
        const double bound = 1.0 - std::exp(-static_cast<double>(ell));

        rep.add("dutch_net_utility_ell=" + std::to_string(ell), net, cfg.seed);
        rep.add_value("dutch_opt_ell=" + std::to_string(ell), opt, cfg.trials, cfg.seed);
        rep.add_value("dutch_ratio_ell=" + std::to_string(ell), ratio, cfg.trials, cfg.seed);
        rep.require(ratio >= bound - ratio_tol,
                    "dutch ratio " + fmt17(ratio) + " below bound " + fmt17(bound) +
                        " at ell=" + std::to_string(ell));
        if (!first)
            rep.require(ratio >= prev_ratio - (ratio_tol + prev_tol),
                        "dutch ratio not non-decreasing at ell=" + std::to_string(ell));
        first = false;
        prev_ratio = ratio;
        prev_tol = ratio_tol;

        plot += std::to_string(ell) + "," + fmt17(net.mean) + "," + fmt17(net.ci95) + "," +
                fmt17(opt) + "," + fmt17(ratio) + "\n";
    }
    rep.plot_files["plotdata_revenue_vs_ell.csv"] = plot;
}

inline void run_prophet_experiment(const ExperimentConfig& cfg, Report& rep) {
    const ProphetConfig& pc = *cfg.prophet;
    const RewardDistribution g = pc.reward.family == "uniform"
                                     ? RewardDistribution::uniform(pc.reward.lo, pc.reward.hi)
                                     : RewardDistribution::exponential(pc.reward.rate);
    std::string plot = "n,ell,alg,alg_ci95,opt,opt_ci95,ratio,bound\n";
    for (std::size_t n : pc.n_list) {
        for (std::size_t ell : pc.ell_list) {
            const ProphetModel model = ProphetModel::single(g, n);
            RewardThresholds taus = prophet_thresholds(model, ell);
            if (pc.clamp_thresholds) taus = clamp_thresholds_at_zero(taus);
            const Estimate alg = simulate_batched_prophet(model, taus, cfg.trials, cfg.seed,
                                                          cfg.threads);
            const Estimate opt = prophet_opt(model, cfg.trials, cfg.seed, cfg.threads);
            const std::string tag = "n=" + std::to_string(n) + "_ell=" + std::to_string(ell);
            rep.add("prophet_alg_" + tag, alg, cfg.seed);
            rep.add("prophet_opt_" + tag, opt, cfg.seed);

            const double bound = 1.0 - std::exp(-static_cast<double>(ell));
            const double ratio = opt.mean > 0.0 ? alg.mean / opt.mean : 0.0;
            const double tol =
                opt.mean > 0.0 ? 3.0 * (alg.ci95 + ratio * opt.ci95) / opt.mean : 0.0;
            rep.add_value("prophet_ratio_" + tag, ratio, cfg.trials, cfg.seed);
            rep.require(ratio >= bound - tol, "prophet ratio " + fmt17(ratio) + " below bound " +
                                                  fmt17(bound) + " for " + tag);
            plot += std::to_string(n) + "," + std::to_string(ell) + "," + fmt17(alg.mean) + "," +
                    fmt17(alg.ci95) + "," + fmt17(opt.mean) + "," + fmt17(opt.ci95) + "," +
                    fmt17(ratio) + "," + fmt17(bound) + "\n";
        }
    }
    rep.plot_files["plotdata_prophet_ratio.csv"] = plot;
}

struct MarketRunSummary {
    WelfareMcResult mc;
    Estimate opt;       // trials == 0 when the oracle join is disabled
    OfferBook book;
};

inline MarketRunSummary run_market_single(const MarketInstance& inst, std::size_t baseline_level,
                                          OrderPolicy policy, std::uint64_t alg_trials,
                                          std::uint64_t oracle_trials, std::uint64_t seed,
                                          unsigned threads) {
    const auto matching = baseline_matching(inst, baseline_level);
    const auto selection = privacy_level_selection(inst, matching);
    MarketRunSummary s{WelfareMcResult{}, Estimate{}, build_offer_book(inst, matching, selection)};
    s.mc = welfare_mc(inst, s.book, alg_trials, seed, policy, threads);
    if (oracle_trials > 0)
        s.opt = expected_optimal_welfare_mc(inst, oracle_trials, seed ^ 0x4f5054ull, threads);
    return s;
}

inline void market_checks(Report& rep, const MarketRunSummary& s, const std::string& tag) {
    rep.require(s.mc.bb_violations == 0,
                tag + ": " + std::to_string(s.mc.bb_violations) + " budget-balance violations");
    rep.require(s.mc.ir_violations == 0,
                tag + ": " + std::to_string(s.mc.ir_violations) + " individual-rationality violations");
    if (s.opt.trials > 0) {
        const double lhs = s.mc.alg.mean;
        const double rhs = s.opt.mean / 6.0 - 3.0 * (s.mc.alg.ci95 + s.opt.ci95 / 6.0);
        rep.require(lhs >= rhs, tag + ": welfare " + fmt17(lhs) + " below one-sixth bound " +
                                    fmt17(rhs));
    }
}

inline void run_market_experiment(const ExperimentConfig& cfg, Report& rep) {
    const MarketConfig& mc = *cfg.market;
    if (mc.single) {
        const MarketSingleConfig& sc = *mc.single;
        const MarketRunSummary s =
            run_market_single(sc.instance, sc.baseline_level, sc.policy, cfg.trials,
                              sc.oracle_trials, cfg.seed, cfg.threads);
        rep.add("market_alg", s.mc.alg, cfg.seed);
        rep.add("market_alg_searchers", s.mc.alg_searchers, cfg.seed);
        rep.add("market_alg_users", s.mc.alg_users, cfg.seed);
        rep.add_value("market_bb_violations", static_cast<double>(s.mc.bb_violations), cfg.trials,
                      cfg.seed);
        rep.add_value("market_ir_violations", static_cast<double>(s.mc.ir_violations), cfg.trials,
                      cfg.seed);

        std::string plot = "instance,n,m,ell,alg,alg_ci95,opt,opt_ci95,ratio\n";
        for (std::size_t j = 0; j < sc.instance.m; ++j) {
            if (!s.book.worth[j]) continue;
            const double freq =
                static_cast<double>(s.mc.shelf_counts[j]) / static_cast<double>(cfg.trials);
            const double se = std::sqrt(0.25 / static_cast<double>(cfg.trials));
            rep.add_value("market_shelf_freq_user=" + std::to_string(j), freq, cfg.trials, cfg.seed);
            rep.require(std::abs(freq - 0.5) <= 3.0 * se,
                        "shelf frequency for user " + std::to_string(j) + " is " + fmt17(freq));
        }
        if (s.opt.trials > 0) {
            rep.add("market_opt", s.opt, cfg.seed);
            const double ratio = s.opt.mean > 0.0 ? s.mc.alg.mean / s.opt.mean : 0.0;
            rep.add_value("market_ratio", ratio, cfg.trials, cfg.seed);
            plot += "0," + std::to_string(sc.instance.n) + "," + std::to_string(sc.instance.m) +
                    "," + std::to_string(sc.instance.ell) + "," + fmt17(s.mc.alg.mean) + "," +
                    fmt17(s.mc.alg.ci95) + "," + fmt17(s.opt.mean) + "," + fmt17(s.opt.ci95) + "," +
                    fmt17(ratio) + "\n";
            rep.plot_files["plotdata_ratio_vs_instance.csv"] = plot;
        }
        market_checks(rep, s, "market");
    } else {
        const MarketBatchConfig& bc = *mc.batch;
        std::string plot = "instance,n,m,ell,alg,alg_ci95,opt,opt_ci95,ratio\n";
        for (std::size_t idx = 0; idx < bc.instances; ++idx) {
            const MarketInstance inst =
                random_market_instance(cfg.seed, idx, bc.max_n, bc.max_m, bc.max_ell);
            const std::uint64_t inst_seed = cfg.seed + 0x9E3779B97F4A7C15ull * (idx + 1);
            const MarketRunSummary s =
                run_market_single(inst, bc.baseline_level, bc.policy, bc.alg_trials,
                                  bc.oracle_trials, inst_seed, cfg.threads);
            const std::string tag = "instance_" + std::to_string(idx);
            rep.add("market_alg_" + tag, s.mc.alg, inst_seed);
            const double ratio = s.opt.mean > 0.0 ? s.mc.alg.mean / s.opt.mean : 0.0;
            if (s.opt.trials > 0) {
                rep.add("market_opt_" + tag, s.opt, inst_seed);
                rep.add_value("market_ratio_" + tag, ratio, bc.alg_trials, inst_seed);
            }
            market_checks(rep, s, tag);
            plot += std::to_string(idx) + "," + std::to_string(inst.n) + "," +
                    std::to_string(inst.m) + "," + std::to_string(inst.ell) + "," +
                    fmt17(s.mc.alg.mean) + "," + fmt17(s.mc.alg.ci95) + "," + fmt17(s.opt.mean) +
                    "," + fmt17(s.opt.ci95) + "," + fmt17(ratio) + "\n";
        }
        rep.plot_files["plotdata_ratio_vs_instance.csv"] = plot;
    }
}

inline void run_audit_experiment(const ExperimentConfig& cfg, Report& rep) {
    const AuditConfig& ac = *cfg.audit;
    if (ac.optimal) {
        const OptimalConfig& oc = *ac.optimal;
        const TruthfulnessReport audit = truthfulness_audit(
            oc.values, oc.ladder, oc.n, oc.audit->grid, oc.audit->profiles, cfg.seed);
        rep.add_value("audit_optimal_max_gain", audit.max_gain, audit.profiles, cfg.seed);
        rep.require(audit.max_gain <= 1e-9,
                    "optimal-auction deviation gain " + fmt17(audit.max_gain) + " exceeds 1e-9");
    }
    if (ac.market) {
        const MarketSingleConfig& sc = *ac.market;
        const auto matching = baseline_matching(sc.instance, sc.baseline_level);
        const auto selection = privacy_level_selection(sc.instance, matching);
        const OfferBook book = build_offer_book(sc.instance, matching, selection);
        const MarketDeviationReport dev = marketplace_deviation_audit(
            sc.instance, book, ac.market_trials, cfg.seed, sc.policy);
        rep.add_value("audit_market_user_max_gain", dev.user_worst_gain, dev.trials, cfg.seed);
        rep.add_value("audit_market_searcher_max_gain", dev.searcher_worst_gain, dev.trials,
                      cfg.seed);
        rep.require(dev.user_worst_gain <= 1e-12,
                    "market user deviation gain " + fmt17(dev.user_worst_gain) + " is positive");
        rep.require(dev.searcher_worst_gain <= 1e-12,
                    "market searcher deviation gain " + fmt17(dev.searcher_worst_gain) +
                        " is positive");
    }
}

// Dispatches to the named mechanism, writes results.csv / results.json /
// plotdata_*.csv into out_dir, and returns the report (check failures
// included). Deterministic output for a fixed seed at any thread count.
inline Report run_experiment(const ExperimentConfig& cfg, bool write_files = true) {
    Report rep;
    rep.mechanism = cfg.mechanism;
    rep.seed = cfg.seed;
    if (cfg.optimal)
        run_optimal_experiment(cfg, rep);
    else if (cfg.dutch)
        run_dutch_experiment(cfg, rep);
    else if (cfg.prophet)
        run_prophet_experiment(cfg, rep);
    else if (cfg.market)
        run_market_experiment(cfg, rep);
    else if (cfg.audit)
        run_audit_experiment(cfg, rep);
    else
        throw ConfigError("mechanism", "no mechanism configuration present");
    if (write_files) write_report(rep, cfg.out_dir);
    return rep;
}

}  // namespace privmech
