#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "privmech/distributions.hpp"
#include "privmech/marketplace.hpp"

namespace privmech {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

namespace cfg {

using nlohmann::json;

inline const json& require(const json& j, const std::string& path, const std::string& key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key, "missing field");
    return j.at(key);
}

inline double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline std::uint64_t as_count(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        throw ConfigError(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline std::vector<double> as_number_list(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline DistributionSpec parse_spec(const json& j, const std::string& path) {
    const std::string family = as_string(require(j, path, "family"), path + ".family");
    try {
        if (family == "uniform_scaled")
            return DistributionSpec::uniform_scaled(
                as_number_list(require(j, path, "params"), path + ".params"));
        if (family == "exponential")
            return DistributionSpec::exponential(
                as_number_list(require(j, path, "params"), path + ".params"));
        if (family == "tabulated") {
            const json& tables = require(j, path, "tables");
            if (!tables.is_array() || tables.empty())
                throw ConfigError(path + ".tables", "expected a non-empty array of knot tables");
            std::vector<TabulatedLevel> levels;
            for (std::size_t k = 0; k < tables.size(); ++k) {
                const std::string tpath = path + ".tables[" + std::to_string(k) + "]";
                if (!tables[k].is_array() || tables[k].size() < 2)
                    throw ConfigError(tpath, "expected at least two [x,p] knots");
                TabulatedLevel lvl;
                for (std::size_t r = 0; r < tables[k].size(); ++r) {
                    const json& knot = tables[k][r];
                    const std::string kpath = tpath + "[" + std::to_string(r) + "]";
                    if (!knot.is_array() || knot.size() != 2)
                        throw ConfigError(kpath, "expected an [x,p] pair");
                    lvl.xs.push_back(as_number(knot[0], kpath + "[0]"));
                    lvl.ps.push_back(as_number(knot[1], kpath + "[1]"));
                }
                levels.push_back(std::move(lvl));
            }
            return DistributionSpec::tabulated(std::move(levels));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + ".family", "unknown family '" + family + "'");
}

inline PrivacyLadder parse_ladder(const json& j, const std::string& path) {
    try {
        return PrivacyLadder(as_number_list(require(j, path, "epsilons"), path + ".epsilons"),
                             as_number_list(require(j, path, "costs"), path + ".costs"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace cfg

struct AuditParams {
    std::size_t grid = 50;
    std::uint64_t profiles = 10000;
};

struct OptimalConfig {
    std::size_t n = 2;
    DistributionSpec values;
    PrivacyLadder ladder;
    std::optional<AuditParams> audit;
};

struct DutchConfig {
    std::size_t n = 2;
    DistributionSpec values;
    PrivacyLadder ladder;
    std::vector<std::size_t> ell_sweep;
    std::size_t opt_quadrature = 20001;
};

struct ProphetRewardConfig {
    std::string family;  // "uniform" | "exponential"
    double lo = 0.0, hi = 1.0, rate = 1.0;
};

struct ProphetConfig {
    ProphetRewardConfig reward;
    std::vector<std::size_t> n_list;
    std::vector<std::size_t> ell_list;
    bool clamp_thresholds = true;
};

struct MarketSingleConfig {
    MarketInstance instance;
    OrderPolicy policy = OrderPolicy::uniform_random;
    std::uint64_t oracle_trials = 0;
    std::size_t baseline_level = 0;
};

struct MarketBatchConfig {
    std::size_t instances = 20;
    std::size_t max_n = 4, max_m = 4, max_ell = 3;
    std::uint64_t alg_trials = 100000, oracle_trials = 10000;
    OrderPolicy policy = OrderPolicy::uniform_random;
    std::size_t baseline_level = 0;
};

struct MarketConfig {
    std::optional<MarketSingleConfig> single;
    std::optional<MarketBatchConfig> batch;
};

struct AuditConfig {
    std::optional<OptimalConfig> optimal;  // audit params inside
    std::optional<MarketSingleConfig> market;
    std::uint64_t market_trials = 2000;
};

struct ExperimentConfig {
    std::string mechanism;
    std::uint64_t seed = 1;
    std::uint64_t trials = 100000;
    unsigned threads = 1;
    std::string out_dir = "results";
    bool check = false;

    std::optional<OptimalConfig> optimal;
    std::optional<DutchConfig> dutch;
    std::optional<ProphetConfig> prophet;
    std::optional<MarketConfig> market;
    std::optional<AuditConfig> audit;
};

namespace cfg {

inline OptimalConfig parse_optimal(const json& j) {
    OptimalConfig c{2, parse_spec(require(j, "$", "values"), "values"),
                    parse_ladder(require(j, "$", "ladder"), "ladder"), std::nullopt};
    c.n = static_cast<std::size_t>(as_count(require(j, "$", "n"), "n"));
    if (c.n < 1) throw ConfigError("n", "must be >= 1");
    if (c.values.levels() != c.ladder.levels())
        throw ConfigError("ladder", "level count must match values spec");
    if (j.contains("audit")) {
        AuditParams a;
        a.grid = static_cast<std::size_t>(as_count(require(j.at("audit"), "audit", "grid"), "audit.grid"));
        a.profiles = as_count(require(j.at("audit"), "audit", "profiles"), "audit.profiles");
        if (a.grid < 2) throw ConfigError("audit.grid", "must be >= 2");
        c.audit = a;
    }
    return c;
}

inline DutchConfig parse_dutch(const json& j) {
    DutchConfig c{2, parse_spec(require(j, "$", "values"), "values"),
                  parse_ladder(require(j, "$", "ladder"), "ladder"), {}, 20001};
    c.n = static_cast<std::size_t>(as_count(require(j, "$", "n"), "n"));
    if (c.n < 1) throw ConfigError("n", "must be >= 1");
    if (c.values.levels() != c.ladder.levels())
        throw ConfigError("ladder", "level count must match values spec");
    if (j.contains("ell_sweep")) {
        const json& s = j.at("ell_sweep");
        if (!s.is_array() || s.empty()) throw ConfigError("ell_sweep", "expected a non-empty array");
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto ell = static_cast<std::size_t>(
                as_count(s[i], "ell_sweep[" + std::to_string(i) + "]"));
            if (ell < 1 || ell > c.values.levels())
                throw ConfigError("ell_sweep[" + std::to_string(i) + "]",
                                  "round count out of range");
            c.ell_sweep.push_back(ell);
        }
    } else {
        c.ell_sweep.push_back(c.values.levels());
    }
    if (j.contains("opt_quadrature"))
        c.opt_quadrature =
            static_cast<std::size_t>(as_count(j.at("opt_quadrature"), "opt_quadrature"));
    return c;
}

inline ProphetConfig parse_prophet(const json& j) {
    ProphetConfig c;
    const json& r = require(j, "$", "reward");
    c.reward.family = as_string(require(r, "reward", "family"), "reward.family");
    if (c.reward.family == "uniform") {
        c.reward.lo = as_number(require(r, "reward", "lo"), "reward.lo");
        c.reward.hi = as_number(require(r, "reward", "hi"), "reward.hi");
        if (!(c.reward.hi > c.reward.lo)) throw ConfigError("reward.hi", "needs lo < hi");
    } else if (c.reward.family == "exponential") {
        c.reward.rate = as_number(require(r, "reward", "rate"), "reward.rate");
        if (!(c.reward.rate > 0.0)) throw ConfigError("reward.rate", "must be positive");
    } else {
        throw ConfigError("reward.family", "unknown reward family '" + c.reward.family + "'");
    }
    auto parse_list = [&](const char* key) {
        std::vector<std::size_t> out;
        const json& lst = require(j, "$", key);
        if (!lst.is_array() || lst.empty())
            throw ConfigError(key, "expected a non-empty array");
        for (std::size_t i = 0; i < lst.size(); ++i) {
            const auto v = static_cast<std::size_t>(
                as_count(lst[i], std::string(key) + "[" + std::to_string(i) + "]"));
            if (v < 1) throw ConfigError(std::string(key) + "[" + std::to_string(i) + "]", "must be >= 1");
            out.push_back(v);
        }
        return out;
    };
    c.n_list = parse_list("n_list");
    c.ell_list = parse_list("ell_list");
    if (j.contains("clamp_thresholds")) {
        if (!j.at("clamp_thresholds").is_boolean())
            throw ConfigError("clamp_thresholds", "expected a boolean");
        c.clamp_thresholds = j.at("clamp_thresholds").get<bool>();
    }
    return c;
}

inline OrderPolicy parse_order_policy(const json& j, const std::string& path) {
    const std::string s = as_string(j, path);
    if (s == "fixed") return OrderPolicy::fixed;
    if (s == "uniform") return OrderPolicy::uniform_random;
    throw ConfigError(path, "expected 'fixed' or 'uniform'");
}

inline MarketSingleConfig parse_market_single(const json& m, const std::string& base) {
    const json& sv = require(m, base, "searcher_values");
    const json& uc = require(m, base, "user_costs");
    if (!sv.is_array() || sv.empty())
        throw ConfigError(base + ".searcher_values", "expected a non-empty array of rows");
    if (!uc.is_array() || uc.empty())
        throw ConfigError(base + ".user_costs", "expected a non-empty array");

    std::vector<std::vector<DistributionSpec>> values;
    for (std::size_t i = 0; i < sv.size(); ++i) {
        const std::string rpath = base + ".searcher_values[" + std::to_string(i) + "]";
        if (!sv[i].is_array() || sv[i].size() != uc.size())
            throw ConfigError(rpath, "row length must equal the number of users");
        std::vector<DistributionSpec> row;
        for (std::size_t j2 = 0; j2 < sv[i].size(); ++j2)
            row.push_back(parse_spec(sv[i][j2], rpath + "[" + std::to_string(j2) + "]"));
        values.push_back(std::move(row));
    }
    std::vector<DistributionSpec> costs;
    for (std::size_t j2 = 0; j2 < uc.size(); ++j2)
        costs.push_back(parse_spec(uc[j2], base + ".user_costs[" + std::to_string(j2) + "]"));

    std::optional<MarketInstance> inst;
    try {
        if (m.contains("epsilons")) {
            const json& eps = m.at("epsilons");
            if (!eps.is_array() || eps.size() != costs.size())
                throw ConfigError(base + ".epsilons", "need one epsilon list per user");
            std::vector<PrivacyLadder> ladders;
            for (std::size_t j2 = 0; j2 < eps.size(); ++j2) {
                std::vector<double> e =
                    as_number_list(eps[j2], base + ".epsilons[" + std::to_string(j2) + "]");
                std::vector<double> mean_costs(costs[j2].levels());
                for (std::size_t k = 0; k < costs[j2].levels(); ++k)
                    mean_costs[k] = costs[j2].mean(k);
                ladders.emplace_back(std::move(e), std::move(mean_costs));
            }
            inst.emplace(std::move(values), std::move(costs), std::move(ladders));
        } else {
            inst.emplace(MarketInstance::with_default_ladders(std::move(values), std::move(costs)));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(base, e.what());
    }

    MarketSingleConfig c{std::move(*inst), OrderPolicy::uniform_random, 0, 0};
    if (m.contains("order_policy"))
        c.policy = parse_order_policy(m.at("order_policy"), base + ".order_policy");
    if (m.contains("oracle_trials"))
        c.oracle_trials = as_count(m.at("oracle_trials"), base + ".oracle_trials");
    if (m.contains("baseline_level")) {
        c.baseline_level =
            static_cast<std::size_t>(as_count(m.at("baseline_level"), base + ".baseline_level"));
        if (c.baseline_level >= c.instance.ell)
            throw ConfigError(base + ".baseline_level", "level index out of range");
    }
    return c;
}

inline MarketConfig parse_market(const json& j) {
    MarketConfig c;
    const json& m = require(j, "$", "market");
    if (m.contains("random_batch")) {
        const json& b = m.at("random_batch");
        MarketBatchConfig bc;
        bc.instances = static_cast<std::size_t>(
            as_count(require(b, "market.random_batch", "instances"), "market.random_batch.instances"));
        if (bc.instances < 1) throw ConfigError("market.random_batch.instances", "must be >= 1");
        auto opt_count = [&](const char* key, auto& slot) {
            if (b.contains(key))
                slot = static_cast<std::remove_reference_t<decltype(slot)>>(
                    as_count(b.at(key), std::string("market.random_batch.") + key));
        };
        opt_count("max_n", bc.max_n);
        opt_count("max_m", bc.max_m);
        opt_count("max_ell", bc.max_ell);
        opt_count("alg_trials", bc.alg_trials);
        opt_count("oracle_trials", bc.oracle_trials);
        if (b.contains("order_policy"))
            bc.policy = parse_order_policy(b.at("order_policy"), "market.random_batch.order_policy");
        c.batch = bc;
    } else {
        c.single = parse_market_single(m, "market");
    }
    return c;
}

inline AuditConfig parse_audit(const json& j) {
    AuditConfig c;
    if (j.contains("values")) {
        c.optimal = parse_optimal(j);
        if (!c.optimal->audit) c.optimal->audit = AuditParams{};
    }
    if (j.contains("market")) {
        c.market = parse_market_single(j.at("market"), "market");
        if (j.contains("market_trials")) c.market_trials = as_count(j.at("market_trials"), "market_trials");
    }
    if (!c.optimal && !c.market)
        throw ConfigError("$", "audit needs a 'values'/'ladder'/'n' block or a 'market' block");
    return c;
}

}  // namespace cfg

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using namespace cfg;
    if (!j.is_object()) throw ConfigError("$", "config root must be an object");
    ExperimentConfig c;
    c.mechanism = as_string(require(j, "$", "mechanism"), "mechanism");
    if (j.contains("seed")) c.seed = as_count(j.at("seed"), "seed");
    if (j.contains("trials")) {
        c.trials = as_count(j.at("trials"), "trials");
        if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
    }
    if (j.contains("threads"))
        c.threads = static_cast<unsigned>(as_count(j.at("threads"), "threads"));
    if (j.contains("out")) c.out_dir = as_string(j.at("out"), "out");

    if (c.mechanism == "optimal")
        c.optimal = parse_optimal(j);
    else if (c.mechanism == "dutch")
        c.dutch = parse_dutch(j);
    else if (c.mechanism == "prophet")
        c.prophet = parse_prophet(j);
    else if (c.mechanism == "market")
        c.market = parse_market(j);
    else if (c.mechanism == "audit")
        c.audit = parse_audit(j);
    else
        throw ConfigError("mechanism",
                          "expected one of optimal|dutch|prophet|market|audit, got '" +
                              c.mechanism + "'");
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("$", "cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace privmech
