#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace privmech {

// Privacy grid: epsilons strictly increasing in [0,1], monetary costs
// non-negative and non-decreasing, one entry per level.
class PrivacyLadder {
public:
    PrivacyLadder(std::vector<double> epsilons, std::vector<double> costs)
        : epsilons_(std::move(epsilons)), costs_(std::move(costs)) {
        if (epsilons_.empty()) throw std::invalid_argument("ladder: needs at least one level");
        if (epsilons_.size() != costs_.size())
            throw std::invalid_argument("ladder: epsilons and costs must have equal length");
        for (std::size_t k = 0; k < epsilons_.size(); ++k) {
            if (!(epsilons_[k] >= 0.0 && epsilons_[k] <= 1.0))
                throw std::invalid_argument("ladder: epsilon out of [0,1] at level " + std::to_string(k));
            if (k > 0 && !(epsilons_[k] > epsilons_[k - 1]))
                throw std::invalid_argument("ladder: epsilons not strictly increasing at level " +
                                            std::to_string(k));
            if (!(costs_[k] >= 0.0))
                throw std::invalid_argument("ladder: negative cost at level " + std::to_string(k));
            if (k > 0 && costs_[k] < costs_[k - 1])
                throw std::invalid_argument("ladder: costs not non-decreasing at level " +
                                            std::to_string(k));
        }
    }

    std::size_t levels() const noexcept { return epsilons_.size(); }
    double epsilon(std::size_t k) const { return epsilons_.at(k); }
    double cost(std::size_t k) const { return costs_.at(k); }
    const std::vector<double>& epsilons() const noexcept { return epsilons_; }
    const std::vector<double>& costs() const noexcept { return costs_; }

    PrivacyLadder prefix(std::size_t count) const {
        if (count == 0 || count > levels()) throw std::invalid_argument("ladder: bad prefix length");
        return PrivacyLadder(std::vector<double>(epsilons_.begin(), epsilons_.begin() + count),
                             std::vector<double>(costs_.begin(), costs_.begin() + count));
    }

private:
    std::vector<double> epsilons_;
    std::vector<double> costs_;
};

enum class Family { uniform_scaled, exponential, tabulated };

enum class Validation { strict, structural_only };

struct UniformScaledLevel {
    double hi;
};

struct ExponentialLevel {
    double rate;
};

// Monotone piecewise-linear CDF given by knots; density is the segment slope.
struct TabulatedLevel {
    std::vector<double> xs;
    std::vector<double> ps;
};

struct HazardOrderReport {
    bool ordered = true;
    double worst_gap = std::numeric_limits<double>::infinity();  // min over grid of h_k - h_{k+1}
    std::size_t level = 0;                                       // lower level of the worst pair
    double at_value = 0.0;
};

// Latent draw shared by all levels of one agent (comonotone coupling).
struct LatentCoupling {
    double u;
};

// Family of per-privacy-level valuation (or cost) distributions. Strict
// construction verifies density normalization, hazard-rate ordering across
// levels, and regularity (non-decreasing virtual value) on a grid;
// structural_only skips the cross-level checks so diagnostic ops can run
// on deliberately broken families.
class DistributionSpec {
    using Level = std::variant<UniformScaledLevel, ExponentialLevel, TabulatedLevel>;

public:
    static constexpr double tail_mass = 1e-12;  // truncation for unbounded supports

    static DistributionSpec uniform_scaled(std::vector<double> his,
                                           Validation v = Validation::strict) {
        std::vector<Level> levels;
        levels.reserve(his.size());
        for (std::size_t k = 0; k < his.size(); ++k) {
            if (!(his[k] > 0.0))
                throw std::invalid_argument("uniform_scaled: upper bound must be positive at level " +
                                            std::to_string(k));
            levels.push_back(UniformScaledLevel{his[k]});
        }
        return DistributionSpec(Family::uniform_scaled, std::move(levels), v);
    }

    static DistributionSpec exponential(std::vector<double> rates,
                                        Validation v = Validation::strict) {
        std::vector<Level> levels;
        levels.reserve(rates.size());
        for (std::size_t k = 0; k < rates.size(); ++k) {
            if (!(rates[k] > 0.0))
                throw std::invalid_argument("exponential: rate must be positive at level " +
                                            std::to_string(k));
            levels.push_back(ExponentialLevel{rates[k]});
        }
        return DistributionSpec(Family::exponential, std::move(levels), v);
    }

    static DistributionSpec tabulated(std::vector<TabulatedLevel> tables,
                                      Validation v = Validation::strict) {
        std::vector<Level> levels;
        levels.reserve(tables.size());
        for (std::size_t k = 0; k < tables.size(); ++k) {
            validate_table(tables[k], k);
            levels.push_back(std::move(tables[k]));
        }
        return DistributionSpec(Family::tabulated, std::move(levels), v);
    }

    Family family() const noexcept { return family_; }
    std::size_t levels() const noexcept { return levels_.size(); }

    DistributionSpec prefix(std::size_t count) const {
        if (count == 0 || count > levels()) throw std::invalid_argument("spec: bad prefix length");
        std::vector<Level> sub(levels_.begin(), levels_.begin() + count);
        return DistributionSpec(family_, std::move(sub), Validation::structural_only);
    }

    double support_min(std::size_t k) const {
        const Level& lv = level(k);
        if (auto* t = std::get_if<TabulatedLevel>(&lv)) return t->xs.front();
        return 0.0;
    }

    // Right edge of the (possibly truncated) support used for grids and
    // bisection brackets; exponential levels cut at the 1 - 1e-12 quantile.
    double support_max(std::size_t k) const {
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) return u->hi;
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) return -std::log(tail_mass) / e->rate;
        return std::get<TabulatedLevel>(lv).xs.back();
    }

    double cdf(std::size_t k, double v) const {
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) {
            if (v <= 0.0) return 0.0;
            if (v >= u->hi) return 1.0;
            return v / u->hi;
        }
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) {
            if (v <= 0.0) return 0.0;
            return -std::expm1(-e->rate * v);
        }
        const auto& t = std::get<TabulatedLevel>(lv);
        if (v <= t.xs.front()) return 0.0;
        if (v >= t.xs.back()) return 1.0;
        const std::size_t i = segment_index(t.xs, v);
        const double w = (v - t.xs[i]) / (t.xs[i + 1] - t.xs[i]);
        return t.ps[i] + w * (t.ps[i + 1] - t.ps[i]);
    }

    double pdf(std::size_t k, double v) const {
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) {
            return (v >= 0.0 && v <= u->hi) ? 1.0 / u->hi : 0.0;
        }
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) {
            return v >= 0.0 ? e->rate * std::exp(-e->rate * v) : 0.0;
        }
        const auto& t = std::get<TabulatedLevel>(lv);
        if (v < t.xs.front() || v > t.xs.back()) return 0.0;
        const std::size_t i = v >= t.xs.back() ? t.xs.size() - 2 : segment_index(t.xs, v);
        return (t.ps[i + 1] - t.ps[i]) / (t.xs[i + 1] - t.xs[i]);
    }

    double inv_cdf(std::size_t k, double p) const {
        if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("inv_cdf: probability out of [0,1]");
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) return p * u->hi;
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) {
            const double q = std::min(p, 1.0 - tail_mass);
            return -std::log1p(-q) / e->rate;
        }
        const auto& t = std::get<TabulatedLevel>(lv);
        if (p <= 0.0) return t.xs.front();
        if (p >= 1.0) return t.xs.back();
        const std::size_t i = segment_index(t.ps, p);
        const double w = (p - t.ps[i]) / (t.ps[i + 1] - t.ps[i]);
        return t.xs[i] + w * (t.xs[i + 1] - t.xs[i]);
    }

    // 1 - cdf without subtractive cancellation in the tails.
    double survival(std::size_t k, double v) const {
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) {
            if (v <= 0.0) return 1.0;
            if (v >= u->hi) return 0.0;
            return (u->hi - v) / u->hi;
        }
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) {
            return v <= 0.0 ? 1.0 : std::exp(-e->rate * v);
        }
        return 1.0 - cdf(k, v);
    }

    double mean(std::size_t k) const {
        const Level& lv = level(k);
        if (auto* u = std::get_if<UniformScaledLevel>(&lv)) return 0.5 * u->hi;
        if (auto* e = std::get_if<ExponentialLevel>(&lv)) return 1.0 / e->rate;
        const auto& t = std::get<TabulatedLevel>(lv);
        double m = 0.0;
        for (std::size_t i = 0; i + 1 < t.xs.size(); ++i)
            m += (t.ps[i + 1] - t.ps[i]) * 0.5 * (t.xs[i] + t.xs[i + 1]);
        return m;
    }

    double hazard(std::size_t k, double v) const {
        const double sf = survival(k, v);
        const double f = pdf(k, v);
        if (sf <= 0.0) return std::numeric_limits<double>::infinity();
        return f / sf;
    }

    double virtual_value(std::size_t k, double v) const {
        if (v < support_min(k) || (family_ != Family::exponential && v > support_max(k)))
            throw std::domain_error("virtual_value: value outside support");
        const double f = pdf(k, v);
        if (!(f > 0.0)) throw std::domain_error("virtual_value: zero density at value");
        return v - survival(k, v) / f;
    }

private:
    DistributionSpec(Family f, std::vector<Level> levels, Validation v)
        : family_(f), levels_(std::move(levels)) {
        if (levels_.empty()) throw std::invalid_argument("spec: needs at least one level");
        if (v == Validation::strict) {
            check_normalization();
            check_hazard_order_strict();
            check_regularity();
        }
    }

    const Level& level(std::size_t k) const {
        if (k >= levels_.size()) throw std::domain_error("spec: unknown level index");
        return levels_[k];
    }

    static void validate_table(const TabulatedLevel& t, std::size_t k) {
        const std::string where = " in table for level " + std::to_string(k);
        if (t.xs.size() < 2 || t.xs.size() != t.ps.size())
            throw std::invalid_argument("tabulated: need matching knot lists of size >= 2" + where);
        if (t.ps.front() != 0.0 || t.ps.back() != 1.0)
            throw std::invalid_argument("tabulated: probabilities must run from 0 to 1" + where);
        if (!(t.xs.front() >= 0.0))
            throw std::invalid_argument("tabulated: support must be non-negative" + where);
        for (std::size_t i = 0; i + 1 < t.xs.size(); ++i) {
            if (!(t.xs[i + 1] > t.xs[i]))
                throw std::invalid_argument("tabulated: x knots not strictly increasing" + where);
            if (!(t.ps[i + 1] > t.ps[i]))
                throw std::invalid_argument("tabulated: p knots not strictly increasing" + where);
        }
    }

    static std::size_t segment_index(const std::vector<double>& knots, double v) {
        const auto it = std::upper_bound(knots.begin(), knots.end(), v);
        std::size_t i = static_cast<std::size_t>(it - knots.begin());
        if (i == 0) return 0;
        if (i >= knots.size()) return knots.size() - 2;
        return i - 1;
    }

    void check_normalization() const {
        for (std::size_t k = 0; k < levels_.size(); ++k) {
            double integral;
            if (auto* t = std::get_if<TabulatedLevel>(&levels_[k])) {
                integral = 0.0;
                for (std::size_t i = 0; i + 1 < t->xs.size(); ++i)
                    integral += pdf(k, 0.5 * (t->xs[i] + t->xs[i + 1])) * (t->xs[i + 1] - t->xs[i]);
            } else {
                integral = simpson_pdf(k, support_min(k), support_max(k), 2000);
            }
            if (std::abs(integral - 1.0) > 1e-6)
                throw std::invalid_argument("spec: pdf does not integrate to 1 at level " +
                                            std::to_string(k));
        }
    }

    double simpson_pdf(std::size_t k, double a, double b, std::size_t n) const {
        const double h = (b - a) / static_cast<double>(n);
        double acc = pdf(k, a) + pdf(k, b);
        for (std::size_t i = 1; i < n; ++i)
            acc += pdf(k, a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    }

    void check_hazard_order_strict() const;
    void check_regularity() const {
        constexpr std::size_t grid = 1000;
        for (std::size_t k = 0; k < levels_.size(); ++k) {
            const double lo = support_min(k);
            const double hi = support_max(k);
            double prev = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < grid; ++j) {
                const double v =
                    std::clamp(lo + (hi - lo) * static_cast<double>(j) / (grid - 1), lo, hi);
                const double phi = virtual_value(k, v);
                const double tol = 1e-9 * std::max(1.0, std::abs(phi));
                if (phi < prev - tol)
                    throw std::invalid_argument("spec: virtual value decreases at level " +
                                                std::to_string(k) + " (irregular distribution)");
                prev = std::max(prev, phi);
            }
        }
    }

    Family family_;
    std::vector<Level> levels_;

    friend HazardOrderReport check_hazard_order(const DistributionSpec&, std::size_t);
};

// Verifies f_k/(1-F_k) >= f_{k+1}/(1-F_{k+1}) for adjacent level pairs on a
// grid over the common support; reports the worst signed gap.
inline HazardOrderReport check_hazard_order(const DistributionSpec& spec, std::size_t grid_size) {
    if (grid_size < 2) throw std::invalid_argument("check_hazard_order: grid size must be >= 2");
    HazardOrderReport rep;
    if (spec.levels() < 2) return rep;
    double lo = spec.support_min(0);
    double hi = spec.support_max(0);
    for (std::size_t k = 1; k < spec.levels(); ++k) {
        lo = std::max(lo, spec.support_min(k));
        hi = std::min(hi, spec.support_max(k));
    }
    for (std::size_t k = 0; k + 1 < spec.levels(); ++k) {
        for (std::size_t j = 0; j < grid_size; ++j) {
            const double v = lo + (hi - lo) * static_cast<double>(j) / (grid_size - 1);
            const double ha = spec.hazard(k, v);
            const double hb = spec.hazard(k + 1, v);
            if (std::isinf(ha)) continue;  // upper level's survival already exhausted
            const double gap = ha - hb;
            if (gap < rep.worst_gap) {
                rep.worst_gap = gap;
                rep.level = k;
                rep.at_value = v;
            }
        }
    }
    rep.ordered = !(rep.worst_gap < -1e-9);
    return rep;
}

inline void DistributionSpec::check_hazard_order_strict() const {
    const auto rep = privmech::check_hazard_order(*this, 512);
    if (!rep.ordered)
        throw std::invalid_argument("spec: hazard rate order violated between levels " +
                                    std::to_string(rep.level) + " and " +
                                    std::to_string(rep.level + 1));
}

// phi_k(v) - c_k
inline double privacy_virtual_value(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                    std::size_t k, double v) {
    if (ladder.levels() != spec.levels())
        throw std::invalid_argument("privacy_virtual_value: ladder/spec level mismatch");
    return spec.virtual_value(k, v) - ladder.cost(k);
}

// Inverse of the privacy-enhanced virtual value by bisection over the
// (truncated) support. Requires a regular family.
inline double inv_privacy_virtual_value(const DistributionSpec& spec, const PrivacyLadder& ladder,
                                        std::size_t k, double x) {
    double lo = spec.support_min(k);
    double hi = spec.support_max(k);
    const double flo = privacy_virtual_value(spec, ladder, k, lo);
    const double fhi = privacy_virtual_value(spec, ladder, k, hi);
    const double slack = 1e-9 * std::max(1.0, std::max(std::abs(flo), std::abs(fhi)));
    if (x < flo - slack || x > fhi + slack)
        throw std::range_error("inv_privacy_virtual_value: target outside attainable range");
    if (x <= flo) return lo;
    if (x >= fhi) return hi;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (privacy_virtual_value(spec, ladder, k, mid) < x)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= 1e-13 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

// Values for all levels generated from one latent uniform draw.
inline std::vector<double> sample_coupled(const DistributionSpec& spec, LatentCoupling u) {
    if (!(u.u >= 0.0 && u.u <= 1.0)) throw std::domain_error("sample_coupled: latent out of [0,1]");
    std::vector<double> out(spec.levels());
    for (std::size_t k = 0; k < spec.levels(); ++k) out[k] = spec.inv_cdf(k, u.u);
    return out;
}

}  // namespace privmech
