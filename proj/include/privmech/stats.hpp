#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

namespace privmech {

// Sum-based accumulator. merge() is plain addition, so combining per-block
// partials in block order yields bit-identical results for any thread count.
class RunningStat {
public:
    void add(double x) noexcept {
        ++n_;
        sum_ += x;
        sumsq_ += x * x;
    }

    void merge(const RunningStat& o) noexcept {
        n_ += o.n_;
        sum_ += o.sum_;
        sumsq_ += o.sumsq_;
    }

    std::uint64_t count() const noexcept { return n_; }
    double mean() const noexcept { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }

    double variance() const noexcept {
        if (n_ < 2) return 0.0;
        const double n = static_cast<double>(n_);
        const double v = (sumsq_ - sum_ * sum_ / n) / (n - 1.0);
        return v > 0.0 ? v : 0.0;
    }

    double std_error() const noexcept {
        return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::uint64_t n_ = 0;
    double sum_ = 0.0;
    double sumsq_ = 0.0;
};

// Point estimate with a normal-approximation 95% confidence interval.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    double ci95 = 0.0;  // 1.96 * std_error
    std::uint64_t trials = 0;

    static Estimate from(const RunningStat& s) {
        Estimate e;
        e.mean = s.mean();
        e.std_error = s.std_error();
        e.ci95 = 1.96 * e.std_error;
        e.trials = s.count();
        return e;
    }
};

// One labeled report row; every row carries its seed and trial count.
struct EstimateRecord {
    std::string label;
    double estimate = 0.0;
    double std_error = 0.0;
    double ci95 = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;

    static EstimateRecord from(std::string label, const Estimate& e, std::uint64_t seed) {
        return EstimateRecord{std::move(label), e.mean, e.std_error, e.ci95, e.trials, seed};
    }
};

inline unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs fn(trial_index, acc) for every trial in [0, trials). Trials are
// partitioned into fixed-size blocks; workers claim blocks dynamically but
// each block accumulates locally and partials merge in block order, so the
// result is identical for every parallelism degree.
template <class Acc, class Fn>
Acc parallel_reduce(std::uint64_t trials, unsigned threads, Fn&& fn,
                    std::uint64_t block_size = 8192) {
    const std::uint64_t nblocks = (trials + block_size - 1) / block_size;
    std::vector<Acc> parts(static_cast<std::size_t>(nblocks));
    std::atomic<std::uint64_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= nblocks) break;
            Acc& acc = parts[static_cast<std::size_t>(b)];
            const std::uint64_t end = std::min(trials, (b + 1) * block_size);
            for (std::uint64_t t = b * block_size; t < end; ++t) fn(t, acc);
        }
    };

    const unsigned nthreads = resolve_threads(threads);
    if (nthreads <= 1 || nblocks <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const unsigned spawn = static_cast<unsigned>(std::min<std::uint64_t>(nthreads, nblocks));
        pool.reserve(spawn);
        for (unsigned i = 0; i < spawn; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    Acc total;
    for (auto& p : parts) total.merge(p);
    return total;
}

struct MeanAcc {
    RunningStat stat;
    void merge(const MeanAcc& o) { stat.merge(o.stat); }
};

}  // namespace privmech
