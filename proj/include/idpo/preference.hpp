// Multi-objective reward scoring over candidate pools and dynamic
// winner/loser pairing. All rewards here are analytic functions of the
// sample and its condition; the aggregate is their plain mean.
//
// Pair dataset format (little-endian):
//   magic "IDPR" | u32 version=1 | u32 pair count | u32 data_dim | u32 n_components
//   per pair: u32 condition id
//             f64 winner[data_dim] | f64 loser[data_dim]
//             f64 winner score | f64 loser score
//             f64 winner components[n] | f64 loser components[n]

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "idpo/array.hpp"
#include "idpo/dataset.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/errors.hpp"
#include "idpo/rng.hpp"

namespace idpo {

struct RewardFn {
    std::string name;
    std::function<double(const Condition&, const DenseArray&)> fn;
};

struct RewardSuite {
    std::vector<RewardFn> rewards;

    std::size_t count() const { return rewards.size(); }
};

// The two shipped rewards pull against each other: proximity wants the
// sample at the mode, spread wants it at the typical mode distance.
inline RewardSuite make_toy_suite(const MixtureSpec& spec) {
    RewardSuite suite;
    suite.rewards.push_back(
        {"proximity", [spec](const Condition& c, const DenseArray& x0) {
             return -distance(x0, mode_of(spec, c));
         }});
    const double radius = expected_radius(spec);
    suite.rewards.push_back(
        {"spread", [spec, radius](const Condition& c, const DenseArray& x0) {
             return -std::abs(distance(x0, mode_of(spec, c)) - radius);
         }});
    return suite;
}

struct RewardBreakdown {
    double aggregate = 0.0;
    std::vector<double> components;
};

inline RewardBreakdown aggregate_reward(const RewardSuite& suite, const Condition& c,
                                        const DenseArray& x0) {
    if (suite.rewards.empty()) throw std::invalid_argument("aggregate_reward: empty suite");
    RewardBreakdown out;
    out.components.reserve(suite.count());
    for (const RewardFn& r : suite.rewards) {
        const double v = r.fn(c, x0);
        if (!std::isfinite(v)) {
            throw NumericError("aggregate_reward: reward '" + r.name + "' is non-finite");
        }
        out.components.push_back(v);
        out.aggregate += v;
    }
    out.aggregate /= static_cast<double>(suite.count());
    return out;
}

struct Candidate {
    DenseArray x0;
    double score = 0.0;
    std::vector<double> components;
};

struct CandidatePool {
    Condition condition;
    std::vector<Candidate> candidates;
};

// K deterministic samples from distinct x_T draws, each scored.
inline CandidatePool build_pool(const Denoiser& m, const NoiseSchedule& s, const RewardSuite& suite,
                                const Condition& c, int K, RngState& rng) {
    if (K < 2) throw std::invalid_argument("build_pool: K must be >= 2");
    CandidatePool pool;
    pool.condition = c;
    pool.candidates.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const DenseArray x_T = gaussian_sample(rng, {static_cast<std::size_t>(m.data_dim)});
        Candidate cand;
        cand.x0 = sample(m, s, x_T, c).states.front();
        RewardBreakdown rb = aggregate_reward(suite, c, cand.x0);
        cand.score = rb.aggregate;
        cand.components = std::move(rb.components);
        pool.candidates.push_back(std::move(cand));
    }
    return pool;
}

struct PreferencePair {
    Condition condition;
    DenseArray winner;
    DenseArray loser;
    double winner_score = 0.0;
    double loser_score = 0.0;
    std::vector<double> winner_components;
    std::vector<double> loser_components;
};

enum class PairStrategy { best_worst, all_ordered };

inline PairStrategy pair_strategy_from_string(const std::string& s) {
    if (s == "best-worst") return PairStrategy::best_worst;
    if (s == "all-ordered") return PairStrategy::all_ordered;
    throw std::invalid_argument("unknown pair strategy '" + s + "'");
}

// best_worst: one (argmax, argmin) pair. all_ordered: every strictly
// ordered (i, j). Exact ties never pair; a fully tied pool yields an
// empty list, which callers skip.
inline std::vector<PreferencePair> dynamic_pairs(const CandidatePool& pool, PairStrategy strategy) {
    if (pool.candidates.size() < 2) throw std::invalid_argument("dynamic_pairs: pool needs K >= 2");
    std::vector<PreferencePair> pairs;
    auto emit = [&pool, &pairs](std::size_t w, std::size_t l) {
        const Candidate& cw = pool.candidates[w];
        const Candidate& cl = pool.candidates[l];
        pairs.push_back(PreferencePair{pool.condition, cw.x0, cl.x0, cw.score, cl.score,
                                       cw.components, cl.components});
    };
    if (strategy == PairStrategy::best_worst) {
        std::size_t best = 0, worst = 0;
        for (std::size_t i = 1; i < pool.candidates.size(); ++i) {
            if (pool.candidates[i].score > pool.candidates[best].score) best = i;
            if (pool.candidates[i].score < pool.candidates[worst].score) worst = i;
        }
        if (pool.candidates[best].score > pool.candidates[worst].score) emit(best, worst);
    } else {
        for (std::size_t i = 0; i < pool.candidates.size(); ++i) {
            for (std::size_t j = 0; j < pool.candidates.size(); ++j) {
                if (pool.candidates[i].score > pool.candidates[j].score) emit(i, j);
            }
        }
    }
    return pairs;
}

// ---- pair dataset IO ----

inline constexpr std::array<char, 4> kPairMagic = {'I', 'D', 'P', 'R'};
inline constexpr std::uint32_t kPairVersion = 1;

inline void save_pairs(const std::vector<PreferencePair>& pairs, const std::string& path) {
    if (pairs.empty()) throw std::invalid_argument("save_pairs: empty pair list");
    const std::size_t d = pairs.front().winner.size();
    const std::size_t nc = pairs.front().winner_components.size();
    detail::ByteWriter w(path);
    w.write(kPairMagic.data(), 4);
    w.u32(kPairVersion);
    w.u32(static_cast<std::uint32_t>(pairs.size()));
    w.u32(static_cast<std::uint32_t>(d));
    w.u32(static_cast<std::uint32_t>(nc));
    for (const PreferencePair& p : pairs) {
        w.u32(static_cast<std::uint32_t>(p.condition.label));
        for (double v : p.winner.data) w.f64(v);
        for (double v : p.loser.data) w.f64(v);
        w.f64(p.winner_score);
        w.f64(p.loser_score);
        for (double v : p.winner_components) w.f64(v);
        for (double v : p.loser_components) w.f64(v);
    }
    if (!w.out) throw std::runtime_error("short write to '" + path + "'");
}

inline std::vector<PreferencePair> load_pairs(const std::string& path) {
    detail::ByteReader r(path);
    std::array<char, 4> magic;
    r.read(magic.data(), 4, "magic");
    if (magic != kPairMagic) throw FormatError("bad magic", 0, "magic");
    const std::uint32_t version = r.u32("version");
    if (version != kPairVersion) {
        throw FormatError("unsupported version " + std::to_string(version), 4, "version");
    }
    const std::uint32_t count = r.u32("header");
    const std::uint32_t d = r.u32("header");
    const std::uint32_t nc = r.u32("header");
    if (count == 0 || d == 0 || d > 1'000'000) throw FormatError("implausible header", 8, "header");
    std::vector<PreferencePair> pairs;
    pairs.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        PreferencePair p;
        p.condition.label = static_cast<int>(r.u32("pairs"));
        p.winner = DenseArray({d});
        p.loser = DenseArray({d});
        for (double& v : p.winner.data) v = r.f64("pairs");
        for (double& v : p.loser.data) v = r.f64("pairs");
        p.winner_score = r.f64("pairs");
        p.loser_score = r.f64("pairs");
        p.winner_components.resize(nc);
        p.loser_components.resize(nc);
        for (double& v : p.winner_components) v = r.f64("pairs");
        for (double& v : p.loser_components) v = r.f64("pairs");
        if (!(p.winner_score > p.loser_score)) {
            throw FormatError("pair " + std::to_string(i) + " has winner score <= loser score",
                              r.offset, "pairs");
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

// One row per candidate: condition, index, each component by name, aggregate.
inline void write_pool_csv(const std::vector<CandidatePool>& pools, const RewardSuite& suite,
                           const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    std::fputs("condition,candidate", f);
    for (const RewardFn& r : suite.rewards) std::fprintf(f, ",%s", r.name.c_str());
    std::fputs(",aggregate\n", f);
    for (const CandidatePool& pool : pools) {
        for (std::size_t k = 0; k < pool.candidates.size(); ++k) {
            const Candidate& cand = pool.candidates[k];
            std::fprintf(f, "%d,%zu", pool.condition.label, k);
            for (double v : cand.components) std::fprintf(f, ",%.17g", v);
            std::fprintf(f, ",%.17g\n", cand.score);
        }
    }
    std::fclose(f);
}

} // namespace idpo
