// Shared vocabulary for the ugd library: matrix aliases, error types and a
// small deterministic random source.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace ugd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Episode-local class index (position in the episode's class roster).
using ClassIndex = int;
/// Dataset-wide class identifier.
using ClassId = int;

// ---------------------------------------------------------------------------
// Errors. Every failure mode the library reports is a distinct type so that
// callers (and the CLI exit-code mapping) can dispatch on it.
// ---------------------------------------------------------------------------

class error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Problems with user-supplied configuration.
class config_error : public error
{
public:
    using error::error;
};

/// Problems with input data (files, shapes, sample counts).
class data_error : public error
{
public:
    using error::error;
};

/// Numerical or runtime failures inside the pipeline.
class runtime_failure : public error
{
public:
    using error::error;
};

#define UGD_DEFINE_ERROR(name, base)                                                               \
    class name : public base                                                                       \
    {                                                                                              \
    public:                                                                                        \
        using base::base;                                                                          \
    }

UGD_DEFINE_ERROR(infeasible_eta, config_error);
UGD_DEFINE_ERROR(insufficient_pool, data_error);
UGD_DEFINE_ERROR(schema_mismatch, data_error);
UGD_DEFINE_ERROR(too_few_samples, data_error);
UGD_DEFINE_ERROR(incomplete_base, data_error);
UGD_DEFINE_ERROR(dim_mismatch, data_error);
UGD_DEFINE_ERROR(no_available_view, data_error);
UGD_DEFINE_ERROR(empty_retrieval, data_error);
UGD_DEFINE_ERROR(empty_class, data_error);
UGD_DEFINE_ERROR(zero_vector, data_error);
UGD_DEFINE_ERROR(factorization_failure, runtime_failure);
UGD_DEFINE_ERROR(non_finite_gradient, runtime_failure);
UGD_DEFINE_ERROR(timeout_error, runtime_failure);

#undef UGD_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Random numbers.
//
// std::normal_distribution and friends are implementation-defined, so the
// transforms from raw engine output are written out here. mt19937_64 itself
// is fully specified by the standard, which makes every generator in the
// library reproducible bit-for-bit across standard libraries.
// ---------------------------------------------------------------------------

/// splitmix64 finalizer, used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the substream identified by (seed, a, b). Distinct tags give
/// statistically independent streams.
constexpr std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept
{
    return mix64(mix64(mix64(seed) ^ (a + 0x632be59bd9b4e019ULL)) ^ (b + 0x85157af5ULL));
}

class rng
{
public:
    explicit rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform()
    {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). Rejection sampling, so unbiased.
    std::uint64_t below(std::uint64_t n)
    {
        if (n <= 1)
            return 0;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit)
            x = engine_();
        return x % n;
    }

    /// Standard normal via Box-Muller; the spare deviate is cached.
    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vector normal_vector(Index n)
    {
        Vector out(n);
        for (Index i = 0; i < n; ++i)
            out[i] = normal();
        return out;
    }

    /// Fisher-Yates shuffle of any random-access range.
    template <class Range>
    void shuffle(Range& range)
    {
        const auto n = static_cast<std::uint64_t>(std::size(range));
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            using std::swap;
            swap(range[i - 1], range[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace ugd
