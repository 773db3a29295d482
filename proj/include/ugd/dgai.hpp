// View-distribution estimation from retrieved base classes, dense Gaussian
// anchor sampling for support samples, and center interpolation of missing
// query views.
#pragma once

#include "ugd/base_stats.hpp"
#include "ugd/core.hpp"
#include "ugd/episode.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace ugd {

/// Per-view distances from one sample to every base class mean. The table
/// of a missing view is empty.
using distance_tables = std::vector<std::vector<double>>;

/// Base classes retrieved for one sample. `classes` holds positions into the
/// base_stats class list, ascending and without duplicates.
struct retrieval_set
{
    std::vector<std::size_t> classes;
    distance_tables distances;
};

/// Gaussian estimate for every view of a sample, missing views included.
struct view_distribution
{
    std::vector<Vector> mean;
    std::vector<Matrix> covariance;

    std::size_t view_count() const noexcept { return mean.size(); }
};

inline distance_tables view_distances(const multi_view_sample& sample, const base_stats& stats)
{
    const auto& spec = stats.spec();
    if (sample.views.size() != spec.view_count())
        throw dim_mismatch("sample has " + std::to_string(sample.views.size()) + " views, statistics have " +
                           std::to_string(spec.view_count()));
    distance_tables tables(spec.view_count());
    for (std::size_t v = 0; v < spec.view_count(); ++v) {
        if (!sample.views[v])
            continue;
        const Vector& x = *sample.views[v];
        if (x.size() != spec.dim(v))
            throw dim_mismatch("view " + std::to_string(v) + " has length " + std::to_string(x.size()) +
                               ", statistics expect " + std::to_string(spec.dim(v)));
        auto& row = tables[v];
        row.reserve(stats.class_count());
        for (std::size_t c = 0; c < stats.class_count(); ++c)
            row.push_back((x - stats.mean(c, v)).norm());
    }
    return tables;
}

/// Union over available views of the k nearest base classes. Equal distances
/// resolve to the smaller class position.
inline retrieval_set retrieve_topk(distance_tables tables, std::size_t k)
{
    if (k < 1)
        throw config_error("retrieve_topk: k must be at least 1");
    std::vector<std::size_t> picked;
    bool any = false;
    for (const auto& row : tables) {
        if (row.empty())
            continue;
        any = true;
        if (row.size() < k)
            throw config_error("retrieve_topk: k=" + std::to_string(k) + " exceeds the " +
                               std::to_string(row.size()) + " base classes");
        std::vector<std::size_t> order(row.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&row](std::size_t a, std::size_t b) { return row[a] < row[b] || (row[a] == row[b] && a < b); });
        picked.insert(picked.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
    if (!any)
        throw no_available_view("retrieve_topk: every view is missing");
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
    return {std::move(picked), std::move(tables)};
}

/// Mean: observed views average the retrieved base means together with the
/// observation; missing views average the retrieved base means alone.
/// Covariance: average of the retrieved base covariances in both cases.
inline view_distribution estimate_distribution(const multi_view_sample& sample, const base_stats& stats,
                                               const retrieval_set& retrieved)
{
    if (retrieved.classes.empty())
        throw empty_retrieval("estimate_distribution: no base class was retrieved");
    const auto& spec = stats.spec();
    if (sample.views.size() != spec.view_count())
        throw dim_mismatch("estimate_distribution: view count mismatch");
    const auto n = static_cast<double>(retrieved.classes.size());

    view_distribution out;
    for (std::size_t v = 0; v < spec.view_count(); ++v) {
        const Index d = spec.dim(v);
        Vector mean_sum = Vector::Zero(d);
        Matrix cov_sum = Matrix::Zero(d, d);
        for (auto c : retrieved.classes) {
            mean_sum += stats.mean(c, v);
            cov_sum += stats.covariance(c, v);
        }
        if (sample.views[v]) {
            if (sample.views[v]->size() != d)
                throw dim_mismatch("estimate_distribution: view " + std::to_string(v) + " length mismatch");
            out.mean.push_back((mean_sum + *sample.views[v]) / (n + 1.0));
        } else {
            out.mean.push_back(mean_sum / n);
        }
        out.covariance.push_back(cov_sum / n);
    }
    return out;
}

/// Ridge added to a covariance before factorization: scale * (trace/d + 1).
inline double ridge_for(const Matrix& covariance, double scale)
{
    const auto d = static_cast<double>(covariance.rows());
    return scale * (covariance.trace() / d + 1.0);
}

/// Draws from N(mean, cov + ridge*I) through a factor L with L*L^T equal to
/// the ridged covariance. Cholesky first; if a pivot fails, a symmetric
/// eigendecomposition with negative eigenvalues clamped to zero.
class gaussian_sampler
{
public:
    gaussian_sampler(Vector mean, const Matrix& covariance, double ridge) : mean_(std::move(mean))
    {
        const Index d = mean_.size();
        if (covariance.rows() != d || covariance.cols() != d)
            throw dim_mismatch("gaussian_sampler: covariance shape does not match the mean");
        if (!(ridge > 0))
            throw config_error("gaussian_sampler: ridge must be positive");
        if (!covariance.allFinite() || !mean_.allFinite())
            throw factorization_failure("gaussian_sampler: non-finite distribution parameters");
        Matrix ridged = 0.5 * (covariance + covariance.transpose());
        ridged.diagonal().array() += ridge;
        Eigen::LLT<Matrix> llt(ridged);
        if (llt.info() == Eigen::Success) {
            factor_ = llt.matrixL();
            triangular_ = true;
            return;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(ridged);
        if (eig.info() != Eigen::Success || !eig.eigenvalues().allFinite())
            throw factorization_failure("gaussian_sampler: covariance cannot be factorized");
        const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        factor_ = eig.eigenvectors() * root.asDiagonal();
        triangular_ = false;
    }

    const Vector& mean() const noexcept { return mean_; }
    const Matrix& factor() const noexcept { return factor_; }
    /// True when factor() is the lower Cholesky factor.
    bool triangular() const noexcept { return triangular_; }

    Vector draw(rng& gen) const { return mean_ + factor_ * gen.normal_vector(mean_.size()); }

    /// `count` independent draws as columns.
    Matrix draw(rng& gen, Index count) const
    {
        Matrix z(mean_.size(), count);
        for (Index j = 0; j < count; ++j)
            for (Index i = 0; i < mean_.size(); ++i)
                z(i, j) = gen.normal();
        Matrix out = factor_ * z;
        out.colwise() += mean_;
        return out;
    }

private:
    Vector mean_;
    Matrix factor_;
    bool triangular_ = true;
};

/// N_Gamma anchors per view, each view from its own substream of `seed`.
/// `ridge_scale` is the relative ridge passed through ridge_for().
inline std::vector<Matrix> sample_support_anchors(const view_distribution& dist, Index n_gamma, double ridge_scale,
                                                  std::uint64_t seed)
{
    if (n_gamma < 1)
        throw config_error("sample_support_anchors: N_Gamma must be positive");
    std::vector<Matrix> out;
    for (std::size_t v = 0; v < dist.view_count(); ++v) {
        gaussian_sampler sampler(dist.mean[v], dist.covariance[v], ridge_for(dist.covariance[v], ridge_scale));
        rng gen(substream(seed, v));
        out.push_back(sampler.draw(gen, n_gamma));
    }
    return out;
}

/// Observed views pass through; a missing view is filled with the center
/// (mean) of its estimated Gaussian.
inline std::vector<Vector> complete_query_views(const multi_view_sample& sample, const view_distribution& dist)
{
    if (sample.views.size() != dist.view_count())
        throw dim_mismatch("complete_query_views: view count mismatch");
    std::vector<Vector> out;
    for (std::size_t v = 0; v < dist.view_count(); ++v)
        out.push_back(sample.views[v] ? *sample.views[v] : dist.mean[v]);
    return out;
}

struct dgai_config
{
    std::size_t k = 2;
    Index n_gamma = 60;
    double ridge = 1e-6;
};

/// Dense per-view matrices: N_Gamma anchor columns per support sample (in
/// support order), followed by one completed column per query.
struct anchor_batch
{
    std::vector<Matrix> gamma;
    std::vector<ClassIndex> labels; ///< one per support-anchor column
    Index support_columns = 0;
    Index query_columns = 0;
    std::size_t ways = 0;

    Index columns() const noexcept { return support_columns + query_columns; }
    std::size_t view_count() const noexcept { return gamma.size(); }
};

inline view_distribution estimate_for(const multi_view_sample& sample, const base_stats& stats, std::size_t k)
{
    return estimate_distribution(sample, stats, retrieve_topk(view_distances(sample, stats), k));
}

inline anchor_batch build_anchor_batch(const episode& e, const base_stats& stats, const dgai_config& config,
                                       std::uint64_t seed)
{
    const auto& spec = e.spec();
    if (!(stats.spec() == spec))
        throw dim_mismatch("build_anchor_batch: base statistics do not cover the episode's views");
    const auto n_support = static_cast<Index>(e.support().size());
    const auto n_query = static_cast<Index>(e.query().size());

    anchor_batch batch;
    batch.support_columns = n_support * config.n_gamma;
    batch.query_columns = n_query;
    batch.ways = e.ways();
    for (std::size_t v = 0; v < spec.view_count(); ++v)
        batch.gamma.emplace_back(spec.dim(v), batch.columns());

    const auto labels = e.support_class_indices();
    for (Index n = 0; n < n_support; ++n) {
        const auto& sample = e.support()[static_cast<std::size_t>(n)];
        const auto anchors =
            sample_support_anchors(estimate_for(sample, stats, config.k), config.n_gamma, config.ridge,
                                   substream(seed, 0x5u, static_cast<std::uint64_t>(n)));
        for (std::size_t v = 0; v < spec.view_count(); ++v)
            batch.gamma[v].middleCols(n * config.n_gamma, config.n_gamma) = anchors[v];
        batch.labels.insert(batch.labels.end(), static_cast<std::size_t>(config.n_gamma),
                            labels[static_cast<std::size_t>(n)]);
    }
    for (Index q = 0; q < n_query; ++q) {
        const auto& sample = e.query()[static_cast<std::size_t>(q)];
        std::vector<Vector> filled;
        if (sample.complete()) {
            for (const auto& view : sample.views)
                filled.push_back(*view);
        } else {
            filled = complete_query_views(sample, estimate_for(sample, stats, config.k));
        }
        for (std::size_t v = 0; v < spec.view_count(); ++v)
            batch.gamma[v].col(batch.support_columns + q) = filled[v];
    }
    return batch;
}

} // namespace ugd
