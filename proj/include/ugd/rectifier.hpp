// Distribution self-rectification of latent class means.
//
// The class means are the only optimization variable. Support anchors and
// queries stay fixed; every step recomputes the softmax relations of both
// from the current means, descends lambda*L_ce + L_se with Adam, and the
// final displacement of each mean is applied to all anchors of its class.
#pragma once

#include "ugd/adam.hpp"
#include "ugd/core.hpp"
#include "ugd/csv.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

namespace ugd {

inline constexpr double log_floor = 1e-30;

/// Per-class arithmetic mean of the columns of `anchors`. Returns d x |C|.
inline Matrix class_means(const Eigen::Ref<const Matrix>& anchors, std::span<const ClassIndex> labels,
                          std::size_t ways)
{
    if (static_cast<Index>(labels.size()) != anchors.cols())
        throw dim_mismatch("class_means: one label per anchor is required");
    Matrix sums = Matrix::Zero(anchors.rows(), static_cast<Index>(ways));
    std::vector<std::size_t> counts(ways, 0);
    for (Index j = 0; j < anchors.cols(); ++j) {
        const auto y = labels[static_cast<std::size_t>(j)];
        if (y < 0 || static_cast<std::size_t>(y) >= ways)
            throw dim_mismatch("class_means: label out of range");
        sums.col(y) += anchors.col(j);
        counts[static_cast<std::size_t>(y)]++;
    }
    for (std::size_t c = 0; c < ways; ++c) {
        if (counts[c] == 0)
            throw empty_class("class " + std::to_string(c) + " has no anchor");
        sums.col(static_cast<Index>(c)) /= static_cast<double>(counts[c]);
    }
    return sums;
}

/// Squared distances between every column of `points` and every column of
/// `centers`. Returns |centers| x |points|.
inline Matrix squared_distances(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Matrix>& centers)
{
    if (points.rows() != centers.rows())
        throw dim_mismatch("squared_distances: dimensions differ");
    Matrix out(centers.cols(), points.cols());
    for (Index c = 0; c < centers.cols(); ++c)
        out.row(c) = (points.colwise() - centers.col(c)).colwise().squaredNorm();
    return out;
}

/// Column-wise softmax, shifted by the column maximum.
inline Matrix softmax_columns(const Matrix& logits)
{
    const Eigen::RowVectorXd top = logits.colwise().maxCoeff();
    Matrix out = (logits.rowwise() - top).array().exp().matrix();
    const Eigen::RowVectorXd total = out.colwise().sum();
    out.array().rowwise() /= total.array();
    return out;
}

/// softmax(-T * ||h - mean_c||^2) over classes, one column per point.
inline Matrix relation_scores(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Matrix>& means,
                              double temperature)
{
    if (!(temperature > 0))
        throw config_error("relation_scores: temperature must be positive");
    if (points.rows() != means.rows())
        throw dim_mismatch("relation_scores: dimensions differ");
    // -T||p - m||^2 = -T||p||^2 + 2T m.p - T||m||^2; the first term is constant
    // per column and cancels in the softmax.
    Matrix logits = (2.0 * temperature) * (means.transpose() * points);
    logits.colwise() -= temperature * means.colwise().squaredNorm().transpose();
    return softmax_columns(logits);
}

/// Mean negative log-likelihood of the true class. log is floored at 1e-30.
inline double ce_loss(const Matrix& relations, std::span<const ClassIndex> labels)
{
    if (static_cast<Index>(labels.size()) != relations.cols())
        throw dim_mismatch("ce_loss: one label per column is required");
    double total = 0.0;
    for (Index j = 0; j < relations.cols(); ++j)
        total -= std::log(std::max(relations(labels[static_cast<std::size_t>(j)], j), log_floor));
    return total / static_cast<double>(relations.cols());
}

/// sum_c abar_c log abar_c for the mean query relation abar (0 log 0 = 0).
/// This is the negative entropy: its minimum -log|C| is reached at uniform.
inline double se_loss(const Matrix& query_relations)
{
    if (query_relations.cols() < 1)
        throw dim_mismatch("se_loss: at least one query is required");
    const Vector mean = query_relations.rowwise().mean();
    double total = 0.0;
    for (Index c = 0; c < mean.size(); ++c)
        if (mean[c] > 0)
            total += mean[c] * std::log(std::max(mean[c], log_floor));
    return total;
}

/// d(loss)/d(means) given d(loss)/d(logit) for logits -T ||p - mean_c||^2.
inline Matrix means_gradient_from_logits(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Matrix>& means,
                                         const Matrix& logit_grad, double temperature)
{
    // d logit_{c,j} / d mean_c = 2T (p_j - mean_c)
    Matrix grad = 2.0 * temperature * (points * logit_grad.transpose());
    grad -= 2.0 * temperature * (means.array().rowwise() * logit_grad.rowwise().sum().transpose().array()).matrix();
    return grad;
}

namespace detail {

/// d(ce_loss)/d(logits) given the relation scores.
inline Matrix ce_logit_gradient(const Matrix& alpha, std::span<const ClassIndex> labels)
{
    Matrix logit_grad = alpha;
    for (Index j = 0; j < alpha.cols(); ++j) {
        const auto y = labels[static_cast<std::size_t>(j)];
        if (alpha(y, j) < log_floor) {
            // floored term is constant
            logit_grad.col(j).setZero();
            continue;
        }
        logit_grad(y, j) -= 1.0;
    }
    return logit_grad / static_cast<double>(alpha.cols());
}

/// d(se_loss)/d(logits) given the query relation scores.
inline Matrix se_logit_gradient(const Matrix& alpha)
{
    const Vector mean = alpha.rowwise().mean();
    Vector outer(mean.size());
    for (Index c = 0; c < mean.size(); ++c)
        outer[c] = std::log(std::max(mean[c], log_floor)) + 1.0;
    // softmax Jacobian: d abar_c / d logit_{k,j} = alpha_{c,j} (delta_ck - alpha_{k,j}) / N_Q
    const Eigen::RowVectorXd centered = outer.transpose() * alpha;
    Matrix logit_grad = alpha.cwiseProduct((-(centered.replicate(alpha.rows(), 1))).colwise() + outer);
    return logit_grad / static_cast<double>(alpha.cols());
}

} // namespace detail

/// Gradient of ce_loss(relation_scores(anchors, means, T)) w.r.t. the means.
inline Matrix ce_loss_gradient(const Eigen::Ref<const Matrix>& anchors, std::span<const ClassIndex> labels,
                               const Eigen::Ref<const Matrix>& means, double temperature)
{
    const Matrix alpha = relation_scores(anchors, means, temperature);
    return means_gradient_from_logits(anchors, means, detail::ce_logit_gradient(alpha, labels), temperature);
}

/// Gradient of se_loss(relation_scores(queries, means, T)) w.r.t. the means.
inline Matrix se_loss_gradient(const Eigen::Ref<const Matrix>& queries, const Eigen::Ref<const Matrix>& means,
                               double temperature)
{
    const Matrix alpha = relation_scores(queries, means, temperature);
    return means_gradient_from_logits(queries, means, detail::se_logit_gradient(alpha), temperature);
}

struct rectifier_config
{
    double lambda = 0.1;
    double temperature = 0.5;
    int iterations = 1000;
    double lr = 1e-4;
    bool use_ce = true;
    bool use_se = true;
};

struct rectify_record
{
    int step;
    double ce;
    double se;
};

inline void write_trace(std::ostream& out, const std::vector<rectify_record>& trace)
{
    for (const auto& r : trace)
        out << "{\"step\":" << r.step << ",\"l_ce\":" << csv::format_double(r.ce)
            << ",\"l_se\":" << csv::format_double(r.se) << "}\n";
}

struct rectification_result
{
    Matrix means;             ///< class means before rectification, d x |C|
    Matrix rectified_means;   ///< optimized class means
    Matrix offsets;           ///< rectified_means - means
    Matrix rectified_support; ///< every anchor shifted by its class offset
    std::vector<rectify_record> trace;
};

/// Value of lambda*L_ce + L_se (with the configured terms) at `means`.
inline double rectify_objective(const Eigen::Ref<const Matrix>& support, std::span<const ClassIndex> labels,
                                const Eigen::Ref<const Matrix>& queries, const Eigen::Ref<const Matrix>& means,
                                const rectifier_config& config)
{
    double value = 0.0;
    if (config.use_ce)
        value += config.lambda * ce_loss(relation_scores(support, means, config.temperature), labels);
    if (config.use_se && queries.cols() > 0)
        value += se_loss(relation_scores(queries, means, config.temperature));
    return value;
}

inline rectification_result rectify(const Eigen::Ref<const Matrix>& support, const Eigen::Ref<const Matrix>& queries,
                                    std::span<const ClassIndex> labels, std::size_t ways,
                                    const rectifier_config& config, const std::function<void()>& checkpoint = {})
{
    if (config.iterations < 0)
        throw config_error("rectify: iterations must be non-negative");
    if (!(config.temperature > 0))
        throw config_error("rectify: temperature must be positive");
    rectification_result out;
    out.means = class_means(support, labels, ways);
    Matrix current = out.means;
    adam_state optimizer;
    optimizer.lr = config.lr;
    const bool use_se = config.use_se && queries.cols() > 0;

    for (int step = 0; step < config.iterations; ++step) {
        Matrix grad = Matrix::Zero(current.rows(), current.cols());
        rectify_record record{step, 0.0, 0.0};
        if (config.use_ce) {
            const Matrix alpha = relation_scores(support, current, config.temperature);
            record.ce = ce_loss(alpha, labels);
            grad += config.lambda * means_gradient_from_logits(support, current,
                                                               detail::ce_logit_gradient(alpha, labels),
                                                               config.temperature);
        }
        if (use_se) {
            const Matrix alpha = relation_scores(queries, current, config.temperature);
            record.se = se_loss(alpha);
            grad += means_gradient_from_logits(queries, current, detail::se_logit_gradient(alpha),
                                               config.temperature);
        }
        out.trace.push_back(record);
        adam_step({block(current, grad)}, optimizer);
        if (checkpoint && step % 100 == 99)
            checkpoint();
    }
    out.rectified_means = std::move(current);
    out.offsets = out.rectified_means - out.means;
    out.rectified_support = support;
    for (Index j = 0; j < support.cols(); ++j)
        out.rectified_support.col(j) += out.offsets.col(labels[static_cast<std::size_t>(j)]);
    return out;
}

} // namespace ugd
