// Inverse anchor aggregation: a unified latent matrix H whose per-view affine
// projections W_v H + b_v reconstruct every view's anchors. Evaluator
// parameters and H are updated alternately with separate Adam states; the H
// step adds a label-consistency penalty over the support-anchor columns.
#pragma once

#include "ugd/adam.hpp"
#include "ugd/core.hpp"
#include "ugd/dgai.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

namespace ugd {

struct latent_state
{
    Matrix latent;                ///< H, d x (support anchors + queries)
    std::vector<Matrix> weights;  ///< W_v, d_v x d
    std::vector<Vector> biases;   ///< b_v, length d_v

    Index dim() const noexcept { return latent.rows(); }
};

/// Xavier-uniform H and W_v, zero biases.
inline latent_state init_latent(const anchor_batch& batch, Index dim, std::uint64_t seed)
{
    if (dim < 1)
        throw config_error("init_latent: latent dimension must be positive");
    latent_state s;
    rng gen(substream(seed, 0x1a7e));
    const double bound = std::sqrt(6.0 / static_cast<double>(dim + dim));
    s.latent.resize(dim, batch.columns());
    for (Index j = 0; j < s.latent.cols(); ++j)
        for (Index i = 0; i < dim; ++i)
            s.latent(i, j) = gen.uniform(-bound, bound);
    for (const auto& g : batch.gamma) {
        const Index dv = g.rows();
        const double a = std::sqrt(6.0 / static_cast<double>(dim + dv));
        Matrix w(dv, dim);
        for (Index j = 0; j < dim; ++j)
            for (Index i = 0; i < dv; ++i)
                w(i, j) = gen.uniform(-a, a);
        s.weights.push_back(std::move(w));
        s.biases.push_back(Vector::Zero(dv));
    }
    return s;
}

// ---------------------------------------------------------------------------
// reconstruction loss
// ---------------------------------------------------------------------------

/// W_v H + b_v 1^T - Gamma_v for every view.
inline std::vector<Matrix> reconstruction_residuals(const Matrix& latent, const std::vector<Matrix>& weights,
                                                    const std::vector<Vector>& biases,
                                                    const std::vector<Matrix>& gamma)
{
    if (weights.size() != gamma.size() || biases.size() != gamma.size())
        throw dim_mismatch("aggregation: parameter and view counts differ");
    std::vector<Matrix> out;
    out.reserve(gamma.size());
    for (std::size_t v = 0; v < gamma.size(); ++v) {
        if (weights[v].cols() != latent.rows() || weights[v].rows() != gamma[v].rows() ||
            biases[v].size() != gamma[v].rows() || latent.cols() != gamma[v].cols())
            throw dim_mismatch("aggregation: shapes of view " + std::to_string(v) + " are inconsistent");
        Matrix r = weights[v] * latent - gamma[v];
        r.colwise() += biases[v];
        out.push_back(std::move(r));
    }
    return out;
}

/// Sum over views of the squared Frobenius reconstruction error.
inline double aggregation_loss(const Matrix& latent, const std::vector<Matrix>& weights,
                               const std::vector<Vector>& biases, const std::vector<Matrix>& gamma)
{
    double total = 0.0;
    for (const auto& r : reconstruction_residuals(latent, weights, biases, gamma))
        total += r.squaredNorm();
    return total;
}

struct aggregation_gradients
{
    Matrix latent;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

inline aggregation_gradients aggregation_loss_gradients(const Matrix& latent, const std::vector<Matrix>& weights,
                                                        const std::vector<Vector>& biases,
                                                        const std::vector<Matrix>& gamma)
{
    const auto residuals = reconstruction_residuals(latent, weights, biases, gamma);
    aggregation_gradients g;
    g.latent = Matrix::Zero(latent.rows(), latent.cols());
    for (std::size_t v = 0; v < gamma.size(); ++v) {
        g.weights.push_back(2.0 * residuals[v] * latent.transpose());
        g.biases.push_back(2.0 * residuals[v].rowwise().sum());
        g.latent.noalias() += 2.0 * weights[v].transpose() * residuals[v];
    }
    return g;
}

// ---------------------------------------------------------------------------
// label-consistency penalty
// ---------------------------------------------------------------------------

/// Relation of support anchor n to every class: the label-summed inner
/// products with all other anchors, divided by (N-1)/|C|. Returns |C| x N.
inline Matrix anchor_relations(const Eigen::Ref<const Matrix>& support, std::span<const ClassIndex> labels,
                               std::size_t ways)
{
    const Index n = support.cols();
    if (static_cast<Index>(labels.size()) != n)
        throw dim_mismatch("constraint: one label per support anchor is required");
    if (n < 2)
        throw dim_mismatch("constraint: at least two support anchors are required");
    const auto classes = static_cast<Index>(ways);
    Matrix class_sums = Matrix::Zero(support.rows(), classes);
    for (Index j = 0; j < n; ++j) {
        const auto y = labels[static_cast<std::size_t>(j)];
        if (y < 0 || y >= classes)
            throw dim_mismatch("constraint: label out of range");
        class_sums.col(y) += support.col(j);
    }
    Matrix rel = class_sums.transpose() * support;
    for (Index j = 0; j < n; ++j)
        rel(labels[static_cast<std::size_t>(j)], j) -= support.col(j).squaredNorm();
    const double normalizer = static_cast<double>(n - 1) / static_cast<double>(classes);
    return rel / normalizer;
}

/// Sum over support anchors of ReLU(max_c r_{n,c} - r_{n,y_n}).
inline double constraint_loss(const Eigen::Ref<const Matrix>& support, std::span<const ClassIndex> labels,
                              std::size_t ways)
{
    const Matrix rel = anchor_relations(support, labels, ways);
    double total = 0.0;
    for (Index j = 0; j < rel.cols(); ++j) {
        const double gap = rel.col(j).maxCoeff() - rel(labels[static_cast<std::size_t>(j)], j);
        total += std::max(0.0, gap);
    }
    return total;
}

/// Gradient of constraint_loss with respect to the support columns. At a kink
/// the ReLU contributes 0 and max ties resolve to the first index.
inline Matrix constraint_loss_gradient(const Eigen::Ref<const Matrix>& support, std::span<const ClassIndex> labels,
                                       std::size_t ways)
{
    const Matrix rel = anchor_relations(support, labels, ways);
    const Index n = support.cols();
    const auto classes = static_cast<Index>(ways);
    // coefficient of dL/dr_{n,c}
    Matrix coeff = Matrix::Zero(classes, n);
    for (Index j = 0; j < n; ++j) {
        const auto y = labels[static_cast<std::size_t>(j)];
        Index best = 0;
        rel.col(j).maxCoeff(&best);
        if (rel(best, j) - rel(y, j) > 0.0) {
            coeff(best, j) += 1.0;
            coeff(y, j) -= 1.0;
        }
    }
    Matrix class_sums = Matrix::Zero(support.rows(), classes);
    for (Index j = 0; j < n; ++j)
        class_sums.col(labels[static_cast<std::size_t>(j)]) += support.col(j);
    const Matrix weighted = support * coeff.transpose(); // d x |C|

    Matrix grad = class_sums * coeff;
    for (Index j = 0; j < n; ++j) {
        const auto y = labels[static_cast<std::size_t>(j)];
        grad.col(j) += weighted.col(y) - 2.0 * coeff(y, j) * support.col(j);
    }
    const double normalizer = static_cast<double>(n - 1) / static_cast<double>(classes);
    return grad / normalizer;
}

// ---------------------------------------------------------------------------
// alternating optimization
// ---------------------------------------------------------------------------

/// Runs `steps` Adam updates of (W, b) on the reconstruction loss, H frozen.
///
/// With H fixed the gradients only need H H^T, Gamma_v H^T and the column sums
/// of H and Gamma_v, so those are formed once for the whole block.
inline void evaluator_update(latent_state& state, const anchor_batch& batch, int steps, adam_state& optimizer)
{
    if (steps <= 0)
        return;
    const Matrix& h = state.latent;
    const auto columns = static_cast<double>(h.cols());
    const Matrix gram = h * h.transpose();
    const Vector h_sum = h.rowwise().sum();
    std::vector<Matrix> cross;
    std::vector<Vector> gamma_sum;
    for (const auto& g : batch.gamma) {
        if (g.cols() != h.cols())
            throw dim_mismatch("evaluator_update: anchor and latent column counts differ");
        cross.push_back(g * h.transpose());
        gamma_sum.push_back(g.rowwise().sum());
    }
    std::vector<Matrix> grad_w(batch.gamma.size());
    std::vector<Vector> grad_b(batch.gamma.size());
    for (int s = 0; s < steps; ++s) {
        std::vector<param_ref> blocks;
        for (std::size_t v = 0; v < batch.gamma.size(); ++v) {
            const auto& w = state.weights[v];
            const auto& b = state.biases[v];
            // d/dW = 2 (W H + b 1^T - Gamma) H^T,  d/db = 2 (W H + b 1^T - Gamma) 1
            grad_w[v] = 2.0 * (w * gram + b * h_sum.transpose() - cross[v]);
            grad_b[v] = 2.0 * (w * h_sum + columns * b - gamma_sum[v]);
            blocks.push_back(block(state.weights[v], grad_w[v]));
            blocks.push_back(block(state.biases[v], grad_b[v]));
        }
        adam_step(blocks, optimizer);
    }
}

/// Which terms drive the H update.
struct latent_objective
{
    bool reconstruction = true;
    bool constraint = true;
};

/// Gradient of the H objective (reconstruction + constraint) at `state`.
inline Matrix latent_gradient(const latent_state& state, const anchor_batch& batch, latent_objective terms)
{
    Matrix grad = Matrix::Zero(state.latent.rows(), state.latent.cols());
    if (terms.reconstruction) {
        const auto residuals = reconstruction_residuals(state.latent, state.weights, state.biases, batch.gamma);
        for (std::size_t v = 0; v < residuals.size(); ++v)
            grad.noalias() += 2.0 * state.weights[v].transpose() * residuals[v];
    }
    if (terms.constraint && batch.support_columns >= 2 && batch.ways >= 1)
        grad.leftCols(batch.support_columns) +=
            constraint_loss_gradient(state.latent.leftCols(batch.support_columns), batch.labels, batch.ways);
    return grad;
}

/// Runs `steps` Adam updates of H, evaluator frozen.
///
/// The reconstruction gradient 2 sum_v W_v^T (W_v H + b_v 1^T - Gamma_v) is
/// expanded so that sum_v W_v^T W_v, sum_v W_v^T b_v and sum_v W_v^T Gamma_v
/// are formed once per block.
inline void latent_update(latent_state& state, const anchor_batch& batch, int steps, adam_state& optimizer,
                          latent_objective terms = {})
{
    if (steps <= 0)
        return;
    Matrix& h = state.latent;
    const Index d = h.rows();
    Matrix gram = Matrix::Zero(d, d);
    Vector offset = Vector::Zero(d);
    Matrix target = Matrix::Zero(d, h.cols());
    if (terms.reconstruction) {
        for (std::size_t v = 0; v < batch.gamma.size(); ++v) {
            const auto& w = state.weights[v];
            if (w.cols() != d || batch.gamma[v].cols() != h.cols())
                throw dim_mismatch("latent_update: shapes are inconsistent");
            gram.noalias() += w.transpose() * w;
            offset.noalias() += w.transpose() * state.biases[v];
            target.noalias() += w.transpose() * batch.gamma[v];
        }
    }
    const bool constraint = terms.constraint && batch.support_columns >= 2 && batch.ways >= 1;
    Matrix grad(d, h.cols());
    for (int s = 0; s < steps; ++s) {
        if (terms.reconstruction) {
            grad.noalias() = gram * h;
            grad.colwise() += offset;
            grad -= target;
            grad *= 2.0;
        } else {
            grad.setZero();
        }
        if (constraint)
            grad.leftCols(batch.support_columns) +=
                constraint_loss_gradient(h.leftCols(batch.support_columns), batch.labels, batch.ways);
        adam_step({block(h, grad)}, optimizer);
    }
}

struct aggregation_config
{
    Index dim = 0; ///< 0 selects the largest view dimension
    int iterations = 30;
    int evaluator_steps = 10; ///< N_1
    int latent_steps = 10;    ///< N_2
    double lr_weights = 1e-2;
    double lr_latent = 1e-2;
    bool use_constraint = true;
};

struct trace_record
{
    int iteration;
    double aggregation;
    double constraint;
};

using aggregation_trace = std::vector<trace_record>;

inline void write_trace(std::ostream& out, const aggregation_trace& trace)
{
    for (const auto& r : trace)
        out << "{\"iter\":" << r.iteration << ",\"l_agg\":" << csv::format_double(r.aggregation)
            << ",\"l_cst\":" << csv::format_double(r.constraint) << "}\n";
}

struct aggregation_result
{
    latent_state state;
    aggregation_trace trace;
    Index support_columns = 0;

    /// Unified support anchors (first N_S*N_Gamma columns of H).
    Matrix support() const { return state.latent.leftCols(support_columns); }
    /// Unified queries (remaining columns of H).
    Matrix query() const { return state.latent.rightCols(state.latent.cols() - support_columns); }
};

inline double constraint_value(const latent_state& state, const anchor_batch& batch)
{
    if (batch.support_columns < 2)
        return 0.0;
    return constraint_loss(state.latent.leftCols(batch.support_columns), batch.labels, batch.ways);
}

/// `checkpoint`, when set, runs after every outer iteration (used for
/// wall-clock budgets; it may throw).
inline aggregation_result run_inverse_aggregation(const anchor_batch& batch, const aggregation_config& config,
                                                  std::uint64_t seed, const std::function<void()>& checkpoint = {})
{
    if (config.iterations < 0 || config.evaluator_steps < 0 || config.latent_steps < 0)
        throw config_error("aggregation: iteration counts must be non-negative");
    Index dim = config.dim;
    if (dim == 0)
        for (const auto& g : batch.gamma)
            dim = std::max(dim, g.rows());

    aggregation_result result;
    result.support_columns = batch.support_columns;
    result.state = init_latent(batch, dim, seed);
    adam_state evaluator_opt;
    evaluator_opt.lr = config.lr_weights;
    adam_state latent_opt;
    latent_opt.lr = config.lr_latent;
    const latent_objective terms{true, config.use_constraint};

    for (int it = 0; it < config.iterations; ++it) {
        evaluator_update(result.state, batch, config.evaluator_steps, evaluator_opt);
        latent_update(result.state, batch, config.latent_steps, latent_opt, terms);
        result.trace.push_back({it,
                                aggregation_loss(result.state.latent, result.state.weights, result.state.biases,
                                                 batch.gamma),
                                constraint_value(result.state, batch)});
        if (checkpoint)
            checkpoint();
    }
    return result;
}

/// Replacement for aggregation used by the "no inverse aggregation" ablation:
/// the per-view anchors stacked into one column per anchor.
inline Matrix concatenate_views(const anchor_batch& batch)
{
    Index rows = 0;
    for (const auto& g : batch.gamma)
        rows += g.rows();
    Matrix out(rows, batch.columns());
    Index offset = 0;
    for (const auto& g : batch.gamma) {
        out.middleRows(offset, g.rows()) = g;
        offset += g.rows();
    }
    return out;
}

} // namespace ugd
