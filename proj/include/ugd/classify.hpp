// Nearest-class-mean metric classifier over latent representations, plus the
// prototypical and matching baselines on zero-padded view concatenations.
#pragma once

#include "ugd/core.hpp"
#include "ugd/episode.hpp"
#include "ugd/rectifier.hpp"

#include <span>
#include <vector>

namespace ugd {

struct classifier
{
    Matrix weights; ///< m_c as columns, d x |C|
    double temperature = 0.5;

    std::size_t ways() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

struct prediction
{
    Vector probabilities;
    ClassIndex label = 0;
};

/// m_c is the mean of the class-c anchors.
inline classifier build_classifier(const Eigen::Ref<const Matrix>& anchors, std::span<const ClassIndex> labels,
                                   std::size_t ways, double temperature)
{
    return {class_means(anchors, labels, ways), temperature};
}

/// First index of the largest entry.
inline ClassIndex first_argmax(const Vector& values)
{
    Index best = 0;
    for (Index i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return static_cast<ClassIndex>(best);
}

/// softmax over classes of -T ||m_c - h||^2; ties go to the smaller index.
inline prediction predict(const classifier& model, const Eigen::Ref<const Vector>& query)
{
    if (query.size() != model.weights.rows())
        throw dim_mismatch("predict: query has dimension " + std::to_string(query.size()) + ", classifier " +
                           std::to_string(model.weights.rows()));
    if (!(model.temperature > 0))
        throw config_error("predict: temperature must be positive");
    const Vector dist = (model.weights.colwise() - query).colwise().squaredNorm().transpose();
    const Vector logits = -model.temperature * dist;
    Vector p = (logits.array() - logits.maxCoeff()).exp();
    p /= p.sum();
    const auto label = first_argmax(p);
    return {std::move(p), label};
}

inline std::vector<prediction> predict_all(const classifier& model, const Eigen::Ref<const Matrix>& queries)
{
    std::vector<prediction> out;
    out.reserve(static_cast<std::size_t>(queries.cols()));
    for (Index j = 0; j < queries.cols(); ++j)
        out.push_back(predict(model, queries.col(j)));
    return out;
}

// ---------------------------------------------------------------------------
// baselines
// ---------------------------------------------------------------------------

/// All views stacked, with zero vectors in place of missing ones.
inline Vector zero_padded_concat(const multi_view_sample& sample, const view_spec& spec)
{
    Vector out = Vector::Zero(spec.total_dim());
    Index offset = 0;
    for (std::size_t v = 0; v < spec.view_count(); ++v) {
        if (sample.views[v])
            out.segment(offset, spec.dim(v)) = *sample.views[v];
        offset += spec.dim(v);
    }
    return out;
}

inline Matrix zero_padded_matrix(const std::vector<multi_view_sample>& samples, const view_spec& spec)
{
    Matrix out(spec.total_dim(), static_cast<Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.col(static_cast<Index>(i)) = zero_padded_concat(samples[i], spec);
    return out;
}

/// Prototypical classifier: class prototypes are mean support concatenations,
/// queries go to the nearest prototype (probabilities softmax(-d^2)).
inline std::vector<prediction> proto_baseline(const episode& e)
{
    const Matrix support = zero_padded_matrix(e.support(), e.spec());
    const Matrix query = zero_padded_matrix(e.query(), e.spec());
    const auto labels = e.support_class_indices();
    return predict_all(build_classifier(support, labels, e.ways(), 1.0), query);
}

/// Matching classifier: softmax attention over cosine similarities to every
/// support sample, summed per class.
inline std::vector<prediction> match_baseline(const episode& e)
{
    Matrix support = zero_padded_matrix(e.support(), e.spec());
    const Matrix query = zero_padded_matrix(e.query(), e.spec());
    const auto labels = e.support_class_indices();
    for (Index j = 0; j < support.cols(); ++j) {
        const double n = support.col(j).norm();
        if (n == 0)
            throw zero_vector("match_baseline: support sample with an all-zero representation");
        support.col(j) /= n;
    }
    std::vector<prediction> out;
    for (Index q = 0; q < query.cols(); ++q) {
        const double n = query.col(q).norm();
        if (n == 0)
            throw zero_vector("match_baseline: query with an all-zero representation");
        const Vector cosine = support.transpose() * (query.col(q) / n);
        Vector attention = (cosine.array() - cosine.maxCoeff()).exp();
        attention /= attention.sum();
        Vector p = Vector::Zero(static_cast<Index>(e.ways()));
        for (Index j = 0; j < support.cols(); ++j)
            p[labels[static_cast<std::size_t>(j)]] += attention[j];
        const auto label = first_argmax(p);
        out.push_back({std::move(p), label});
    }
    return out;
}

/// Fraction of predictions that match `truth` (roster indices).
inline double accuracy(const std::vector<prediction>& predictions, std::span<const ClassIndex> truth)
{
    if (predictions.size() != truth.size())
        throw dim_mismatch("accuracy: prediction and label counts differ");
    if (predictions.empty())
        return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        hits += predictions[i].label == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

} // namespace ugd
