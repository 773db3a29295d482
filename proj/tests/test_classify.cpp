#include "test_util.hpp"

#include "ugd/base_stats.hpp"
#include "ugd/classify.hpp"

#include <gtest/gtest.h>

using namespace ugd;

TEST(Classifier, OneAnchorPerClass)
{
    rng gen(1);
    const Matrix a = test::random_matrix(gen, 3, 4);
    const auto model = build_classifier(a, std::vector<ClassIndex>{0, 1, 2, 3}, 4, 0.5);
    EXPECT_EQ(model.weights, a);
}

TEST(Predict, ExactMatchWins)
{
    rng gen(2);
    const Matrix a = test::random_matrix(gen, 5, 6);
    const auto model = build_classifier(a, std::vector<ClassIndex>{0, 1, 2, 3, 4, 5}, 6, 0.5);
    const auto p = predict(model, a.col(3));
    EXPECT_EQ(p.label, 3);
    EXPECT_NEAR(p.probabilities.sum(), 1.0, 1e-12);
}

TEST(Predict, TiesGoToSmallestIndex)
{
    Matrix m(2, 3);
    m << 1, -1, 0, 0, 0, 0;
    m(1, 2) = 1; // three points at distance 1 from the origin
    const classifier model{m, 0.5};
    const auto p = predict(model, Vector::Zero(2));
    EXPECT_EQ(p.label, 0);
    for (Index c = 0; c < 3; ++c)
        EXPECT_NEAR(p.probabilities[c], 1.0 / 3.0, 1e-15);
}

TEST(Predict, ArgmaxIsNearestForAnyTemperature)
{
    rng gen(3);
    const Matrix m = test::random_matrix(gen, 4, 5);
    for (double t : {1e-3, 0.5, 7.0}) {
        const classifier model{m, t};
        for (int i = 0; i < 50; ++i) {
            const Vector h = test::random_vector(gen, 4);
            Index nearest = 0;
            (m.colwise() - h).colwise().squaredNorm().minCoeff(&nearest);
            EXPECT_EQ(predict(model, h).label, nearest);
        }
    }
}

TEST(Predict, DimensionMismatch)
{
    const classifier model{Matrix::Zero(3, 2), 0.5};
    EXPECT_THROW(predict(model, Vector::Zero(4)), dim_mismatch);
}

TEST(ZeroPadding, Layout)
{
    const view_spec spec({2, 3});
    const auto s = test::make_sample({std::nullopt, (Vector(3) << 1, 2, 3).finished()});
    EXPECT_EQ(zero_padded_concat(s, spec), (Vector(5) << 0, 0, 1, 2, 3).finished());
}

TEST(ProtoBaseline, MatchesNearestMeanOracle)
{
    const auto world = test::make_world(12, 8, 10);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto e = apply_view_missing(sample_episode(world.novel, 5, 3, 4, seed), 0.4, seed + 100);
        const auto preds = proto_baseline(e);
        // oracle: explicit loops over the zero-padded concatenation
        const auto& spec = e.spec();
        const auto labels = e.support_class_indices();
        std::vector<std::vector<double>> protos(5, std::vector<double>(static_cast<std::size_t>(spec.total_dim()), 0.0));
        std::vector<int> counts(5, 0);
        auto flat = [&](const multi_view_sample& s) {
            std::vector<double> out;
            for (std::size_t v = 0; v < spec.view_count(); ++v)
                for (Index i = 0; i < spec.dim(v); ++i)
                    out.push_back(s.views[v] ? (*s.views[v])[i] : 0.0);
            return out;
        };
        for (std::size_t n = 0; n < e.support().size(); ++n) {
            const auto x = flat(e.support()[n]);
            for (std::size_t i = 0; i < x.size(); ++i)
                protos[static_cast<std::size_t>(labels[n])][i] += x[i];
            counts[static_cast<std::size_t>(labels[n])]++;
        }
        for (std::size_t c = 0; c < 5; ++c)
            for (auto& x : protos[c])
                x /= counts[c];
        for (std::size_t q = 0; q < e.query().size(); ++q) {
            const auto x = flat(e.query()[q]);
            double best = 1e300;
            int label = -1;
            for (std::size_t c = 0; c < 5; ++c) {
                double d = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i)
                    d += (x[i] - protos[c][i]) * (x[i] - protos[c][i]);
                if (d < best) {
                    best = d;
                    label = static_cast<int>(c);
                }
            }
            EXPECT_EQ(preds[q].label, label);
        }
    }
}

TEST(ProtoBaseline, OneShotPrototypeIsTheSupport)
{
    const auto world = test::make_world(13);
    const auto e = sample_episode(world.novel, 4, 1, 1, 3);
    // each query equal to a support lands on that support's class
    std::vector<multi_view_sample> query;
    for (const auto& s : e.support()) {
        query.push_back(s);
        query.back().label.reset();
    }
    const auto same = e.with_samples(e.support(), query);
    const auto preds = proto_baseline(same);
    const auto labels = e.support_class_indices();
    for (std::size_t i = 0; i < preds.size(); ++i)
        EXPECT_EQ(preds[i].label, labels[i]);
}

TEST(MatchBaseline, OneShotIsNearestCosine)
{
    const auto world = test::make_world(14);
    const auto e = apply_view_missing(sample_episode(world.novel, 5, 1, 6, 8), 0.3, 2);
    const auto preds = match_baseline(e);
    const Matrix s = zero_padded_matrix(e.support(), e.spec());
    const auto labels = e.support_class_indices();
    for (std::size_t q = 0; q < e.query().size(); ++q) {
        const Vector x = zero_padded_concat(e.query()[q], e.spec());
        Index best = 0;
        double top = -2.0;
        for (Index j = 0; j < s.cols(); ++j) {
            const double c = s.col(j).dot(x) / (s.col(j).norm() * x.norm());
            if (c > top) {
                top = c;
                best = j;
            }
        }
        EXPECT_EQ(preds[q].label, labels[static_cast<std::size_t>(best)]);
    }
}

TEST(MatchBaseline, DuplicateSupportDoublesMass)
{
    // 2-way 2-shot where class 0's supports coincide
    const view_spec spec({2});
    auto sample = [](double a, double b, std::optional<ClassId> y) {
        return test::make_sample({(Vector(2) << a, b).finished()}, y);
    };
    const episode e({0, 1}, 2, {sample(1, 0, 0), sample(1, 0, 0), sample(0, 1, 1), sample(-1, 1, 1)},
                    {sample(1, 1, std::nullopt)}, {0}, spec, 0);
    const auto p = match_baseline(e).front().probabilities;
    const double c0 = std::exp(std::sqrt(0.5));
    const double c1a = std::exp(std::sqrt(0.5));
    const double c1b = std::exp(0.0);
    const double z = 2 * c0 + c1a + c1b;
    EXPECT_NEAR(p[0], 2 * c0 / z, 1e-12);
    EXPECT_NEAR(p[1], (c1a + c1b) / z, 1e-12);
}

TEST(Accuracy, Counts)
{
    std::vector<prediction> p(4);
    p[0].label = 1;
    p[1].label = 0;
    p[2].label = 2;
    p[3].label = 2;
    EXPECT_DOUBLE_EQ(accuracy(p, std::vector<ClassIndex>{1, 0, 0, 2}), 0.75);
    EXPECT_THROW(accuracy(p, std::vector<ClassIndex>{1}), dim_mismatch);
}

TEST(Baselines, EasySeparationAccuracy)
{
    // s >> sigma, eta = 0
    synthetic_spec spec;
    spec.classes = 10;
    spec.samples_per_class = 30;
    spec.views = view_spec({16, 16, 16});
    spec.separation = 10.0;
    spec.seed = 6;
    const auto data = gen_synthetic_dataset(spec);
    double proto = 0.0, match = 0.0;
    const int episodes = 400;
    for (int i = 0; i < episodes; ++i) {
        const auto e = sample_episode(data, 5, 1, 15, substream(6, static_cast<std::uint64_t>(i)));
        std::vector<ClassIndex> truth;
        for (auto id : e.labels_for_evaluation())
            truth.push_back(e.class_index(id));
        proto += accuracy(proto_baseline(e), truth);
        match += accuracy(match_baseline(e), truth);
    }
    EXPECT_GE(proto / episodes, 0.99);
    EXPECT_GE(match / episodes, 0.99);
}
