#include "test_util.hpp"

#include "ugd/adam.hpp"
#include "ugd/aggregator.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace ugd;

namespace {

anchor_batch random_batch(rng& gen, std::vector<Index> dims, Index support, Index queries, std::size_t ways)
{
    anchor_batch b;
    for (auto d : dims)
        b.gamma.push_back(test::random_matrix(gen, d, support + queries));
    b.support_columns = support;
    b.query_columns = queries;
    b.ways = ways;
    for (Index j = 0; j < support; ++j)
        b.labels.push_back(static_cast<ClassIndex>(j % static_cast<Index>(ways)));
    return b;
}

/// Smallest gap between the two largest relations of any anchor. The loss is
/// smooth wherever this gap is positive: a true-class maximum keeps the ReLU
/// argument at exactly 0 in a neighborhood.
double kink_margin(const Matrix& support, const std::vector<ClassIndex>& labels, std::size_t ways)
{
    const Matrix rel = anchor_relations(support, labels, ways);
    double margin = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < rel.cols(); ++j) {
        Vector col = rel.col(j);
        std::sort(col.data(), col.data() + col.size());
        margin = std::min(margin, col[col.size() - 1] - col[col.size() - 2]);
    }
    return margin;
}

} // namespace

TEST(AggregationLoss, Examples)
{
    Matrix w(1, 1), h(1, 1), g(1, 1);
    w << 1;
    h << 2;
    g << 3;
    EXPECT_DOUBLE_EQ(aggregation_loss(h, {w}, {Vector::Zero(1)}, {g}), 1.0);

    rng gen(1);
    const Matrix hh = test::random_matrix(gen, 3, 7);
    const Matrix ww = test::random_matrix(gen, 4, 3);
    const Vector bb = test::random_vector(gen, 4);
    Matrix exact = ww * hh;
    exact.colwise() += bb;
    EXPECT_LT(aggregation_loss(hh, {ww}, {bb}, {exact}), 1e-25);
}

TEST(AggregationLoss, FiniteDifferenceGradients)
{
    rng gen(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const Index d = 2 + static_cast<Index>(gen.below(7));
        const std::vector<Index> dims{2 + static_cast<Index>(gen.below(7)), 2 + static_cast<Index>(gen.below(7)),
                                      2 + static_cast<Index>(gen.below(7))};
        const Index n = 3 + static_cast<Index>(gen.below(28));
        Matrix h = test::random_matrix(gen, d, n);
        std::vector<Matrix> w, g;
        std::vector<Vector> b;
        for (auto dv : dims) {
            w.push_back(test::random_matrix(gen, dv, d));
            b.push_back(test::random_vector(gen, dv));
            g.push_back(test::random_matrix(gen, dv, n));
        }
        const auto grads = aggregation_loss_gradients(h, w, b, g);
        const auto fh = [&](const Matrix& x) { return aggregation_loss(x, w, b, g); };
        EXPECT_LT(test::relative_error(grads.latent, test::numeric_gradient(fh, h)), 1e-4);
        for (std::size_t v = 0; v < 3; ++v) {
            const auto fw = [&](const Matrix& x) {
                auto ww = w;
                ww[v] = x;
                return aggregation_loss(h, ww, b, g);
            };
            const auto fb = [&](const Matrix& x) {
                auto bb = b;
                bb[v] = x;
                return aggregation_loss(h, w, bb, g);
            };
            EXPECT_LT(test::relative_error(grads.weights[v], test::numeric_gradient(fw, w[v])), 1e-4);
            EXPECT_LT(test::relative_error(grads.biases[v], test::numeric_gradient(fb, b[v])), 1e-4);
        }
    }
}

TEST(ConstraintLoss, HandExample)
{
    Matrix h(2, 3);
    h << 1, 0, 1, 0, 1, 0;
    const std::vector<ClassIndex> y{0, 1, 1};
    const Matrix rel = anchor_relations(h, y, 2);
    EXPECT_DOUBLE_EQ(rel(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(rel(1, 0), 1.0);
    // anchor 0 contributes 1; anchor 1 sees r=[0,0], anchor 2 sees r=[1,0]
    EXPECT_DOUBLE_EQ(constraint_loss(h, y, 2), 2.0);
}

TEST(ConstraintLoss, OrthonormalClustersAreFree)
{
    Matrix h = Matrix::Zero(3, 6);
    const std::vector<ClassIndex> y{0, 0, 1, 1, 2, 2};
    for (Index j = 0; j < 6; ++j)
        h(y[static_cast<std::size_t>(j)], j) = 1.0;
    EXPECT_EQ(constraint_loss(h, y, 3), 0.0);
    EXPECT_EQ(constraint_loss_gradient(h, y, 3), Matrix::Zero(3, 6));
}

TEST(ConstraintLoss, FiniteDifferenceGradientAwayFromKinks)
{
    rng gen(31);
    int checked = 0;
    for (int attempt = 0; attempt < 400 && checked < 20; ++attempt) {
        const Index d = 2 + static_cast<Index>(gen.below(7));
        const std::size_t ways = 2 + static_cast<std::size_t>(gen.below(3));
        const Index n = static_cast<Index>(ways) + static_cast<Index>(gen.below(static_cast<std::uint64_t>(30 - ways)));
        const Matrix h = test::random_matrix(gen, d, n);
        std::vector<ClassIndex> y;
        for (Index j = 0; j < n; ++j)
            y.push_back(static_cast<ClassIndex>(j % static_cast<Index>(ways)));
        if (kink_margin(h, y, ways) < 1e-3)
            continue;
        const auto f = [&](const Matrix& x) { return constraint_loss(x, y, ways); };
        const Matrix analytic = constraint_loss_gradient(h, y, ways);
        EXPECT_LT(test::relative_error(analytic, test::numeric_gradient(f, h)), 1e-4);
        ++checked;
    }
    EXPECT_EQ(checked, 20);
}

TEST(Adam, ZeroGradientLeavesParameters)
{
    Vector x = Vector::LinSpaced(4, 1, 4);
    const Vector before = x;
    const Vector g = Vector::Zero(4);
    adam_state s;
    adam_step({block(x, g)}, s);
    EXPECT_EQ(x, before);
    EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate)
{
    for (double g0 : {3.0, -0.02, 1e3}) {
        Vector x = Vector::Zero(1);
        const Vector g = Vector::Constant(1, g0);
        adam_state s;
        s.lr = 1e-2;
        adam_step({block(x, g)}, s);
        // m_hat / sqrt(v_hat) = sign(g)
        EXPECT_NEAR(std::abs(x[0]), 1e-2, 1e-2 * 1e-8 / std::abs(g0) + 1e-15);
        EXPECT_LT(x[0] * g0, 0.0);
    }
}

TEST(Adam, NonFiniteGradientLeavesState)
{
    Vector x = Vector::Ones(3);
    Vector g = Vector::Ones(3);
    g[1] = std::numeric_limits<double>::quiet_NaN();
    adam_state s;
    EXPECT_THROW(adam_step({block(x, g)}, s), non_finite_gradient);
    EXPECT_EQ(x, Vector::Ones(3));
    EXPECT_EQ(s.t, 0u);
}

TEST(InitLatent, Bounds)
{
    rng gen(3);
    const auto batch = random_batch(gen, {5, 9}, 12, 4, 3);
    const auto s = init_latent(batch, 7, 11);
    EXPECT_LE(s.latent.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 14.0));
    EXPECT_LE(s.weights[1].cwiseAbs().maxCoeff(), std::sqrt(6.0 / 16.0));
    EXPECT_EQ(s.biases[0], Vector::Zero(5));
    const auto t = init_latent(batch, 7, 11);
    EXPECT_EQ(s.latent, t.latent);
    EXPECT_EQ(s.weights[0], t.weights[0]);
}

TEST(EvaluatorUpdate, ZeroStepsAndDescent)
{
    rng gen(4);
    const auto batch = random_batch(gen, {6, 6, 6}, 40, 10, 4);
    auto s = init_latent(batch, 6, 1);
    const auto before = s;
    adam_state opt;
    evaluator_update(s, batch, 0, opt);
    EXPECT_EQ(s.weights[0], before.weights[0]);

    const double l0 = aggregation_loss(s.latent, s.weights, s.biases, batch.gamma);
    evaluator_update(s, batch, 10, opt);
    EXPECT_LE(aggregation_loss(s.latent, s.weights, s.biases, batch.gamma), l0);
    EXPECT_EQ(s.latent, before.latent);
}

TEST(EvaluatorUpdate, MatchesDirectGradientStep)
{
    rng gen(5);
    const auto batch = random_batch(gen, {4, 3}, 9, 3, 3);
    auto fast = init_latent(batch, 5, 2);
    auto slow = fast;
    adam_state a, b;
    evaluator_update(fast, batch, 3, a);
    for (int step = 0; step < 3; ++step) {
        const auto g = aggregation_loss_gradients(slow.latent, slow.weights, slow.biases, batch.gamma);
        std::vector<param_ref> blocks;
        for (std::size_t v = 0; v < 2; ++v) {
            blocks.push_back(block(slow.weights[v], g.weights[v]));
            blocks.push_back(block(slow.biases[v], g.biases[v]));
        }
        adam_step(blocks, b);
    }
    for (std::size_t v = 0; v < 2; ++v) {
        EXPECT_LT((fast.weights[v] - slow.weights[v]).norm(), 1e-12);
        EXPECT_LT((fast.biases[v] - slow.biases[v]).norm(), 1e-12);
    }
}

TEST(LatentUpdate, MatchesDirectGradientStep)
{
    rng gen(6);
    const auto batch = random_batch(gen, {4, 3}, 9, 3, 3);
    auto fast = init_latent(batch, 5, 2);
    auto slow = fast;
    adam_state a, b;
    latent_update(fast, batch, 3, a);
    for (int step = 0; step < 3; ++step) {
        const Matrix g = latent_gradient(slow, batch, {});
        adam_step({block(slow.latent, g)}, b);
    }
    EXPECT_LT((fast.latent - slow.latent).norm(), 1e-12);
}

TEST(LatentUpdate, QueriesOnlySeeReconstruction)
{
    rng gen(7);
    const auto batch = random_batch(gen, {4, 4}, 12, 5, 3);
    auto s = init_latent(batch, 4, 2);
    const Matrix before = s.latent;
    adam_state opt;
    latent_update(s, batch, 0, opt);
    EXPECT_EQ(s.latent, before);
    latent_update(s, batch, 10, opt, {false, true});
    EXPECT_EQ(s.latent.rightCols(5), before.rightCols(5));
}

TEST(LatentUpdate, JointObjectiveDecreases)
{
    rng gen(8);
    const auto batch = random_batch(gen, {6, 6}, 30, 10, 3);
    auto s = init_latent(batch, 6, 3);
    adam_state eval;
    evaluator_update(s, batch, 10, eval);
    auto objective = [&] {
        return aggregation_loss(s.latent, s.weights, s.biases, batch.gamma) + constraint_value(s, batch);
    };
    const double before = objective();
    adam_state opt;
    latent_update(s, batch, 10, opt);
    EXPECT_LE(objective(), before);
}

TEST(InverseAggregation, SolvableCase)
{
    rng gen(9);
    anchor_batch batch;
    batch.gamma = {test::random_matrix(gen, 8, 50)};
    batch.support_columns = 50;
    batch.ways = 1;
    batch.labels.assign(50, 0);
    const auto result = run_inverse_aggregation(batch, {}, 4);
    ASSERT_EQ(result.trace.size(), 30u);
    const auto init = init_latent(batch, 8, 4);
    const double initial = aggregation_loss(init.latent, init.weights, init.biases, batch.gamma);
    EXPECT_LE(result.trace.back().aggregation, 1e-3 * initial);
}

TEST(InverseAggregation, DeterministicAndShaped)
{
    rng gen(10);
    const auto batch = random_batch(gen, {5, 7}, 20, 6, 4);
    aggregation_config cfg;
    cfg.iterations = 4;
    const auto a = run_inverse_aggregation(batch, cfg, 3);
    const auto b = run_inverse_aggregation(batch, cfg, 3);
    EXPECT_EQ(a.state.latent, b.state.latent);
    EXPECT_EQ(a.support().cols(), 20);
    EXPECT_EQ(a.query().cols(), 6);
    EXPECT_EQ(a.state.dim(), 7);
    EXPECT_EQ(a.trace.size(), 4u);
}

TEST(ConcatenateViews, Stacks)
{
    rng gen(11);
    const auto batch = random_batch(gen, {2, 3}, 4, 1, 2);
    const Matrix c = concatenate_views(batch);
    EXPECT_EQ(c.rows(), 5);
    EXPECT_EQ(c.topRows(2), batch.gamma[0]);
    EXPECT_EQ(c.bottomRows(3), batch.gamma[1]);
}
