#include "test_util.hpp"

#include "ugd/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace ugd;
namespace fs = std::filesystem;

namespace {

/// Tiny, fast configuration on a small synthetic world.
experiment_config quick_config()
{
    experiment_config c;
    c.methods = {"ugd", "proto", "match"};
    c.etas = {0.0, 0.3};
    c.episodes = 6;
    c.queries_per_class = 3;
    c.synthetic.base_classes = 8;
    c.synthetic.novel_classes = 6;
    c.synthetic.samples_per_class = 10;
    c.synthetic.dims = {6, 5, 4};
    c.pipeline.dgai.n_gamma = 8;
    c.pipeline.aggregation.iterations = 3;
    c.pipeline.rectifier.iterations = 30;
    c.seed = 5;
    c.record_timing = false;
    return c;
}

fs::path fresh_dir(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("ugd_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST(Config, Defaults)
{
    const experiment_config c;
    EXPECT_EQ(c.episodes, 400);
    ASSERT_EQ(c.etas.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i)
        EXPECT_NEAR(c.etas[i], 0.1 * static_cast<double>(i), 1e-15);
    EXPECT_EQ(c.pipeline.dgai.k, 2u);
    EXPECT_EQ(c.pipeline.dgai.n_gamma, 60);
    EXPECT_EQ(c.pipeline.aggregation.iterations, 30);
    EXPECT_EQ(c.pipeline.aggregation.evaluator_steps, 10);
    EXPECT_EQ(c.pipeline.aggregation.latent_steps, 10);
    EXPECT_EQ(c.pipeline.aggregation.lr_weights, 1e-2);
    EXPECT_EQ(c.pipeline.aggregation.lr_latent, 1e-2);
    EXPECT_EQ(c.queries_per_class, 15);
}

TEST(Config, JsonRoundTrip)
{
    auto c = quick_config();
    c.flags.no_cst = true;
    c.base_subset = 4;
    const auto j = to_json(c);
    EXPECT_EQ(to_json(config_from_json(j)), j);
}

TEST(Config, Overrides)
{
    nlohmann::json j = nlohmann::json::object();
    apply_override(j, "episodes=12");
    apply_override(j, "etas=0,0.3,0.6");
    apply_override(j, "synthetic.coupling=0.5");
    apply_override(j, "methods=ugd+no_se");
    apply_override(j, "source=manifest");
    const auto c = config_from_json(j);
    EXPECT_EQ(c.episodes, 12);
    EXPECT_EQ(c.etas, (std::vector<double>{0.0, 0.3, 0.6}));
    EXPECT_EQ(c.synthetic.coupling, 0.5);
    EXPECT_EQ(c.methods, std::vector<std::string>{"ugd+no_se"});
    EXPECT_EQ(c.source, "manifest");
    EXPECT_THROW(apply_override(j, "novalue"), config_error);
}

TEST(Config, Rejections)
{
    EXPECT_THROW(config_from_json({{"episdoes", 3}}), config_error);
    EXPECT_THROW(config_from_json({{"episodes", 0}}), config_error);
    EXPECT_THROW(config_from_json({{"etas", {1.2}}}), config_error);
    EXPECT_THROW(config_from_json({{"synthetic", {{"colour", 1}}}}), config_error);
    EXPECT_THROW(config_from_json({{"ways", "five"}}), config_error);

    auto c = quick_config();
    c.etas = {0.7};
    EXPECT_THROW(prepare_data(c), infeasible_eta);
}

TEST(Methods, Parsing)
{
    const auto m = parse_method("ugd+no_se+no_cst", {});
    EXPECT_EQ(m.kind, method_kind::ugd);
    EXPECT_TRUE(m.flags.no_se);
    EXPECT_TRUE(m.flags.no_cst);
    EXPECT_FALSE(m.flags.no_ds);
    ablation global;
    global.no_iaa = true;
    EXPECT_TRUE(parse_method("ugd", global).flags.no_iaa);
    EXPECT_EQ(parse_method("proto", {}).kind, method_kind::proto);
    EXPECT_THROW(parse_method("ugd+no_xx", {}), config_error);
    EXPECT_THROW(parse_method("cpm", {}), config_error);
}

TEST(Data, BaseSubset)
{
    auto c = quick_config();
    c.base_subset = 3;
    c.base_subset_seed = 9;
    const auto a = prepare_data(c);
    EXPECT_EQ(a.stats.class_count(), 3u);
    EXPECT_TRUE(std::is_sorted(a.stats.classes().begin(), a.stats.classes().end()));
    EXPECT_EQ(prepare_data(c).stats.classes(), a.stats.classes());
    c.base_subset_seed = 10;
    c.base_subset = 5;
    EXPECT_EQ(prepare_data(c).stats.class_count(), 5u);
}

TEST(Data, ManifestSourceMatchesSynthetic)
{
    const auto c = quick_config();
    const auto direct = prepare_data(c);
    const auto dir = fresh_dir("manifest_source");
    const auto base_path = save_features(
        select_classes(gen_synthetic_dataset([&] {
                           synthetic_spec s;
                           s.classes = 14;
                           s.samples_per_class = 10;
                           s.views = view_spec({6, 5, 4});
                           s.seed = c.synthetic.seed;
                           return s;
                       }()),
                       {0, 1, 2, 3, 4, 5, 6, 7}, dataset_role::base),
        dir / "base");
    const auto novel_path = save_features(direct.novel, dir / "novel");
    auto m = c;
    m.source = "manifest";
    m.base_manifest = base_path.string();
    m.novel_manifest = novel_path.string();
    const auto loaded = prepare_data(m);
    EXPECT_EQ(loaded.stats.classes(), direct.stats.classes());
    EXPECT_EQ(loaded.stats.mean(3, 1), direct.stats.mean(3, 1));
    EXPECT_EQ(run_sweep(m, loaded).points, run_sweep(c, direct).points);
}

TEST(Episodes, ZeroEtaIgnoresMissingSeed)
{
    const auto c = quick_config();
    const auto data = prepare_data(c);
    for (std::size_t i = 0; i < 4; ++i) {
        const auto s = seeds_for(c.seed, i);
        const auto complete = sample_episode(data.novel, c.ways, c.shots, c.queries_per_class, s.sampling);
        EXPECT_EQ(episode_digest(make_episode(c, data.novel, 0.0, i)), episode_digest(complete));
        EXPECT_EQ(episode_digest(apply_view_missing(complete, 0.0, 1)),
                  episode_digest(apply_view_missing(complete, 0.0, 2)));
    }
}

TEST(Episodes, VariantsMatchSoloRuns)
{
    const auto c = quick_config();
    const auto data = prepare_data(c);
    const auto e = make_episode(c, data.novel, 0.3, 1);
    std::vector<ablation> variants(4);
    variants[1].no_ds = true;
    variants[2].no_iaa = true;
    variants[3].no_cst = true;
    variants[3].no_se = true;
    const auto shared = run_ugd_variants(e, data.stats, c.pipeline, variants, 77);
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const auto solo = run_ugd(e, data.stats, c.pipeline, variants[i], 77);
        ASSERT_EQ(solo.predictions.size(), shared[i].predictions.size());
        for (std::size_t q = 0; q < solo.predictions.size(); ++q)
            EXPECT_EQ(solo.predictions[q].probabilities, shared[i].predictions[q].probabilities);
    }
}

TEST(Episodes, NoDsUsesUnrectifiedMeans)
{
    const auto c = quick_config();
    const auto data = prepare_data(c);
    const auto e = make_episode(c, data.novel, 0.3, 2);
    ablation flags;
    flags.no_ds = true;
    const auto out = run_ugd(e, data.stats, c.pipeline, flags, 5);
    // reproduce by hand: same anchors, same aggregation, classifier on H^S means
    const auto batch = build_anchor_batch(e, data.stats, c.pipeline.dgai, substream(5, 0xd6a1));
    const auto agg = run_inverse_aggregation(batch, c.pipeline.aggregation, substream(5, 0xa66e));
    const classifier model{class_means(agg.support(), batch.labels, batch.ways), c.pipeline.rectifier.temperature};
    const auto expected = predict_all(model, agg.query());
    for (std::size_t q = 0; q < expected.size(); ++q)
        EXPECT_EQ(out.predictions[q].probabilities, expected[q].probabilities);
    EXPECT_TRUE(out.rectification.empty());
    EXPECT_EQ(out.aggregation.size(), 3u);
}

TEST(Episodes, RunEpisodeDeterministic)
{
    const auto c = quick_config();
    const auto data = prepare_data(c);
    const auto methods = parse_methods(c);
    const auto e = make_episode(c, data.novel, 0.3, 3);
    const auto a = run_episode(c, methods, e, data.stats, 11);
    const auto b = run_episode(c, methods, e, data.stats, 11);
    for (std::size_t m = 0; m < methods.size(); ++m)
        EXPECT_EQ(a[m].accuracy, b[m].accuracy);
}

TEST(Episodes, EasySeparationAtDefaults)
{
    experiment_config c;
    c.methods = {"ugd"};
    c.etas = {0.0};
    c.episodes = 30;
    c.synthetic.separation = 10.0;
    c.seed = 3;
    const auto data = prepare_data(c);
    const auto r = run_sweep(c, data);
    EXPECT_GE(r.points.front().mean_accuracy, 0.95);
}

TEST(Episodes, Timeout)
{
    auto c = quick_config();
    c.episode_timeout = 1e-9;
    const auto data = prepare_data(c);
    EXPECT_THROW(run_sweep(c, data), timeout_error);
}

TEST(Sweep, SharedEpisodesAndIsolation)
{
    auto c = quick_config();
    c.methods = {"proto", "ugd"};
    const auto data = prepare_data(c);
    const auto both = run_sweep(c, data);
    // per-episode records: every method saw the same digest at each point
    for (const auto& a : both.episodes)
        for (const auto& b : both.episodes)
            if (a.eta == b.eta && a.episode == b.episode)
                EXPECT_EQ(a.digest, b.digest);

    c.methods = {"proto"};
    const auto alone = run_sweep(c, data);
    for (const auto& p : alone.points) {
        const auto it = std::find_if(both.points.begin(), both.points.end(), [&](const point_result& q) {
            return q.method == p.method && q.eta == p.eta;
        });
        ASSERT_NE(it, both.points.end());
        EXPECT_EQ(*it, p);
    }
}

TEST(Sweep, MeanIsArithmeticMean)
{
    const auto c = quick_config();
    const auto r = run_sweep(c, prepare_data(c));
    for (const auto& p : r.points) {
        double sum = 0.0;
        int n = 0;
        for (const auto& e : r.episodes)
            if (e.method == p.method && e.eta == p.eta) {
                sum += e.accuracy;
                ++n;
                EXPECT_GE(e.accuracy, 0.0);
                EXPECT_LE(e.accuracy, 1.0);
            }
        EXPECT_EQ(n, c.episodes);
        EXPECT_EQ(p.episodes, c.episodes);
        EXPECT_NEAR(p.mean_accuracy, sum / n, 1e-12);
    }
}

TEST(Sweep, WorkerCountDoesNotChangeResults)
{
    auto c = quick_config();
    const auto data = prepare_data(c);
    const auto one = run_sweep(c, data);
    c.jobs = 3;
    const auto three = run_sweep(c, data);
    EXPECT_EQ(one.points, three.points);
}

TEST(Report, FilesAndRoundTrip)
{
    const auto c = quick_config();
    const auto r = run_sweep(c, prepare_data(c));
    const auto dir = fresh_dir("report");
    emit_report(r, dir, true);

    const auto csv = slurp(dir / "results.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(c.methods.size() * c.etas.size() + 1));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,eta,mean_acc,std,n,seconds");

    const auto back = load_report(dir / "results.json");
    EXPECT_EQ(back.points, r.points);
    EXPECT_EQ(back.config, r.config);
    EXPECT_EQ(back.config.at("queries_per_class"), c.queries_per_class);
    EXPECT_EQ(results_csv(back), csv);

    const auto lines = slurp(dir / "episodes.jsonl");
    EXPECT_EQ(std::count(lines.begin(), lines.end(), '\n'),
              static_cast<long>(c.methods.size() * c.etas.size() * static_cast<std::size_t>(c.episodes)));
}

TEST(Report, EmptyResultsWriteNothing)
{
    const auto dir = fresh_dir("empty_report");
    EXPECT_THROW(emit_report(sweep_result{}, dir), error);
    EXPECT_FALSE(fs::exists(dir / "results.csv"));
    EXPECT_FALSE(fs::exists(dir / "results.json"));
}

TEST(Report, SampleStandardDeviation)
{
    const auto [mean, sd] = mean_and_std({0.2, 0.4, 0.9});
    EXPECT_NEAR(mean, 0.5, 1e-15);
    EXPECT_NEAR(sd, std::sqrt(((0.09) + (0.01) + (0.16)) / 2.0), 1e-15);
}
