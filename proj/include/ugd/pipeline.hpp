// The full UGD pipeline for one episode, with ablation switches:
// anchors -> inverse aggregation -> self-rectification -> metric classifier.
#pragma once

#include "ugd/aggregator.hpp"
#include "ugd/base_stats.hpp"
#include "ugd/classify.hpp"
#include "ugd/dgai.hpp"
#include "ugd/rectifier.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace ugd {

struct ablation
{
    bool no_ds = false;  ///< skip self-rectification
    bool no_ce = false;  ///< drop the cross-entropy term
    bool no_se = false;  ///< drop the entropy term
    bool no_iaa = false; ///< concatenate anchors instead of aggregating
    bool no_cst = false; ///< drop the label constraint from the H step

    friend bool operator==(const ablation&, const ablation&) = default;
};

struct pipeline_config
{
    dgai_config dgai;
    aggregation_config aggregation;
    rectifier_config rectifier;
};

struct ugd_outcome
{
    std::vector<prediction> predictions;
    aggregation_trace aggregation;
    std::vector<rectify_record> rectification;
};

/// Runs several ablation variants of the pipeline on one episode, sharing the
/// anchor batch and any aggregation run the variants have in common. Each
/// variant's result is identical to running it alone.
inline std::vector<ugd_outcome> run_ugd_variants(const episode& e, const base_stats& stats,
                                                 const pipeline_config& config, const std::vector<ablation>& variants,
                                                 std::uint64_t seed,
                                                 const std::function<void()>& checkpoint = {})
{
    std::vector<ugd_outcome> out(variants.size());
    if (variants.empty())
        return out;
    const auto batch = build_anchor_batch(e, stats, config.dgai, substream(seed, 0xd6a1));
    if (checkpoint)
        checkpoint();

    struct unified
    {
        Matrix support;
        Matrix query;
        aggregation_trace trace;
    };
    std::map<std::pair<bool, bool>, unified> cache;
    auto unify = [&](const ablation& flags) -> const unified& {
        const auto key = std::make_pair(flags.no_iaa, flags.no_iaa ? false : flags.no_cst);
        auto it = cache.find(key);
        if (it != cache.end())
            return it->second;
        unified u;
        if (flags.no_iaa) {
            const Matrix stacked = concatenate_views(batch);
            u.support = stacked.leftCols(batch.support_columns);
            u.query = stacked.rightCols(batch.query_columns);
        } else {
            auto agg = config.aggregation;
            agg.use_constraint = agg.use_constraint && !flags.no_cst;
            auto result = run_inverse_aggregation(batch, agg, substream(seed, 0xa66e), checkpoint);
            u.support = result.support();
            u.query = result.query();
            u.trace = std::move(result.trace);
        }
        return cache.emplace(key, std::move(u)).first->second;
    };

    for (std::size_t i = 0; i < variants.size(); ++i) {
        const auto& flags = variants[i];
        const auto& u = unify(flags);
        out[i].aggregation = u.trace;
        classifier model;
        if (flags.no_ds) {
            model = build_classifier(u.support, batch.labels, batch.ways, config.rectifier.temperature);
        } else {
            auto ds = config.rectifier;
            ds.use_ce = ds.use_ce && !flags.no_ce;
            ds.use_se = ds.use_se && !flags.no_se;
            auto rect = rectify(u.support, u.query, batch.labels, batch.ways, ds, checkpoint);
            model = build_classifier(rect.rectified_support, batch.labels, batch.ways, ds.temperature);
            out[i].rectification = std::move(rect.trace);
        }
        out[i].predictions = predict_all(model, u.query);
    }
    return out;
}

inline ugd_outcome run_ugd(const episode& e, const base_stats& stats, const pipeline_config& config,
                           const ablation& flags, std::uint64_t seed)
{
    return std::move(run_ugd_variants(e, stats, config, {flags}, seed).front());
}

} // namespace ugd
