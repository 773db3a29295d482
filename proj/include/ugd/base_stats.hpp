// Per-class, per-view mean and covariance of the base set, and the on-disk
// statistics bundle (index.json plus one CSV per matrix).
#pragma once

#include "ugd/core.hpp"
#include "ugd/csv.hpp"
#include "ugd/episode.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace ugd {

struct class_view_stats
{
    Vector mean;
    Matrix covariance;
};

/// Statistics of every base class in every view.
class base_stats
{
public:
    base_stats() = default;
    base_stats(view_spec spec, std::vector<ClassId> classes, std::vector<std::vector<class_view_stats>> entries)
        : spec_(std::move(spec)), classes_(std::move(classes)), entries_(std::move(entries))
    {
        if (entries_.size() != classes_.size())
            throw schema_mismatch("base_stats: one entry per class is required");
        for (const auto& row : entries_) {
            if (row.size() != spec_.view_count())
                throw schema_mismatch("base_stats: one entry per view is required");
            for (std::size_t v = 0; v < row.size(); ++v)
                if (row[v].mean.size() != spec_.dim(v) || row[v].covariance.rows() != spec_.dim(v) ||
                    row[v].covariance.cols() != spec_.dim(v))
                    throw schema_mismatch("base_stats: statistic shape does not match view " + std::to_string(v));
        }
    }

    const view_spec& spec() const noexcept { return spec_; }
    const std::vector<ClassId>& classes() const noexcept { return classes_; }
    std::size_t class_count() const noexcept { return classes_.size(); }

    /// Statistics by class position (0..class_count-1) and view.
    const class_view_stats& at(std::size_t class_pos, std::size_t view) const
    {
        return entries_.at(class_pos).at(view);
    }
    const Vector& mean(std::size_t class_pos, std::size_t view) const { return at(class_pos, view).mean; }
    const Matrix& covariance(std::size_t class_pos, std::size_t view) const
    {
        return at(class_pos, view).covariance;
    }

    /// Keeps only the classes at the given positions. Positions are sorted so
    /// the class order of the result stays ascending.
    base_stats subset(std::vector<std::size_t> positions) const
    {
        std::sort(positions.begin(), positions.end());
        positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
        std::vector<ClassId> ids;
        std::vector<std::vector<class_view_stats>> rows;
        for (auto p : positions) {
            ids.push_back(classes_.at(p));
            rows.push_back(entries_.at(p));
        }
        return base_stats(spec_, std::move(ids), std::move(rows));
    }

private:
    view_spec spec_;
    std::vector<ClassId> classes_;
    std::vector<std::vector<class_view_stats>> entries_;
};

/// Class mean and unbiased covariance (1/(n-1)) per view over complete base
/// samples. The covariance is made exactly symmetric by averaging with its
/// transpose.
inline base_stats compute_base_stats(const dataset& base)
{
    const auto& spec = base.manifest.spec;
    for (std::size_t i = 0; i < base.samples.size(); ++i)
        if (!base.samples[i].complete())
            throw incomplete_base("base sample " + std::to_string(i) + " has a missing view");

    const auto groups = base.indices_by_class();
    std::vector<ClassId> ids;
    std::vector<std::vector<class_view_stats>> entries;
    for (const auto& [id, rows] : groups) {
        std::vector<class_view_stats> per_view;
        for (std::size_t v = 0; v < spec.view_count(); ++v) {
            if (rows.size() < 2)
                throw too_few_samples("base class " + std::to_string(id) + " view " + std::to_string(v) + " has " +
                                      std::to_string(rows.size()) + " samples, at least 2 are required");
            const Index d = spec.dim(v);
            Matrix x(d, static_cast<Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i)
                x.col(static_cast<Index>(i)) = *base.samples[rows[i]].views[v];
            Vector mean = x.rowwise().mean();
            x.colwise() -= mean;
            Matrix cov = (x * x.transpose()) / static_cast<double>(rows.size() - 1);
            cov = 0.5 * (cov + cov.transpose()).eval();
            per_view.push_back({std::move(mean), std::move(cov)});
        }
        ids.push_back(id);
        entries.push_back(std::move(per_view));
    }
    return base_stats(spec, std::move(ids), std::move(entries));
}

/// Writes the bundle: index.json and class<id>_view<v>_{mean,cov}.csv.
inline void save_stats(const base_stats& stats, const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json index;
    index["dims"] = stats.spec().dims();
    index["entries"] = nlohmann::json::array();
    for (std::size_t c = 0; c < stats.class_count(); ++c) {
        for (std::size_t v = 0; v < stats.spec().view_count(); ++v) {
            const std::string stem = "class" + std::to_string(stats.classes()[c]) + "_view" + std::to_string(v);
            csv::write_matrix(dir / (stem + "_mean.csv"), stats.mean(c, v).transpose());
            csv::write_matrix(dir / (stem + "_cov.csv"), stats.covariance(c, v));
            index["entries"].push_back({{"class", stats.classes()[c]},
                                        {"view", v},
                                        {"mean", stem + "_mean.csv"},
                                        {"cov", stem + "_cov.csv"}});
        }
    }
    std::ofstream(dir / "index.json") << index.dump(2) << '\n';
}

/// Reads a bundle written by save_stats. When `expected` is given, the stored
/// view layout must match it.
inline base_stats load_stats(const std::filesystem::path& dir, const view_spec* expected = nullptr)
{
    const auto index_path = dir / "index.json";
    std::ifstream in(index_path);
    if (!in)
        throw schema_mismatch("cannot open " + index_path.string());
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(index_path.string() + ": " + ex.what());
    }

    view_spec spec;
    std::map<ClassId, std::vector<std::optional<class_view_stats>>> table;
    try {
        spec = view_spec(index.at("dims").get<std::vector<Index>>());
        if (expected && !(spec == *expected))
            throw schema_mismatch(index_path.string() + ": stored statistics have " +
                                  std::to_string(spec.view_count()) + " views, the pipeline expects " +
                                  std::to_string(expected->view_count()));
        for (const auto& e : index.at("entries")) {
            const auto id = e.at("class").get<ClassId>();
            const auto v = e.at("view").get<std::size_t>();
            if (v >= spec.view_count())
                throw schema_mismatch(index_path.string() + ": entry names view " + std::to_string(v));
            const Index d = spec.dim(v);
            class_view_stats s;
            s.mean = csv::read_matrix(dir / e.at("mean").get<std::string>(), 1, d).transpose();
            s.covariance = csv::read_matrix(dir / e.at("cov").get<std::string>(), d, d);
            auto& row = table[id];
            row.resize(spec.view_count());
            row[v] = std::move(s);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(index_path.string() + ": " + ex.what());
    } catch (const config_error& ex) {
        throw schema_mismatch(index_path.string() + ": " + ex.what());
    }

    std::vector<ClassId> ids;
    std::vector<std::vector<class_view_stats>> entries;
    for (auto& [id, row] : table) {
        std::vector<class_view_stats> per_view;
        for (std::size_t v = 0; v < row.size(); ++v) {
            if (!row[v])
                throw schema_mismatch(index_path.string() + ": class " + std::to_string(id) + " lacks view " +
                                      std::to_string(v));
            per_view.push_back(std::move(*row[v]));
        }
        ids.push_back(id);
        entries.push_back(std::move(per_view));
    }
    if (ids.empty())
        throw schema_mismatch(index_path.string() + ": no statistics entries");
    return base_stats(spec, std::move(ids), std::move(entries));
}

} // namespace ugd
