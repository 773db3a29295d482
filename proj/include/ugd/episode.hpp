// Incomplete multi-view samples, few-shot episodes, view-missing simulation,
// synthetic data generation and the CSV+JSON feature container.
#pragma once

#include "ugd/core.hpp"
#include "ugd/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ugd {

// ---------------------------------------------------------------------------
// view_spec
// ---------------------------------------------------------------------------

/// Number of views and the feature dimension of each.
class view_spec
{
public:
    view_spec() = default;

    explicit view_spec(std::vector<Index> dims) : dims_(std::move(dims))
    {
        if (dims_.empty())
            throw config_error("view_spec: at least one view is required");
        for (auto d : dims_)
            if (d < 1)
                throw config_error("view_spec: every view dimension must be positive");
    }

    std::size_t view_count() const noexcept { return dims_.size(); }
    Index dim(std::size_t v) const { return dims_.at(v); }
    const std::vector<Index>& dims() const noexcept { return dims_; }
    Index total_dim() const noexcept { return std::accumulate(dims_.begin(), dims_.end(), Index{0}); }
    Index max_dim() const noexcept { return dims_.empty() ? 0 : *std::max_element(dims_.begin(), dims_.end()); }

    friend bool operator==(const view_spec&, const view_spec&) = default;

private:
    std::vector<Index> dims_;
};

// ---------------------------------------------------------------------------
// multi_view_sample
// ---------------------------------------------------------------------------

/// One sample: a feature vector per view, absent where the view is missing.
/// The availability mask is derived from presence, so the two cannot drift.
struct multi_view_sample
{
    std::vector<std::optional<Vector>> views;
    std::optional<ClassId> label;

    bool available(std::size_t v) const { return views.at(v).has_value(); }

    std::vector<bool> mask() const
    {
        std::vector<bool> m(views.size());
        for (std::size_t v = 0; v < views.size(); ++v)
            m[v] = views[v].has_value();
        return m;
    }

    std::size_t available_count() const
    {
        return static_cast<std::size_t>(
            std::count_if(views.begin(), views.end(), [](const auto& x) { return x.has_value(); }));
    }

    bool complete() const { return available_count() == views.size(); }
};

/// Throws unless `sample` is consistent with `spec` and keeps at least one view.
inline void validate_sample(const multi_view_sample& sample, const view_spec& spec)
{
    if (sample.views.size() != spec.view_count())
        throw dim_mismatch("sample has " + std::to_string(sample.views.size()) + " views, expected " +
                           std::to_string(spec.view_count()));
    for (std::size_t v = 0; v < spec.view_count(); ++v)
        if (sample.views[v] && sample.views[v]->size() != spec.dim(v))
            throw dim_mismatch("view " + std::to_string(v) + " has length " +
                               std::to_string(sample.views[v]->size()) + ", expected " +
                               std::to_string(spec.dim(v)));
    if (sample.available_count() == 0)
        throw no_available_view("sample has no available view");
}

// ---------------------------------------------------------------------------
// episode
// ---------------------------------------------------------------------------

/// A |C|-way K-shot task. Query labels are kept apart from the query samples
/// and are only reachable through labels_for_evaluation().
class episode
{
public:
    episode(std::vector<ClassId> roster, int shots, std::vector<multi_view_sample> support,
            std::vector<multi_view_sample> query, std::vector<ClassId> query_labels, view_spec spec,
            std::uint64_t seed)
        : roster_(std::move(roster)), shots_(shots), support_(std::move(support)), query_(std::move(query)),
          query_labels_(std::move(query_labels)), spec_(std::move(spec)), seed_(seed)
    {
        if (roster_.empty())
            throw config_error("episode: empty class roster");
        if (shots_ < 1)
            throw config_error("episode: shots must be positive");
        if (std::set<ClassId>(roster_.begin(), roster_.end()).size() != roster_.size())
            throw config_error("episode: duplicate class in roster");
        if (support_.size() != roster_.size() * static_cast<std::size_t>(shots_))
            throw config_error("episode: support size must equal |C|*K");
        if (query_labels_.size() != query_.size())
            throw config_error("episode: one held-out label per query is required");

        std::vector<int> per_class(roster_.size(), 0);
        for (auto& s : support_) {
            validate_sample(s, spec_);
            if (!s.label)
                throw config_error("episode: support sample without label");
            per_class[static_cast<std::size_t>(class_index(*s.label))]++;
        }
        for (int count : per_class)
            if (count != shots_)
                throw config_error("episode: every class needs exactly K support samples");
        for (auto& q : query_) {
            validate_sample(q, spec_);
            q.label.reset();
        }
        for (auto id : query_labels_)
            (void)class_index(id);
    }

    const std::vector<ClassId>& roster() const noexcept { return roster_; }
    std::size_t ways() const noexcept { return roster_.size(); }
    int shots() const noexcept { return shots_; }
    const std::vector<multi_view_sample>& support() const noexcept { return support_; }
    const std::vector<multi_view_sample>& query() const noexcept { return query_; }
    const view_spec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Position of `id` in the roster.
    ClassIndex class_index(ClassId id) const
    {
        auto it = std::find(roster_.begin(), roster_.end(), id);
        if (it == roster_.end())
            throw config_error("episode: class " + std::to_string(id) + " is not in the roster");
        return static_cast<ClassIndex>(it - roster_.begin());
    }

    /// Roster-index labels of the support samples, in support order.
    std::vector<ClassIndex> support_class_indices() const
    {
        std::vector<ClassIndex> out;
        out.reserve(support_.size());
        for (const auto& s : support_)
            out.push_back(class_index(*s.label));
        return out;
    }

    /// Held-out query labels. Scoring code only.
    const std::vector<ClassId>& labels_for_evaluation() const noexcept { return query_labels_; }

    /// Same task with replaced sample features (labels and roster kept).
    episode with_samples(std::vector<multi_view_sample> support, std::vector<multi_view_sample> query) const
    {
        return episode(roster_, shots_, std::move(support), std::move(query), query_labels_, spec_, seed_);
    }

private:
    std::vector<ClassId> roster_;
    int shots_;
    std::vector<multi_view_sample> support_;
    std::vector<multi_view_sample> query_;
    std::vector<ClassId> query_labels_;
    view_spec spec_;
    std::uint64_t seed_;
};

/// FNV-1a digest over roster, masks and feature bytes. Two episodes with the
/// same digest are, for all practical purposes, the same task.
inline std::uint64_t episode_digest(const episode& e)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (auto id : e.roster())
        feed(&id, sizeof id);
    auto feed_sample = [&](const multi_view_sample& s) {
        for (const auto& view : s.views) {
            const unsigned char present = view ? 1 : 0;
            feed(&present, 1);
            if (view)
                feed(view->data(), static_cast<std::size_t>(view->size()) * sizeof(double));
        }
    };
    for (const auto& s : e.support())
        feed_sample(s);
    for (const auto& s : e.query())
        feed_sample(s);
    for (auto id : e.labels_for_evaluation())
        feed(&id, sizeof id);
    return h;
}

// ---------------------------------------------------------------------------
// view-missing rate and simulation
// ---------------------------------------------------------------------------

struct mask_count
{
    std::size_t available = 0;
    std::size_t slots = 0;
};

inline mask_count count_mask(const episode& e)
{
    mask_count c;
    auto add = [&c](const multi_view_sample& s) {
        c.available += s.available_count();
        c.slots += s.views.size();
    };
    for (const auto& s : e.support())
        add(s);
    for (const auto& s : e.query())
        add(s);
    return c;
}

inline double missing_rate(const mask_count& c)
{
    if (c.slots == 0)
        return 0.0;
    return 1.0 - static_cast<double>(c.available) / static_cast<double>(c.slots);
}

/// Fraction of (sample, view) slots that are missing over support and query.
inline double missing_rate(const episode& e) { return missing_rate(count_mask(e)); }

/// Number of slots to remove for a target rate: round-half-to-even of eta*slots.
inline std::size_t missing_count(double target_eta, std::size_t slots)
{
    const int previous = std::fegetround();
    std::fesetround(FE_TONEAREST);
    const double n = std::nearbyint(target_eta * static_cast<double>(slots));
    std::fesetround(previous);
    return static_cast<std::size_t>(std::max(0.0, n));
}

/// Largest rate that still leaves every sample one view: (V-1)/V.
inline double max_feasible_eta(std::size_t view_count)
{
    return static_cast<double>(view_count - 1) / static_cast<double>(view_count);
}

/// Removes exactly round(eta * slots) views from a complete episode. The
/// removed set is uniform over all sets of that size that leave every sample
/// at least one view.
///
/// Sampling is sequential: with log_ways[n][r] the log-count of valid ways to
/// remove r views from samples n.., sample n loses m views with probability
/// C(V,m) * ways[n+1][r-m] / ways[n][r], and which m views is uniform.
inline episode apply_view_missing(const episode& e, double target_eta, std::uint64_t seed)
{
    const std::size_t views = e.spec().view_count();
    if (!(target_eta >= 0.0))
        throw infeasible_eta("view-missing rate must be non-negative");
    if (target_eta > max_feasible_eta(views) + 1e-12)
        throw infeasible_eta("view-missing rate " + std::to_string(target_eta) + " exceeds the feasible bound " +
                             std::to_string(max_feasible_eta(views)) + " for " + std::to_string(views) +
                             " views");

    auto support = e.support();
    auto query = e.query();
    std::vector<multi_view_sample*> samples;
    for (auto& s : support)
        samples.push_back(&s);
    for (auto& s : query)
        samples.push_back(&s);
    for (auto* s : samples)
        if (!s->complete())
            throw config_error("apply_view_missing expects a complete episode");

    const std::size_t n_samples = samples.size();
    const std::size_t slots = n_samples * views;
    const std::size_t remove = std::min(missing_count(target_eta, slots), n_samples * (views - 1));
    if (remove == 0)
        return e.with_samples(std::move(support), std::move(query));

    const double minus_inf = -std::numeric_limits<double>::infinity();
    std::vector<double> log_choose(views);
    for (std::size_t m = 0; m < views; ++m)
        log_choose[m] = std::lgamma(static_cast<double>(views) + 1.0) - std::lgamma(static_cast<double>(m) + 1.0) -
                        std::lgamma(static_cast<double>(views - m) + 1.0);
    const std::size_t width = remove + 1;
    std::vector<double> log_ways((n_samples + 1) * width, minus_inf);
    auto at = [&](std::size_t n, std::size_t r) -> double& { return log_ways[n * width + r]; };
    at(n_samples, 0) = 0.0;
    for (std::size_t n = n_samples; n-- > 0;) {
        for (std::size_t r = 0; r <= remove; ++r) {
            double top = minus_inf;
            for (std::size_t m = 0; m < views && m <= r; ++m)
                top = std::max(top, log_choose[m] + at(n + 1, r - m));
            if (top == minus_inf)
                continue;
            double sum = 0.0;
            for (std::size_t m = 0; m < views && m <= r; ++m)
                sum += std::exp(log_choose[m] + at(n + 1, r - m) - top);
            at(n, r) = top + std::log(sum);
        }
    }

    rng gen(seed);
    std::size_t left = remove;
    std::vector<std::size_t> order(views);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const double u = gen.uniform();
        double cumulative = 0.0;
        std::size_t take = 0;
        for (std::size_t m = 0; m < views && m <= left; ++m) {
            const double w = log_choose[m] + at(n + 1, left - m);
            if (w == minus_inf)
                continue;
            take = m; // last feasible count absorbs rounding
            cumulative += std::exp(w - at(n, left));
            if (u < cumulative)
                break;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(order[i], order[i + static_cast<std::size_t>(gen.below(views - i))]);
            samples[n]->views[order[i]].reset();
        }
        left -= take;
    }
    return e.with_samples(std::move(support), std::move(query));
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

enum class dataset_role { base, novel };

inline std::string to_string(dataset_role role) { return role == dataset_role::base ? "base" : "novel"; }

inline dataset_role parse_role(const std::string& text)
{
    if (text == "base")
        return dataset_role::base;
    if (text == "novel")
        return dataset_role::novel;
    throw schema_mismatch("unknown dataset role '" + text + "'");
}

/// Description of a feature container on disk (or of an in-memory dataset).
struct dataset_manifest
{
    std::vector<ClassId> classes;
    std::map<ClassId, std::size_t> counts;
    view_spec spec;
    std::vector<std::filesystem::path> view_paths;
    std::filesystem::path labels_path;
    dataset_role role = dataset_role::novel;
};

/// Labeled, complete samples plus their manifest.
struct dataset
{
    dataset_manifest manifest;
    std::vector<multi_view_sample> samples;

    /// Sample indices grouped by class, in row order.
    std::map<ClassId, std::vector<std::size_t>> indices_by_class() const
    {
        std::map<ClassId, std::vector<std::size_t>> out;
        for (auto id : manifest.classes)
            out[id];
        for (std::size_t i = 0; i < samples.size(); ++i)
            out[*samples[i].label].push_back(i);
        return out;
    }
};

/// Subset of `source` restricted to `ids` (order of `ids` kept in the manifest).
inline dataset select_classes(const dataset& source, const std::vector<ClassId>& ids, dataset_role role)
{
    dataset out;
    out.manifest.classes = ids;
    out.manifest.spec = source.manifest.spec;
    out.manifest.role = role;
    const std::set<ClassId> keep(ids.begin(), ids.end());
    for (const auto& s : source.samples)
        if (keep.count(*s.label)) {
            out.samples.push_back(s);
            out.manifest.counts[*s.label]++;
        }
    for (auto id : ids)
        out.manifest.counts.try_emplace(id, 0);
    return out;
}

/// Draws a |C|-way K-shot episode with `queries_per_class` queries per class.
/// Every mask is true; view missing is applied separately.
inline episode sample_episode(const dataset& pool, std::size_t ways, int shots, int queries_per_class,
                              std::uint64_t seed)
{
    if (ways < 1 || shots < 1 || queries_per_class < 0)
        throw config_error("sample_episode: ways and shots must be positive, queries non-negative");
    const auto groups = pool.indices_by_class();
    const auto needed = static_cast<std::size_t>(shots + queries_per_class);
    std::vector<ClassId> eligible;
    for (const auto& [id, rows] : groups)
        if (rows.size() >= needed)
            eligible.push_back(id);
    if (eligible.size() < ways)
        throw insufficient_pool("pool has " + std::to_string(eligible.size()) + " classes with at least " +
                                std::to_string(needed) + " samples, " + std::to_string(ways) + " required");

    rng gen(seed);
    // partial shuffle picks `ways` classes without replacement
    for (std::size_t i = 0; i < ways; ++i)
        std::swap(eligible[i], eligible[i + gen.below(eligible.size() - i)]);
    std::vector<ClassId> roster(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(ways));

    std::vector<multi_view_sample> support, query;
    std::vector<ClassId> query_labels;
    for (auto id : roster) {
        auto rows = groups.at(id);
        for (std::size_t i = 0; i < needed; ++i)
            std::swap(rows[i], rows[i + gen.below(rows.size() - i)]);
        for (std::size_t i = 0; i < needed; ++i) {
            const auto& s = pool.samples[rows[i]];
            if (i < static_cast<std::size_t>(shots)) {
                support.push_back(s);
            } else {
                query.push_back(s);
                query.back().label.reset();
                query_labels.push_back(id);
            }
        }
    }
    return episode(std::move(roster), shots, std::move(support), std::move(query), std::move(query_labels),
                   pool.manifest.spec, seed);
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

struct synthetic_spec
{
    std::size_t classes = 30;
    std::size_t samples_per_class = 40;
    view_spec views{std::vector<Index>{32, 32, 32}};
    double separation = 3.0; ///< s: class centers ~ N(0, s^2 I)
    double noise = 1.0;      ///< sigma_w: within-class spread
    /// Share of each view's center explained by a latent code common to all
    /// views of the class (0 = independent views, 1 = fully coupled).
    double view_coupling = 1.0;
    std::uint64_t seed = 0;
    ClassId first_class_id = 0;
};

/// Random matrix with orthonormal rows (rows x cols, rows <= cols).
inline Matrix random_orthonormal_rows(Index rows, Index cols, rng& gen)
{
    Matrix g(cols, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < cols; ++i)
            g(i, j) = gen.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(cols, cols);
    // fix the sign ambiguity so the result depends only on the random draws
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < cols; ++j)
        if (r(j, j) < 0)
            q.col(j) = -q.col(j);
    return q.transpose().topRows(rows);
}

/// Generates a labeled, complete multi-view dataset.
///
/// Each class gets a latent code z_c ~ N(0, I) and per-view private codes
/// u_{c,v} ~ N(0, I). Its view-v center is
///     s * (sqrt(rho) * P_v z_c + sqrt(1 - rho) * u_{c,v})
/// with P_v a fixed random matrix with orthonormal rows, so every center is
/// marginally N(0, s^2 I) while the views of one class stay linked. Samples add
/// independent N(0, sigma_w^2 I) noise per view.
inline dataset gen_synthetic_dataset(const synthetic_spec& spec)
{
    if (spec.classes < 1 || spec.samples_per_class < 1)
        throw config_error("synthetic dataset needs positive class and sample counts");
    if (spec.separation < 0 || spec.noise < 0)
        throw config_error("synthetic dataset scales must be non-negative");
    if (spec.view_coupling < 0 || spec.view_coupling > 1)
        throw config_error("view_coupling must lie in [0, 1]");

    const auto& views = spec.views;
    const std::size_t view_count = views.view_count();
    const Index latent = views.max_dim();

    std::vector<Matrix> projections;
    for (std::size_t v = 0; v < view_count; ++v) {
        rng gen(substream(spec.seed, 1, v));
        projections.push_back(random_orthonormal_rows(views.dim(v), latent, gen));
    }

    const double shared = std::sqrt(spec.view_coupling);
    const double own = std::sqrt(1.0 - spec.view_coupling);

    dataset out;
    out.manifest.spec = views;
    out.manifest.role = dataset_role::novel;
    out.samples.reserve(spec.classes * spec.samples_per_class);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const ClassId id = spec.first_class_id + static_cast<ClassId>(c);
        out.manifest.classes.push_back(id);
        out.manifest.counts[id] = spec.samples_per_class;

        rng center_gen(substream(spec.seed, 2, c));
        const Vector code = center_gen.normal_vector(latent);
        std::vector<Vector> centers;
        for (std::size_t v = 0; v < view_count; ++v) {
            const Vector private_code = center_gen.normal_vector(views.dim(v));
            centers.push_back(spec.separation * (shared * (projections[v] * code) + own * private_code));
        }

        rng noise_gen(substream(spec.seed, 3, c));
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            multi_view_sample s;
            s.label = id;
            for (std::size_t v = 0; v < view_count; ++v) {
                Vector x = centers[v];
                if (spec.noise > 0)
                    x += spec.noise * noise_gen.normal_vector(views.dim(v));
                s.views.emplace_back(std::move(x));
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// feature container: one CSV per view, a labels file, a JSON manifest
// ---------------------------------------------------------------------------

/// Writes `data` under `dir` as view<v>.csv, labels.txt and manifest.json.
/// Returns the manifest path.
inline std::filesystem::path save_features(const dataset& data, const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto& spec = data.manifest.spec;
    nlohmann::json manifest;
    manifest["views"] = nlohmann::json::array();
    for (std::size_t v = 0; v < spec.view_count(); ++v) {
        const std::string name = "view" + std::to_string(v) + ".csv";
        std::ofstream out(dir / name);
        if (!out)
            throw error("cannot write " + (dir / name).string());
        for (const auto& s : data.samples) {
            if (!s.views[v])
                throw config_error("save_features: feature container rows must be complete");
            csv::write_row(out, s.views[v]->data(), s.views[v]->size());
        }
        manifest["views"].push_back({{"path", name}, {"dim", spec.dim(v)}});
    }
    {
        std::ofstream out(dir / "labels.txt");
        for (const auto& s : data.samples)
            out << *s.label << '\n';
    }
    manifest["labels_path"] = "labels.txt";
    manifest["classes"] = data.manifest.classes;
    manifest["role"] = to_string(data.manifest.role);
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : data.manifest.counts)
        counts[std::to_string(id)] = n;
    manifest["counts"] = counts;
    const auto path = dir / "manifest.json";
    std::ofstream(path) << manifest.dump(2) << '\n';
    return path;
}

/// Reads a feature container. Relative paths resolve against the manifest's
/// directory. Any inconsistency raises schema_mismatch naming the file.
inline dataset load_features(const std::filesystem::path& manifest_path)
{
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in)
        throw schema_mismatch("cannot open manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(manifest_path.string() + ": " + ex.what());
    }
    const fs::path root = manifest_path.parent_path();
    auto resolve = [&root](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };

    dataset out;
    auto& m = out.manifest;
    try {
        std::vector<Index> dims;
        for (const auto& view : j.at("views")) {
            m.view_paths.push_back(resolve(view.at("path").get<std::string>()));
            dims.push_back(view.at("dim").get<Index>());
        }
        m.spec = view_spec(std::move(dims));
        m.labels_path = resolve(j.at("labels_path").get<std::string>());
        m.classes = j.at("classes").get<std::vector<ClassId>>();
        m.role = parse_role(j.value("role", std::string("novel")));
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(manifest_path.string() + ": " + ex.what());
    } catch (const config_error& ex) {
        throw schema_mismatch(manifest_path.string() + ": " + ex.what());
    }
    for (const auto& p : m.view_paths)
        if (!fs::exists(p))
            throw schema_mismatch("missing view file " + p.string());
    if (!fs::exists(m.labels_path))
        throw schema_mismatch("missing labels file " + m.labels_path.string());

    const std::set<ClassId> known(m.classes.begin(), m.classes.end());
    std::vector<ClassId> labels;
    {
        std::ifstream lin(m.labels_path);
        std::string line;
        while (std::getline(lin, line)) {
            if (line.empty() || line == "\r")
                continue;
            ClassId id{};
            auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), id);
            if (ec != std::errc{})
                throw schema_mismatch(m.labels_path.string() + ": bad class id '" + line + "'");
            (void)ptr;
            if (!known.count(id))
                throw schema_mismatch(m.labels_path.string() + ": unknown class id " + std::to_string(id));
            labels.push_back(id);
        }
    }

    std::vector<csv::table> tables;
    for (std::size_t v = 0; v < m.spec.view_count(); ++v) {
        tables.push_back(csv::read(m.view_paths[v], static_cast<std::size_t>(m.spec.dim(v))));
        if (tables.back().size() != labels.size())
            throw schema_mismatch(m.view_paths[v].string() + ": has " + std::to_string(tables.back().size()) +
                                  " rows but the labels file has " + std::to_string(labels.size()));
    }

    for (std::size_t i = 0; i < labels.size(); ++i) {
        multi_view_sample s;
        s.label = labels[i];
        for (std::size_t v = 0; v < m.spec.view_count(); ++v)
            s.views.emplace_back(Eigen::Map<const Vector>(tables[v][i].data(), m.spec.dim(v)));
        out.samples.push_back(std::move(s));
    }

    std::map<ClassId, std::size_t> counts;
    for (auto id : m.classes)
        counts[id] = 0;
    for (auto id : labels)
        counts[id]++;
    if (j.contains("counts")) {
        for (const auto& [key, value] : j.at("counts").items()) {
            const ClassId id = std::stoi(key);
            if (!counts.count(id))
                throw schema_mismatch(manifest_path.string() + ": counts name unknown class " + key);
            if (counts[id] != value.get<std::size_t>())
                throw schema_mismatch(manifest_path.string() + ": class " + key + " declares " +
                                      std::to_string(value.get<std::size_t>()) + " rows, found " +
                                      std::to_string(counts[id]));
        }
    }
    m.counts = std::move(counts);
    return out;
}

} // namespace ugd
