// Experiment harness: configuration, data preparation, episode evaluation,
// eta sweeps and report files.
#pragma once

#include "ugd/base_stats.hpp"
#include "ugd/classify.hpp"
#include "ugd/episode.hpp"
#include "ugd/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ugd {

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct synthetic_source
{
    std::size_t base_classes = 20;
    std::size_t novel_classes = 10;
    std::size_t samples_per_class = 40;
    std::vector<Index> dims{32, 32, 32};
    double separation = 3.0;
    double noise = 1.0;
    double coupling = 1.0;
    std::uint64_t seed = 0;
};

struct experiment_config
{
    std::vector<std::string> methods{"ugd", "proto", "match"};
    std::size_t ways = 5;
    int shots = 1;
    int queries_per_class = 15;
    std::vector<double> etas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
    int episodes = 400;

    pipeline_config pipeline;
    ablation flags;

    std::string source = "synthetic"; ///< "synthetic" or "manifest"
    synthetic_source synthetic;
    std::string base_manifest;
    std::string novel_manifest;
    std::string stats_dir; ///< precomputed statistics; overrides base_manifest

    std::size_t base_subset = 0; ///< keep this many base classes (0 = all)
    std::uint64_t base_subset_seed = 0;

    std::uint64_t seed = 0;
    int jobs = 1;
    double episode_timeout = 0.0; ///< seconds per episode, 0 disables
    bool record_timing = true;    ///< false writes 0 to the seconds column
};

namespace detail {

template <class T>
struct is_vector : std::false_type
{};
template <class T>
struct is_vector<std::vector<T>> : std::true_type
{};

// A scalar given where a list is expected reads as a one-element list.
template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    const auto& value = j.at(key);
    if constexpr (is_vector<T>::value) {
        if (!value.is_array()) {
            out = nlohmann::json::array({value}).get<T>();
            return;
        }
    }
    out = value.get<T>();
}

} // namespace detail

inline nlohmann::json to_json(const experiment_config& c)
{
    const auto& p = c.pipeline;
    nlohmann::json j;
    j["methods"] = c.methods;
    j["ways"] = c.ways;
    j["shots"] = c.shots;
    j["queries_per_class"] = c.queries_per_class;
    j["etas"] = c.etas;
    j["episodes"] = c.episodes;
    j["k"] = p.dgai.k;
    j["n_gamma"] = p.dgai.n_gamma;
    j["ridge"] = p.dgai.ridge;
    j["dim"] = p.aggregation.dim;
    j["iters"] = p.aggregation.iterations;
    j["n1"] = p.aggregation.evaluator_steps;
    j["n2"] = p.aggregation.latent_steps;
    j["lr_w"] = p.aggregation.lr_weights;
    j["lr_h"] = p.aggregation.lr_latent;
    j["lambda"] = p.rectifier.lambda;
    j["temperature"] = p.rectifier.temperature;
    j["ds_iters"] = p.rectifier.iterations;
    j["ds_lr"] = p.rectifier.lr;
    j["no_ds"] = c.flags.no_ds;
    j["no_ce"] = c.flags.no_ce;
    j["no_se"] = c.flags.no_se;
    j["no_iaa"] = c.flags.no_iaa;
    j["no_cst"] = c.flags.no_cst;
    j["source"] = c.source;
    j["synthetic"] = {{"base_classes", c.synthetic.base_classes},
                      {"novel_classes", c.synthetic.novel_classes},
                      {"samples_per_class", c.synthetic.samples_per_class},
                      {"dims", c.synthetic.dims},
                      {"separation", c.synthetic.separation},
                      {"noise", c.synthetic.noise},
                      {"coupling", c.synthetic.coupling},
                      {"seed", c.synthetic.seed}};
    j["base_manifest"] = c.base_manifest;
    j["novel_manifest"] = c.novel_manifest;
    j["stats_dir"] = c.stats_dir;
    j["base_subset"] = c.base_subset;
    j["base_subset_seed"] = c.base_subset_seed;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["episode_timeout"] = c.episode_timeout;
    j["record_timing"] = c.record_timing;
    return j;
}

/// Parses a configuration. Keys absent from `j` keep their defaults; unknown
/// keys are rejected so that typos do not silently fall back to defaults.
inline experiment_config config_from_json(const nlohmann::json& j)
{
    static const std::set<std::string> known{
        "methods", "ways",   "shots",  "queries_per_class", "etas",   "episodes",      "k",
        "n_gamma", "ridge",  "dim",    "iters",             "n1",     "n2",            "lr_w",
        "lr_h",    "lambda", "temperature", "ds_iters",     "ds_lr",  "no_ds",         "no_ce",
        "no_se",   "no_iaa", "no_cst", "source",            "synthetic", "base_manifest", "novel_manifest",
        "stats_dir", "base_subset", "base_subset_seed",     "seed",   "jobs",          "episode_timeout",
        "record_timing"};
    static const std::set<std::string> synthetic_known{"base_classes", "novel_classes", "samples_per_class", "dims",
                                                       "separation",   "noise",         "coupling",          "seed"};
    if (!j.is_object())
        throw config_error("configuration must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw config_error("unknown configuration key '" + key + "'");

    experiment_config c;
    auto& p = c.pipeline;
    try {
        using detail::read_key;
        read_key(j, "methods", c.methods);
        read_key(j, "ways", c.ways);
        read_key(j, "shots", c.shots);
        read_key(j, "queries_per_class", c.queries_per_class);
        read_key(j, "etas", c.etas);
        read_key(j, "episodes", c.episodes);
        read_key(j, "k", p.dgai.k);
        read_key(j, "n_gamma", p.dgai.n_gamma);
        read_key(j, "ridge", p.dgai.ridge);
        read_key(j, "dim", p.aggregation.dim);
        read_key(j, "iters", p.aggregation.iterations);
        read_key(j, "n1", p.aggregation.evaluator_steps);
        read_key(j, "n2", p.aggregation.latent_steps);
        read_key(j, "lr_w", p.aggregation.lr_weights);
        read_key(j, "lr_h", p.aggregation.lr_latent);
        read_key(j, "lambda", p.rectifier.lambda);
        read_key(j, "temperature", p.rectifier.temperature);
        read_key(j, "ds_iters", p.rectifier.iterations);
        read_key(j, "ds_lr", p.rectifier.lr);
        read_key(j, "no_ds", c.flags.no_ds);
        read_key(j, "no_ce", c.flags.no_ce);
        read_key(j, "no_se", c.flags.no_se);
        read_key(j, "no_iaa", c.flags.no_iaa);
        read_key(j, "no_cst", c.flags.no_cst);
        read_key(j, "source", c.source);
        if (j.contains("synthetic")) {
            const auto& s = j.at("synthetic");
            if (!s.is_object())
                throw config_error("'synthetic' must be an object");
            for (const auto& [key, value] : s.items())
                if (!synthetic_known.count(key))
                    throw config_error("unknown synthetic key '" + key + "'");
            read_key(s, "base_classes", c.synthetic.base_classes);
            read_key(s, "novel_classes", c.synthetic.novel_classes);
            read_key(s, "samples_per_class", c.synthetic.samples_per_class);
            read_key(s, "dims", c.synthetic.dims);
            read_key(s, "separation", c.synthetic.separation);
            read_key(s, "noise", c.synthetic.noise);
            read_key(s, "coupling", c.synthetic.coupling);
            read_key(s, "seed", c.synthetic.seed);
        }
        read_key(j, "base_manifest", c.base_manifest);
        read_key(j, "novel_manifest", c.novel_manifest);
        read_key(j, "stats_dir", c.stats_dir);
        read_key(j, "base_subset", c.base_subset);
        read_key(j, "base_subset_seed", c.base_subset_seed);
        read_key(j, "seed", c.seed);
        read_key(j, "jobs", c.jobs);
        read_key(j, "episode_timeout", c.episode_timeout);
        read_key(j, "record_timing", c.record_timing);
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(std::string("configuration: ") + ex.what());
    }

    if (c.episodes < 1)
        throw config_error("episodes must be at least 1");
    if (c.ways < 1 || c.shots < 1 || c.queries_per_class < 1)
        throw config_error("ways, shots and queries_per_class must be positive");
    if (c.etas.empty())
        throw config_error("at least one eta is required");
    for (double eta : c.etas)
        if (!(eta >= 0.0 && eta < 1.0))
            throw config_error("eta values must lie in [0, 1)");
    if (c.methods.empty())
        throw config_error("at least one method is required");
    if (c.source != "synthetic" && c.source != "manifest")
        throw config_error("source must be 'synthetic' or 'manifest'");
    if (c.jobs < 1)
        throw config_error("jobs must be at least 1");
    if (p.dgai.k < 1 || p.dgai.n_gamma < 1 || !(p.dgai.ridge > 0))
        throw config_error("k and n_gamma must be positive and ridge > 0");
    if (!(p.rectifier.temperature > 0))
        throw config_error("temperature must be positive");
    return c;
}

/// Applies one KEY=VALUE override. Dotted keys address nested objects. The
/// value is read as JSON when possible, a comma list becomes an array, and
/// anything else is taken as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override '" + assignment + "' is not KEY=VALUE");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    auto parse_scalar = [](const std::string& s) {
        auto parsed = nlohmann::json::parse(s, nullptr, false);
        return parsed.is_discarded() ? nlohmann::json(s) : parsed;
    };
    nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        if (text.find(',') != std::string::npos) {
            value = nlohmann::json::array();
            std::stringstream in(text);
            std::string item;
            while (std::getline(in, item, ','))
                value.push_back(parse_scalar(item));
        } else {
            value = text;
        }
    }

    nlohmann::json* node = &j;
    std::string rest = key;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
        node = &(*node)[rest.substr(0, dot)];
        rest = rest.substr(dot + 1);
    }
    (*node)[rest] = value;
}

// ---------------------------------------------------------------------------
// methods
// ---------------------------------------------------------------------------

enum class method_kind { ugd, proto, match };

struct method_spec
{
    std::string name;
    method_kind kind = method_kind::ugd;
    ablation flags;
};

/// "ugd", "proto", "match", or "ugd" followed by "+flag" ablation suffixes
/// (e.g. "ugd+no_se"). Suffix flags add to the configuration's global flags.
inline method_spec parse_method(const std::string& name, const ablation& global)
{
    method_spec m;
    m.name = name;
    if (name == "proto") {
        m.kind = method_kind::proto;
        return m;
    }
    if (name == "match") {
        m.kind = method_kind::match;
        return m;
    }
    if (name.rfind("ugd", 0) != 0)
        throw config_error("unknown method '" + name + "'");
    m.kind = method_kind::ugd;
    m.flags = global;
    std::string rest = name.substr(3);
    while (!rest.empty()) {
        if (rest.front() != '+')
            throw config_error("unknown method '" + name + "'");
        rest.erase(0, 1);
        const auto next = rest.find('+');
        const std::string flag = rest.substr(0, next);
        rest = next == std::string::npos ? std::string() : rest.substr(next);
        if (flag == "no_ds")
            m.flags.no_ds = true;
        else if (flag == "no_ce")
            m.flags.no_ce = true;
        else if (flag == "no_se")
            m.flags.no_se = true;
        else if (flag == "no_iaa")
            m.flags.no_iaa = true;
        else if (flag == "no_cst")
            m.flags.no_cst = true;
        else
            throw config_error("unknown ablation flag '" + flag + "' in method '" + name + "'");
    }
    return m;
}

inline std::vector<method_spec> parse_methods(const experiment_config& c)
{
    std::vector<method_spec> out;
    std::set<std::string> seen;
    for (const auto& name : c.methods) {
        if (!seen.insert(name).second)
            throw config_error("method '" + name + "' listed twice");
        out.push_back(parse_method(name, c.flags));
    }
    return out;
}

// ---------------------------------------------------------------------------
// data
// ---------------------------------------------------------------------------

struct experiment_data
{
    base_stats stats;
    dataset novel;
};

/// Keeps `keep` base classes chosen uniformly at random with `seed`.
inline base_stats random_base_subset(const base_stats& stats, std::size_t keep, std::uint64_t seed)
{
    if (keep == 0 || keep >= stats.class_count())
        return stats;
    std::vector<std::size_t> positions(stats.class_count());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    rng gen(seed);
    gen.shuffle(positions);
    positions.resize(keep);
    return stats.subset(positions);
}

inline experiment_data prepare_data(const experiment_config& c)
{
    experiment_data out;
    if (c.source == "synthetic") {
        const auto& s = c.synthetic;
        synthetic_spec spec;
        spec.classes = s.base_classes + s.novel_classes;
        spec.samples_per_class = s.samples_per_class;
        spec.views = view_spec(s.dims);
        spec.separation = s.separation;
        spec.noise = s.noise;
        spec.view_coupling = s.coupling;
        spec.seed = s.seed;
        const auto all = gen_synthetic_dataset(spec);
        std::vector<ClassId> base_ids(all.manifest.classes.begin(),
                                      all.manifest.classes.begin() + static_cast<std::ptrdiff_t>(s.base_classes));
        std::vector<ClassId> novel_ids(all.manifest.classes.begin() + static_cast<std::ptrdiff_t>(s.base_classes),
                                       all.manifest.classes.end());
        out.stats = compute_base_stats(select_classes(all, base_ids, dataset_role::base));
        out.novel = select_classes(all, novel_ids, dataset_role::novel);
    } else {
        if (c.novel_manifest.empty())
            throw config_error("manifest source requires novel_manifest");
        out.novel = load_features(c.novel_manifest);
        if (!c.stats_dir.empty())
            out.stats = load_stats(c.stats_dir, &out.novel.manifest.spec);
        else if (!c.base_manifest.empty())
            out.stats = compute_base_stats(load_features(c.base_manifest));
        else
            throw config_error("manifest source requires base_manifest or stats_dir");
        if (!(out.stats.spec() == out.novel.manifest.spec))
            throw schema_mismatch("base and novel view layouts differ");
    }
    out.stats = random_base_subset(out.stats, c.base_subset, c.base_subset_seed);
    const auto views = out.novel.manifest.spec.view_count();
    for (double eta : c.etas)
        if (eta > max_feasible_eta(views) + 1e-12)
            throw infeasible_eta("eta " + std::to_string(eta) + " is infeasible with " + std::to_string(views) +
                                 " views");
    return out;
}

// ---------------------------------------------------------------------------
// episodes
// ---------------------------------------------------------------------------

/// Seeds of episode `index`. They do not depend on eta or on the method list,
/// so every method at every point sees the same underlying task.
struct episode_seeds
{
    std::uint64_t sampling;
    std::uint64_t missing;
    std::uint64_t pipeline;
};

inline episode_seeds seeds_for(std::uint64_t master, std::size_t index)
{
    return {substream(master, 0xe915, index), substream(master, 0x3155, index), substream(master, 0x919e, index)};
}

/// Episode `index` of the sweep at the given missing rate.
inline episode make_episode(const experiment_config& c, const dataset& novel, double eta, std::size_t index)
{
    const auto s = seeds_for(c.seed, index);
    const auto complete = sample_episode(novel, c.ways, c.shots, c.queries_per_class, s.sampling);
    return apply_view_missing(complete, eta, s.missing);
}

struct method_result
{
    double accuracy = 0.0;
    double seconds = 0.0;
    ugd_outcome traces; ///< empty for baselines
};

inline std::vector<ClassIndex> evaluation_labels(const episode& e)
{
    std::vector<ClassIndex> out;
    for (auto id : e.labels_for_evaluation())
        out.push_back(e.class_index(id));
    return out;
}

/// Evaluates every method on one episode. UGD variants share their common
/// stages; their measured time is split evenly between them.
inline std::vector<method_result> run_episode(const experiment_config& c, const std::vector<method_spec>& methods,
                                              const episode& e, const base_stats& stats, std::uint64_t pipeline_seed)
{
    using clock = std::chrono::steady_clock;
    const auto truth = evaluation_labels(e);
    std::vector<method_result> out(methods.size());

    const auto start = clock::now();
    std::function<void()> checkpoint;
    if (c.episode_timeout > 0) {
        checkpoint = [start, limit = c.episode_timeout] {
            if (std::chrono::duration<double>(clock::now() - start).count() > limit)
                throw timeout_error("episode exceeded the " + std::to_string(limit) + " s budget");
        };
    }

    std::vector<ablation> variants;
    std::vector<std::size_t> variant_slots;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto t0 = clock::now();
        switch (methods[m].kind) {
        case method_kind::proto:
            out[m].accuracy = accuracy(proto_baseline(e), truth);
            break;
        case method_kind::match:
            out[m].accuracy = accuracy(match_baseline(e), truth);
            break;
        case method_kind::ugd:
            variants.push_back(methods[m].flags);
            variant_slots.push_back(m);
            continue;
        }
        out[m].seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    if (!variants.empty()) {
        const auto t0 = clock::now();
        auto outcomes = run_ugd_variants(e, stats, c.pipeline, variants, pipeline_seed, checkpoint);
        const double share =
            std::chrono::duration<double>(clock::now() - t0).count() / static_cast<double>(variants.size());
        for (std::size_t i = 0; i < variants.size(); ++i) {
            auto& r = out[variant_slots[i]];
            r.accuracy = accuracy(outcomes[i].predictions, truth);
            r.seconds = share;
            r.traces = std::move(outcomes[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// sweeps and reports
// ---------------------------------------------------------------------------

struct point_result
{
    std::string method;
    double eta = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    int episodes = 0;
    double seconds = 0.0;

    friend bool operator==(const point_result&, const point_result&) = default;
};

struct episode_record
{
    std::string method;
    double eta = 0.0;
    int episode = 0;
    double accuracy = 0.0;
    std::uint64_t digest = 0;
};

struct sweep_result
{
    std::vector<point_result> points;
    std::vector<episode_record> episodes;
    nlohmann::json config;
};

/// Arithmetic mean and sample standard deviation.
inline std::pair<double, double> mean_and_std(const std::vector<double>& values)
{
    if (values.empty())
        return {0.0, 0.0};
    double sum = 0.0;
    for (double v : values)
        sum += v;
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2)
        return {mean, 0.0};
    double sq = 0.0;
    for (double v : values)
        sq += (v - mean) * (v - mean);
    return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

/// Runs every method at every eta over `episodes` episodes. Episodes run on
/// `jobs` worker threads; results are reduced in episode order, so the output
/// does not depend on scheduling.
inline sweep_result run_sweep(const experiment_config& c, const experiment_data& data)
{
    const auto methods = parse_methods(c);
    sweep_result result;
    result.config = to_json(c);
    const auto n = static_cast<std::size_t>(c.episodes);

    for (double eta : c.etas) {
        std::vector<std::vector<method_result>> per_episode(n);
        std::vector<std::uint64_t> digests(n);
        std::atomic<std::size_t> next{0};
        std::mutex failure_lock;
        std::exception_ptr failure;
        auto worker = [&] {
            while (true) {
                const auto i = next.fetch_add(1);
                if (i >= n)
                    return;
                try {
                    const auto e = make_episode(c, data.novel, eta, i);
                    digests[i] = episode_digest(e);
                    per_episode[i] = run_episode(c, methods, e, data.stats, seeds_for(c.seed, i).pipeline);
                    for (auto& r : per_episode[i])
                        r.traces = {};
                } catch (...) {
                    std::lock_guard lock(failure_lock);
                    if (!failure)
                        failure = std::current_exception();
                    next = n;
                }
            }
        };
        const auto threads = std::min<std::size_t>(static_cast<std::size_t>(c.jobs), n);
        if (threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t)
                pool.emplace_back(worker);
            for (auto& t : pool)
                t.join();
        }
        if (failure)
            std::rethrow_exception(failure);

        for (std::size_t m = 0; m < methods.size(); ++m) {
            std::vector<double> acc;
            double seconds = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc.push_back(per_episode[i][m].accuracy);
                seconds += per_episode[i][m].seconds;
                result.episodes.push_back(
                    {methods[m].name, eta, static_cast<int>(i), per_episode[i][m].accuracy, digests[i]});
            }
            const auto [mean, sd] = mean_and_std(acc);
            result.points.push_back(
                {methods[m].name, eta, mean, sd, static_cast<int>(n), c.record_timing ? seconds : 0.0});
        }
    }
    return result;
}

/// Shortest text that reads back as the same double.
inline std::string format_number(double value) { return nlohmann::json(value).dump(); }

inline nlohmann::json results_to_json(const sweep_result& r)
{
    nlohmann::json j;
    j["config"] = r.config;
    j["results"] = nlohmann::json::array();
    for (const auto& p : r.points)
        j["results"].push_back({{"method", p.method},
                                {"eta", p.eta},
                                {"mean_acc", p.mean_accuracy},
                                {"std", p.std_accuracy},
                                {"n", p.episodes},
                                {"seconds", p.seconds}});
    return j;
}

inline sweep_result results_from_json(const nlohmann::json& j)
{
    sweep_result r;
    try {
        r.config = j.value("config", nlohmann::json::object());
        for (const auto& p : j.at("results"))
            r.points.push_back({p.at("method").get<std::string>(), p.at("eta").get<double>(),
                                p.at("mean_acc").get<double>(), p.at("std").get<double>(), p.at("n").get<int>(),
                                p.at("seconds").get<double>()});
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(std::string("results: ") + ex.what());
    }
    return r;
}

inline std::string results_csv(const sweep_result& r)
{
    std::string out = "method,eta,mean_acc,std,n,seconds\n";
    for (const auto& p : r.points)
        out += p.method + ',' + format_number(p.eta) + ',' + format_number(p.mean_accuracy) + ',' +
               format_number(p.std_accuracy) + ',' + std::to_string(p.episodes) + ',' + format_number(p.seconds) +
               '\n';
    return out;
}

/// Writes results.csv and results.json (and episodes.jsonl when requested)
/// into `dir`. Nothing is written for an empty result.
inline void emit_report(const sweep_result& r, const std::filesystem::path& dir, bool per_episode = false)
{
    if (r.points.empty())
        throw error("emit_report: no results to write");
    std::filesystem::create_directories(dir);
    auto write = [](const std::filesystem::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw error("cannot write " + path.string());
        out << text;
    };
    write(dir / "results.csv", results_csv(r));
    write(dir / "results.json", results_to_json(r).dump(2) + "\n");
    if (per_episode) {
        std::string lines;
        for (const auto& e : r.episodes)
            lines += nlohmann::json{{"method", e.method},
                                    {"eta", e.eta},
                                    {"episode", e.episode},
                                    {"accuracy", e.accuracy},
                                    {"digest", e.digest}}
                         .dump() +
                     "\n";
        write(dir / "episodes.jsonl", lines);
    }
}

inline sweep_result load_report(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw schema_mismatch("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw schema_mismatch(path.string() + ": " + ex.what());
    }
    return results_from_json(j);
}

} // namespace ugd
