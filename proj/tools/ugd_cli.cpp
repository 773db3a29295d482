// ugd: command-line front end (synth, stats, run, sweep, report).
#include "ugd/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_runtime = 4;

struct common_options
{
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out = ".";
};

void add_common(CLI::App* cmd, common_options& o, bool with_jobs)
{
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--set", o.overrides, "override a configuration key (KEY=VALUE, repeatable)");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output directory");
    if (with_jobs)
        cmd->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
}

ugd::experiment_config load_config(const common_options& o)
{
    nlohmann::json j = nlohmann::json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in)
            throw ugd::config_error("cannot open configuration " + o.config_path);
        try {
            in >> j;
        } catch (const nlohmann::json::exception& ex) {
            throw ugd::config_error(o.config_path + ": " + ex.what());
        }
    }
    for (const auto& s : o.overrides)
        ugd::apply_override(j, s);
    auto c = ugd::config_from_json(j);
    if (o.seed)
        c.seed = *o.seed;
    if (o.jobs)
        c.jobs = *o.jobs;
    return c;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ugd::error("cannot write " + path.string());
    out << text;
}

int cmd_synth(const common_options& o)
{
    auto c = load_config(o);
    if (o.seed)
        c.synthetic.seed = *o.seed;
    c.source = "synthetic";
    const auto& s = c.synthetic;
    ugd::synthetic_spec spec;
    spec.classes = s.base_classes + s.novel_classes;
    spec.samples_per_class = s.samples_per_class;
    spec.views = ugd::view_spec(s.dims);
    spec.separation = s.separation;
    spec.noise = s.noise;
    spec.view_coupling = s.coupling;
    spec.seed = s.seed;
    const auto all = ugd::gen_synthetic_dataset(spec);
    const auto split = all.manifest.classes.begin() + static_cast<std::ptrdiff_t>(s.base_classes);
    const std::vector<ugd::ClassId> base_ids(all.manifest.classes.begin(), split);
    const std::vector<ugd::ClassId> novel_ids(split, all.manifest.classes.end());

    const fs::path out = o.out;
    const auto base = ugd::save_features(ugd::select_classes(all, base_ids, ugd::dataset_role::base), out / "base");
    const auto novel =
        ugd::save_features(ugd::select_classes(all, novel_ids, ugd::dataset_role::novel), out / "novel");

    c.source = "manifest";
    c.base_manifest = fs::absolute(base).string();
    c.novel_manifest = fs::absolute(novel).string();
    write_text(out / "config.json", ugd::to_json(c).dump(2) + "\n");
    std::cout << "wrote " << base.string() << "\n"
              << "wrote " << novel.string() << "\n"
              << "wrote " << (out / "config.json").string() << "\n";
    return 0;
}

int cmd_stats(const common_options& o, const std::string& manifest)
{
    std::string path = manifest;
    if (path.empty()) {
        const auto c = load_config(o);
        path = c.base_manifest;
    }
    if (path.empty())
        throw ugd::config_error("stats: give --manifest or a configuration with base_manifest");
    const auto stats = ugd::compute_base_stats(ugd::load_features(path));
    ugd::save_stats(stats, o.out);
    std::cout << "wrote statistics of " << stats.class_count() << " classes to " << o.out << "\n";
    return 0;
}

int cmd_run(const common_options& o, std::size_t index, std::optional<double> eta_option)
{
    const auto c = load_config(o);
    const double eta = eta_option ? *eta_option : c.etas.front();
    auto single = c;
    single.etas = {eta};
    const auto data = ugd::prepare_data(single);
    const auto methods = ugd::parse_methods(c);
    const auto e = ugd::make_episode(c, data.novel, eta, index);
    const auto results = ugd::run_episode(c, methods, e, data.stats, ugd::seeds_for(c.seed, index).pipeline);

    const fs::path out = o.out;
    fs::create_directories(out);
    nlohmann::json summary;
    summary["eta"] = eta;
    summary["episode"] = index;
    summary["digest"] = ugd::episode_digest(e);
    summary["missing_rate"] = ugd::missing_rate(e);
    summary["methods"] = nlohmann::json::array();
    for (std::size_t m = 0; m < methods.size(); ++m) {
        summary["methods"].push_back(
            {{"method", methods[m].name}, {"accuracy", results[m].accuracy}, {"seconds", results[m].seconds}});
        std::printf("%-24s %.4f\n", methods[m].name.c_str(), results[m].accuracy);
        if (methods[m].kind != ugd::method_kind::ugd)
            continue;
        std::string stem = methods[m].name;
        std::replace(stem.begin(), stem.end(), '+', '_');
        if (!results[m].traces.aggregation.empty()) {
            std::ofstream trace(out / (stem + "_aggregation.jsonl"));
            ugd::write_trace(trace, results[m].traces.aggregation);
        }
        if (!results[m].traces.rectification.empty()) {
            std::ofstream trace(out / (stem + "_rectification.jsonl"));
            ugd::write_trace(trace, results[m].traces.rectification);
        }
    }
    summary["config"] = ugd::to_json(c);
    write_text(out / "run.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_sweep(const common_options& o, bool per_episode)
{
    const auto c = load_config(o);
    const auto data = ugd::prepare_data(c);
    const auto result = ugd::run_sweep(c, data);
    ugd::emit_report(result, o.out, per_episode);
    std::cout << ugd::results_csv(result);
    return 0;
}

int cmd_report(const std::string& input, const std::string& out)
{
    const auto result = ugd::load_report(input);
    if (result.points.empty())
        throw ugd::schema_mismatch(input + ": no results");
    const auto csv = ugd::results_csv(result);
    if (!out.empty()) {
        fs::create_directories(out);
        write_text(fs::path(out) / "results.csv", csv);
    }
    std::cout << csv;
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Few-shot partial multi-view classification with Gaussian anchors"};
    app.require_subcommand(1);

    common_options synth_o, stats_o, run_o, sweep_o;
    auto* synth = app.add_subcommand("synth", "generate a synthetic base/novel feature dataset");
    add_common(synth, synth_o, false);

    auto* stats = app.add_subcommand("stats", "compute and save base-class statistics");
    add_common(stats, stats_o, false);
    std::string manifest;
    stats->add_option("--manifest", manifest, "base feature manifest");

    auto* run = app.add_subcommand("run", "evaluate every configured method on one episode");
    add_common(run, run_o, false);
    std::size_t episode_index = 0;
    std::optional<double> eta;
    run->add_option("--episode", episode_index, "episode index");
    run->add_option("--eta", eta, "view-missing rate (default: first configured eta)");

    auto* sweep = app.add_subcommand("sweep", "evaluate the configured methods over the eta grid");
    add_common(sweep, sweep_o, true);
    bool per_episode = false;
    sweep->add_flag("--per-episode", per_episode, "also write episodes.jsonl");

    auto* report = app.add_subcommand("report", "re-render results.csv from results.json");
    std::string report_in;
    std::string report_out;
    report->add_option("input", report_in, "results.json")->required();
    report->add_option("--out", report_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*synth)
            return cmd_synth(synth_o);
        if (*stats)
            return cmd_stats(stats_o, manifest);
        if (*run)
            return cmd_run(run_o, episode_index, eta);
        if (*sweep)
            return cmd_sweep(sweep_o, per_episode);
        if (*report)
            return cmd_report(report_in, report_out);
    } catch (const ugd::config_error& ex) {
        std::cerr << "configuration error: " << ex.what() << "\n";
        return exit_config;
    } catch (const ugd::data_error& ex) {
        std::cerr << "data error: " << ex.what() << "\n";
        return exit_data;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return exit_runtime;
    }
    return 0;
}
