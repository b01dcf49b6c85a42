#include "occlab/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <algorithm>
#include <sstream>

#include "CLI11.hpp"
#include "occlab/config.hpp"
#include "occlab/output.hpp"

namespace occlab {

namespace fs = std::filesystem;

const std::vector<std::string>& cli_subcommands() {
    static const std::vector<std::string> names{"occupancy", "sweep",  "gcrl",   "stitch",
                                                "shortcut",  "ablate", "interp", "oracle"};
    return names;
}

namespace {

Json summary_json(const MethodSummary& s) { return {{"mean", s.mean}, {"sd", s.sd}, {"count", s.count}}; }

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void write_common(const fs::path& dir, const std::vector<MetricsRecord>& records,
                  const std::vector<TimingRecord>& timings, const Json& summary) {
    write_text(join(dir, "metrics.csv"), metrics_csv(records));
    if (!timings.empty()) write_text(join(dir, "timing.csv"), timing_csv(timings));
    write_text(join(dir, "summary.json"), summary.dump(2) + "\n");
}

void write_renders(const fs::path& dir, const std::map<std::string, std::string>& renders) {
    for (const auto& [stem, text] : renders) write_text(join(dir, stem + ".txt"), text);
}

std::vector<PlotSeries> curve_series(const std::vector<MethodRun>& runs, const std::vector<std::string>& methods) {
    std::vector<PlotSeries> out;
    for (const std::string& m : methods) {
        const std::vector<CurvePoint> curve = mean_curve(runs, m);
        if (curve.empty()) continue;
        PlotSeries s{m, {}, {}};
        for (const CurvePoint& p : curve) s.points.emplace_back(static_cast<double>(p.step), p.occupancy_error);
        out.push_back(std::move(s));
    }
    return out;
}

Json run_occupancy(const Json& config, const fs::path& dir, bool plots) {
    const OccupancySpec spec = occupancy_spec_from_config(config);
    const BenchmarkResult r = run_occupancy_benchmark(spec);
    Json summary{{"experiment", spec.experiment}, {"seeds", spec.seeds}};
    for (const auto& [method, s] : r.final_error) {
        summary["final_occupancy_error"][method] = summary_json(s);
        if (method != kExactOracle) summary["settle_step"][method] = settle_step(mean_curve(r.runs, method));
    }
    write_common(dir, r.records, r.timings, summary);
    if (plots) {
        std::vector<PlotSeries> series = curve_series(r.runs, spec.methods);
        if (!r.oracle_curve.empty()) {
            PlotSeries s{kExactOracle, {}, {}};
            for (std::size_t k = 0; k < r.oracle_curve.size(); ++k)
                s.points.emplace_back(static_cast<double>(k + 1), r.oracle_curve[k]);
            series.push_back(std::move(s));
        }
        write_text(join(dir, "occupancy_error.svg"),
                   svg_line_plot(series, {"Occupancy error (seed mean)", "gradient step / iteration",
                                          "mean absolute error", false, true}));
    }
    return summary;
}

Json run_sweep(const Json& config, const fs::path& dir, bool plots) {
    const SweepSpec spec = sweep_spec_from_config(config);
    const SweepResult r = run_sample_efficiency_sweep(spec);
    Json summary{{"experiment", spec.base.experiment}, {"seeds", spec.base.seeds}, {"sizes", spec.sizes}};
    std::map<std::string, PlotSeries> series;
    for (const auto& [key, s] : r.final_error) {
        summary["final_occupancy_error"][key.first][std::to_string(key.second)] = summary_json(s);
        PlotSeries& ps = series[key.first];
        ps.name = key.first;
        ps.points.emplace_back(static_cast<double>(key.second), s.mean);
        ps.band.push_back(s.sd);
    }
    write_common(dir, r.records, r.timings, summary);
    if (plots) {
        std::vector<PlotSeries> list;
        for (auto& [name, s] : series) list.push_back(s);
        write_text(join(dir, "sample_efficiency.svg"),
                   svg_line_plot(list, {"Final error vs dataset size (mean ± sd)", "transitions",
                                        "mean absolute error", true, true}));
    }
    return summary;
}

Json run_ablate(const Json& config, const fs::path& dir, bool plots) {
    const OccupancySpec spec = ablation_spec_from_config(config);
    const AblationResult r = run_ablation(spec);
    Json summary{{"experiment", spec.experiment},
                 {"seeds", spec.seeds},
                 {"categorical_mean", r.categorical_mean},
                 {"binary_mean", r.binary_mean},
                 {"loss_family_gap", r.binary_mean - r.categorical_mean},
                 {"weight_scheme_effect", r.weight_effect},
                 {"negatives_scheme_effect", r.negatives_effect}};
    std::vector<std::string> names;
    for (const AblationVariant& v : ablation_corners()) names.push_back(v.name);
    for (const auto& [name, s] : r.final_error) summary["final_occupancy_error"][name] = summary_json(s);
    write_common(dir, r.records, r.timings, summary);
    if (plots)
        write_text(join(dir, "ablation.svg"), svg_line_plot(curve_series(r.runs, names),
                                                            {"Ablation (seed mean)", "gradient step",
                                                             "mean absolute error", false, true}));
    return summary;
}

Json run_offline(const Json& config, const fs::path& dir, const std::string& mode) {
    const OfflineSpec spec = offline_spec_from_config(config, mode);
    const OfflineResult r = run_offline_reasoning(spec);
    Json summary{{"experiment", spec.experiment}, {"seeds", spec.seeds}, {"horizon", r.horizon}};
    Json pairs = Json::array();
    for (const auto& [s, g] : r.eval_pairs) pairs.push_back({s, g});
    summary["eval_pairs"] = pairs;
    if (mode == "shortcut") {
        summary["bfs_shortest"] = r.bfs_shortest;
        summary["long_route_length"] = r.long_route_length;
        summary["short_fraction"] = r.short_fraction;
    }
    for (const auto& [m, s] : r.success) summary["success_rate"][m] = summary_json(s);
    for (const auto& [m, s] : r.path_length) summary["path_length"][m] = summary_json(s);
    write_common(dir, r.records, r.timings, summary);
    write_renders(dir, r.renders);
    return summary;
}

Json run_gcrl(const Json& config, const fs::path& dir, bool plots) {
    const GcrlSpec spec = gcrl_spec_from_config(config);
    const GcrlExperimentResult r = run_gcrl_experiment(spec);
    Json summary{{"experiment", spec.experiment}, {"seeds", spec.seeds}, {"success_rate", summary_json(r.success)}};
    write_common(dir, r.records, r.timings, summary);
    write_renders(dir, r.renders);
    for (const GcrlRun& run : r.runs)
        write_text(join(dir, "policy_seed" + std::to_string(run.seed) + ".csv"), policy_csv(run.result.policy));
    if (plots) {
        std::vector<PlotSeries> series;
        for (const GcrlRun& run : r.runs) {
            PlotSeries s{"seed " + std::to_string(run.seed), {}, {}};
            for (const GcrlMetric& m : run.result.metrics)
                s.points.emplace_back(static_cast<double>(m.iteration), m.success_rate);
            series.push_back(std::move(s));
        }
        write_text(join(dir, "success_rate.svg"),
                   svg_line_plot(series, {"Goal-reaching success", "iteration", "success rate"}));
    }
    return summary;
}

Json run_interp(const Json& config, const fs::path& dir) {
    const InterpSpec spec = interp_spec_from_config(config);
    const InterpResult r = run_interpolation(spec);
    Json runs = Json::array();
    int p_mono = 0, n_mono = 0;
    for (const InterpRun& run : r.runs) {
        runs.push_back({{"seed", run.seed},
                        {"start", run.s0},
                        {"goal", run.goal},
                        {"alphas", run.result.alphas},
                        {"parametric", run.result.parametric},
                        {"nonparametric", run.result.nonparametric},
                        {"parametric_distance", run.parametric_distance},
                        {"nonparametric_distance", run.nonparametric_distance},
                        {"parametric_monotone", run.parametric_monotone},
                        {"nonparametric_monotone", run.nonparametric_monotone}});
        p_mono += run.parametric_monotone;
        n_mono += run.nonparametric_monotone;
    }
    Json summary{{"experiment", spec.experiment},
                 {"seeds", spec.seeds},
                 {"runs", runs},
                 {"parametric_monotone_count", p_mono},
                 {"nonparametric_monotone_count", n_mono},
                 {"run_count", r.runs.size()}};
    write_common(dir, r.records, {}, summary);
    write_renders(dir, r.renders);
    return summary;
}

Json run_oracle(const Json& config, const fs::path& dir, std::ostream& out) {
    const EnvSpec env = env_from_config(config);
    const TabularMdp mdp = env.build(config.at("gamma").get<double>());
    const TabularPolicy policy = policy_from_config(config, mdp);
    const OccupancyTable occ = exact_occupancy(mdp, policy);
    const std::vector<std::string> names = action_names(config);
    out << "exact occupancy p(s_future | s, a), gamma = " << mdp.discount() << "\n";
    out << std::setprecision(10);
    for (int s = 0; s < mdp.num_states(); ++s)
        for (int a = 0; a < mdp.num_actions(); ++a) {
            out << "s=" << s << " a=" << names[a] << ":";
            for (int f = 0; f < mdp.num_states(); ++f) out << ' ' << occ.at(s, a, f);
            out << "\n";
        }
    write_text(join(dir, "occupancy.csv"), occupancy_csv(occ));
    return {{"experiment", "oracle"}, {"num_states", mdp.num_states()}, {"num_actions", mdp.num_actions()}};
}

// Builds the spec for the subcommand without running it, so config errors surface in dry runs.
Json plan(const std::string& sub, const Json& config) {
    Json p{{"subcommand", sub}};
    if (sub == "occupancy" || sub == "ablate") {
        const OccupancySpec s = sub == "ablate" ? ablation_spec_from_config(config) : occupancy_spec_from_config(config);
        Json methods = Json::array();
        if (sub == "ablate")
            for (const AblationVariant& v : ablation_corners()) methods.push_back(v.name);
        else
            methods = s.methods;
        p["methods"] = methods;
        p["seeds"] = s.seeds;
        p["dataset_size"] = s.dataset_size;
        p["steps"] = s.schedule.steps;
    } else if (sub == "sweep") {
        const SweepSpec s = sweep_spec_from_config(config);
        p["methods"] = s.base.methods;
        p["sizes"] = s.sizes;
        p["seeds"] = s.base.seeds;
        p["steps"] = s.base.schedule.steps;
    } else if (sub == "stitch" || sub == "shortcut") {
        const OfflineSpec s = offline_spec_from_config(config, sub == "stitch" ? "stitching" : "shortcut");
        p["methods"] = s.methods;
        p["seeds"] = s.seeds;
        p["iterations"] = s.iterations;
        p["style"] = s.style.name;
    } else if (sub == "gcrl") {
        const GcrlSpec s = gcrl_spec_from_config(config);
        p["seeds"] = s.seeds;
        p["iterations"] = s.iterations;
        p["online"] = s.gcrl.online;
    } else if (sub == "interp") {
        const InterpSpec s = interp_spec_from_config(config);
        p["seeds"] = s.seeds;
        p["iterations"] = s.iterations;
        p["alphas"] = s.alphas;
    } else if (sub == "oracle") {
        const EnvSpec env = env_from_config(config);
        policy_from_config(config, env.build(config.at("gamma").get<double>()));
    }
    return p;
}

void report(std::ostream& err, const char* kind, int code, const std::string& key, const std::string& message) {
    Json line{{"error", kind}, {"exit", code}, {"message", message}};
    if (!key.empty()) line["key"] = key;
    err << line.dump() << std::endl;
}

}  // namespace

int dispatch(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
    Json config;
    try {
        const auto& subs = cli_subcommands();
        if (std::find(subs.begin(), subs.end(), inv.subcommand) == subs.end())
            throw ConfigError("", "unknown subcommand '" + inv.subcommand + "'");
        config = load_config(inv.config_path);
        for (const std::string& o : inv.overrides) apply_override(config, o);
        if (inv.seeds) config["seeds"] = *inv.seeds;
        if (inv.workers) {
            if (*inv.workers < 1) throw ConfigError("workers", "must be >= 1");
            config["workers"] = *inv.workers;
        }
        const Json p = plan(inv.subcommand, config);
        if (inv.dry_run) {
            out << Json{{"plan", p}, {"output_dir", inv.output_dir}, {"config", config}}.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        report(err, "config", kExitConfig, e.key(), e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        report(err, "config", kExitConfig, "", e.what());
        return kExitConfig;
    }

    try {
        if (inv.output_dir.empty()) throw std::runtime_error("no output directory (use --out or OCCLAB_OUTDIR)");
        prepare_output_dir(inv.output_dir, inv.force);
        const fs::path dir(inv.output_dir);
        write_text(join(dir, "resolved_config.json"), config.dump(2) + "\n");
        const std::string& sub = inv.subcommand;
        Json summary;
        if (sub == "occupancy") summary = run_occupancy(config, dir, inv.plots);
        else if (sub == "sweep") summary = run_sweep(config, dir, inv.plots);
        else if (sub == "ablate") summary = run_ablate(config, dir, inv.plots);
        else if (sub == "stitch") summary = run_offline(config, dir, "stitching");
        else if (sub == "shortcut") summary = run_offline(config, dir, "shortcut");
        else if (sub == "gcrl") summary = run_gcrl(config, dir, inv.plots);
        else if (sub == "interp") summary = run_interp(config, dir);
        else summary = run_oracle(config, dir, out);
        if (sub != "oracle") out << summary.dump(2) << "\n";
    } catch (const OutputCollision& e) {
        report(err, "output", kExitRuntime, "", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        report(err, "runtime", kExitRuntime, "", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tabular occupancy-measure laboratory", "occlab"};
    app.require_subcommand(1);
    CliInvocation inv;
    std::string seeds;
    std::optional<int> workers;
    const char* env_out = std::getenv("OCCLAB_OUTDIR");
    inv.output_dir = env_out ? env_out : "";

    const std::map<std::string, std::string> help{
        {"occupancy", "estimation-error benchmark"},     {"sweep", "sample-efficiency sweep"},
        {"gcrl", "goal-conditioned training"},           {"stitch", "offline stitching on Z-shaped paths"},
        {"shortcut", "offline shortcut discovery"},      {"ablate", "TD InfoNCE vs C-learning ablation"},
        {"interp", "representation interpolation"},      {"oracle", "print the exact occupancy measure"}};
    for (const std::string& name : cli_subcommands()) {
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", inv.config_path, "JSON config file")->required();
        sub->add_option("--set", inv.overrides, "override a config value: dotted.key=value");
        sub->add_option("--out", inv.output_dir, "output directory (default $OCCLAB_OUTDIR)");
        sub->add_option("--seeds", seeds, "comma-separated seed list");
        sub->add_option("--workers", workers, "worker threads inside the harness");
        sub->add_flag("--force", inv.force, "write into a non-empty output directory");
        sub->add_flag("--dry-run", inv.dry_run, "print the resolved plan and exit");
        sub->add_flag("--no-plots", "skip SVG plots");
        sub->callback([&inv, sub, name] {
            inv.subcommand = name;
            inv.plots = sub->count("--no-plots") == 0;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::string usage = app.help();
        for (CLI::App* sub : app.get_subcommands()) usage = sub->help();
        err << usage;
        report(err, "usage", kExitConfig, "", e.what());
        return kExitConfig;
    }
    try {
        if (!seeds.empty()) inv.seeds = parse_seed_list(seeds);
    } catch (const ConfigError& e) {
        report(err, "config", kExitConfig, e.key(), e.what());
        return kExitConfig;
    }
    inv.workers = workers;
    return dispatch(inv, out, err);
}

}  // namespace occlab
