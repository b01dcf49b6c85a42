#include "occlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <array>
#include <deque>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace occlab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool is_oracle(const std::string& method) { return method == kExactOracle; }

const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"td_infonce", "mc_infonce", "c_learning",
                                            "successor_representation", kExactOracle};
    return m;
}

void check_seeds(const std::vector<std::uint64_t>& seeds, const char* what) {
    if (seeds.empty()) throw std::invalid_argument(std::string(what) + ": at least one seed is required");
}

}  // namespace

TabularMdp EnvSpec::build(double gamma) const {
    if (kind == "gridworld") return build_gridworld(grid, gamma);
    if (kind == "explicit") return TabularMdp(num_states, num_actions, transition, initial, gamma);
    throw std::invalid_argument("unknown env kind '" + kind + "'");
}

std::optional<GridLayout> EnvSpec::layout() const {
    if (kind == "gridworld") return GridLayout(grid);
    return std::nullopt;
}

MethodSummary summarize(const std::vector<double>& values) {
    MethodSummary s;
    s.count = static_cast<int>(values.size());
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.count;
    if (s.count > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (s.count - 1));
    }
    return s;
}

void run_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
    for (std::size_t w = 0; w < n; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

void OccupancySpec::validate() const {
    check_seeds(seeds, "occupancy");
    if (methods.empty()) throw std::invalid_argument("occupancy: no methods");
    for (const auto& m : methods) {
        if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
            throw std::invalid_argument("unknown method id '" + m + "'");
    }
    for (const auto& [m, lr] : learning_rates) {
        if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
            throw std::invalid_argument("learning_rates: unknown method id '" + m + "'");
        if (!(lr > 0.0)) throw std::invalid_argument("learning_rates." + m + " must be > 0");
    }
    if (dataset_size < 1 || episode_len < 1) throw std::invalid_argument("occupancy: invalid dataset size");
    if (oracle_iterations < 1) throw std::invalid_argument("occupancy: oracle_iterations must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    estimator.validate();
}

TabularPolicy evaluated_policy(const OccupancySpec& spec, const TabularMdp& mdp) {
    if (spec.policy.size() == 0) return TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    TabularPolicy p{spec.policy};
    if (p.num_states() != mdp.num_states() || p.num_actions() != mdp.num_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    p.validate();
    return p;
}

std::uint64_t dataset_seed(std::uint64_t seed, int size) {
    return mix_seed(seed, 0x5eed0000ULL + static_cast<std::uint64_t>(size));
}

EstimatorConfig method_config(const OccupancySpec& spec, const std::string& method, std::uint64_t seed) {
    EstimatorConfig cfg = spec.estimator;
    cfg.seed = seed;
    const auto it = spec.learning_rates.find(method);
    if (it != spec.learning_rates.end()) {
        if (method == "successor_representation")
            cfg.sr_step_size = it->second;
        else
            cfg.learning_rate = it->second;
    }
    return cfg;
}

std::vector<double> exact_bellman_oracle_curve(const TabularMdp& mdp, const TabularPolicy& policy,
                                               int iterations) {
    const OccupancyTable truth = exact_occupancy(mdp, policy);
    OccupancyTable c{mdp.num_states(), mdp.num_actions(),
                     Matrix::Constant(mdp.num_state_actions(), mdp.num_states(), 1.0 / mdp.num_states())};
    std::vector<double> curve;
    for (int k = 1; k <= iterations; ++k) {
        c = apply_infonce_bellman(mdp, policy, c);
        curve.push_back(occupancy_error(c, truth));
    }
    return curve;
}

namespace {

struct Job {
    std::string method;
    std::uint64_t seed;
    std::size_t dataset;
    EstimatorConfig config;
    EstimatorMethod estimator;
};

std::vector<MethodRun> run_estimator_jobs(const std::vector<Job>& jobs,
                                          const std::vector<TransitionDataset>& datasets,
                                          const TabularMdp& mdp, const TabularPolicy& policy,
                                          const OccupancyTable& truth, const TrainSchedule& schedule,
                                          int workers) {
    std::vector<MethodRun> runs(jobs.size());
    run_jobs(jobs.size(), workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        const auto t0 = std::chrono::steady_clock::now();
        EstimatorRun run = train_estimator(job.estimator, mdp, policy, datasets[job.dataset], job.config,
                                           schedule, truth);
        runs[i] = {job.method, job.seed, std::move(run), seconds_since(t0)};
    });
    return runs;
}

}  // namespace

BenchmarkResult run_occupancy_benchmark(const OccupancySpec& spec) {
    spec.validate();
    const TabularMdp mdp = spec.env.build(spec.gamma);
    const TabularPolicy policy = evaluated_policy(spec, mdp);
    const OccupancyTable truth = exact_occupancy(mdp, policy);

    std::vector<TransitionDataset> datasets;
    for (std::uint64_t seed : spec.seeds)
        datasets.push_back(sample_transitions(mdp, policy, spec.dataset_size, spec.episode_len,
                                              dataset_seed(seed, spec.dataset_size), "evaluated"));

    std::vector<Job> jobs;
    for (const auto& method : spec.methods) {
        if (is_oracle(method)) continue;
        for (std::size_t k = 0; k < spec.seeds.size(); ++k)
            jobs.push_back({method, spec.seeds[k], k, method_config(spec, method, spec.seeds[k]),
                            parse_estimator_method(method)});
    }

    BenchmarkResult out;
    const auto t0 = std::chrono::steady_clock::now();
    out.oracle_curve = exact_bellman_oracle_curve(mdp, policy, spec.oracle_iterations);
    const double oracle_seconds = seconds_since(t0);
    out.runs = run_estimator_jobs(jobs, datasets, mdp, policy, truth, spec.schedule, spec.workers);

    for (const auto& method : spec.methods) {
        std::vector<double> finals;
        if (is_oracle(method)) {
            for (std::uint64_t seed : spec.seeds) {
                for (std::size_t k = 0; k < out.oracle_curve.size(); ++k)
                    out.records.push_back({spec.experiment, method, seed, static_cast<long>(k + 1),
                                           "occupancy_error", out.oracle_curve[k]});
                out.timings.push_back({spec.experiment, method, seed, spec.oracle_iterations, oracle_seconds});
                finals.push_back(out.oracle_curve.back());
            }
        } else {
            for (const MethodRun& r : out.runs) {
                if (r.method != method) continue;
                for (const CurvePoint& p : r.run.curve) {
                    out.records.push_back({spec.experiment, method, r.seed, p.step, "loss", p.loss});
                    out.records.push_back(
                        {spec.experiment, method, r.seed, p.step, "occupancy_error", p.occupancy_error});
                }
                out.timings.push_back({spec.experiment, method, r.seed, spec.schedule.steps, r.seconds});
                finals.push_back(occupancy_error(r.run.estimate, truth));
            }
        }
        out.final_error[method] = summarize(finals);
    }
    return out;
}

std::vector<CurvePoint> mean_curve(const std::vector<MethodRun>& runs, const std::string& method) {
    std::vector<CurvePoint> mean;
    int n = 0;
    for (const MethodRun& r : runs) {
        if (r.method != method) continue;
        if (mean.empty()) mean.assign(r.run.curve.size(), CurvePoint{});
        if (r.run.curve.size() != mean.size()) throw std::invalid_argument("mean_curve: ragged curves");
        for (std::size_t k = 0; k < mean.size(); ++k) {
            mean[k].step = r.run.curve[k].step;
            mean[k].loss += r.run.curve[k].loss;
            mean[k].occupancy_error += r.run.curve[k].occupancy_error;
        }
        ++n;
    }
    for (CurvePoint& p : mean) {
        p.loss /= n;
        p.occupancy_error /= n;
    }
    return mean;
}

long settle_step(const std::vector<CurvePoint>& curve, double band) {
    if (curve.empty()) throw std::invalid_argument("settle_step: empty curve");
    const double final_value = curve.back().occupancy_error;
    std::size_t first = curve.size() - 1;
    for (std::size_t k = curve.size(); k-- > 0;) {
        if (std::abs(curve[k].occupancy_error - final_value) > band * final_value) break;
        first = k;
    }
    return curve[first].step;
}

void SweepSpec::validate() const {
    base.validate();
    if (sizes.empty()) throw std::invalid_argument("sweep: no dataset sizes");
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] < 1) throw std::invalid_argument("sweep: dataset sizes must be positive");
        if (k > 0 && sizes[k] <= sizes[k - 1])
            throw std::invalid_argument("sweep: dataset sizes must be strictly increasing");
    }
}

SweepResult run_sample_efficiency_sweep(const SweepSpec& spec) {
    spec.validate();
    const OccupancySpec& base = spec.base;
    const TabularMdp mdp = base.env.build(base.gamma);
    const TabularPolicy policy = evaluated_policy(base, mdp);
    const OccupancyTable truth = exact_occupancy(mdp, policy);

    std::vector<TransitionDataset> datasets;
    std::vector<Job> jobs;
    std::vector<int> job_size;
    for (int size : spec.sizes) {
        for (std::uint64_t seed : base.seeds) {
            datasets.push_back(
                sample_transitions(mdp, policy, size, base.episode_len, dataset_seed(seed, size), "evaluated"));
            for (const auto& method : base.methods) {
                if (is_oracle(method)) continue;
                jobs.push_back({method, seed, datasets.size() - 1, method_config(base, method, seed),
                                parse_estimator_method(method)});
                job_size.push_back(size);
            }
        }
    }
    const std::vector<MethodRun> runs =
        run_estimator_jobs(jobs, datasets, mdp, policy, truth, base.schedule, base.workers);

    SweepResult out;
    std::map<std::pair<std::string, int>, std::vector<double>> finals;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const double err = occupancy_error(runs[i].run.estimate, truth);
        out.records.push_back({base.experiment, runs[i].method, runs[i].seed, job_size[i],
                               "final_occupancy_error", err});
        out.timings.push_back({base.experiment, runs[i].method, runs[i].seed, job_size[i], runs[i].seconds});
        finals[{runs[i].method, job_size[i]}].push_back(err);
    }
    for (const auto& [key, values] : finals) out.final_error[key] = summarize(values);
    return out;
}

// ---------------------------------------------------------------------------

void TrajectoryStyle::validate() const {
    if (name != "z_paths" && name != "skewed_paths")
        throw std::invalid_argument("unknown trajectory style '" + name + "'");
    if (!(p_short >= 0.0 && p_short <= 1.0)) throw std::invalid_argument("p_short must lie in [0, 1]");
    if (!(pause_prob >= 0.0 && pause_prob < 1.0)) throw std::invalid_argument("pause_prob must lie in [0, 1)");
    if (end_pause < 0) throw std::invalid_argument("end_pause must be >= 0");
}

namespace {

void check_script_grid(const GridLayout& layout) {
    if (layout.spec().width < 3 || layout.spec().height < 3)
        throw std::invalid_argument("trajectory script needs a grid of at least 3x3");
}

std::vector<int> walk(const GridLayout& layout, Cell from, const std::vector<Cell>& deltas) {
    std::vector<int> states{layout.state_of(from)};
    Cell c = from;
    for (const Cell& d : deltas) {
        c = {c.x + d.x, c.y + d.y};
        const int s = layout.state_of(c);
        if (s < 0) throw std::invalid_argument("scripted route crosses a wall");
        states.push_back(s);
    }
    if (states.front() < 0) throw std::invalid_argument("scripted route starts on a wall");
    return states;
}

GridAction action_between(const GridLayout& layout, int from, int to) {
    for (int a = 0; a < kNumGridActions; ++a) {
        if (layout.step(from, static_cast<GridAction>(a)) == to) return static_cast<GridAction>(a);
    }
    throw std::logic_error("no action connects the scripted states");
}

/// Staircase from `from` towards `to` that stays close to the straight line between them.
std::vector<int> staircase(const GridLayout& layout, Cell from, Cell to, Rng& rng) {
    const int w = layout.spec().width - 1;
    const int h = layout.spec().height - 1;
    const double tol = 1.0 / std::min(w, h) + 1e-9;
    const int dx = to.x > from.x ? 1 : -1;
    const int dy = to.y > from.y ? 1 : -1;
    auto deviation = [&](Cell c) {
        const double u = static_cast<double>(std::abs(c.x - from.x)) / w;
        const double v = static_cast<double>(std::abs(c.y - from.y)) / h;
        return std::abs(u - v);
    };
    std::vector<int> states{layout.state_of(from)};
    Cell c = from;
    while (!(c == to)) {
        std::vector<Cell> options;
        if (c.x != to.x) options.push_back({c.x + dx, c.y});
        if (c.y != to.y) options.push_back({c.x, c.y + dy});
        options.erase(std::remove_if(options.begin(), options.end(),
                                     [&](Cell o) { return layout.state_of(o) < 0; }),
                      options.end());
        if (options.empty()) break;
        std::vector<Cell> allowed;
        for (const Cell& o : options)
            if (deviation(o) <= tol) allowed.push_back(o);
        if (allowed.empty()) {
            allowed.push_back(*std::min_element(options.begin(), options.end(),
                                                [&](Cell a, Cell b) { return deviation(a) < deviation(b); }));
        }
        c = allowed[static_cast<std::size_t>(rng.index(static_cast<int>(allowed.size())))];
        states.push_back(layout.state_of(c));
    }
    return states;
}

}  // namespace

ScriptedRoute skewed_route(const GridLayout& layout) {
    check_script_grid(layout);
    const int w = layout.spec().width;
    const int h = layout.spec().height;
    ScriptedRoute r;
    const Cell start{0, 0};
    std::vector<Cell> short_moves(static_cast<std::size_t>(w - 1), Cell{1, 0});
    std::vector<Cell> long_moves;
    for (int k = 0; k < h - 1; ++k) long_moves.push_back({0, 1});
    for (int k = 0; k < w - 1; ++k) long_moves.push_back({1, 0});
    for (int k = 0; k < h - 1; ++k) long_moves.push_back({0, -1});
    r.short_route = walk(layout, start, short_moves);
    r.long_route = walk(layout, start, long_moves);
    r.start = r.short_route.front();
    r.goal = r.short_route.back();
    return r;
}

SynthesizedDataset synthesize_trajectory_dataset(const GridLayout& layout, const TabularMdp& mdp,
                                                 const TrajectoryStyle& style, int count,
                                                 std::uint64_t seed) {
    style.validate();
    check_script_grid(layout);
    if (count < 1) throw std::invalid_argument("synthesize_trajectory_dataset: count must be >= 1");
    if (mdp.num_states() != layout.num_states() || mdp.num_actions() != kNumGridActions)
        throw std::invalid_argument("synthesize_trajectory_dataset: MDP does not match the grid");
    const int w = layout.spec().width;
    const int h = layout.spec().height;
    const ScriptedRoute route = style.name == "skewed_paths" ? skewed_route(layout) : ScriptedRoute{};
    const int noop = static_cast<int>(GridAction::noop);

    Rng rng(seed);
    SynthesizedDataset out;
    std::vector<Episode> episodes;
    int remaining = count;
    while (remaining > 0) {
        std::vector<int> states;
        if (style.name == "z_paths") {
            if (rng.uniform() < 0.5)
                states = staircase(layout, {0, 0}, {w - 1, h - 1}, rng);
            else
                states = staircase(layout, {0, h - 1}, {w - 1, 0}, rng);
        } else {
            const bool is_short = rng.uniform() < style.p_short;
            states = is_short ? route.short_route : route.long_route;
            out.short_flags.push_back(is_short ? 1 : 0);
        }
        Episode ep;
        ep.states.push_back(states.front());
        auto emit = [&](int a, int next) {
            if (remaining == 0) return;
            ep.actions.push_back(a);
            ep.states.push_back(next);
            --remaining;
        };
        for (std::size_t k = 1; k < states.size(); ++k) {
            if (style.pause_prob > 0.0 && rng.uniform() < style.pause_prob) emit(noop, states[k - 1]);
            emit(static_cast<int>(action_between(layout, states[k - 1], states[k])), states[k]);
        }
        for (int k = 0; k < style.end_pause; ++k) emit(noop, states.back());
        if (ep.length() == 0) break;
        episodes.push_back(std::move(ep));
    }
    if (style.name == "skewed_paths") out.short_flags.resize(episodes.size());
    out.data = TransitionDataset::from_episodes(mdp.num_states(), mdp.num_actions(), std::move(episodes),
                                                style.name, seed);
    out.data.check_consistent(mdp);
    return out;
}

bool co_occur(const TransitionDataset& data, int start, int goal) {
    for (const Episode& ep : data.episodes) {
        const bool has_start = std::find(ep.states.begin(), ep.states.end(), start) != ep.states.end();
        if (has_start && std::find(ep.states.begin(), ep.states.end(), goal) != ep.states.end()) return true;
    }
    return false;
}

std::vector<std::pair<int, int>> stitching_pairs(const GridLayout& layout, const TransitionDataset& data) {
    const int ns = layout.num_states();
    const int w = layout.spec().width;
    const int h = layout.spec().height;
    std::vector<std::vector<int>> next(static_cast<std::size_t>(ns));
    std::vector<char> visited_any(static_cast<std::size_t>(ns), 0);
    for (const Transition& tr : data.records) {
        auto& out = next[static_cast<std::size_t>(tr.s)];
        if (std::find(out.begin(), out.end(), tr.s_next) == out.end()) out.push_back(tr.s_next);
        visited_any[static_cast<std::size_t>(tr.s)] = visited_any[static_cast<std::size_t>(tr.s_next)] = 1;
    }
    std::vector<std::vector<char>> together(static_cast<std::size_t>(ns), std::vector<char>(static_cast<std::size_t>(ns), 0));
    for (const Episode& ep : data.episodes) {
        std::vector<int> cells = ep.states;
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        for (int a : cells)
            for (int b : cells) together[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
    }
    auto edges_of = [&](int s) {
        const Cell c = layout.cell_of(s);
        return std::array<bool, 4>{c.y == 0, c.y == h - 1, c.x == 0, c.x == w - 1};
    };
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < ns; ++s) {
        if (!visited_any[static_cast<std::size_t>(s)]) continue;
        std::vector<char> reach(static_cast<std::size_t>(ns), 0);
        std::deque<int> queue{s};
        reach[static_cast<std::size_t>(s)] = 1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : next[static_cast<std::size_t>(u)]) {
                if (!reach[static_cast<std::size_t>(v)]) {
                    reach[static_cast<std::size_t>(v)] = 1;
                    queue.push_back(v);
                }
            }
        }
        const auto es = edges_of(s);
        for (int g = 0; g < ns; ++g) {
            if (g == s || !reach[static_cast<std::size_t>(g)] || together[static_cast<std::size_t>(s)][static_cast<std::size_t>(g)]) continue;
            const auto eg = edges_of(g);
            bool same_edge = false;
            for (int k = 0; k < 4; ++k) same_edge = same_edge || (es[static_cast<std::size_t>(k)] && eg[static_cast<std::size_t>(k)]);
            if (same_edge) pairs.emplace_back(s, g);
        }
    }
    return pairs;
}

void OfflineSpec::validate() const {
    check_seeds(seeds, "offline");
    if (mode != "stitching" && mode != "shortcut") throw std::invalid_argument("unknown offline mode '" + mode + "'");
    style.validate();
    if (dataset_size < 1) throw std::invalid_argument("offline: dataset_size must be >= 1");
    if (iterations < 0) throw std::invalid_argument("offline: iterations must be >= 0");
    for (const auto& m : methods) parse_gc_critic_kind(m);
    gcrl.validate();
}

OfflineResult run_offline_reasoning(const OfflineSpec& spec) {
    spec.validate();
    const GridLayout layout(spec.grid);
    const TabularMdp mdp = build_gridworld(spec.grid, spec.gamma);
    const int horizon = spec.gcrl.horizon > 0 ? spec.gcrl.horizon : 4 * (spec.grid.width + spec.grid.height);

    OfflineResult out;
    out.horizon = horizon;
    std::vector<SynthesizedDataset> datasets;
    std::vector<std::vector<std::pair<int, int>>> pairs;
    std::vector<double> short_fractions;
    for (std::uint64_t seed : spec.seeds) {
        datasets.push_back(synthesize_trajectory_dataset(layout, mdp, spec.style, spec.dataset_size,
                                                         mix_seed(seed, 0x0ff11e)));
        if (spec.mode == "stitching") {
            pairs.push_back(stitching_pairs(layout, datasets.back().data));
        } else {
            const ScriptedRoute route = skewed_route(layout);
            pairs.push_back({{route.start, route.goal}});
            const auto& flags = datasets.back().short_flags;
            short_fractions.push_back(flags.empty() ? 0.0
                                                    : static_cast<double>(std::accumulate(flags.begin(), flags.end(), 0)) /
                                                          static_cast<double>(flags.size()));
        }
    }
    out.eval_pairs = pairs.front();
    if (spec.mode == "shortcut") {
        const ScriptedRoute route = skewed_route(layout);
        out.bfs_shortest = layout.bfs_distances(route.start)[static_cast<std::size_t>(route.goal)];
        out.long_route_length = static_cast<int>(route.long_route.size()) - 1;
        out.short_fraction = summarize(short_fractions).mean;
    }

    struct OfflineJob {
        std::string method;
        std::size_t seed_index;
    };
    std::vector<OfflineJob> jobs;
    for (const auto& m : spec.methods)
        for (std::size_t k = 0; k < spec.seeds.size(); ++k) jobs.push_back({m, k});
    out.runs.resize(jobs.size());

    run_jobs(jobs.size(), spec.workers, [&](std::size_t i) {
        const OfflineJob& job = jobs[i];
        const std::uint64_t seed = spec.seeds[job.seed_index];
        const auto& eval_pairs = pairs[job.seed_index];
        GcrlConfig cfg = spec.gcrl;
        cfg.critic_kind = parse_gc_critic_kind(job.method);
        cfg.critic.seed = seed;
        cfg.eval_pairs = eval_pairs;
        cfg.horizon = horizon;
        cfg.online = false;
        const auto t0 = std::chrono::steady_clock::now();
        const GcrlResult trained = train_gcrl(mdp, datasets[job.seed_index].data, cfg, spec.iterations);
        const GoalReachingResult eval =
            evaluate_goal_reaching(mdp, trained.policy, eval_pairs, horizon, cfg.eval_episodes, mix_seed(seed, 404));
        OfflineRun run;
        run.method = job.method;
        run.seed = seed;
        run.success_rate = eval.success_rate;
        double total_length = 0.0;
        for (std::size_t k = 0; k < eval_pairs.size(); ++k) {
            const int len = eval.path_length[k];
            total_length += len >= 0 ? len : horizon;
            run.pairs.push_back({eval_pairs[k].first, eval_pairs[k].second, eval.pair_success[k], len, eval.paths[k]});
        }
        run.mean_path_length = eval_pairs.empty() ? 0.0 : total_length / static_cast<double>(eval_pairs.size());
        run.seconds = seconds_since(t0);
        out.runs[i] = std::move(run);
    });

    std::map<std::string, std::vector<double>> success, lengths;
    for (const OfflineRun& run : out.runs) {
        out.records.push_back({spec.experiment, run.method, run.seed, spec.iterations, "success_rate", run.success_rate});
        out.records.push_back(
            {spec.experiment, run.method, run.seed, spec.iterations, "mean_path_length", run.mean_path_length});
        out.timings.push_back({spec.experiment, run.method, run.seed, spec.iterations, run.seconds});
        success[run.method].push_back(run.success_rate);
        lengths[run.method].push_back(run.mean_path_length);
        std::ostringstream os;
        for (const OfflinePairResult& p : run.pairs) {
            os << "start " << p.start << " goal " << p.goal << " success " << p.success << " length "
               << p.path_length << '\n'
               << layout.render_path(p.path, p.start, p.goal) << '\n';
        }
        out.renders["paths_" + spec.mode + "_" + run.method + "_seed" + std::to_string(run.seed)] = os.str();
    }
    for (const auto& [m, v] : success) out.success[m] = summarize(v);
    for (const auto& [m, v] : lengths) out.path_length[m] = summarize(v);
    return out;
}

// ---------------------------------------------------------------------------

void GcrlSpec::validate() const {
    check_seeds(seeds, "gcrl");
    if (iterations < 0) throw std::invalid_argument("gcrl: iterations must be >= 0");
    if (dataset_size < 1 || episode_len < 1) throw std::invalid_argument("gcrl: invalid dataset size");
    gcrl.validate();
}

GcrlExperimentResult run_gcrl_experiment(const GcrlSpec& spec) {
    spec.validate();
    const TabularMdp mdp = spec.env.build(spec.gamma);
    const TabularPolicy uniform = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    const std::optional<GridLayout> layout = spec.env.layout();
    const int horizon = spec.gcrl.horizon > 0 ? spec.gcrl.horizon
                        : layout ? 4 * (spec.env.grid.width + spec.env.grid.height)
                                 : 4 * mdp.num_states();
    std::vector<std::pair<int, int>> pairs = spec.gcrl.eval_pairs;
    if (pairs.empty()) {
        for (int s = 0; s < mdp.num_states(); ++s)
            for (int g = 0; g < mdp.num_states(); ++g) pairs.emplace_back(s, g);
    }
    GcrlExperimentResult out;
    out.runs.resize(spec.seeds.size());
    run_jobs(spec.seeds.size(), spec.workers, [&](std::size_t i) {
        const std::uint64_t seed = spec.seeds[i];
        const auto t0 = std::chrono::steady_clock::now();
        GcrlConfig cfg = spec.gcrl;
        cfg.critic.seed = seed;
        cfg.eval_pairs = pairs;
        cfg.horizon = horizon;
        TransitionDataset data;
        if (!cfg.online)
            data = sample_transitions(mdp, uniform, spec.dataset_size, spec.episode_len,
                                      dataset_seed(seed, spec.dataset_size), "uniform");
        GcrlRun run;
        run.seed = seed;
        run.result = train_gcrl(mdp, data, cfg, spec.iterations);
        run.eval = evaluate_goal_reaching(mdp, run.result.policy, pairs, horizon, cfg.eval_episodes,
                                          mix_seed(seed, 404));
        run.pairs = pairs;
        run.seconds = seconds_since(t0);
        out.runs[i] = std::move(run);
    });
    std::vector<double> success;
    for (const GcrlRun& run : out.runs) {
        const std::string method = to_string(spec.gcrl.critic_kind);
        for (const GcrlMetric& m : run.result.metrics) {
            out.records.push_back({spec.experiment, method, run.seed, m.iteration, "critic_loss", m.critic_loss});
            out.records.push_back({spec.experiment, method, run.seed, m.iteration, "actor_loss", m.actor_loss});
            out.records.push_back({spec.experiment, method, run.seed, m.iteration, "success_rate", m.success_rate});
        }
        out.records.push_back({spec.experiment, method, run.seed, spec.iterations, "final_success_rate",
                               run.eval.success_rate});
        out.timings.push_back({spec.experiment, method, run.seed, spec.iterations, run.seconds});
        success.push_back(run.eval.success_rate);
        if (layout) {
            std::ostringstream os;
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                os << "start " << pairs[k].first << " goal " << pairs[k].second << " success "
                   << run.eval.pair_success[k] << '\n'
                   << layout->render_path(run.eval.paths[k], pairs[k].first, pairs[k].second) << '\n';
            }
            out.renders["paths_gcrl_seed" + std::to_string(run.seed)] = os.str();
        }
    }
    out.success = summarize(success);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<AblationVariant> ablation_corners() {
    using LF = LossFamily;
    using WS = WeightScheme;
    using NS = NegativesScheme;
    return {
        {"td_infonce", EstimatorMethod::td_infonce, LF::categorical, WS::softmax_normalized, NS::n_squared},
        {"td_infonce_exp_weights", EstimatorMethod::td_infonce, LF::categorical, WS::exp_unnormalized, NS::n_squared},
        {"td_infonce_n_negatives", EstimatorMethod::td_infonce, LF::categorical, WS::softmax_normalized, NS::n},
        {"c_learning", EstimatorMethod::c_learning, LF::binary, WS::exp_unnormalized, NS::n},
    };
}

AblationResult run_ablation(const OccupancySpec& spec) {
    spec.validate();
    const TabularMdp mdp = spec.env.build(spec.gamma);
    const TabularPolicy policy = evaluated_policy(spec, mdp);
    const OccupancyTable truth = exact_occupancy(mdp, policy);
    std::vector<TransitionDataset> datasets;
    for (std::uint64_t seed : spec.seeds)
        datasets.push_back(sample_transitions(mdp, policy, spec.dataset_size, spec.episode_len,
                                              dataset_seed(seed, spec.dataset_size), "evaluated"));
    const auto corners = ablation_corners();
    std::vector<Job> jobs;
    for (const AblationVariant& v : corners) {
        for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
            EstimatorConfig cfg = method_config(spec, to_string(v.method), spec.seeds[k]);
            cfg.loss_family = v.loss_family;
            cfg.weight_scheme = v.weight_scheme;
            cfg.negatives_scheme = v.negatives_scheme;
            jobs.push_back({v.name, spec.seeds[k], k, cfg, v.method});
        }
    }
    AblationResult out;
    out.runs = run_estimator_jobs(jobs, datasets, mdp, policy, truth, spec.schedule, spec.workers);
    std::map<std::string, std::vector<double>> finals;
    for (const MethodRun& r : out.runs) {
        for (const CurvePoint& p : r.run.curve)
            out.records.push_back({spec.experiment, r.method, r.seed, p.step, "occupancy_error", p.occupancy_error});
        out.timings.push_back({spec.experiment, r.method, r.seed, spec.schedule.steps, r.seconds});
        finals[r.method].push_back(occupancy_error(r.run.estimate, truth));
    }
    std::vector<double> categorical, binary;
    for (const AblationVariant& v : corners) {
        const MethodSummary s = summarize(finals[v.name]);
        out.final_error[v.name] = s;
        (v.loss_family == LossFamily::categorical ? categorical : binary).push_back(s.mean);
    }
    out.categorical_mean = summarize(categorical).mean;
    out.binary_mean = summarize(binary).mean;
    const double base = out.final_error["td_infonce"].mean;
    out.weight_effect = std::abs(out.final_error["td_infonce_exp_weights"].mean - base);
    out.negatives_effect = std::abs(out.final_error["td_infonce_n_negatives"].mean - base);
    return out;
}

// ---------------------------------------------------------------------------

Eigen::RowVectorXd slerp(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double alpha) {
    if (x.size() != y.size()) throw std::invalid_argument("slerp: dimension mismatch");
    const double eta = std::acos(std::clamp(x.dot(y), -1.0, 1.0));
    const double s = std::sin(eta);
    if (s < 1e-12) return x;
    return (std::sin((1.0 - alpha) * eta) / s) * x + (std::sin(alpha * eta) / s) * y;
}

Eigen::RowVectorXd softmax_feature(const Eigen::RowVectorXd& v, const Matrix& anchors) {
    const Eigen::RowVectorXd logits = v * anchors.transpose();
    Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

InterpolationResult interpolate_representations(const GcLayout& layout, const RepresentationPair& reps,
                                                int s0, int goal, int noop_action, int anchor_count,
                                                const std::vector<double>& alphas, std::uint64_t seed) {
    if (layout.kind != GcCriticKind::td_infonce)
        throw std::invalid_argument("interpolate_representations: needs goal-conditioned anchors");
    const int ns = layout.num_states;
    if (s0 < 0 || s0 >= ns || goal < 0 || goal >= ns || noop_action < 0 || noop_action >= layout.num_actions)
        throw std::invalid_argument("interpolate_representations: index out of range");
    if (anchor_count < 1) throw std::invalid_argument("interpolate_representations: anchor_count must be >= 1");
    Matrix v(ns, reps.dim());
    for (int s = 0; s < ns; ++s) {
        v.row(s) = reps.phi.row(layout.anchor_row(s, noop_action, goal));
        const double norm = v.row(s).norm();
        if (norm > 0.0) v.row(s) /= norm;
    }
    Rng rng(seed);
    Matrix anchors(anchor_count, reps.dim());
    for (int i = 0; i < anchor_count; ++i) anchors.row(i) = v.row(rng.index(ns));
    Matrix feats(ns, anchor_count);
    for (int s = 0; s < ns; ++s) feats.row(s) = softmax_feature(v.row(s), anchors);

    InterpolationResult out;
    out.alphas = alphas;
    for (double alpha : alphas) {
        const Eigen::RowVectorXd blend = slerp(v.row(s0), v.row(goal), alpha);
        Eigen::Index best = 0;
        (v * blend.transpose()).maxCoeff(&best);
        out.parametric.push_back(static_cast<int>(best));

        const Eigen::RowVectorXd fblend = alpha * feats.row(s0) + (1.0 - alpha) * feats.row(goal);
        (feats.rowwise() - fblend).rowwise().squaredNorm().minCoeff(&best);
        out.nonparametric.push_back(static_cast<int>(best));
    }
    return out;
}

bool is_monotone(const std::vector<int>& values) {
    bool up = true, down = true;
    for (std::size_t k = 1; k < values.size(); ++k) {
        up = up && values[k] >= values[k - 1];
        down = down && values[k] <= values[k - 1];
    }
    return up || down;
}

void InterpSpec::validate() const {
    check_seeds(seeds, "interp");
    if (alphas.empty()) throw std::invalid_argument("interp: empty alpha grid");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("interp: alphas must lie in [0, 1]");
    if (anchor_count < 1) throw std::invalid_argument("interp: anchor_count must be >= 1");
    gcrl.validate();
}

InterpResult run_interpolation(const InterpSpec& spec) {
    spec.validate();
    const GridLayout layout(spec.grid);
    const TabularMdp mdp = build_gridworld(spec.grid, spec.gamma);
    const TabularPolicy uniform = TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    std::vector<std::pair<int, int>> pairs = spec.pairs;
    if (pairs.empty()) {
        const int last = layout.num_states() - 1;
        pairs = {{0, last}, {last, 0}};
    }
    InterpResult out;
    for (std::uint64_t seed : spec.seeds) {
        const TransitionDataset data =
            sample_transitions(mdp, uniform, spec.dataset_size, spec.episode_len, dataset_seed(seed, spec.dataset_size));
        GcrlConfig cfg = spec.gcrl;
        cfg.critic_kind = GcCriticKind::td_infonce;
        cfg.critic.seed = seed;
        cfg.eval_pairs = pairs;
        const GcrlResult trained = train_gcrl(mdp, data, cfg, spec.iterations);
        for (const auto& [s0, g] : pairs) {
            InterpRun run;
            run.seed = seed;
            run.s0 = s0;
            run.goal = g;
            run.result = interpolate_representations(trained.layout, trained.reps.online, s0, g,
                                                     static_cast<int>(GridAction::noop), spec.anchor_count,
                                                     spec.alphas, mix_seed(seed, 505));
            const std::vector<int> dist = layout.bfs_distances(s0);
            for (int s : run.result.parametric) run.parametric_distance.push_back(dist[static_cast<std::size_t>(s)]);
            for (int s : run.result.nonparametric) run.nonparametric_distance.push_back(dist[static_cast<std::size_t>(s)]);
            run.parametric_monotone = is_monotone(run.parametric_distance);
            run.nonparametric_monotone = is_monotone(run.nonparametric_distance);
            for (std::size_t k = 0; k < spec.alphas.size(); ++k) {
                const long x = std::lround(spec.alphas[k] * 1000);
                const std::string tag = std::to_string(s0) + "_" + std::to_string(g);
                out.records.push_back({spec.experiment, "parametric_" + tag, seed, x, "retrieved_state",
                                       static_cast<double>(run.result.parametric[k])});
                out.records.push_back({spec.experiment, "nonparametric_" + tag, seed, x, "retrieved_state",
                                       static_cast<double>(run.result.nonparametric[k])});
            }
            out.renders["paths_interp_parametric_" + std::to_string(s0) + "_" + std::to_string(g) + "_seed" +
                        std::to_string(seed)] = layout.render_path(run.result.parametric, s0, g);
            out.renders["paths_interp_nonparametric_" + std::to_string(s0) + "_" + std::to_string(g) + "_seed" +
                        std::to_string(seed)] = layout.render_path(run.result.nonparametric, s0, g);
            out.runs.push_back(std::move(run));
        }
    }
    return out;
}

}  // namespace occlab
