#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "occlab/estimators.hpp"
#include "occlab/gcrl.hpp"

namespace occlab {

/// Either a gridworld or an explicitly listed MDP.
struct EnvSpec {
    std::string kind = "gridworld";
    GridworldSpec grid;
    /// Explicit MDPs only: (|S||A|) × |S| transition rows and p0.
    int num_states = 0;
    int num_actions = 0;
    Matrix transition;
    Vector initial;

    TabularMdp build(double gamma) const;
    /// Set for gridworlds only.
    std::optional<GridLayout> layout() const;
};

/// One metrics row: experiment, method, seed, x (step or dataset size), metric name, value.
struct MetricsRecord {
    std::string experiment;
    std::string method;
    std::uint64_t seed = 0;
    long x = 0;
    std::string metric;
    double value = 0.0;
};

struct TimingRecord {
    std::string experiment;
    std::string method;
    std::uint64_t seed = 0;
    long x = 0;
    double seconds = 0.0;
};

struct MethodSummary {
    double mean = 0.0;
    double sd = 0.0;
    int count = 0;
};

/// Mean and sample standard deviation (0 for a single value).
MethodSummary summarize(const std::vector<double>& values);

/**
 * Runs independent jobs on a bounded pool. Jobs must not share mutable state;
 * results are stored by index so the output order never depends on scheduling.
 */
void run_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

// ---------------------------------------------------------------------------
// Occupancy benchmark and sample-efficiency sweep

inline const char* kExactOracle = "exact_bellman_oracle";

struct OccupancySpec {
    std::string experiment = "occupancy";
    EnvSpec env;
    double gamma = 0.9;
    int dataset_size = 100000;
    int episode_len = 100;
    std::vector<std::string> methods{"td_infonce", "mc_infonce", "c_learning",
                                     "successor_representation", kExactOracle};
    EstimatorConfig estimator;
    /// Per-method learning-rate overrides (method id → learning rate).
    std::map<std::string, double> learning_rates;
    TrainSchedule schedule;
    /// Evaluated policy as an |S| × |A| table; empty selects the uniform policy.
    Matrix policy;
    int oracle_iterations = 200;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int workers = 1;

    void validate() const;
};

TabularPolicy evaluated_policy(const OccupancySpec& spec, const TabularMdp& mdp);

/// The dataset seed depends only on (seed, size) so that methods share data.
std::uint64_t dataset_seed(std::uint64_t seed, int size);

/// Estimator config for a method, with its learning-rate override applied.
EstimatorConfig method_config(const OccupancySpec& spec, const std::string& method, std::uint64_t seed);

struct MethodRun {
    std::string method;
    std::uint64_t seed = 0;
    EstimatorRun run;
    double seconds = 0.0;
};

struct BenchmarkResult {
    std::vector<MetricsRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<MethodRun> runs;
    /// Oracle error after k = 1..oracle_iterations applications.
    std::vector<double> oracle_curve;
    std::map<std::string, MethodSummary> final_error;
};

/// Exact known-model iteration of the InfoNCE Bellman operator from the uniform classifier.
std::vector<double> exact_bellman_oracle_curve(const TabularMdp& mdp, const TabularPolicy& policy,
                                               int iterations);

BenchmarkResult run_occupancy_benchmark(const OccupancySpec& spec);

/**
 * A method's curve "settles" at the first evaluation step after which every
 * point stays within ±`band` (relative) of the final value. Curves are the
 * seed-mean occupancy error.
 */
long settle_step(const std::vector<CurvePoint>& mean_curve, double band = 0.1);
std::vector<CurvePoint> mean_curve(const std::vector<MethodRun>& runs, const std::string& method);

struct SweepSpec {
    OccupancySpec base;
    std::vector<int> sizes{1000, 10000, 100000};

    void validate() const;
};

struct SweepResult {
    std::vector<MetricsRecord> records;
    std::vector<TimingRecord> timings;
    /// (method, size) → final error summary.
    std::map<std::pair<std::string, int>, MethodSummary> final_error;
};

SweepResult run_sample_efficiency_sweep(const SweepSpec& spec);

// ---------------------------------------------------------------------------
// Offline reasoning

struct TrajectoryStyle {
    std::string name = "z_paths";  ///< z_paths or skewed_paths
    double p_short = 0.05;
    /// Probability of inserting a no-op before each scripted move.
    double pause_prob = 0.1;
    /// No-op steps appended at the end of every trajectory.
    int end_pause = 5;

    void validate() const;
};

struct ScriptedRoute {
    int start = 0;
    int goal = 0;
    std::vector<int> short_route;
    std::vector<int> long_route;
};

/// Start, goal and both routes (as state sequences) of the skewed-path script.
ScriptedRoute skewed_route(const GridLayout& layout);

struct SynthesizedDataset {
    TransitionDataset data;
    /// Per episode: 1 for the short route, 0 for the long route (skewed_paths only).
    std::vector<int> short_flags;
};

SynthesizedDataset synthesize_trajectory_dataset(const GridLayout& layout, const TabularMdp& mdp,
                                                 const TrajectoryStyle& style, int count,
                                                 std::uint64_t seed);

/// True if some episode visits `start` and `goal`.
bool co_occur(const TransitionDataset& data, int start, int goal);

/**
 * Held-out evaluation pairs for stitching: distinct cells on the same grid edge
 * that never co-occur in a training episode, with the goal reachable from the
 * start along observed transitions.
 */
std::vector<std::pair<int, int>> stitching_pairs(const GridLayout& layout, const TransitionDataset& data);

struct OfflineSpec {
    std::string experiment = "stitching";
    std::string mode = "stitching";  ///< stitching or shortcut
    GridworldSpec grid;
    double gamma = 0.9;
    TrajectoryStyle style;
    int dataset_size = 20000;
    long iterations = 50000;
    GcrlConfig gcrl;
    std::vector<std::string> methods{"td_infonce", "mc_infonce"};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int workers = 1;

    void validate() const;
};

struct OfflinePairResult {
    int start = 0;
    int goal = 0;
    double success = 0.0;
    int path_length = -1;
    std::vector<int> path;
};

struct OfflineRun {
    std::string method;
    std::uint64_t seed = 0;
    double success_rate = 0.0;
    /// Mean greedy path length where a failed rollout counts as the horizon.
    double mean_path_length = 0.0;
    std::vector<OfflinePairResult> pairs;
    double seconds = 0.0;
};

struct OfflineResult {
    std::vector<MetricsRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<OfflineRun> runs;
    std::vector<std::pair<int, int>> eval_pairs;
    int horizon = 0;
    int bfs_shortest = 0;       ///< shortcut mode only
    int long_route_length = 0;  ///< shortcut mode only
    double short_fraction = 0.0;
    std::map<std::string, MethodSummary> success, path_length;
    /// Text renderings keyed by file stem.
    std::map<std::string, std::string> renders;
};

OfflineResult run_offline_reasoning(const OfflineSpec& spec);

// ---------------------------------------------------------------------------
// Goal-conditioned training on a generic environment

struct GcrlSpec {
    std::string experiment = "gcrl";
    EnvSpec env;
    double gamma = 0.9;
    /// Offline dataset of uniform-random rollouts; ignored in online mode.
    int dataset_size = 10000;
    int episode_len = 100;
    long iterations = 2000;
    GcrlConfig gcrl;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int workers = 1;

    void validate() const;
};

struct GcrlRun {
    std::uint64_t seed = 0;
    GcrlResult result;
    GoalReachingResult eval;
    std::vector<std::pair<int, int>> pairs;
    double seconds = 0.0;
};

struct GcrlExperimentResult {
    std::vector<MetricsRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<GcrlRun> runs;
    MethodSummary success;
    std::map<std::string, std::string> renders;
};

GcrlExperimentResult run_gcrl_experiment(const GcrlSpec& spec);

// ---------------------------------------------------------------------------
// Ablation

struct AblationVariant {
    std::string name;
    EstimatorMethod method;
    LossFamily loss_family;
    WeightScheme weight_scheme;
    NegativesScheme negatives_scheme;
};

/// TD InfoNCE, TD InfoNCE with exp weights, TD InfoNCE with N negatives, C-learning.
std::vector<AblationVariant> ablation_corners();

struct AblationResult {
    std::vector<MetricsRecord> records;
    std::vector<TimingRecord> timings;
    std::vector<MethodRun> runs;
    std::map<std::string, MethodSummary> final_error;
    double categorical_mean = 0.0;
    double binary_mean = 0.0;
    double weight_effect = 0.0;
    double negatives_effect = 0.0;
};

AblationResult run_ablation(const OccupancySpec& spec);

// ---------------------------------------------------------------------------
// Representation interpolation

/// Spherical interpolation of unit vectors; returns x when the angle is zero.
Eigen::RowVectorXd slerp(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double alpha);

/// softmax_i(⟨v, anchor_i⟩)
Eigen::RowVectorXd softmax_feature(const Eigen::RowVectorXd& v, const Matrix& anchors);

struct InterpolationResult {
    std::vector<double> alphas;
    std::vector<int> parametric;
    std::vector<int> nonparametric;
};

/**
 * Retrieves states along interpolations between φ(s0, a_noop, g) and
 * φ(g, a_noop, g). The parametric branch slerps from s0 (α = 0) to g (α = 1)
 * and retrieves by cosine similarity; the nonparametric branch blends softmax
 * features as α · feat(s0) + (1 - α) · feat(g) and retrieves by L2 distance.
 */
InterpolationResult interpolate_representations(const GcLayout& layout, const RepresentationPair& reps,
                                                int s0, int goal, int noop_action,
                                                int anchor_count, const std::vector<double>& alphas,
                                                std::uint64_t seed);

struct InterpSpec {
    std::string experiment = "interp";
    GridworldSpec grid;
    double gamma = 0.9;
    int dataset_size = 20000;
    int episode_len = 100;
    long iterations = 20000;
    GcrlConfig gcrl;
    std::vector<std::pair<int, int>> pairs;
    std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
    int anchor_count = 16;
    std::vector<std::uint64_t> seeds{0};

    void validate() const;
};

struct InterpRun {
    std::uint64_t seed = 0;
    int s0 = 0;
    int goal = 0;
    InterpolationResult result;
    std::vector<int> parametric_distance;
    std::vector<int> nonparametric_distance;
    bool parametric_monotone = false;
    bool nonparametric_monotone = false;
};

struct InterpResult {
    std::vector<MetricsRecord> records;
    std::vector<InterpRun> runs;
    std::map<std::string, std::string> renders;
};

/// Monotone (non-decreasing or non-increasing) sequence test.
bool is_monotone(const std::vector<int>& values);

InterpResult run_interpolation(const InterpSpec& spec);

}  // namespace occlab
