#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "occlab/estimators.hpp"

namespace occlab {

/// One hindsight-relabeled batch. Row i is (s, a, s', g, s_{t+}) plus sampled policy actions.
struct GcBatch {
    std::vector<int> s;
    std::vector<int> a;
    std::vector<int> s_next;
    std::vector<int> goal;
    std::vector<int> future;
    /// a ~ π(·|s, g)
    std::vector<int> policy_action;
    /// a' ~ π(·|s', g)
    std::vector<int> next_action;

    int size() const { return static_cast<int>(s.size()); }
};

/// Softmax policy π(a|s,g) with logits stored in row s·|S| + g.
struct GcPolicyParams {
    int num_states = 0;
    int num_actions = 0;
    Matrix logits;

    static GcPolicyParams uniform(int num_states, int num_actions);
    int row(int s, int g) const { return s * num_states + g; }
    Eigen::RowVectorXd probs(int s, int g) const;
    /// Lowest-index argmax of the logits.
    int greedy_action(int s, int g) const;
    /// Full (s, g) × a probability table.
    Matrix prob_table() const;
};

/**
 * Anchor layout of a goal-conditioned critic. The TD critic uses φ(s, a, g)
 * rows (s·|A| + a)·|S| + g; the Monte Carlo critic ignores the goal and uses
 * φ(s, a) rows s·|A| + a.
 */
enum class GcCriticKind { td_infonce, mc_infonce };
const char* to_string(GcCriticKind k);
GcCriticKind parse_gc_critic_kind(const std::string& s);

struct GcLayout {
    int num_states = 0;
    int num_actions = 0;
    GcCriticKind kind = GcCriticKind::td_infonce;

    int num_anchor_rows() const {
        return kind == GcCriticKind::td_infonce ? num_states * num_actions * num_states
                                                : num_states * num_actions;
    }
    int anchor_row(int s, int a, int g) const {
        return kind == GcCriticKind::td_infonce ? (s * num_actions + a) * num_states + g
                                                : s * num_actions + a;
    }
};

/**
 * Samples a batch. With probability `goal_future_prob` the goal is the state
 * Δ ~ Geometric(1-γ) steps later in the same episode (resampled past the end);
 * otherwise it is drawn from the dataset marginal. s_{t+} is always drawn from
 * the marginal. Policy actions are sampled from `policy`.
 */
GcBatch sample_gc_batch(const TransitionDataset& data, double gamma, int n, Rng& rng,
                        const GcPolicyParams& policy, double goal_future_prob = 1.0);
GcBatch sample_gc_batch(const TransitionDataset& data, double gamma, int n, std::uint64_t seed,
                        const GcPolicyParams& policy, double goal_future_prob = 1.0);

/// TD InfoNCE batch for the goal-conditioned critic (goal index folded into the anchor row).
TdBatch gc_td_batch(const GcLayout& layout, const GcBatch& batch);
/// MC batch whose positives are the hindsight goals.
McBatch gc_mc_batch(const GcLayout& layout, const GcBatch& batch);

/// Loss and gradient of the critic on one batch; dispatches on the layout kind.
LossAndGrad gc_critic_loss_and_grad(const GcLayout& layout, const OnlineAndTarget& reps,
                                    const GcBatch& batch, double gamma,
                                    const EstimatorConfig& config);

/// One SGD step plus the EMA target update. Returns the pre-step loss.
double gc_critic_step(const GcLayout& layout, OnlineAndTarget& reps, const GcBatch& batch,
                      double gamma, const EstimatorConfig& config);

struct ActorLossAndGrad {
    double loss = 0.0;
    /// Gradient with respect to the policy logits, dense over all rows.
    SparseRows grad;
};

/**
 * loss = -(1/N) Σ_i Σ_a π(a|s_i,g_i) log softmax_j(f(s_i, a, g_i, g_j))_{j=i},
 * evaluated exactly over actions with the critic held fixed.
 */
ActorLossAndGrad gc_actor_loss_and_grad(const GcPolicyParams& policy, const GcLayout& layout,
                                        const RepresentationPair& reps, const GcBatch& batch);

/// One SGD step on the policy logits. Returns the pre-step loss.
double gc_actor_step(GcPolicyParams& policy, const GcLayout& layout,
                     const RepresentationPair& reps, const GcBatch& batch, double learning_rate);

// ---------------------------------------------------------------------------

struct GoalReachingResult {
    double success_rate = 0.0;
    std::vector<double> pair_success;
    /// Steps until the goal on the first rollout of each pair; -1 when it was not reached.
    std::vector<int> path_length;
    /// State sequence of the first rollout of each pair.
    std::vector<std::vector<int>> paths;
};

/**
 * Greedy rollouts of `policy`. A rollout succeeds when the agent state equals
 * the goal at any step ≤ horizon (step 0 included).
 */
GoalReachingResult evaluate_goal_reaching(const TabularMdp& mdp, const GcPolicyParams& policy,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          int horizon, int episodes, std::uint64_t seed);

struct GcrlConfig {
    EstimatorConfig critic;
    GcCriticKind critic_kind = GcCriticKind::td_infonce;
    double actor_learning_rate = 1.0;
    double goal_future_prob = 1.0;
    long eval_interval = 100;
    /// Online collection with an ε-greedy version of the current policy.
    bool online = false;
    double epsilon = 0.2;
    int episode_len = 50;
    int warmup_episodes = 10;
    /// Iterations between collected episodes in online mode.
    int collect_every = 10;
    std::vector<std::pair<int, int>> eval_pairs;
    /// 0 selects 4 · |S|.
    int horizon = 0;
    int eval_episodes = 1;

    void validate() const;
};

GcrlConfig default_gcrl_config();

struct GcrlMetric {
    long iteration = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double success_rate = 0.0;
};

struct GcrlResult {
    GcLayout layout;
    OnlineAndTarget reps;
    GcPolicyParams policy;
    std::vector<GcrlMetric> metrics;
    TransitionDataset dataset;
};

/**
 * Alternates critic and actor steps for `iterations` iterations. `dataset`
 * must be non-empty in offline mode; in online mode it seeds the buffer and may be empty.
 */
GcrlResult train_gcrl(const TabularMdp& mdp, const TransitionDataset& dataset,
                      const GcrlConfig& config, long iterations);

/// Goal-conditioned occupancy rows p̂(·|s, a, g) for the TD critic, row (s·|A|+a)·|S|+g.
Matrix gc_occupancy_from_critic(const GcLayout& layout, const RepresentationPair& reps,
                                const Vector& marginal);

/// CSV with header `s,g,a,prob`.
std::string policy_csv(const GcPolicyParams& policy);
std::string gcrl_metrics_csv(const std::vector<GcrlMetric>& metrics);

}  // namespace occlab
