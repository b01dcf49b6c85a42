#include "occlab/gcrl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace occlab {

GcPolicyParams GcPolicyParams::uniform(int num_states, int num_actions) {
    if (num_states < 1 || num_actions < 1) throw std::invalid_argument("GcPolicyParams: empty shape");
    return {num_states, num_actions, Matrix::Zero(num_states * num_states, num_actions)};
}

Eigen::RowVectorXd GcPolicyParams::probs(int s, int g) const {
    const auto row_logits = logits.row(row(s, g));
    Eigen::RowVectorXd p = (row_logits.array() - row_logits.maxCoeff()).exp();
    return p / p.sum();
}

int GcPolicyParams::greedy_action(int s, int g) const {
    Eigen::Index best = 0;
    logits.row(row(s, g)).maxCoeff(&best);
    return static_cast<int>(best);
}

Matrix GcPolicyParams::prob_table() const {
    Matrix out(logits.rows(), logits.cols());
    for (int s = 0; s < num_states; ++s)
        for (int g = 0; g < num_states; ++g) out.row(row(s, g)) = probs(s, g);
    return out;
}

const char* to_string(GcCriticKind k) { return k == GcCriticKind::td_infonce ? "td_infonce" : "mc_infonce"; }

GcCriticKind parse_gc_critic_kind(const std::string& s) {
    if (s == "td_infonce") return GcCriticKind::td_infonce;
    if (s == "mc_infonce") return GcCriticKind::mc_infonce;
    throw std::invalid_argument("unknown critic kind '" + s + "'");
}

// ---------------------------------------------------------------------------

GcBatch sample_gc_batch(const TransitionDataset& data, double gamma, int n, Rng& rng,
                        const GcPolicyParams& policy, double goal_future_prob) {
    if (data.records.empty()) throw std::invalid_argument("sample_gc_batch: empty dataset");
    for (const Episode& ep : data.episodes)
        if (ep.length() < 1) throw std::invalid_argument("sample_gc_batch: episodes shorter than 2 states");
    if (policy.num_states != data.num_states || policy.num_actions != data.num_actions)
        throw std::invalid_argument("sample_gc_batch: policy shape does not match the dataset");
    const int size = static_cast<int>(data.records.size());
    GcBatch b;
    for (int i = 0; i < n; ++i) {
        const int k = rng.index(size);
        const Transition& tr = data.records[static_cast<std::size_t>(k)];
        int goal = 0;
        if (goal_future_prob >= 1.0 || rng.uniform() < goal_future_prob) {
            const RecordPosition& pos = data.positions[static_cast<std::size_t>(k)];
            const Episode& ep = data.episodes[static_cast<std::size_t>(pos.episode)];
            int offset = rng.geometric_offset(gamma);
            while (pos.t + offset > ep.length()) offset = rng.geometric_offset(gamma);
            goal = ep.states[static_cast<std::size_t>(pos.t + offset)];
        } else {
            goal = data.records[static_cast<std::size_t>(rng.index(size))].s_next;
        }
        b.s.push_back(tr.s);
        b.a.push_back(tr.a);
        b.s_next.push_back(tr.s_next);
        b.goal.push_back(goal);
        b.future.push_back(data.records[static_cast<std::size_t>(rng.index(size))].s_next);
        b.policy_action.push_back(rng.categorical(policy.probs(tr.s, goal)));
        b.next_action.push_back(rng.categorical(policy.probs(tr.s_next, goal)));
    }
    return b;
}

GcBatch sample_gc_batch(const TransitionDataset& data, double gamma, int n, std::uint64_t seed,
                        const GcPolicyParams& policy, double goal_future_prob) {
    Rng rng(seed);
    return sample_gc_batch(data, gamma, n, rng, policy, goal_future_prob);
}

TdBatch gc_td_batch(const GcLayout& layout, const GcBatch& batch) {
    TdBatch td;
    for (int i = 0; i < batch.size(); ++i) {
        const int g = batch.goal[static_cast<std::size_t>(i)];
        td.anchor.push_back(layout.anchor_row(batch.s[static_cast<std::size_t>(i)], batch.a[static_cast<std::size_t>(i)], g));
        td.next_state.push_back(batch.s_next[static_cast<std::size_t>(i)]);
        td.next_anchor.push_back(
            layout.anchor_row(batch.s_next[static_cast<std::size_t>(i)], batch.next_action[static_cast<std::size_t>(i)], g));
        td.future.push_back(batch.future[static_cast<std::size_t>(i)]);
    }
    return td;
}

McBatch gc_mc_batch(const GcLayout& layout, const GcBatch& batch) {
    McBatch mc;
    for (int i = 0; i < batch.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        mc.anchor.push_back(layout.anchor_row(batch.s[k], batch.a[k], batch.goal[k]));
        mc.future.push_back(batch.goal[k]);
    }
    return mc;
}

LossAndGrad gc_critic_loss_and_grad(const GcLayout& layout, const OnlineAndTarget& reps,
                                    const GcBatch& batch, double gamma,
                                    const EstimatorConfig& config) {
    if (layout.kind == GcCriticKind::td_infonce)
        return td_infonce_loss_and_grad(reps.online, reps.target, gc_td_batch(layout, batch), gamma, config);
    return mc_infonce_loss_and_grad(reps.online, gc_mc_batch(layout, batch), config);
}

double gc_critic_step(const GcLayout& layout, OnlineAndTarget& reps, const GcBatch& batch,
                      double gamma, const EstimatorConfig& config) {
    const LossAndGrad lg = gc_critic_loss_and_grad(layout, reps, batch, gamma, config);
    sgd_step(reps.online, lg.grad, config.learning_rate);
    ema_update(reps.target, reps.online, config.ema_tau);
    return lg.loss;
}

ActorLossAndGrad gc_actor_loss_and_grad(const GcPolicyParams& policy, const GcLayout& layout,
                                        const RepresentationPair& reps, const GcBatch& batch) {
    const int n = batch.size();
    if (n < 1) throw std::invalid_argument("gc_actor_loss_and_grad: empty batch");
    const int na = policy.num_actions;
    const double sc = reps.critic_scale();
    Matrix goal_psi(n, reps.dim());
    for (int j = 0; j < n; ++j) goal_psi.row(j) = reps.psi.row(batch.goal[static_cast<std::size_t>(j)]);

    std::vector<int> rows;
    Matrix per_sample(n, na);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const int s = batch.s[static_cast<std::size_t>(i)];
        const int g = batch.goal[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd pi = policy.probs(s, g);
        Eigen::RowVectorXd ls(na);
        for (int a = 0; a < na; ++a) {
            const Eigen::RowVectorXd logits = sc * reps.phi.row(layout.anchor_row(s, a, g)) * goal_psi.transpose();
            const double mx = logits.maxCoeff();
            ls(a) = logits(i) - mx - std::log((logits.array() - mx).exp().sum());
        }
        const double expected = pi.dot(ls);
        loss -= expected / n;
        // d/dθ_b of -Σ_a π_a ℓ_a = -π_b (ℓ_b - Σ_a π_a ℓ_a)
        per_sample.row(i) = -(pi.array() * (ls.array() - expected)).matrix() / n;
        rows.push_back(policy.row(s, g));
    }
    return {loss, SparseRows::accumulate(rows, per_sample)};
}

double gc_actor_step(GcPolicyParams& policy, const GcLayout& layout, const RepresentationPair& reps,
                     const GcBatch& batch, double learning_rate) {
    const ActorLossAndGrad lg = gc_actor_loss_and_grad(policy, layout, reps, batch);
    for (std::size_t k = 0; k < lg.grad.rows.size(); ++k)
        policy.logits.row(lg.grad.rows[k]) -= learning_rate * lg.grad.values.row(static_cast<Eigen::Index>(k));
    return lg.loss;
}

// ---------------------------------------------------------------------------

GoalReachingResult evaluate_goal_reaching(const TabularMdp& mdp, const GcPolicyParams& policy,
                                          const std::vector<std::pair<int, int>>& pairs,
                                          int horizon, int episodes, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("evaluate_goal_reaching: horizon must be >= 1");
    if (episodes < 1) throw std::invalid_argument("evaluate_goal_reaching: episodes must be >= 1");
    if (policy.num_states != mdp.num_states() || policy.num_actions != mdp.num_actions())
        throw std::invalid_argument("evaluate_goal_reaching: policy shape does not match the MDP");
    for (const auto& [start, goal] : pairs) {
        if (start < 0 || start >= mdp.num_states() || goal < 0 || goal >= mdp.num_states())
            throw std::invalid_argument("evaluate_goal_reaching: invalid (start, goal) pair");
    }
    Rng rng(seed);
    GoalReachingResult out;
    double total = 0.0;
    for (const auto& [start, goal] : pairs) {
        int hits = 0;
        std::vector<int> first_path;
        int first_length = -1;
        for (int e = 0; e < episodes; ++e) {
            std::vector<int> path{start};
            int s = start;
            int reached = s == goal ? 0 : -1;
            for (int t = 1; t <= horizon && reached < 0; ++t) {
                const int a = policy.greedy_action(s, goal);
                s = rng.categorical(mdp.transition().row(mdp.sa_index(s, a)));
                path.push_back(s);
                if (s == goal) reached = t;
            }
            if (reached >= 0) ++hits;
            if (e == 0) {
                first_path = std::move(path);
                first_length = reached;
            }
        }
        const double rate = static_cast<double>(hits) / episodes;
        out.pair_success.push_back(rate);
        out.path_length.push_back(first_length);
        out.paths.push_back(std::move(first_path));
        total += rate;
    }
    out.success_rate = pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
    return out;
}

// ---------------------------------------------------------------------------

void GcrlConfig::validate() const {
    critic.validate();
    if (!(actor_learning_rate > 0.0)) throw std::invalid_argument("gcrl: actor_learning_rate must be > 0");
    if (!(goal_future_prob >= 0.0 && goal_future_prob <= 1.0))
        throw std::invalid_argument("gcrl: goal_future_prob must lie in [0, 1]");
    if (eval_interval < 1) throw std::invalid_argument("gcrl: eval_interval must be >= 1");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("gcrl: epsilon must lie in [0, 1]");
    if (episode_len < 1 || collect_every < 1 || warmup_episodes < 0)
        throw std::invalid_argument("gcrl: invalid online collection settings");
    if (horizon < 0 || eval_episodes < 1) throw std::invalid_argument("gcrl: invalid evaluation settings");
}

GcrlConfig default_gcrl_config() {
    GcrlConfig c;
    c.critic.learning_rate = 1.0;
    c.critic.ema_tau = 0.05;
    return c;
}

namespace {

Episode collect_episode(const TabularMdp& mdp, const GcPolicyParams& policy, double epsilon,
                        int length, Rng& rng) {
    Episode ep;
    int s = rng.categorical(mdp.initial_dist());
    const int goal = rng.index(mdp.num_states());
    ep.states.push_back(s);
    for (int t = 0; t < length; ++t) {
        const int a = rng.uniform() < epsilon ? rng.index(mdp.num_actions()) : policy.greedy_action(s, goal);
        s = rng.categorical(mdp.transition().row(mdp.sa_index(s, a)));
        ep.actions.push_back(a);
        ep.states.push_back(s);
    }
    return ep;
}

std::vector<std::pair<int, int>> all_pairs(int num_states) {
    std::vector<std::pair<int, int>> pairs;
    for (int s = 0; s < num_states; ++s)
        for (int g = 0; g < num_states; ++g) pairs.emplace_back(s, g);
    return pairs;
}

}  // namespace

GcrlResult train_gcrl(const TabularMdp& mdp, const TransitionDataset& dataset,
                      const GcrlConfig& config, long iterations) {
    config.validate();
    if (iterations < 0) throw std::invalid_argument("train_gcrl: iterations must be >= 0");
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    const double gamma = mdp.discount();
    const std::uint64_t seed = config.critic.seed;

    GcrlResult res;
    res.layout = {ns, na, config.critic_kind};
    res.reps = init_representations(config.critic, res.layout.num_anchor_rows(), ns, mix_seed(seed, 7));
    res.policy = GcPolicyParams::uniform(ns, na);
    const auto pairs = config.eval_pairs.empty() ? all_pairs(ns) : config.eval_pairs;
    const int horizon = config.horizon > 0 ? config.horizon : 4 * ns;

    Rng rng(mix_seed(seed, 202));
    Rng collect_rng(mix_seed(seed, 303));
    std::vector<Episode> episodes = dataset.episodes;
    if (config.online) {
        for (int e = 0; e < config.warmup_episodes; ++e)
            episodes.push_back(collect_episode(mdp, res.policy, 1.0, config.episode_len, collect_rng));
    }
    if (episodes.empty()) throw std::invalid_argument("train_gcrl: no data and no online collection");
    res.dataset = config.online
                      ? TransitionDataset::from_episodes(ns, na, episodes, "online", seed)
                      : dataset;

    double critic_acc = 0.0;
    double actor_acc = 0.0;
    long acc_count = 0;
    for (long it = 1; it <= iterations; ++it) {
        if (config.online && it % config.collect_every == 0) {
            episodes.push_back(collect_episode(mdp, res.policy, config.epsilon, config.episode_len, collect_rng));
            res.dataset = TransitionDataset::from_episodes(ns, na, episodes, "online", seed);
        }
        const GcBatch batch = sample_gc_batch(res.dataset, gamma, config.critic.batch_size, rng, res.policy,
                                              config.goal_future_prob);
        if (res.layout.kind == GcCriticKind::td_infonce) {
            critic_acc += gc_critic_step(res.layout, res.reps, batch, gamma, config.critic);
        } else {
            // Monte Carlo positives must be genuine future states.
            const GcBatch hindsight = sample_gc_batch(res.dataset, gamma, config.critic.batch_size, rng,
                                                      res.policy, 1.0);
            critic_acc += gc_critic_step(res.layout, res.reps, hindsight, gamma, config.critic);
        }
        actor_acc += gc_actor_step(res.policy, res.layout, res.reps.online, batch, config.actor_learning_rate);
        ++acc_count;
        if (it % config.eval_interval == 0) {
            const GoalReachingResult eval =
                evaluate_goal_reaching(mdp, res.policy, pairs, horizon, config.eval_episodes, mix_seed(seed, 404));
            res.metrics.push_back({it, critic_acc / acc_count, actor_acc / acc_count, eval.success_rate});
            critic_acc = actor_acc = 0.0;
            acc_count = 0;
        }
    }
    return res;
}

Matrix gc_occupancy_from_critic(const GcLayout& layout, const RepresentationPair& reps,
                                const Vector& marginal) {
    if (reps.phi.rows() != layout.num_anchor_rows())
        throw std::invalid_argument("gc_occupancy_from_critic: layout does not match representations");
    return classifier_from_critic(reps.critic_table(), marginal);
}

std::string policy_csv(const GcPolicyParams& policy) {
    std::ostringstream os;
    os.precision(10);
    os << "s,g,a,prob\n";
    for (int s = 0; s < policy.num_states; ++s) {
        for (int g = 0; g < policy.num_states; ++g) {
            const Eigen::RowVectorXd p = policy.probs(s, g);
            for (int a = 0; a < policy.num_actions; ++a) os << s << ',' << g << ',' << a << ',' << p(a) << '\n';
        }
    }
    return os.str();
}

std::string gcrl_metrics_csv(const std::vector<GcrlMetric>& metrics) {
    std::ostringstream os;
    os.precision(10);
    os << "iteration,critic_loss,actor_loss,success_rate\n";
    for (const GcrlMetric& m : metrics)
        os << m.iteration << ',' << m.critic_loss << ',' << m.actor_loss << ',' << m.success_rate << '\n';
    return os.str();
}

}  // namespace occlab
