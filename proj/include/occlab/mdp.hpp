#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace occlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a linear solve or fixed-point computation fails its residual check.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/**
 * Finite MDP with dense dynamics.
 *
 * The transition tensor is stored as a (|S|·|A|) × |S| matrix whose row
 * `sa_index(s, a)` is the next-state distribution p(· | s, a). All state-action
 * indexed tables in the library use the same row layout.
 */
class TabularMdp {
   public:
    TabularMdp(int num_states, int num_actions, Matrix transition, Vector initial_dist,
               double discount);

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }
    int num_state_actions() const { return num_states_ * num_actions_; }
    double discount() const { return discount_; }
    const Matrix& transition() const { return transition_; }
    const Vector& initial_dist() const { return initial_dist_; }

    int sa_index(int s, int a) const { return s * num_actions_ + a; }
    double prob(int s, int a, int s_next) const { return transition_(sa_index(s, a), s_next); }

    TabularMdp with_discount(double discount) const;

   private:
    int num_states_;
    int num_actions_;
    Matrix transition_;
    Vector initial_dist_;
    double discount_;
};

/// Plain policy π(a|s) stored as an |S| × |A| row-stochastic matrix.
struct TabularPolicy {
    Matrix probs;

    static TabularPolicy uniform(int num_states, int num_actions);
    int num_states() const { return static_cast<int>(probs.rows()); }
    int num_actions() const { return static_cast<int>(probs.cols()); }
    void validate() const;
};

/// Per-(s, a) distribution over future states, same row layout as TabularMdp::transition.
struct OccupancyTable {
    int num_states = 0;
    int num_actions = 0;
    Matrix probs;

    double at(int s, int a, int s_future) const { return probs(s * num_actions + a, s_future); }
    void validate(double tol = 1e-9) const;
};

// ---------------------------------------------------------------------------
// Gridworld

enum class GridAction : int { up = 0, down = 1, left = 2, right = 3, noop = 4 };
inline constexpr int kNumGridActions = 5;
const char* to_string(GridAction a);

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridworldSpec {
    int width = 5;
    int height = 5;
    std::vector<Cell> walls;
    double slip_prob = 0.0;

    void validate() const;
};

/**
 * Cell/state bookkeeping for a gridworld. Wall cells are not states; the
 * remaining cells are numbered in row-major order.
 */
class GridLayout {
   public:
    explicit GridLayout(GridworldSpec spec);

    const GridworldSpec& spec() const { return spec_; }
    int num_states() const { return static_cast<int>(cells_.size()); }
    bool is_wall(Cell c) const;
    bool in_bounds(Cell c) const;
    /// -1 for walls and off-grid cells.
    int state_of(Cell c) const;
    Cell cell_of(int state) const { return cells_.at(state); }
    /// Deterministic successor of `state` under `a`; blocked moves stay put.
    int step(int state, GridAction a) const;
    /// Breadth-first distances from `source` over deterministic moves; -1 when unreachable.
    std::vector<int> bfs_distances(int source) const;
    /// Plain-text rendering: `#` wall, `X` start, `*` goal, `.` path, space otherwise.
    std::string render_path(const std::vector<int>& path, int start, int goal) const;

   private:
    GridworldSpec spec_;
    std::vector<Cell> cells_;
    std::vector<int> index_;
};

/// Gridworld dynamics with actions {up, down, left, right, no-op} and uniform restarts.
TabularMdp build_gridworld(const GridworldSpec& spec, double discount);

// ---------------------------------------------------------------------------
// Exact solvers

/// O = (1-γ) P (I - γ Π P)^{-1}, solved with a dense LU and a residual check.
OccupancyTable exact_occupancy(const TabularMdp& mdp, const TabularPolicy& policy);

/// One application of C ↦ (1-γ) p(s'=·|s,a) + γ E_{s',a'}[C(s',a',·)].
OccupancyTable apply_infonce_bellman(const TabularMdp& mdp, const TabularPolicy& policy,
                                     const OccupancyTable& classifier);

/// Q(s,a) = Σ_x p^π(x|s,a) r(x); returned as an |S| × |A| matrix.
Matrix exact_q(const TabularMdp& mdp, const TabularPolicy& policy, const Vector& reward);

/// Mean absolute error over all (s, a, s_future) entries.
double occupancy_error(const OccupancyTable& estimate, const OccupancyTable& truth);

/// Largest absolute entry difference.
double sup_norm_distance(const OccupancyTable& lhs, const OccupancyTable& rhs);

// ---------------------------------------------------------------------------
// Datasets

struct Transition {
    int s = 0;
    int a = 0;
    int s_next = 0;
    friend bool operator==(const Transition&, const Transition&) = default;
};

/// One rollout: states.size() == actions.size() + 1.
struct Episode {
    std::vector<int> states;
    std::vector<int> actions;
    int length() const { return static_cast<int>(actions.size()); }
};

struct RecordPosition {
    int episode = 0;
    int t = 0;
};

/**
 * Sampled transitions grouped into episodes. `records` is the flattened list
 * of (s, a, s') tuples and `positions[i]` locates record i inside its episode.
 * The empirical marginal is the normalized visit count of next states s'.
 */
struct TransitionDataset {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Episode> episodes;
    std::vector<Transition> records;
    std::vector<RecordPosition> positions;
    Vector empirical_marginal;
    std::string policy_id;
    std::uint64_t seed = 0;

    static TransitionDataset from_episodes(int num_states, int num_actions,
                                           std::vector<Episode> episodes, std::string policy_id,
                                           std::uint64_t seed);
    std::size_t size() const { return records.size(); }
    /// Throws if any record has zero probability under `mdp`.
    void check_consistent(const TabularMdp& mdp) const;
};

/// Episodic rollouts restarted from p0 every `episode_len` steps.
TransitionDataset sample_transitions(const TabularMdp& mdp, const TabularPolicy& policy,
                                     int count, int episode_len, std::uint64_t seed,
                                     std::string policy_id = "policy");

// ---------------------------------------------------------------------------
// IO

/// CSV with header `s,a,s_future,p`.
void write_occupancy_csv(const OccupancyTable& table, const std::string& path);
std::string occupancy_csv(const OccupancyTable& table);

}  // namespace occlab
