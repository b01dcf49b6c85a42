#include "occlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <utility>

#include "occlab/random.hpp"

namespace occlab {

namespace {

constexpr double kRowTol = 1e-12;

void check_distribution(const Eigen::Ref<const Vector>& row, double tol, const std::string& what) {
    if ((row.array() < 0.0).any()) throw std::invalid_argument(what + ": negative probability");
    if (std::abs(row.sum() - 1.0) > tol) {
        std::ostringstream os;
        os << what << ": sums to " << row.sum() << " instead of 1";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace

TabularMdp::TabularMdp(int num_states, int num_actions, Matrix transition, Vector initial_dist,
                       double discount)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      initial_dist_(std::move(initial_dist)),
      discount_(discount) {
    if (num_states_ < 1 || num_actions_ < 1)
        throw std::invalid_argument("TabularMdp: need at least one state and one action");
    if (transition_.rows() != num_state_actions() || transition_.cols() != num_states_)
        throw std::invalid_argument("TabularMdp: transition must be (|S||A|) x |S|");
    if (initial_dist_.size() != num_states_)
        throw std::invalid_argument("TabularMdp: initial distribution has wrong length");
    if (!(discount_ > 0.0 && discount_ < 1.0))
        throw std::invalid_argument("TabularMdp: discount must lie strictly inside (0, 1)");
    for (int r = 0; r < transition_.rows(); ++r) {
        check_distribution(transition_.row(r).transpose(), kRowTol,
                           "TabularMdp: transition row " + std::to_string(r));
    }
    check_distribution(initial_dist_, kRowTol, "TabularMdp: initial distribution");
}

TabularMdp TabularMdp::with_discount(double discount) const {
    return TabularMdp(num_states_, num_actions_, transition_, initial_dist_, discount);
}

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
    return {Matrix::Constant(num_states, num_actions, 1.0 / num_actions)};
}

void TabularPolicy::validate() const {
    for (int s = 0; s < probs.rows(); ++s) {
        check_distribution(probs.row(s).transpose(), kRowTol,
                           "TabularPolicy: row " + std::to_string(s));
    }
}

void OccupancyTable::validate(double tol) const {
    if (probs.rows() != num_states * num_actions || probs.cols() != num_states)
        throw std::invalid_argument("OccupancyTable: shape mismatch");
    for (int r = 0; r < probs.rows(); ++r) {
        check_distribution(probs.row(r).transpose(), tol,
                           "OccupancyTable: row " + std::to_string(r));
    }
}

// ---------------------------------------------------------------------------

const char* to_string(GridAction a) {
    switch (a) {
        case GridAction::up: return "up";
        case GridAction::down: return "down";
        case GridAction::left: return "left";
        case GridAction::right: return "right";
        case GridAction::noop: return "noop";
    }
    return "?";
}

void GridworldSpec::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("GridworldSpec: empty grid");
    if (!(slip_prob >= 0.0 && slip_prob < 1.0))
        throw std::invalid_argument("GridworldSpec: slip_prob must lie in [0, 1)");
    int inside = 0;
    for (const Cell& w : walls) {
        if (w.x < 0 || w.y < 0 || w.x >= width || w.y >= height)
            throw std::invalid_argument("GridworldSpec: wall outside the grid");
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (std::find(walls.begin(), walls.end(), Cell{x, y}) == walls.end()) ++inside;
        }
    }
    if (inside == 0) throw std::invalid_argument("GridworldSpec: every cell is a wall");
}

GridLayout::GridLayout(GridworldSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    index_.assign(static_cast<std::size_t>(spec_.width * spec_.height), -1);
    for (int y = 0; y < spec_.height; ++y) {
        for (int x = 0; x < spec_.width; ++x) {
            if (is_wall({x, y})) continue;
            index_[static_cast<std::size_t>(y * spec_.width + x)] = static_cast<int>(cells_.size());
            cells_.push_back({x, y});
        }
    }
}

bool GridLayout::in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < spec_.width && c.y < spec_.height;
}

bool GridLayout::is_wall(Cell c) const {
    return std::find(spec_.walls.begin(), spec_.walls.end(), c) != spec_.walls.end();
}

int GridLayout::state_of(Cell c) const {
    if (!in_bounds(c)) return -1;
    return index_[static_cast<std::size_t>(c.y * spec_.width + c.x)];
}

int GridLayout::step(int state, GridAction a) const {
    Cell c = cell_of(state);
    switch (a) {
        case GridAction::up: --c.y; break;
        case GridAction::down: ++c.y; break;
        case GridAction::left: --c.x; break;
        case GridAction::right: ++c.x; break;
        case GridAction::noop: break;
    }
    const int next = state_of(c);
    return next < 0 ? state : next;
}

std::vector<int> GridLayout::bfs_distances(int source) const {
    std::vector<int> dist(static_cast<std::size_t>(num_states()), -1);
    std::deque<int> frontier{source};
    dist[static_cast<std::size_t>(source)] = 0;
    while (!frontier.empty()) {
        const int s = frontier.front();
        frontier.pop_front();
        for (int a = 0; a < kNumGridActions; ++a) {
            const int n = step(s, static_cast<GridAction>(a));
            if (dist[static_cast<std::size_t>(n)] < 0) {
                dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(s)] + 1;
                frontier.push_back(n);
            }
        }
    }
    return dist;
}

std::string GridLayout::render_path(const std::vector<int>& path, int start, int goal) const {
    std::vector<std::string> rows(static_cast<std::size_t>(spec_.height),
                                  std::string(static_cast<std::size_t>(spec_.width), ' '));
    for (const Cell& w : spec_.walls) rows[static_cast<std::size_t>(w.y)][static_cast<std::size_t>(w.x)] = '#';
    auto put = [&](int s, char ch) {
        const Cell c = cell_of(s);
        rows[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)] = ch;
    };
    for (int s : path) put(s, '.');
    put(start, 'X');
    put(goal, '*');
    std::string out;
    for (const auto& r : rows) out += r + "\n";
    return out;
}

TabularMdp build_gridworld(const GridworldSpec& spec, double discount) {
    const GridLayout layout(spec);
    const int n = layout.num_states();
    Matrix transition = Matrix::Zero(n * kNumGridActions, n);
    const double eps = spec.slip_prob;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < kNumGridActions; ++a) {
            const int row = s * kNumGridActions + a;
            transition(row, layout.step(s, static_cast<GridAction>(a))) += 1.0 - eps;
            for (int slip = 0; slip < kNumGridActions; ++slip) {
                transition(row, layout.step(s, static_cast<GridAction>(slip))) +=
                    eps / kNumGridActions;
            }
        }
    }
    return TabularMdp(n, kNumGridActions, std::move(transition), Vector::Constant(n, 1.0 / n),
                      discount);
}

// ---------------------------------------------------------------------------

namespace {

/// Π P as an |S| × |S| matrix: state-to-state kernel under the policy.
Matrix state_kernel(const TabularMdp& mdp, const TabularPolicy& policy) {
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    Matrix kernel = Matrix::Zero(ns, ns);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            kernel.row(s) += policy.probs(s, a) * mdp.transition().row(mdp.sa_index(s, a));
        }
    }
    return kernel;
}

void check_policy_shape(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions())
        throw std::invalid_argument("policy shape does not match the MDP");
    policy.validate();
}

}  // namespace

OccupancyTable exact_occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
    check_policy_shape(mdp, policy);
    const double gamma = mdp.discount();
    const Matrix system =
        Matrix::Identity(mdp.num_states(), mdp.num_states()) - gamma * state_kernel(mdp, policy);
    const Matrix rhs = (1.0 - gamma) * mdp.transition();
    // O · system = rhs  ⇔  systemᵀ Oᵀ = rhsᵀ
    const Eigen::PartialPivLU<Matrix> lu(system.transpose());
    Matrix occupancy = lu.solve(rhs.transpose()).transpose();
    const double residual = (occupancy * system - rhs).cwiseAbs().maxCoeff();
    if (!std::isfinite(residual) || residual > 1e-8) {
        std::ostringstream os;
        os << "exact_occupancy: residual " << residual << " exceeds 1e-8";
        throw NumericalError(os.str());
    }
    return {mdp.num_states(), mdp.num_actions(), std::move(occupancy)};
}

OccupancyTable apply_infonce_bellman(const TabularMdp& mdp, const TabularPolicy& policy,
                                     const OccupancyTable& classifier) {
    check_policy_shape(mdp, policy);
    if (classifier.num_states != mdp.num_states() || classifier.num_actions != mdp.num_actions())
        throw std::invalid_argument("apply_infonce_bellman: classifier shape mismatch");
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    // E_{a'~π(·|s')} C(s', a', ·) for every s'.
    Matrix next_value = Matrix::Zero(ns, ns);
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            next_value.row(s) += policy.probs(s, a) * classifier.probs.row(mdp.sa_index(s, a));
        }
    }
    const double gamma = mdp.discount();
    Matrix updated = (1.0 - gamma) * mdp.transition() + gamma * mdp.transition() * next_value;
    return {ns, na, std::move(updated)};
}

Matrix exact_q(const TabularMdp& mdp, const TabularPolicy& policy, const Vector& reward) {
    if (reward.size() != mdp.num_states())
        throw std::invalid_argument("exact_q: reward must have one entry per state");
    const OccupancyTable occ = exact_occupancy(mdp, policy);
    const Vector flat = occ.probs * reward;
    return flat.reshaped<Eigen::RowMajor>(mdp.num_states(), mdp.num_actions());
}

double occupancy_error(const OccupancyTable& estimate, const OccupancyTable& truth) {
    if (estimate.probs.rows() != truth.probs.rows() || estimate.probs.cols() != truth.probs.cols())
        throw std::invalid_argument("occupancy_error: shape mismatch");
    return (estimate.probs - truth.probs).cwiseAbs().mean();
}

double sup_norm_distance(const OccupancyTable& lhs, const OccupancyTable& rhs) {
    if (lhs.probs.rows() != rhs.probs.rows() || lhs.probs.cols() != rhs.probs.cols())
        throw std::invalid_argument("sup_norm_distance: shape mismatch");
    return (lhs.probs - rhs.probs).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------

TransitionDataset TransitionDataset::from_episodes(int num_states, int num_actions,
                                                   std::vector<Episode> episodes,
                                                   std::string policy_id, std::uint64_t seed) {
    TransitionDataset ds;
    ds.num_states = num_states;
    ds.num_actions = num_actions;
    ds.policy_id = std::move(policy_id);
    ds.seed = seed;
    ds.episodes = std::move(episodes);
    Vector counts = Vector::Zero(num_states);
    for (int e = 0; e < static_cast<int>(ds.episodes.size()); ++e) {
        const Episode& ep = ds.episodes[static_cast<std::size_t>(e)];
        if (ep.states.size() != ep.actions.size() + 1)
            throw std::invalid_argument("Episode: states must be one longer than actions");
        for (int t = 0; t < ep.length(); ++t) {
            const Transition tr{ep.states[static_cast<std::size_t>(t)],
                                ep.actions[static_cast<std::size_t>(t)],
                                ep.states[static_cast<std::size_t>(t) + 1]};
            if (tr.s < 0 || tr.s >= num_states || tr.s_next < 0 || tr.s_next >= num_states ||
                tr.a < 0 || tr.a >= num_actions)
                throw std::invalid_argument("Episode: index out of range");
            ds.records.push_back(tr);
            ds.positions.push_back({e, t});
            counts(tr.s_next) += 1.0;
        }
    }
    if (ds.records.empty()) throw std::invalid_argument("TransitionDataset: no transitions");
    ds.empirical_marginal = counts / counts.sum();
    return ds;
}

void TransitionDataset::check_consistent(const TabularMdp& mdp) const {
    for (const Transition& tr : records) {
        if (!(mdp.prob(tr.s, tr.a, tr.s_next) > 0.0)) {
            std::ostringstream os;
            os << "transition (" << tr.s << ", " << tr.a << ", " << tr.s_next
               << ") has zero probability";
            throw std::invalid_argument(os.str());
        }
    }
}

TransitionDataset sample_transitions(const TabularMdp& mdp, const TabularPolicy& policy,
                                     int count, int episode_len, std::uint64_t seed,
                                     std::string policy_id) {
    check_policy_shape(mdp, policy);
    if (count < 1) throw std::invalid_argument("sample_transitions: count must be >= 1");
    if (episode_len < 1) throw std::invalid_argument("sample_transitions: episode_len must be >= 1");
    Rng rng(seed);
    std::vector<Episode> episodes;
    int remaining = count;
    while (remaining > 0) {
        Episode ep;
        int s = rng.categorical(mdp.initial_dist());
        ep.states.push_back(s);
        const int len = std::min(episode_len, remaining);
        for (int t = 0; t < len; ++t) {
            const int a = rng.categorical(policy.probs.row(s));
            s = rng.categorical(mdp.transition().row(mdp.sa_index(s, a)));
            ep.actions.push_back(a);
            ep.states.push_back(s);
        }
        remaining -= len;
        episodes.push_back(std::move(ep));
    }
    return TransitionDataset::from_episodes(mdp.num_states(), mdp.num_actions(),
                                            std::move(episodes), std::move(policy_id), seed);
}

// ---------------------------------------------------------------------------

std::string occupancy_csv(const OccupancyTable& table) {
    std::ostringstream os;
    os.precision(17);
    os << "s,a,s_future,p\n";
    for (int s = 0; s < table.num_states; ++s) {
        for (int a = 0; a < table.num_actions; ++a) {
            for (int x = 0; x < table.num_states; ++x) {
                os << s << ',' << a << ',' << x << ',' << table.at(s, a, x) << '\n';
            }
        }
    }
    return os.str();
}

void write_occupancy_csv(const OccupancyTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << occupancy_csv(table);
}

}  // namespace occlab
