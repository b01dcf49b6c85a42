#include "occlab/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace occlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix gather_rows(const Matrix& table, const std::vector<int>& index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), table.cols());
    for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(index[i]);
    return out;
}

void check_index(const std::vector<int>& index, Eigen::Index limit, const char* what) {
    for (int v : index) {
        if (v < 0 || v >= limit) {
            std::ostringstream os;
            os << what << ": row " << v << " out of range [0, " << limit << ")";
            throw std::invalid_argument(os.str());
        }
    }
}

Matrix importance_weights(const Matrix& f_w, WeightScheme scheme, int& clamped) {
    if (scheme == WeightScheme::softmax_normalized) return softmax_importance_weights(f_w);
    Matrix w(f_w.rows(), f_w.cols());
    for (Eigen::Index i = 0; i < f_w.size(); ++i) {
        double v = f_w.data()[i];
        if (std::abs(v) > kExpClamp) {
            ++clamped;
            v = std::clamp(v, -kExpClamp, kExpClamp);
        }
        w.data()[i] = std::exp(v);
    }
    return w;
}

void warn_once_zero_mass(const Vector& marginal) {
    static std::atomic<bool> warned{false};
    if ((marginal.array() <= 0.0).any() && !warned.exchange(true)) {
        std::cerr << "warning: marginal has zero mass on some states; their estimated "
                     "occupancy is fixed at zero\n";
    }
}

void check_marginal(const Vector& marginal, Eigen::Index num_states) {
    if (marginal.size() != num_states)
        throw std::invalid_argument("marginal length does not match the number of states");
    if ((marginal.array() < 0.0).any() || std::abs(marginal.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("marginal is not a distribution");
}

/// log Σ_x m_x e^{f(r,x)} for every row r, ignoring zero-mass states.
Vector log_partition(const Matrix& critic, const Vector& marginal) {
    Vector out(critic.rows());
    for (Eigen::Index r = 0; r < critic.rows(); ++r) {
        double mx = kNegInf;
        for (Eigen::Index x = 0; x < critic.cols(); ++x) {
            if (marginal(x) > 0.0) mx = std::max(mx, critic(r, x));
        }
        double total = 0.0;
        for (Eigen::Index x = 0; x < critic.cols(); ++x) {
            if (marginal(x) > 0.0 && critic(r, x) != kNegInf)
                total += marginal(x) * std::exp(critic(r, x) - mx);
        }
        out(r) = mx + std::log(total);
    }
    return out;
}

RepresentationGrad assemble_grad(const std::vector<int>& anchor_rows, const Matrix& d_anchor,
                                 const std::vector<int>& state_rows, const Matrix& d_state,
                                 double d_scale) {
    RepresentationGrad g;
    g.phi = SparseRows::accumulate(anchor_rows, d_anchor);
    g.psi = SparseRows::accumulate(state_rows, d_state);
    g.scale = d_scale;
    return g;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(LossFamily v) { return v == LossFamily::categorical ? "categorical" : "binary"; }
const char* to_string(WeightScheme v) {
    return v == WeightScheme::softmax_normalized ? "softmax_normalized" : "exp_unnormalized";
}
const char* to_string(NegativesScheme v) { return v == NegativesScheme::n_squared ? "n_squared" : "n"; }

LossFamily parse_loss_family(const std::string& s) {
    if (s == "categorical") return LossFamily::categorical;
    if (s == "binary") return LossFamily::binary;
    throw std::invalid_argument("unknown loss_family '" + s + "'");
}
WeightScheme parse_weight_scheme(const std::string& s) {
    if (s == "softmax_normalized") return WeightScheme::softmax_normalized;
    if (s == "exp_unnormalized") return WeightScheme::exp_unnormalized;
    throw std::invalid_argument("unknown weight_scheme '" + s + "'");
}
NegativesScheme parse_negatives_scheme(const std::string& s) {
    if (s == "n_squared") return NegativesScheme::n_squared;
    if (s == "n") return NegativesScheme::n;
    throw std::invalid_argument("unknown negatives_scheme '" + s + "'");
}

EstimatorConfig EstimatorConfig::c_learning() {
    EstimatorConfig c;
    c.loss_family = LossFamily::binary;
    c.weight_scheme = WeightScheme::exp_unnormalized;
    c.negatives_scheme = NegativesScheme::n;
    return c;
}

void EstimatorConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("EstimatorConfig: batch_size must be >= 2");
    if (repr_dim < 0) throw std::invalid_argument("EstimatorConfig: repr_dim must be >= 0");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("EstimatorConfig: learning_rate must be > 0");
    if (!(ema_tau > 0.0 && ema_tau <= 1.0))
        throw std::invalid_argument("EstimatorConfig: ema_tau must lie in (0, 1]");
    if (!(initial_scale > 0.0)) throw std::invalid_argument("EstimatorConfig: initial_scale must be > 0");
    if (!(sr_step_size >= 0.0 && sr_step_size <= 1.0))
        throw std::invalid_argument("EstimatorConfig: sr_step_size must lie in [0, 1]");
}

// ---------------------------------------------------------------------------

void RepresentationPair::normalize_rows() {
    auto normalize = [](Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const double norm = m.row(r).norm();
            if (norm > 0.0) {
                m.row(r) /= norm;
            } else {
                m.row(r).setZero();
                m(r, 0) = 1.0;
            }
        }
    };
    normalize(phi);
    normalize(psi);
}

OnlineAndTarget init_representations(const EstimatorConfig& config, int num_anchor_rows,
                                     int num_states, std::uint64_t seed) {
    config.validate();
    const int d = config.repr_dim > 0 ? config.repr_dim : num_states;
    Rng rng(seed);
    RepresentationPair reps;
    reps.phi.resize(num_anchor_rows, d);
    reps.psi.resize(num_states, d);
    // Row-major fill so the draw order does not depend on Eigen's storage order.
    for (int r = 0; r < num_anchor_rows; ++r)
        for (int c = 0; c < d; ++c) reps.phi(r, c) = rng.uniform(-0.05, 0.05);
    for (int r = 0; r < num_states; ++r)
        for (int c = 0; c < d; ++c) reps.psi(r, c) = rng.uniform(-0.05, 0.05);
    reps.normalized = config.normalized;
    reps.scale = config.normalized ? config.initial_scale : 1.0;
    if (reps.normalized) reps.normalize_rows();
    return {reps, reps};
}

SparseRows SparseRows::accumulate(const std::vector<int>& index, const Matrix& per_sample) {
    SparseRows out;
    out.rows = index;
    std::sort(out.rows.begin(), out.rows.end());
    out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
    out.values = Matrix::Zero(static_cast<Eigen::Index>(out.rows.size()), per_sample.cols());
    for (std::size_t k = 0; k < index.size(); ++k) {
        const auto pos = std::lower_bound(out.rows.begin(), out.rows.end(), index[k]) - out.rows.begin();
        out.values.row(pos) += per_sample.row(static_cast<Eigen::Index>(k));
    }
    return out;
}

Matrix SparseRows::to_dense(int total_rows) const {
    Matrix dense = Matrix::Zero(total_rows, values.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) dense.row(rows[k]) = values.row(static_cast<Eigen::Index>(k));
    return dense;
}

void sgd_step(RepresentationPair& reps, const RepresentationGrad& grad, double learning_rate) {
    auto apply = [&](Matrix& table, const SparseRows& g) {
        for (std::size_t k = 0; k < g.rows.size(); ++k) {
            auto row = table.row(g.rows[k]);
            row -= learning_rate * g.values.row(static_cast<Eigen::Index>(k));
            if (reps.normalized) {
                const double norm = row.norm();
                if (norm > 0.0) row /= norm;
            }
        }
    };
    apply(reps.phi, grad.phi);
    apply(reps.psi, grad.psi);
    if (reps.normalized) reps.scale = std::max(1e-3, reps.scale - learning_rate * grad.scale);
}

Matrix critic_matrix(const Matrix& phi_rows, const Matrix& psi_rows, double scale) {
    if (phi_rows.cols() != psi_rows.cols())
        throw std::invalid_argument("critic_matrix: representation dimensions differ");
    if (phi_rows.rows() != psi_rows.rows())
        throw std::invalid_argument("critic_matrix: batch sizes differ");
    return scale * phi_rows * psi_rows.transpose();
}

Matrix row_log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

Matrix row_softmax(const Matrix& logits) { return row_log_softmax(logits).array().exp(); }

Matrix softmax_importance_weights(const Matrix& f_w) {
    if (f_w.rows() < 2 && f_w.cols() < 2)
        throw std::invalid_argument("softmax_importance_weights: need N >= 2");
    return static_cast<double>(f_w.cols()) * row_softmax(f_w);
}

// ---------------------------------------------------------------------------

namespace {

void validate_td_batch(const RepresentationPair& online, const RepresentationPair& target,
                       const TdBatch& batch) {
    const int n = batch.size();
    if (n < 2) throw std::invalid_argument("TD batch: N must be >= 2");
    if (static_cast<int>(batch.next_state.size()) != n ||
        static_cast<int>(batch.next_anchor.size()) != n || static_cast<int>(batch.future.size()) != n)
        throw std::invalid_argument("TD batch: mismatched batch shapes");
    if (online.phi.rows() != target.phi.rows() || online.psi.rows() != target.psi.rows() ||
        online.dim() != target.dim() || online.psi.cols() != online.dim())
        throw std::invalid_argument("TD batch: online and target representations differ in shape");
    check_index(batch.anchor, online.phi.rows(), "TD batch anchor");
    check_index(batch.next_anchor, online.phi.rows(), "TD batch next_anchor");
    check_index(batch.next_state, online.psi.rows(), "TD batch next_state");
    check_index(batch.future, online.psi.rows(), "TD batch future");
}

}  // namespace

CriticMatrices td_critic_matrices(const RepresentationPair& online,
                                  const RepresentationPair& target, const TdBatch& batch) {
    validate_td_batch(online, target, batch);
    const Matrix anchors = gather_rows(online.phi, batch.anchor);
    CriticMatrices cm;
    cm.f_next = critic_matrix(anchors, gather_rows(online.psi, batch.next_state), online.critic_scale());
    cm.f_future = critic_matrix(anchors, gather_rows(online.psi, batch.future), online.critic_scale());
    cm.f_w = critic_matrix(gather_rows(target.phi, batch.next_anchor),
                           gather_rows(target.psi, batch.future), target.critic_scale());
    return cm;
}

LossAndGrad td_contrastive_loss_and_grad(const RepresentationPair& online,
                                         const RepresentationPair& target, const TdBatch& batch,
                                         double gamma, const EstimatorConfig& config) {
    validate_td_batch(online, target, batch);
    const int n = batch.size();
    const double dn = static_cast<double>(n);
    const double sc = online.critic_scale();
    const Matrix anchors = gather_rows(online.phi, batch.anchor);
    const Matrix next = gather_rows(online.psi, batch.next_state);
    const Matrix fut = gather_rows(online.psi, batch.future);
    const Matrix raw_next = anchors * next.transpose();
    const Matrix raw_future = anchors * fut.transpose();
    const Matrix f_next = sc * raw_next;
    const Matrix f_future = sc * raw_future;
    const Matrix f_w = target.critic_scale() * gather_rows(target.phi, batch.next_anchor) *
                       gather_rows(target.psi, batch.future).transpose();

    LossAndGrad out;
    const Matrix w = importance_weights(f_w, config.weight_scheme, out.clamped);
    const bool all_pairs = config.negatives_scheme == NegativesScheme::n_squared;
    const Matrix eye = Matrix::Identity(n, n);
    Matrix g_next = Matrix::Zero(n, n);
    Matrix g_future = Matrix::Zero(n, n);
    double loss = 0.0;

    if (config.loss_family == LossFamily::categorical) {
        const Matrix ls_next = row_log_softmax(f_next);
        loss += (1.0 - gamma) * (-ls_next.diagonal().mean());
        g_next = (1.0 - gamma) / dn * (Matrix(ls_next.array().exp()) - eye);

        const Matrix ls_future = row_log_softmax(f_future);
        const Matrix sm_future = ls_future.array().exp();
        if (all_pairs) {
            loss += gamma * (-(w.cwiseProduct(ls_future)).sum() / (dn * dn));
            const Vector label_mass = w.rowwise().sum();
            g_future = gamma / (dn * dn) * (label_mass.asDiagonal() * sm_future - w);
        } else {
            const Vector wd = w.diagonal();
            loss += gamma * (-wd.cwiseProduct(ls_future.diagonal()).sum() / dn);
            g_future = gamma / dn * (wd.asDiagonal() * (sm_future - eye));
        }
    } else {
        for (int i = 0; i < n; ++i) {
            loss += (1.0 - gamma) / dn * softplus(-f_next(i, i));
            g_next(i, i) = (1.0 - gamma) / dn * (sigmoid(f_next(i, i)) - 1.0);
        }
        auto term = [&](int i, int j, double norm) {
            const double f = f_future(i, j);
            const double sig = sigmoid(f);
            loss += (gamma * w(i, j) * softplus(-f) + softplus(f)) / norm;
            g_future(i, j) = (gamma * w(i, j) * (sig - 1.0) + sig) / norm;
        };
        if (all_pairs) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) term(i, j, dn * dn);
        } else {
            for (int i = 0; i < n; ++i) term(i, i, dn);
        }
    }

    const Matrix d_anchor = sc * (g_next * next + g_future * fut);
    Matrix d_state(2 * n, online.dim());
    d_state.topRows(n) = sc * g_next.transpose() * anchors;
    d_state.bottomRows(n) = sc * g_future.transpose() * anchors;
    std::vector<int> state_rows = batch.next_state;
    state_rows.insert(state_rows.end(), batch.future.begin(), batch.future.end());
    const double d_scale = online.normalized
                               ? g_next.cwiseProduct(raw_next).sum() + g_future.cwiseProduct(raw_future).sum()
                               : 0.0;
    out.loss = loss;
    out.grad = assemble_grad(batch.anchor, d_anchor, state_rows, d_state, d_scale);
    return out;
}

LossAndGrad td_infonce_loss_and_grad(const RepresentationPair& online,
                                     const RepresentationPair& target, const TdBatch& batch,
                                     double gamma, const EstimatorConfig& config) {
    EstimatorConfig c = config;
    c.loss_family = LossFamily::categorical;
    return td_contrastive_loss_and_grad(online, target, batch, gamma, c);
}

LossAndGrad c_learning_loss_and_grad(const RepresentationPair& online,
                                     const RepresentationPair& target, const TdBatch& batch,
                                     double gamma, const EstimatorConfig& config) {
    EstimatorConfig c = config;
    c.loss_family = LossFamily::binary;
    return td_contrastive_loss_and_grad(online, target, batch, gamma, c);
}

LossAndGrad mc_infonce_loss_and_grad(const RepresentationPair& reps, const McBatch& batch,
                                     const EstimatorConfig& /*config*/) {
    const int n = batch.size();
    if (n < 2) throw std::invalid_argument("MC batch: N must be >= 2");
    if (static_cast<int>(batch.future.size()) != n)
        throw std::invalid_argument("MC batch: mismatched batch shapes");
    check_index(batch.anchor, reps.phi.rows(), "MC batch anchor");
    check_index(batch.future, reps.psi.rows(), "MC batch future");
    const double dn = static_cast<double>(n);
    const double sc = reps.critic_scale();
    const Matrix anchors = gather_rows(reps.phi, batch.anchor);
    const Matrix fut = gather_rows(reps.psi, batch.future);
    const Matrix raw = anchors * fut.transpose();
    const Matrix ls = row_log_softmax(sc * raw);
    const Matrix g = (Matrix(ls.array().exp()) - Matrix::Identity(n, n)) / dn;

    LossAndGrad out;
    out.loss = -ls.diagonal().mean();
    out.grad = assemble_grad(batch.anchor, sc * g * fut, batch.future, sc * g.transpose() * anchors,
                             reps.normalized ? g.cwiseProduct(raw).sum() : 0.0);
    return out;
}

// ---------------------------------------------------------------------------

SuccessorTable SuccessorTable::uniform(int num_states, int num_actions, double step_size) {
    SuccessorTable t;
    t.m = Matrix::Constant(num_states * num_actions, num_states, 1.0 / num_states);
    t.num_actions = num_actions;
    t.step_size = step_size;
    return t;
}

OccupancyTable SuccessorTable::as_occupancy() const {
    return {static_cast<int>(m.cols()), num_actions, m};
}

double successor_td_update(SuccessorTable& table, const Transition& tr, int next_action,
                           double gamma, double step_size) {
    const int row = tr.s * table.num_actions + tr.a;
    const int next_row = tr.s_next * table.num_actions + next_action;
    Eigen::RowVectorXd target = gamma * table.m.row(next_row);
    target(tr.s_next) += 1.0 - gamma;
    const Eigen::RowVectorXd td = target - table.m.row(row);
    table.m.row(row) += step_size * td;
    return td.cwiseAbs().sum();
}

// ---------------------------------------------------------------------------

Matrix classifier_from_critic(const Matrix& critic, const Vector& marginal) {
    check_marginal(marginal, critic.cols());
    Matrix out(critic.rows(), critic.cols());
    for (Eigen::Index r = 0; r < critic.rows(); ++r) {
        double mx = kNegInf;
        for (Eigen::Index x = 0; x < critic.cols(); ++x)
            if (marginal(x) > 0.0) mx = std::max(mx, critic(r, x));
        for (Eigen::Index x = 0; x < critic.cols(); ++x)
            out(r, x) = marginal(x) > 0.0 ? marginal(x) * std::exp(critic(r, x) - mx) : 0.0;
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

OccupancyTable occupancy_from_critic(const RepresentationPair& reps, const Vector& marginal,
                                     int num_actions) {
    const auto num_states = static_cast<int>(reps.psi.rows());
    if (reps.phi.rows() != static_cast<Eigen::Index>(num_states) * num_actions)
        throw std::invalid_argument("occupancy_from_critic: phi must have |S||A| rows");
    warn_once_zero_mass(marginal);
    return {num_states, num_actions, classifier_from_critic(reps.critic_table(), marginal)};
}

void ema_update(RepresentationPair& target, const RepresentationPair& online, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("ema_update: tau must lie in (0, 1]");
    if (target.phi.rows() != online.phi.rows() || target.phi.cols() != online.phi.cols() ||
        target.psi.rows() != online.psi.rows() || target.psi.cols() != online.psi.cols())
        throw std::invalid_argument("ema_update: shape mismatch");
    if (tau == 1.0) {
        target = online;
        return;
    }
    target.phi = (1.0 - tau) * target.phi + tau * online.phi;
    target.psi = (1.0 - tau) * target.psi + tau * online.psi;
    target.scale = (1.0 - tau) * target.scale + tau * online.scale;
    if (target.normalized) target.normalize_rows();
}

Matrix q_from_representations(const RepresentationPair& reps, const Vector& marginal,
                              const Vector& reward, int num_actions) {
    if (reward.size() != reps.psi.rows())
        throw std::invalid_argument("q_from_representations: reward length mismatch");
    const OccupancyTable occ = occupancy_from_critic(reps, marginal, num_actions);
    const Vector flat = occ.probs * reward;
    return flat.reshaped<Eigen::RowMajor>(occ.num_states, num_actions);
}

Matrix optimal_critic(const OccupancyTable& occupancy, const Vector& marginal) {
    check_marginal(marginal, occupancy.num_states);
    if ((marginal.array() <= 0.0).any())
        throw std::invalid_argument("optimal_critic: marginal must have full support");
    Matrix f(occupancy.probs.rows(), occupancy.probs.cols());
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        for (Eigen::Index x = 0; x < f.cols(); ++x) {
            const double p = occupancy.probs(r, x);
            f(r, x) = p > 0.0 ? std::log(p) - std::log(marginal(x)) : kNegInf;
        }
    }
    return f;
}

namespace {

/// Σ_x weight(r,x) · log-softmax(r,x), skipping zero weights.
double weighted_log_softmax(const Matrix& weights, const Matrix& critic, const Vector& lp,
                            Eigen::Index r) {
    double total = 0.0;
    for (Eigen::Index x = 0; x < critic.cols(); ++x) {
        if (weights(r, x) > 0.0) total += weights(r, x) * (critic(r, x) - lp(r));
    }
    return total;
}

}  // namespace

double mc_infonce_expected_loss(const OccupancyTable& occupancy, const Matrix& critic,
                                const Vector& marginal, const Vector& sa_weights) {
    if (critic.rows() != occupancy.probs.rows() || critic.cols() != occupancy.probs.cols() ||
        sa_weights.size() != critic.rows())
        throw std::invalid_argument("mc_infonce_expected_loss: shape mismatch");
    check_marginal(marginal, critic.cols());
    const Vector lp = log_partition(critic, marginal);
    double loss = 0.0;
    for (Eigen::Index r = 0; r < critic.rows(); ++r) {
        if (sa_weights(r) > 0.0) loss -= sa_weights(r) * weighted_log_softmax(occupancy.probs, critic, lp, r);
    }
    return loss;
}

double td_infonce_expected_loss(const TabularMdp& mdp, const TabularPolicy& policy,
                                const Matrix& critic, const Vector& marginal,
                                const Vector& sa_weights) {
    if (critic.rows() != mdp.num_state_actions() || critic.cols() != mdp.num_states() ||
        sa_weights.size() != critic.rows())
        throw std::invalid_argument("td_infonce_expected_loss: shape mismatch");
    check_marginal(marginal, critic.cols());
    const Vector lp = log_partition(critic, marginal);
    // p(x) · w(s', a', x) is exactly the classifier C(s', a', x).
    OccupancyTable classifier{mdp.num_states(), mdp.num_actions(), classifier_from_critic(critic, marginal)};
    const double gamma = mdp.discount();
    // γ E_{s',a'}[C(s',a',·)] = (T C - (1-γ) P)
    const Matrix bootstrap = apply_infonce_bellman(mdp, policy, classifier).probs -
                             (1.0 - gamma) * mdp.transition();
    const Matrix& next = mdp.transition();
    double loss = 0.0;
    for (Eigen::Index r = 0; r < critic.rows(); ++r) {
        if (!(sa_weights(r) > 0.0)) continue;
        loss -= sa_weights(r) * ((1.0 - gamma) * weighted_log_softmax(next, critic, lp, r) +
                                 weighted_log_softmax(bootstrap, critic, lp, r));
    }
    return loss;
}

// ---------------------------------------------------------------------------

TdBatch sample_td_batch(const TransitionDataset& data, const TabularPolicy& policy, int n, Rng& rng) {
    TdBatch b;
    b.anchor.reserve(static_cast<std::size_t>(n));
    b.next_state.reserve(static_cast<std::size_t>(n));
    b.next_anchor.reserve(static_cast<std::size_t>(n));
    b.future.reserve(static_cast<std::size_t>(n));
    const int na = data.num_actions;
    const int size = static_cast<int>(data.records.size());
    for (int i = 0; i < n; ++i) {
        const Transition& tr = data.records[static_cast<std::size_t>(rng.index(size))];
        const int a_next = rng.categorical(policy.probs.row(tr.s_next));
        b.anchor.push_back(tr.s * na + tr.a);
        b.next_state.push_back(tr.s_next);
        b.next_anchor.push_back(tr.s_next * na + a_next);
        // A uniformly drawn record's next state is a draw from the empirical marginal.
        b.future.push_back(data.records[static_cast<std::size_t>(rng.index(size))].s_next);
    }
    return b;
}

McBatch sample_mc_batch(const TransitionDataset& data, double gamma, int n, Rng& rng) {
    McBatch b;
    b.anchor.reserve(static_cast<std::size_t>(n));
    b.future.reserve(static_cast<std::size_t>(n));
    const int size = static_cast<int>(data.records.size());
    for (int i = 0; i < n; ++i) {
        const int k = rng.index(size);
        const Transition& tr = data.records[static_cast<std::size_t>(k)];
        const RecordPosition& pos = data.positions[static_cast<std::size_t>(k)];
        const Episode& ep = data.episodes[static_cast<std::size_t>(pos.episode)];
        int offset = rng.geometric_offset(gamma);
        while (pos.t + offset > ep.length()) offset = rng.geometric_offset(gamma);
        b.anchor.push_back(tr.s * data.num_actions + tr.a);
        b.future.push_back(ep.states[static_cast<std::size_t>(pos.t + offset)]);
    }
    return b;
}

const char* to_string(EstimatorMethod m) {
    switch (m) {
        case EstimatorMethod::td_infonce: return "td_infonce";
        case EstimatorMethod::mc_infonce: return "mc_infonce";
        case EstimatorMethod::c_learning: return "c_learning";
        case EstimatorMethod::successor_representation: return "successor_representation";
    }
    return "?";
}

EstimatorMethod parse_estimator_method(const std::string& s) {
    if (s == "td_infonce") return EstimatorMethod::td_infonce;
    if (s == "mc_infonce") return EstimatorMethod::mc_infonce;
    if (s == "c_learning") return EstimatorMethod::c_learning;
    if (s == "successor_representation") return EstimatorMethod::successor_representation;
    throw std::invalid_argument("unknown estimator method '" + s + "'");
}

EstimatorRun train_estimator(EstimatorMethod method, const TabularMdp& mdp,
                             const TabularPolicy& policy, const TransitionDataset& data,
                             const EstimatorConfig& config, const TrainSchedule& schedule,
                             const OccupancyTable& truth) {
    config.validate();
    if (schedule.steps < 0 || schedule.eval_interval < 1)
        throw std::invalid_argument("train_estimator: invalid schedule");
    EstimatorConfig cfg = config;
    if (method == EstimatorMethod::c_learning) {
        cfg.loss_family = LossFamily::binary;
        cfg.weight_scheme = WeightScheme::exp_unnormalized;
        cfg.negatives_scheme = NegativesScheme::n;
    }
    const double gamma = mdp.discount();
    const int ns = mdp.num_states();
    const int na = mdp.num_actions();
    Rng rng(mix_seed(cfg.seed, 101));

    EstimatorRun run;
    const bool tabular = method == EstimatorMethod::successor_representation;
    SuccessorTable sr = SuccessorTable::uniform(ns, na, cfg.sr_step_size);
    OnlineAndTarget reps;
    if (!tabular) reps = init_representations(cfg, ns * na, ns, mix_seed(cfg.seed, 7));

    auto estimate = [&]() {
        return tabular ? sr.as_occupancy() : occupancy_from_critic(reps.target, data.empirical_marginal, na);
    };

    double loss_acc = 0.0;
    long loss_count = 0;
    for (long step = 1; step <= schedule.steps; ++step) {
        double loss = 0.0;
        switch (method) {
            case EstimatorMethod::td_infonce:
            case EstimatorMethod::c_learning: {
                const TdBatch batch = sample_td_batch(data, policy, cfg.batch_size, rng);
                const LossAndGrad lg = td_contrastive_loss_and_grad(reps.online, reps.target, batch, gamma, cfg);
                sgd_step(reps.online, lg.grad, cfg.learning_rate);
                ema_update(reps.target, reps.online, cfg.ema_tau);
                loss = lg.loss;
                run.clamped += lg.clamped;
                break;
            }
            case EstimatorMethod::mc_infonce: {
                const McBatch batch = sample_mc_batch(data, gamma, cfg.batch_size, rng);
                const LossAndGrad lg = mc_infonce_loss_and_grad(reps.online, batch, cfg);
                sgd_step(reps.online, lg.grad, cfg.learning_rate);
                ema_update(reps.target, reps.online, cfg.ema_tau);
                loss = lg.loss;
                break;
            }
            case EstimatorMethod::successor_representation: {
                const int size = static_cast<int>(data.records.size());
                for (int i = 0; i < cfg.batch_size; ++i) {
                    const Transition& tr = data.records[static_cast<std::size_t>(rng.index(size))];
                    const int a_next = rng.categorical(policy.probs.row(tr.s_next));
                    loss += successor_td_update(sr, tr, a_next, gamma, cfg.sr_step_size);
                }
                loss /= cfg.batch_size;
                break;
            }
        }
        loss_acc += loss;
        ++loss_count;
        if (step % schedule.eval_interval == 0) {
            run.curve.push_back({step, loss_acc / static_cast<double>(loss_count),
                                 occupancy_error(estimate(), truth)});
            loss_acc = 0.0;
            loss_count = 0;
        }
    }
    run.estimate = estimate();
    if (!tabular) run.reps = reps.target;
    return run;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    os.precision(10);
    os << "step,loss,occupancy_error\n";
    for (const CurvePoint& p : curve) os << p.step << ',' << p.loss << ',' << p.occupancy_error << '\n';
    return os.str();
}

}  // namespace occlab
