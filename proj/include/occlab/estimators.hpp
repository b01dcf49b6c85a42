#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "occlab/mdp.hpp"
#include "occlab/random.hpp"

namespace occlab {

enum class LossFamily { categorical, binary };
enum class WeightScheme { softmax_normalized, exp_unnormalized };
enum class NegativesScheme { n_squared, n };

const char* to_string(LossFamily v);
const char* to_string(WeightScheme v);
const char* to_string(NegativesScheme v);
LossFamily parse_loss_family(const std::string& s);
WeightScheme parse_weight_scheme(const std::string& s);
NegativesScheme parse_negatives_scheme(const std::string& s);

/**
 * Hyperparameters shared by every learned occupancy estimator.
 *
 * The three enum switches span the TD InfoNCE / C-learning ablation grid:
 * (categorical, softmax_normalized, n_squared) is TD InfoNCE and
 * (binary, exp_unnormalized, n) is C-learning.
 */
struct EstimatorConfig {
    LossFamily loss_family = LossFamily::categorical;
    WeightScheme weight_scheme = WeightScheme::softmax_normalized;
    NegativesScheme negatives_scheme = NegativesScheme::n_squared;
    int batch_size = 64;
    /// Representation dimension; 0 selects |S|.
    int repr_dim = 0;
    double learning_rate = 0.5;
    double ema_tau = 1.0;
    bool normalized = false;
    /// Initial inverse temperature, learned when `normalized` is set.
    double initial_scale = 10.0;
    /// Step size of the tabular successor-representation baseline.
    double sr_step_size = 0.05;
    std::uint64_t seed = 0;

    static EstimatorConfig c_learning();
    void validate() const;
};

/// Critic values are clamped to this magnitude before exponentiation.
inline constexpr double kExpClamp = 50.0;

/**
 * Tabular contrastive representations. `phi` rows are anchors ((s, a) or
 * (s, a, g) in the caller's layout), `psi` rows are future states. The
 * critic is f = scale · ⟨φ, ψ⟩ when normalized and ⟨φ, ψ⟩ otherwise.
 */
struct RepresentationPair {
    Matrix phi;
    Matrix psi;
    bool normalized = false;
    double scale = 1.0;

    int dim() const { return static_cast<int>(phi.cols()); }
    double critic_scale() const { return normalized ? scale : 1.0; }
    double critic(int anchor_row, int state) const {
        return critic_scale() * phi.row(anchor_row).dot(psi.row(state));
    }
    /// Full anchor × state critic table.
    Matrix critic_table() const { return critic_scale() * phi * psi.transpose(); }
    void normalize_rows();
};

struct OnlineAndTarget {
    RepresentationPair online;
    RepresentationPair target;
};

/// Entries i.i.d. uniform in [-0.05, 0.05], row-normalized when configured; target = online.
OnlineAndTarget init_representations(const EstimatorConfig& config, int num_anchor_rows,
                                     int num_states, std::uint64_t seed);

/// Gradient rows for the subset of table rows a batch touched.
struct SparseRows {
    std::vector<int> rows;
    Matrix values;

    /// Sums duplicate indices.
    static SparseRows accumulate(const std::vector<int>& index, const Matrix& per_sample);
    Matrix to_dense(int total_rows) const;
};

struct RepresentationGrad {
    SparseRows phi;
    SparseRows psi;
    double scale = 0.0;
};

struct LossAndGrad {
    double loss = 0.0;
    RepresentationGrad grad;
    /// Number of critic values clamped before exponentiation.
    int clamped = 0;
};

/// θ ← θ - lr ∇; touched rows are re-normalized in normalized mode.
void sgd_step(RepresentationPair& reps, const RepresentationGrad& grad, double learning_rate);

/// F[i][j] = scale · ⟨φ_i, ψ_j⟩ for equal-sized batches.
Matrix critic_matrix(const Matrix& phi_rows, const Matrix& psi_rows, double scale = 1.0);

/// Row-wise softmax with max subtraction.
Matrix row_softmax(const Matrix& logits);
Matrix row_log_softmax(const Matrix& logits);

/// W = N · row_softmax(F_w); every row sums to N.
Matrix softmax_importance_weights(const Matrix& f_w);

/// Critic matrices for one batch, exposed for diagnostics.
struct CriticMatrices {
    Matrix f_next;
    Matrix f_future;
    Matrix f_w;
    Matrix f_goal;
};

/**
 * One TD batch. Row i holds the anchor row of (s_i, a_i), the next state s'_i,
 * the anchor row of (s'_i, a'_i) with a'_i drawn from the evaluated policy, and
 * a future state drawn from the marginal. Columns of the critic matrices are
 * the other rows' next/future states.
 */
struct TdBatch {
    std::vector<int> anchor;
    std::vector<int> next_state;
    std::vector<int> next_anchor;
    std::vector<int> future;

    int size() const { return static_cast<int>(anchor.size()); }
};

/// Row i: anchor (s_i, a_i) and a future state from the same trajectory.
struct McBatch {
    std::vector<int> anchor;
    std::vector<int> future;

    int size() const { return static_cast<int>(anchor.size()); }
};

CriticMatrices td_critic_matrices(const RepresentationPair& online,
                                  const RepresentationPair& target, const TdBatch& batch);

/**
 * Temporal-difference contrastive loss under any point of the ablation grid.
 *
 * Categorical family:
 *   (1-γ) · mean_i[-log softmax(F_next)_ii] + γ · mean_{ij}[-W_ij log softmax(F_future)_ij]
 * where the second mean runs over the N² pairs (n_squared) or the N diagonal
 * pairs (n). Binary family:
 *   (1-γ) · mean[-log σ(F_next_ii)] + mean[γ W_ij (-log σ(F_future_ij)) - log(1-σ(F_future_ij))].
 * W comes from the target representations and is a constant for the gradient.
 */
LossAndGrad td_contrastive_loss_and_grad(const RepresentationPair& online,
                                         const RepresentationPair& target, const TdBatch& batch,
                                         double gamma, const EstimatorConfig& config);

/// Categorical family of td_contrastive_loss_and_grad.
LossAndGrad td_infonce_loss_and_grad(const RepresentationPair& online,
                                     const RepresentationPair& target, const TdBatch& batch,
                                     double gamma, const EstimatorConfig& config);

/// Binary family of td_contrastive_loss_and_grad.
LossAndGrad c_learning_loss_and_grad(const RepresentationPair& online,
                                     const RepresentationPair& target, const TdBatch& batch,
                                     double gamma, const EstimatorConfig& config);

/// mean_i[-log softmax(F)_ii] with F[i][j] = f(anchor_i, future_j).
LossAndGrad mc_infonce_loss_and_grad(const RepresentationPair& reps, const McBatch& batch,
                                     const EstimatorConfig& config);

// ---------------------------------------------------------------------------

struct SuccessorTable {
    Matrix m;  ///< (|S||A|) × |S|
    int num_actions = 0;
    double step_size = 0.05;

    static SuccessorTable uniform(int num_states, int num_actions, double step_size);
    OccupancyTable as_occupancy() const;
};

/// M(s,a) ← (1-α) M(s,a) + α [(1-γ) onehot(s') + γ M(s',a')]. Returns |TD error|₁.
double successor_td_update(SuccessorTable& table, const Transition& transition, int next_action,
                           double gamma, double step_size);

// ---------------------------------------------------------------------------

/// p̂(x|s,a) = p(x) e^{f(s,a,x)} / Σ_y p(y) e^{f(s,a,y)} for (s, a)-indexed representations.
OccupancyTable occupancy_from_critic(const RepresentationPair& reps, const Vector& marginal,
                                     int num_actions);

/// Same conversion applied to an arbitrary anchor × state critic table.
Matrix classifier_from_critic(const Matrix& critic, const Vector& marginal);

/// target ← (1-τ) target + τ online.
void ema_update(RepresentationPair& target, const RepresentationPair& online, double tau);

Matrix q_from_representations(const RepresentationPair& reps, const Vector& marginal,
                              const Vector& reward, int num_actions);

/// f*(s,a,x) = log p^π(x|s,a) - log p(x); -∞ where the occupancy is zero.
Matrix optimal_critic(const OccupancyTable& occupancy, const Vector& marginal);

/**
 * Exact-expectation InfoNCE losses. The anchor (s, a) is weighted by
 * `sa_weights`, and each softmax denominator and importance weight uses the
 * marginal expectation E_{p(y)}[e^{f}] in place of a finite batch sum.
 */
double mc_infonce_expected_loss(const OccupancyTable& occupancy, const Matrix& critic,
                                const Vector& marginal, const Vector& sa_weights);
double td_infonce_expected_loss(const TabularMdp& mdp, const TabularPolicy& policy,
                                const Matrix& critic, const Vector& marginal,
                                const Vector& sa_weights);

// ---------------------------------------------------------------------------
// Sampling and training

/// a' is resampled from `policy` at s' (SARSA-style); futures come from the marginal.
TdBatch sample_td_batch(const TransitionDataset& data, const TabularPolicy& policy, int n,
                        Rng& rng);

/// Future state at offset Δ ~ Geometric(1-γ) inside the record's episode (resampled past the end).
McBatch sample_mc_batch(const TransitionDataset& data, double gamma, int n, Rng& rng);

enum class EstimatorMethod { td_infonce, mc_infonce, c_learning, successor_representation };
const char* to_string(EstimatorMethod m);
EstimatorMethod parse_estimator_method(const std::string& s);

struct CurvePoint {
    long step = 0;
    double loss = 0.0;
    double occupancy_error = 0.0;
};

struct EstimatorRun {
    std::vector<CurvePoint> curve;
    OccupancyTable estimate;
    std::optional<RepresentationPair> reps;
    int clamped = 0;
};

struct TrainSchedule {
    long steps = 50000;
    long eval_interval = 1000;
};

/**
 * Trains one estimator on a fixed dataset for `schedule.steps` gradient steps,
 * evaluating against `truth` every `eval_interval` steps. The config's loss switches
 * are honored for the TD contrastive methods; `c_learning` forces the binary family.
 * Contrastive methods are evaluated on their EMA target copy, which is also the
 * returned `reps`.
 */
EstimatorRun train_estimator(EstimatorMethod method, const TabularMdp& mdp,
                             const TabularPolicy& policy, const TransitionDataset& data,
                             const EstimatorConfig& config, const TrainSchedule& schedule,
                             const OccupancyTable& truth);

/// CSV with header `step,loss,occupancy_error`.
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace occlab
