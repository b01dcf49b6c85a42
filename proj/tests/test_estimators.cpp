#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "occlab/estimators.hpp"
#include "occlab/random.hpp"
#include "fd_util.hpp"

using namespace occlab;
using namespace occlab::testing;

namespace {

TdBatch random_td_batch(int n, int anchors, int states, Rng& rng) {
    return {random_indices(n, anchors, rng), random_indices(n, states, rng), random_indices(n, anchors, rng),
            random_indices(n, states, rng)};
}

TabularMdp two_cycle(double gamma) {
    Matrix p(2, 2);
    p << 0, 1, 1, 0;
    return TabularMdp(2, 1, p, Vector::Constant(2, 0.5), gamma);
}

TabularMdp random_dense_mdp(int ns, int na, double gamma, Rng& rng) {
    Matrix p(ns * na, ns);
    for (int r = 0; r < ns * na; ++r) {
        for (int x = 0; x < ns; ++x) p(r, x) = rng.uniform(0.1, 1.0);
        p.row(r) /= p.row(r).sum();
    }
    return TabularMdp(ns, na, p, Vector::Constant(ns, 1.0 / ns), gamma);
}

}  // namespace

TEST(EstimatorConfig, Invariants) {
    EstimatorConfig c;
    EXPECT_NO_THROW(c.validate());
    c.batch_size = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = EstimatorConfig{};
    c.learning_rate = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = EstimatorConfig{};
    c.ema_tau = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    const EstimatorConfig cl = EstimatorConfig::c_learning();
    EXPECT_EQ(cl.loss_family, LossFamily::binary);
    EXPECT_EQ(cl.weight_scheme, WeightScheme::exp_unnormalized);
    EXPECT_EQ(cl.negatives_scheme, NegativesScheme::n);
    EXPECT_EQ(parse_loss_family(to_string(LossFamily::binary)), LossFamily::binary);
    EXPECT_THROW(parse_weight_scheme("bogus"), std::invalid_argument);
}

TEST(InitRepresentations, RangeNormalizationDeterminism) {
    EstimatorConfig c;
    c.repr_dim = 6;
    const OnlineAndTarget a = init_representations(c, 20, 7, 3);
    const OnlineAndTarget b = init_representations(c, 20, 7, 3);
    EXPECT_EQ(a.online.phi, b.online.phi);
    EXPECT_EQ(a.online.psi, b.online.psi);
    EXPECT_EQ(a.online.phi, a.target.phi);
    EXPECT_EQ(a.online.psi, a.target.psi);
    EXPECT_LE(a.online.phi.cwiseAbs().maxCoeff(), 0.05);
    c.normalized = true;
    const OnlineAndTarget n = init_representations(c, 20, 7, 3);
    for (Eigen::Index r = 0; r < n.online.phi.rows(); ++r) EXPECT_NEAR(n.online.phi.row(r).norm(), 1.0, 1e-9);
    for (Eigen::Index r = 0; r < n.online.psi.rows(); ++r) EXPECT_NEAR(n.online.psi.row(r).norm(), 1.0, 1e-9);
    c.repr_dim = 0;
    EXPECT_EQ(init_representations(c, 4, 9, 0).online.dim(), 9);
}

TEST(CriticMatrix, BasisOrthogonalityAndBruteForce) {
    Matrix e1 = Matrix::Zero(2, 3);
    e1.col(0).setOnes();
    EXPECT_TRUE(critic_matrix(e1, e1).isApproxToConstant(1.0));
    Matrix e2 = Matrix::Zero(2, 3);
    e2.col(1).setOnes();
    EXPECT_TRUE(critic_matrix(e1, e2).isZero(0.0));
    Rng rng(1);
    Matrix a(3, 4), b(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k) {
            a(i, k) = rng.uniform(-1, 1);
            b(i, k) = rng.uniform(-1, 1);
        }
    const Matrix f = critic_matrix(a, b, 2.5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 4; ++k) dot += a(i, k) * b(j, k);
            EXPECT_NEAR(f(i, j), 2.5 * dot, 1e-14);
        }
    EXPECT_THROW(critic_matrix(a, Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST(ImportanceWeights, HandValuesAndInvariants) {
    Matrix f(2, 3);
    f << std::log(2.0), 0, 0, 5, 5, 5;
    const Matrix w = softmax_importance_weights(f);
    EXPECT_NEAR(w(0, 0), 1.5, 1e-12);
    EXPECT_NEAR(w(0, 1), 0.75, 1e-12);
    EXPECT_NEAR(w(0, 2), 0.75, 1e-12);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(w(1, j), 1.0, 1e-12);
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + rng.index(30);
        Matrix g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = rng.uniform(-40, 40);
        const Matrix wg = softmax_importance_weights(g);
        EXPECT_TRUE((wg.array() > 0).all());
        for (int i = 0; i < n; ++i) EXPECT_NEAR(wg.row(i).sum(), n, 1e-9);
        Matrix shifted = g;
        for (int i = 0; i < n; ++i) shifted.row(i).array() += rng.uniform(-100, 100);
        EXPECT_LT((softmax_importance_weights(shifted) - wg).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(TdInfonce, ZeroRepresentationsGiveLogN) {
    for (int n : {2, 8, 64}) {
        RepresentationPair zero{Matrix::Zero(10, 4), Matrix::Zero(5, 4)};
        Rng rng(n);
        const TdBatch b = random_td_batch(n, 10, 5, rng);
        for (double gamma : {0.0, 0.5, 0.9}) {
            EXPECT_NEAR(td_infonce_loss_and_grad(zero, zero, b, gamma, EstimatorConfig{}).loss, std::log(n), 1e-12);
        }
        McBatch mb{b.anchor, b.future};
        EXPECT_NEAR(mc_infonce_loss_and_grad(zero, mb, EstimatorConfig{}).loss, std::log(n), 1e-12);
    }
}

TEST(TdInfonce, GammaZeroIsNextStateCrossEntropy) {
    Rng rng(4);
    const RepresentationPair reps = random_reps(10, 5, 4, false, rng);
    const RepresentationPair target = random_reps(10, 5, 4, false, rng);
    const TdBatch b = random_td_batch(8, 10, 5, rng);
    // Next-state term alone equals MC InfoNCE with next states as positives.
    const double mc = mc_infonce_loss_and_grad(reps, McBatch{b.anchor, b.next_state}, EstimatorConfig{}).loss;
    EXPECT_NEAR(td_infonce_loss_and_grad(reps, target, b, 0.0, EstimatorConfig{}).loss, mc, 1e-12);
}

TEST(TdInfonce, RejectsBadBatches) {
    Rng rng(5);
    const RepresentationPair reps = random_reps(10, 5, 4, false, rng);
    TdBatch b = random_td_batch(1, 10, 5, rng);
    EXPECT_THROW(td_infonce_loss_and_grad(reps, reps, b, 0.9, EstimatorConfig{}), std::invalid_argument);
    b = random_td_batch(4, 10, 5, rng);
    b.future.pop_back();
    EXPECT_THROW(td_infonce_loss_and_grad(reps, reps, b, 0.9, EstimatorConfig{}), std::invalid_argument);
    b = random_td_batch(4, 10, 5, rng);
    b.anchor[0] = 10;
    EXPECT_THROW(td_infonce_loss_and_grad(reps, reps, b, 0.9, EstimatorConfig{}), std::invalid_argument);
    EXPECT_THROW(mc_infonce_loss_and_grad(reps, McBatch{{0}, {0}}, EstimatorConfig{}), std::invalid_argument);
}

TEST(McInfonce, SaturatedClassifierHasNearZeroLoss) {
    RepresentationPair reps{Matrix(2, 2), Matrix(2, 2)};
    reps.phi << 10, 0, 0, 10;
    reps.psi << 1, -1, -1, 1;
    // f(0,0)=10, f(0,1)=-10, f(1,1)=10, f(1,0)=-10
    EXPECT_LT(mc_infonce_loss_and_grad(reps, McBatch{{0, 1}, {0, 1}}, EstimatorConfig{}).loss, 1e-8);
}

TEST(CLearning, ZeroCriticGivesTwoLn2) {
    RepresentationPair zero{Matrix::Zero(6, 3), Matrix::Zero(4, 3)};
    Rng rng(7);
    const TdBatch b = random_td_batch(8, 6, 4, rng);
    for (double gamma : {0.0, 0.3, 0.9})
        EXPECT_NEAR(c_learning_loss_and_grad(zero, zero, b, gamma, EstimatorConfig::c_learning()).loss,
                    2.0 * std::log(2.0), 1e-12);
}

TEST(CLearning, GammaZeroIsBinaryNceOnNextStates) {
    Rng rng(8);
    const RepresentationPair reps = random_reps(6, 4, 3, false, rng);
    const TdBatch b = random_td_batch(8, 6, 4, rng);
    const double loss = c_learning_loss_and_grad(reps, reps, b, 0.0, EstimatorConfig::c_learning()).loss;
    double expected = 0.0;
    for (int i = 0; i < 8; ++i) {
        const double fn = reps.critic(b.anchor[i], b.next_state[i]);
        const double ff = reps.critic(b.anchor[i], b.future[i]);
        expected += std::log1p(std::exp(-fn)) + std::log1p(std::exp(ff));
    }
    EXPECT_NEAR(loss, expected / 8, 1e-12);
}

// Every point of the ablation grid, both parameterizations, N in {2, 8, 32}, 20 batches each.
TEST(Gradients, TdContrastiveMatchesFiniteDifferences) {
    Rng rng(9);
    const int anchors = 12, states = 5, d = 3;
    int checked = 0;
    for (LossFamily fam : {LossFamily::categorical, LossFamily::binary})
        for (WeightScheme ws : {WeightScheme::softmax_normalized, WeightScheme::exp_unnormalized})
            for (NegativesScheme ns : {NegativesScheme::n_squared, NegativesScheme::n})
                for (int n : {2, 8, 32})
                    for (int trial = 0; trial < 20; ++trial) {
                        const bool normalized = trial % 2 == 1;
                        EstimatorConfig cfg;
                        cfg.loss_family = fam;
                        cfg.weight_scheme = ws;
                        cfg.negatives_scheme = ns;
                        const RepresentationPair online = random_reps(anchors, states, d, normalized, rng);
                        const RepresentationPair target = random_reps(anchors, states, d, normalized, rng);
                        const TdBatch b = random_td_batch(n, anchors, states, rng);
                        const double gamma = rng.uniform(0.1, 0.95);
                        const LossAndGrad lg = td_contrastive_loss_and_grad(online, target, b, gamma, cfg);
                        const double err = fd_relative_error(online, lg.grad, [&](const RepresentationPair& r) {
                            return td_contrastive_loss_and_grad(r, target, b, gamma, cfg).loss;
                        });
                        ASSERT_LT(err, 1e-4) << to_string(fam) << " " << to_string(ws) << " " << to_string(ns)
                                             << " N=" << n;
                        ++checked;
                    }
    EXPECT_EQ(checked, 2 * 2 * 2 * 3 * 20);
}

TEST(Gradients, McInfonceMatchesFiniteDifferences) {
    Rng rng(10);
    for (int n : {2, 8, 32})
        for (int trial = 0; trial < 20; ++trial) {
            const RepresentationPair reps = random_reps(12, 5, 3, trial % 2 == 1, rng);
            const McBatch b{random_indices(n, 12, rng), random_indices(n, 5, rng)};
            const LossAndGrad lg = mc_infonce_loss_and_grad(reps, b, EstimatorConfig{});
            const double err = fd_relative_error(reps, lg.grad, [&](const RepresentationPair& r) {
                return mc_infonce_loss_and_grad(r, b, EstimatorConfig{}).loss;
            });
            ASSERT_LT(err, 1e-4) << "N=" << n;
        }
}

TEST(Gradients, SmallStepDecreasesLossOnFixedBatch) {
    Rng rng(12);
    const RepresentationPair online = random_reps(12, 5, 3, false, rng);
    const RepresentationPair target = random_reps(12, 5, 3, false, rng);
    const TdBatch b = random_td_batch(16, 12, 5, rng);
    const LossAndGrad lg = td_infonce_loss_and_grad(online, target, b, 0.9, EstimatorConfig{});
    RepresentationPair stepped = online;
    sgd_step(stepped, lg.grad, 1e-3);
    EXPECT_LT(td_infonce_loss_and_grad(stepped, target, b, 0.9, EstimatorConfig{}).loss, lg.loss);
}

TEST(Gradients, ExpWeightsCountClamps) {
    RepresentationPair big{Matrix::Constant(4, 2, 10.0), Matrix::Constant(3, 2, 10.0)};
    const TdBatch b{{0, 1}, {0, 1}, {2, 3}, {1, 2}};
    const LossAndGrad lg = c_learning_loss_and_grad(big, big, b, 0.9, EstimatorConfig::c_learning());
    EXPECT_GT(lg.clamped, 0);
    EXPECT_TRUE(std::isfinite(lg.loss));
}

TEST(SgdStep, RenormalizesTouchedRows) {
    Rng rng(13);
    RepresentationPair reps = random_reps(6, 4, 3, true, rng);
    const TdBatch b = random_td_batch(4, 6, 4, rng);
    const LossAndGrad lg = td_infonce_loss_and_grad(reps, reps, b, 0.9, EstimatorConfig{});
    sgd_step(reps, lg.grad, 0.5);
    for (Eigen::Index r = 0; r < reps.phi.rows(); ++r) EXPECT_NEAR(reps.phi.row(r).norm(), 1.0, 1e-9);
    for (Eigen::Index r = 0; r < reps.psi.rows(); ++r) EXPECT_NEAR(reps.psi.row(r).norm(), 1.0, 1e-9);
    EXPECT_GT(reps.scale, 0.0);
}

TEST(SparseRows, AccumulatesDuplicates) {
    Matrix per(3, 2);
    per << 1, 2, 3, 4, 5, 6;
    const SparseRows s = SparseRows::accumulate({2, 0, 2}, per);
    const Matrix dense = s.to_dense(4);
    EXPECT_EQ(dense(2, 0), 6.0);
    EXPECT_EQ(dense(2, 1), 8.0);
    EXPECT_EQ(dense(0, 0), 3.0);
    EXPECT_EQ(dense(1, 0), 0.0);
}

TEST(SuccessorRepresentation, HandUpdateAndDegenerateSteps) {
    SuccessorTable t{Matrix::Zero(2, 2), 1, 1.0};
    successor_td_update(t, {0, 0, 1}, 0, 0.5, 1.0);
    EXPECT_DOUBLE_EQ(t.m(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(t.m(0, 1), 0.5);
    const Matrix before = t.m;
    successor_td_update(t, {1, 0, 0}, 0, 0.5, 0.0);
    EXPECT_EQ(t.m, before);
}

TEST(SuccessorRepresentation, ExactOccupancyIsFixedInExpectation) {
    const TabularMdp mdp = build_gridworld({3, 2, {}, 0.2}, 0.8);
    const TabularPolicy pi = TabularPolicy::uniform(6, 5);
    const OccupancyTable o = exact_occupancy(mdp, pi);
    const double alpha = 0.3;
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 5; ++a) {
            Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(6);
            for (int x = 0; x < 6; ++x)
                for (int b = 0; b < 5; ++b) {
                    const double p = mdp.prob(s, a, x) * pi.probs(x, b);
                    if (p == 0.0) continue;
                    SuccessorTable t{o.probs, 5, alpha};
                    successor_td_update(t, {s, a, x}, b, 0.8, alpha);
                    expected += p * t.m.row(mdp.sa_index(s, a));
                }
            EXPECT_LT((expected - o.probs.row(mdp.sa_index(s, a))).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(OccupancyFromCritic, HandValuesShiftInvarianceAndOptimum) {
    RepresentationPair r{Matrix(2, 2), Matrix(2, 2)};
    r.phi << std::log(2.0), 0, 0, 0;
    r.psi << 1, 0, 0, 1;
    const Vector half = Vector::Constant(2, 0.5);
    const OccupancyTable o = occupancy_from_critic(r, half, 1);
    EXPECT_NEAR(o.at(0, 0, 0), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(o.at(0, 0, 1), 1.0 / 3.0, 1e-12);

    Rng rng(14);
    Vector m(4);
    m << 0.1, 0.2, 0.3, 0.4;
    const Matrix constant = Matrix::Constant(6, 4, 3.7);
    const Matrix c = classifier_from_critic(constant, m);
    for (int i = 0; i < 6; ++i) EXPECT_LT((c.row(i).transpose() - m).cwiseAbs().maxCoeff(), 1e-12);

    Matrix f(6, 4);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 4; ++j) f(i, j) = rng.uniform(-30, 30);
    const Matrix base = classifier_from_critic(f, m);
    Matrix shifted = f;
    for (int i = 0; i < 6; ++i) shifted.row(i).array() += rng.uniform(-50, 50);
    EXPECT_LT((classifier_from_critic(shifted, m) - base).cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(base.row(i).sum(), 1.0, 1e-9);

    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.1}, 0.9);
    const OccupancyTable truth = exact_occupancy(mdp, TabularPolicy::uniform(9, 5));
    Vector marg = Vector::Constant(9, 1.0 / 9);
    const Matrix fstar = optimal_critic(truth, marg);
    EXPECT_LT((classifier_from_critic(fstar, marg) - truth.probs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EmaUpdate, FullCopyHalfStepAndShapes) {
    Rng rng(15);
    RepresentationPair online = random_reps(3, 2, 2, false, rng);
    RepresentationPair target{Matrix::Zero(3, 2), Matrix::Zero(2, 2)};
    ema_update(target, online, 0.5);
    EXPECT_LT((target.phi - online.phi / 2).cwiseAbs().maxCoeff(), 1e-15);
    ema_update(target, online, 1.0);
    EXPECT_EQ(target.phi, online.phi);
    EXPECT_THROW(ema_update(target, online, 0.0), std::invalid_argument);
    RepresentationPair wrong{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
    EXPECT_THROW(ema_update(wrong, online, 0.5), std::invalid_argument);

    RepresentationPair unit = random_reps(3, 2, 2, true, rng);
    RepresentationPair zero = unit;
    zero.phi.setZero();
    zero.psi.setZero();
    ema_update(zero, unit, 0.5);
    EXPECT_LT((zero.phi - unit.phi).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QFromRepresentations, ConstantRewardAndExactCritic) {
    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.1}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(9, 5);
    const OccupancyTable truth = exact_occupancy(mdp, pi);
    Vector marg = Vector::Constant(9, 1.0 / 9);
    // Exact critic as rank-|S||A| representations: phi = f*, psi = I.
    RepresentationPair r{optimal_critic(truth, marg), Matrix::Identity(9, 9)};
    for (int g = 0; g < 9; ++g)
        EXPECT_LT((q_from_representations(r, marg, Vector::Unit(9, g), 5) - exact_q(mdp, pi, Vector::Unit(9, g)))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-9);
    EXPECT_LT((q_from_representations(r, marg, Vector::Ones(9), 5).array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(ExpectedLosses, TdEqualsMcAtOptimalCritic) {
    Rng rng(16);
    for (int ns : {2, 3})
        for (int trial = 0; trial < 5; ++trial) {
            const TabularMdp mdp = random_dense_mdp(ns, 2, rng.uniform(0.2, 0.95), rng);
            TabularPolicy pi{Matrix(ns, 2)};
            for (int s = 0; s < ns; ++s) {
                pi.probs(s, 0) = rng.uniform(0.1, 0.9);
                pi.probs(s, 1) = 1.0 - pi.probs(s, 0);
            }
            const OccupancyTable o = exact_occupancy(mdp, pi);
            Vector marg(ns);
            for (int s = 0; s < ns; ++s) marg(s) = rng.uniform(0.2, 1.0);
            marg /= marg.sum();
            Vector w(ns * 2);
            for (int i = 0; i < ns * 2; ++i) w(i) = rng.uniform(0.2, 1.0);
            w /= w.sum();
            const Matrix fstar = optimal_critic(o, marg);
            const double mc = mc_infonce_expected_loss(o, fstar, marg, w);
            const double td = td_infonce_expected_loss(mdp, pi, fstar, marg, w);
            EXPECT_NEAR(td, mc, 1e-9);
            // Away from the optimum the two objectives differ.
            Matrix perturbed = fstar;
            perturbed(0, 0) += 0.5;
            EXPECT_GT(std::abs(td_infonce_expected_loss(mdp, pi, perturbed, marg, w) -
                               mc_infonce_expected_loss(o, perturbed, marg, w)),
                      1e-6);
        }
}

TEST(TrainEstimator, TdConvergesOnSmallGrid) {
    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.0}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(9, 5);
    const OccupancyTable truth = exact_occupancy(mdp, pi);
    const TransitionDataset data = sample_transitions(mdp, pi, 50000, 100, 1);
    EstimatorConfig cfg;
    cfg.learning_rate = 2.0;
    cfg.ema_tau = 0.01;
    const EstimatorRun run =
        train_estimator(EstimatorMethod::td_infonce, mdp, pi, data, cfg, {10000, 2500}, truth);
    EXPECT_EQ(run.curve.size(), 4u);
    EXPECT_LT(occupancy_error(run.estimate, truth), 0.01);
    run.estimate.validate();
    ASSERT_TRUE(run.reps.has_value());
    const EstimatorRun again =
        train_estimator(EstimatorMethod::td_infonce, mdp, pi, data, cfg, {10000, 2500}, truth);
    EXPECT_EQ(run.estimate.probs, again.estimate.probs);
}

TEST(TrainEstimator, TwoCycleQRecovery) {
    const TabularMdp mdp = two_cycle(0.5);
    const TabularPolicy pi = TabularPolicy::uniform(2, 1);
    const OccupancyTable truth = exact_occupancy(mdp, pi);
    const TransitionDataset data = sample_transitions(mdp, pi, 2000, 20, 4);
    EstimatorConfig cfg;
    cfg.ema_tau = 0.05;
    const EstimatorRun run = train_estimator(EstimatorMethod::td_infonce, mdp, pi, data, cfg, {3000, 1000}, truth);
    for (int g = 0; g < 2; ++g) {
        const Matrix q = q_from_representations(*run.reps, data.empirical_marginal, Vector::Unit(2, g), 1);
        EXPECT_LT((q - exact_q(mdp, pi, Vector::Unit(2, g))).cwiseAbs().maxCoeff(), 0.05);
    }
}

TEST(TrainEstimator, SuccessorRepresentationAndMonteCarloRun) {
    const TabularMdp mdp = build_gridworld({2, 2, {}, 0.0}, 0.8);
    const TabularPolicy pi = TabularPolicy::uniform(4, 5);
    const OccupancyTable truth = exact_occupancy(mdp, pi);
    const TransitionDataset data = sample_transitions(mdp, pi, 5000, 50, 2);
    EstimatorConfig cfg;
    cfg.sr_step_size = 0.05;
    for (EstimatorMethod m : {EstimatorMethod::successor_representation, EstimatorMethod::mc_infonce,
                              EstimatorMethod::c_learning}) {
        const EstimatorRun run = train_estimator(m, mdp, pi, data, cfg, {2000, 1000}, truth);
        EXPECT_LT(occupancy_error(run.estimate, truth), 0.05) << to_string(m);
    }
    EXPECT_EQ(parse_estimator_method("successor_representation"), EstimatorMethod::successor_representation);
    EXPECT_THROW(parse_estimator_method("bogus"), std::invalid_argument);
}

TEST(CurveCsv, Header) {
    const std::string csv = curve_csv({{10, 1.5, 0.25}});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,loss,occupancy_error");
}
