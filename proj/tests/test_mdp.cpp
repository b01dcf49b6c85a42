#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "occlab/mdp.hpp"
#include "occlab/random.hpp"

using namespace occlab;

namespace {

TabularMdp two_cycle(double gamma) {
    Matrix p(2, 2);
    p << 0, 1, 1, 0;
    return TabularMdp(2, 1, p, Vector::Constant(2, 0.5), gamma);
}

// Σ_{t=1..T} (1-γ) γ^{t-1} p_t computed by explicit state-distribution propagation.
OccupancyTable power_series(const TabularMdp& mdp, const TabularPolicy& pi, int horizon) {
    const int ns = mdp.num_states(), na = mdp.num_actions();
    OccupancyTable out{ns, na, Matrix::Zero(ns * na, ns)};
    const double g = mdp.discount();
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) {
            Eigen::RowVectorXd dist = mdp.transition().row(mdp.sa_index(s, a));
            double w = 1.0 - g;
            for (int t = 1; t <= horizon; ++t) {
                out.probs.row(mdp.sa_index(s, a)) += w * dist;
                Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(ns);
                for (int x = 0; x < ns; ++x)
                    for (int b = 0; b < na; ++b)
                        next += dist(x) * pi.probs(x, b) * mdp.transition().row(mdp.sa_index(x, b));
                dist = next;
                w *= g;
            }
        }
    }
    return out;
}

TabularPolicy random_policy(int ns, int na, Rng& rng) {
    TabularPolicy p{Matrix(ns, na)};
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < na; ++a) p.probs(s, a) = rng.uniform(0.05, 1.0);
        p.probs.row(s) /= p.probs.row(s).sum();
    }
    return p;
}

OccupancyTable random_classifier(int ns, int na, Rng& rng) {
    OccupancyTable c{ns, na, Matrix(ns * na, ns)};
    for (int r = 0; r < ns * na; ++r) {
        for (int x = 0; x < ns; ++x) c.probs(r, x) = rng.uniform();
        c.probs.row(r) /= c.probs.row(r).sum();
    }
    return c;
}

}  // namespace

TEST(TabularMdp, RejectsInvalidModels) {
    Matrix p(2, 2);
    p << 0.5, 0.5, 1.0, 0.0;
    EXPECT_THROW(TabularMdp(2, 1, p, Vector::Constant(2, 0.5), 1.0), std::invalid_argument);
    EXPECT_THROW(TabularMdp(2, 1, p, Vector::Constant(2, 0.5), 0.0), std::invalid_argument);
    EXPECT_THROW(TabularMdp(2, 1, p, Vector::Constant(2, 0.4), 0.9), std::invalid_argument);
    Matrix bad = p;
    bad(0, 0) = 0.6;
    EXPECT_THROW(TabularMdp(2, 1, bad, Vector::Constant(2, 0.5), 0.9), std::invalid_argument);
    bad(0, 0) = -0.5;
    bad(0, 1) = 1.5;
    EXPECT_THROW(TabularMdp(2, 1, bad, Vector::Constant(2, 0.5), 0.9), std::invalid_argument);
}

TEST(Gridworld, SingleCellIsSelfLoop) {
    const TabularMdp mdp = build_gridworld({1, 1, {}, 0.0}, 0.9);
    ASSERT_EQ(mdp.num_states(), 1);
    ASSERT_EQ(mdp.num_actions(), 5);
    for (int a = 0; a < 5; ++a) EXPECT_DOUBLE_EQ(mdp.prob(0, a, 0), 1.0);
}

TEST(Gridworld, DeterministicMoveRight) {
    const TabularMdp mdp = build_gridworld({2, 1, {}, 0.0}, 0.9);
    EXPECT_DOUBLE_EQ(mdp.prob(0, static_cast<int>(GridAction::right), 1), 1.0);
    EXPECT_DOUBLE_EQ(mdp.prob(0, static_cast<int>(GridAction::left), 0), 1.0);
}

TEST(Gridworld, SlipOutcomesMatchEnumeration) {
    const double eps = 0.4;
    const TabularMdp mdp = build_gridworld({2, 1, {}, eps}, 0.9);
    // Intended move with 1-ε, otherwise one of 5 actions uniformly; only "right" reaches cell 1
    // from cell 0 on a 2×1 strip.
    double to_one = 1.0 - eps;
    for (int a = 0; a < 5; ++a) to_one += eps / 5.0 * (a == static_cast<int>(GridAction::right) ? 1.0 : 0.0);
    EXPECT_NEAR(to_one, 0.68, 1e-15);
    EXPECT_NEAR(mdp.prob(0, static_cast<int>(GridAction::right), 1), to_one, 1e-12);
    EXPECT_NEAR(mdp.prob(0, static_cast<int>(GridAction::right), 0), 1.0 - to_one, 1e-12);
}

TEST(Gridworld, WallsBlockMovesAndAreNotStates) {
    GridworldSpec spec{3, 1, {Cell{1, 0}}, 0.0};
    const GridLayout layout(spec);
    EXPECT_EQ(layout.num_states(), 2);
    EXPECT_EQ(layout.state_of(Cell{1, 0}), -1);
    const int s0 = layout.state_of(Cell{0, 0});
    EXPECT_EQ(layout.step(s0, GridAction::right), s0);
    const TabularMdp mdp = build_gridworld(spec, 0.9);
    EXPECT_DOUBLE_EQ(mdp.prob(s0, static_cast<int>(GridAction::right), s0), 1.0);
}

TEST(Gridworld, RejectsDegenerateSpecs) {
    EXPECT_THROW(build_gridworld({1, 1, {Cell{0, 0}}, 0.0}, 0.9), std::invalid_argument);
    EXPECT_THROW(build_gridworld({2, 2, {}, 1.0}, 0.9), std::invalid_argument);
    EXPECT_THROW(build_gridworld({0, 2, {}, 0.0}, 0.9), std::invalid_argument);
}

TEST(Gridworld, BfsDistancesOnOpenGrid) {
    const GridLayout layout({5, 5, {}, 0.0});
    const std::vector<int> d = layout.bfs_distances(0);
    for (int s = 0; s < layout.num_states(); ++s) {
        const Cell c = layout.cell_of(s);
        EXPECT_EQ(d[s], c.x + c.y);
    }
}

TEST(Gridworld, RenderUsesMarkers) {
    const GridLayout layout({3, 2, {Cell{2, 1}}, 0.0});
    const std::string text = layout.render_path({0, 1, 2}, 0, 2);
    EXPECT_NE(text.find('X'), std::string::npos);
    EXPECT_NE(text.find('*'), std::string::npos);
    EXPECT_NE(text.find('.'), std::string::npos);
    EXPECT_NE(text.find('#'), std::string::npos);
}

TEST(ExactOccupancy, SelfLoopIsOne) {
    Matrix p(1, 1);
    p << 1.0;
    const TabularMdp mdp(1, 1, p, Vector::Ones(1), 0.9);
    const OccupancyTable o = exact_occupancy(mdp, TabularPolicy::uniform(1, 1));
    EXPECT_NEAR(o.at(0, 0, 0), 1.0, 1e-12);
}

TEST(ExactOccupancy, TwoCycleGeometricSeries) {
    const TabularMdp mdp = two_cycle(0.5);
    const OccupancyTable o = exact_occupancy(mdp, TabularPolicy::uniform(2, 1));
    // (1-γ) Σ_{t odd} γ^{t-1} = (1-γ) / (1-γ²) = 1 / (1+γ)
    double odd = 0.0;
    for (int t = 1; t < 200; t += 2) odd += 0.5 * std::pow(0.5, t - 1);
    EXPECT_NEAR(o.at(0, 0, 1), odd, 1e-12);
    EXPECT_NEAR(o.at(0, 0, 1), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(o.at(0, 0, 0), 1.0 / 3.0, 1e-12);
    const OccupancyTable ps = power_series(mdp, TabularPolicy::uniform(2, 1), 50);
    EXPECT_NEAR(ps.at(0, 0, 1), 2.0 / 3.0, 1e-12);
}

TEST(ExactOccupancy, SmallDiscountApproachesTransition) {
    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.1}, 1e-6);
    const OccupancyTable o = exact_occupancy(mdp, TabularPolicy::uniform(9, 5));
    EXPECT_LT((o.probs - mdp.transition()).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ExactOccupancy, MatchesTruncatedPowerSeriesWithinTailBound) {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const double gamma = rng.uniform(0.3, 0.95);
        const TabularMdp mdp = build_gridworld({3, 2, {}, rng.uniform(0.0, 0.5)}, gamma);
        const TabularPolicy pi = random_policy(mdp.num_states(), mdp.num_actions(), rng);
        const OccupancyTable o = exact_occupancy(mdp, pi);
        for (int horizon : {1, 5, 20, 60}) {
            const OccupancyTable ps = power_series(mdp, pi, horizon);
            EXPECT_LE(sup_norm_distance(o, ps), std::pow(gamma, horizon) + 1e-12) << "T=" << horizon;
        }
        o.validate();
    }
}

TEST(InfonceBellman, FixedPointIsExactOccupancy) {
    const TabularMdp mdp = build_gridworld({5, 5, {}, 0.1}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(25, 5);
    const OccupancyTable o = exact_occupancy(mdp, pi);
    EXPECT_LT(sup_norm_distance(apply_infonce_bellman(mdp, pi, o), o), 1e-12);
}

TEST(InfonceBellman, TwoCycleFromUniform) {
    const TabularMdp mdp = two_cycle(0.5);
    const OccupancyTable c{2, 1, Matrix::Constant(2, 2, 0.5)};
    const OccupancyTable t = apply_infonce_bellman(mdp, TabularPolicy::uniform(2, 1), c);
    EXPECT_NEAR(t.at(0, 0, 0), 0.25, 1e-15);
    EXPECT_NEAR(t.at(0, 0, 1), 0.75, 1e-15);
}

TEST(InfonceBellman, IsGammaContractionAndConverges) {
    Rng rng(5);
    const TabularMdp mdp = build_gridworld({4, 3, {Cell{1, 1}}, 0.2}, 0.8);
    const TabularPolicy pi = random_policy(mdp.num_states(), 5, rng);
    const OccupancyTable truth = exact_occupancy(mdp, pi);
    for (int trial = 0; trial < 50; ++trial) {
        const OccupancyTable c1 = random_classifier(mdp.num_states(), 5, rng);
        const OccupancyTable c2 = random_classifier(mdp.num_states(), 5, rng);
        const OccupancyTable t1 = apply_infonce_bellman(mdp, pi, c1);
        const OccupancyTable t2 = apply_infonce_bellman(mdp, pi, c2);
        EXPECT_LE(sup_norm_distance(t1, t2), 0.8 * sup_norm_distance(c1, c2) + 1e-12);
        t1.validate();
    }
    OccupancyTable c = random_classifier(mdp.num_states(), 5, rng);
    const double initial = sup_norm_distance(c, truth);
    for (int k = 1; k <= 60; ++k) {
        c = apply_infonce_bellman(mdp, pi, c);
        EXPECT_LE(sup_norm_distance(c, truth), std::pow(0.8, k) * initial + 1e-12);
    }
}

TEST(ExactQ, ConstantRewardsAndOneHotGoals) {
    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.0}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(9, 5);
    EXPECT_LT((exact_q(mdp, pi, Vector::Ones(9)).array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LT(exact_q(mdp, pi, Vector::Zero(9)).cwiseAbs().maxCoeff(), 1e-15);
    const OccupancyTable o = exact_occupancy(mdp, pi);
    for (int g = 0; g < 9; ++g) {
        const Matrix q = exact_q(mdp, pi, Vector::Unit(9, g));
        for (int s = 0; s < 9; ++s)
            for (int a = 0; a < 5; ++a) EXPECT_NEAR(q(s, a), o.at(s, a, g), 1e-12);
    }
    EXPECT_NEAR(exact_q(two_cycle(0.5), TabularPolicy::uniform(2, 1), Vector::Unit(2, 1))(0, 0), 2.0 / 3.0,
                1e-12);
}

TEST(OccupancyError, IdentitySymmetryAndHandSum) {
    Matrix onehot(4, 2);
    onehot << 1, 0, 0, 1, 0, 1, 1, 0;
    const OccupancyTable truth{2, 2, onehot};
    const OccupancyTable uniform{2, 2, Matrix::Constant(4, 2, 0.5)};
    EXPECT_DOUBLE_EQ(occupancy_error(truth, truth), 0.0);
    // 8 entries each off by 0.5 → 4 / 8
    EXPECT_DOUBLE_EQ(occupancy_error(uniform, truth), 0.5);
    EXPECT_DOUBLE_EQ(occupancy_error(truth, uniform), occupancy_error(uniform, truth));
    EXPECT_THROW(occupancy_error(truth, OccupancyTable{2, 1, Matrix::Constant(2, 2, 0.5)}),
                 std::invalid_argument);
}

TEST(SampleTransitions, DeterministicTwoCycle) {
    Matrix p(2, 2);
    p << 0, 1, 1, 0;
    Vector p0(2);
    p0 << 1.0, 0.0;
    const TabularMdp mdp(2, 1, p, p0, 0.9);
    const TransitionDataset d = sample_transitions(mdp, TabularPolicy::uniform(2, 1), 4, 4, 3);
    ASSERT_EQ(d.size(), 4u);
    const std::vector<Transition> expected{{0, 0, 1}, {1, 0, 0}, {0, 0, 1}, {1, 0, 0}};
    EXPECT_EQ(d.records, expected);
    EXPECT_NEAR(d.empirical_marginal(0), 0.5, 1e-15);
}

TEST(SampleTransitions, SelfLoopMarginalAndDegenerateCount) {
    Matrix p(1, 1);
    p << 1.0;
    const TabularMdp mdp(1, 1, p, Vector::Ones(1), 0.9);
    const TransitionDataset d = sample_transitions(mdp, TabularPolicy::uniform(1, 1), 10, 3, 0);
    EXPECT_DOUBLE_EQ(d.empirical_marginal(0), 1.0);
    EXPECT_THROW(sample_transitions(mdp, TabularPolicy::uniform(1, 1), 0, 3, 0), std::invalid_argument);
}

TEST(SampleTransitions, DeterministicGivenSeedAndConsistent) {
    const TabularMdp mdp = build_gridworld({4, 4, {}, 0.3}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(16, 5);
    const TransitionDataset a = sample_transitions(mdp, pi, 3000, 100, 42);
    const TransitionDataset b = sample_transitions(mdp, pi, 3000, 100, 42);
    const TransitionDataset c = sample_transitions(mdp, pi, 3000, 100, 43);
    EXPECT_EQ(a.records, b.records);
    EXPECT_NE(a.records, c.records);
    EXPECT_EQ(a.episodes.size(), 30u);
    EXPECT_NO_THROW(a.check_consistent(mdp));
    // Marginal equals normalized next-state counts.
    Vector counts = Vector::Zero(16);
    for (const Transition& t : a.records) counts(t.s_next) += 1.0;
    EXPECT_LT((counts / counts.sum() - a.empirical_marginal).cwiseAbs().maxCoeff(), 1e-15);
    TransitionDataset broken = a;
    broken.records[0].s_next = (broken.records[0].s + 7) % 16;
    const GridLayout layout({4, 4, {}, 0.0});
    if (mdp.prob(broken.records[0].s, broken.records[0].a, broken.records[0].s_next) == 0.0)
        EXPECT_THROW(broken.check_consistent(mdp), std::invalid_argument);
}

TEST(SampleTransitions, NextStateFrequenciesPassChiSquare) {
    const TabularMdp mdp = build_gridworld({3, 3, {}, 0.3}, 0.9);
    const TabularPolicy pi = TabularPolicy::uniform(9, 5);
    const TransitionDataset d = sample_transitions(mdp, pi, 100000, 100, 7);
    Matrix counts = Matrix::Zero(45, 9);
    for (const Transition& t : d.records) counts(mdp.sa_index(t.s, t.a), t.s_next) += 1.0;
    double stat = 0.0;
    int dof = 0;
    for (int r = 0; r < 45; ++r) {
        const double n = counts.row(r).sum();
        int support = 0;
        for (int x = 0; x < 9; ++x) {
            const double expect = n * mdp.transition()(r, x);
            if (expect == 0.0) {
                EXPECT_EQ(counts(r, x), 0.0);
                continue;
            }
            stat += (counts(r, x) - expect) * (counts(r, x) - expect) / expect;
            ++support;
        }
        dof += support - 1;
    }
    // Wilson-Hilferty upper 0.001 quantile (z = 3.090).
    const double k = dof;
    const double crit = k * std::pow(1.0 - 2.0 / (9 * k) + 3.090 * std::sqrt(2.0 / (9 * k)), 3);
    EXPECT_LT(stat, crit) << "dof " << dof;
}

TEST(OccupancyCsv, HeaderAndRows) {
    const OccupancyTable o = exact_occupancy(two_cycle(0.5), TabularPolicy::uniform(2, 1));
    const std::string csv = occupancy_csv(o);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "s,a,s_future,p");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 4);
}
