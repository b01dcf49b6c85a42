#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "occlab/estimators.hpp"
#include "occlab/random.hpp"

namespace occlab::testing {

inline RepresentationPair random_reps(int anchors, int states, int d, bool normalized, Rng& rng, double spread = 1.0) {
    RepresentationPair r;
    r.phi.resize(anchors, d);
    r.psi.resize(states, d);
    for (int i = 0; i < anchors; ++i)
        for (int k = 0; k < d; ++k) r.phi(i, k) = rng.uniform(-spread, spread);
    for (int i = 0; i < states; ++i)
        for (int k = 0; k < d; ++k) r.psi(i, k) = rng.uniform(-spread, spread);
    r.normalized = normalized;
    r.scale = normalized ? rng.uniform(1.0, 3.0) : 1.0;
    if (normalized) r.normalize_rows();
    return r;
}

inline std::vector<int> random_indices(int n, int range, Rng& rng) {
    std::vector<int> v(n);
    for (int& x : v) x = rng.index(range);
    return v;
}

using LossFn = std::function<double(const RepresentationPair&)>;

// Central differences over every phi/psi entry (and the scale when normalized),
// compared with the analytic gradient as one flat vector.
inline double fd_relative_error(const RepresentationPair& reps, const RepresentationGrad& grad, const LossFn& loss) {
    const double h = 1e-5;
    const Matrix g_phi = grad.phi.to_dense(static_cast<int>(reps.phi.rows()));
    const Matrix g_psi = grad.psi.to_dense(static_cast<int>(reps.psi.rows()));
    double diff2 = 0.0, norm2 = 0.0;
    auto accumulate = [&](double analytic, double numeric) {
        diff2 += (analytic - numeric) * (analytic - numeric);
        norm2 += numeric * numeric;
    };
    RepresentationPair work = reps;
    for (Eigen::Index i = 0; i < reps.phi.rows(); ++i)
        for (Eigen::Index k = 0; k < reps.phi.cols(); ++k) {
            work.phi(i, k) = reps.phi(i, k) + h;
            const double up = loss(work);
            work.phi(i, k) = reps.phi(i, k) - h;
            const double down = loss(work);
            work.phi(i, k) = reps.phi(i, k);
            accumulate(g_phi(i, k), (up - down) / (2 * h));
        }
    for (Eigen::Index i = 0; i < reps.psi.rows(); ++i)
        for (Eigen::Index k = 0; k < reps.psi.cols(); ++k) {
            work.psi(i, k) = reps.psi(i, k) + h;
            const double up = loss(work);
            work.psi(i, k) = reps.psi(i, k) - h;
            const double down = loss(work);
            work.psi(i, k) = reps.psi(i, k);
            accumulate(g_psi(i, k), (up - down) / (2 * h));
        }
    if (reps.normalized) {
        work.scale = reps.scale + h;
        const double up = loss(work);
        work.scale = reps.scale - h;
        const double down = loss(work);
        accumulate(grad.scale, (up - down) / (2 * h));
    }
    // The floor keeps degenerate batches (all anchors equal, zero gradient) from dividing noise by noise.
    return std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-6);
}

}  // namespace occlab::testing
