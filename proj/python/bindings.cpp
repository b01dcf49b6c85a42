#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "occlab/cli.hpp"
#include "occlab/config.hpp"
#include "occlab/mdp.hpp"

namespace py = pybind11;
using namespace occlab;

namespace {

TabularPolicy policy_or_uniform(const TabularMdp& mdp, const std::optional<Matrix>& policy) {
    if (!policy) return TabularPolicy::uniform(mdp.num_states(), mdp.num_actions());
    TabularPolicy p{*policy};
    p.validate();
    return p;
}

TabularMdp gridworld(int width, int height, const std::vector<std::pair<int, int>>& walls, double slip_prob,
                     double gamma) {
    GridworldSpec spec{width, height, {}, slip_prob};
    for (const auto& [x, y] : walls) spec.walls.push_back({x, y});
    return build_gridworld(spec, gamma);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tabular occupancy-measure estimation.";

    m.def(
        "exact_occupancy",
        [](const Matrix& transition, const Vector& initial, int num_actions, double gamma,
           const std::optional<Matrix>& policy) {
            const int ns = static_cast<int>(transition.cols());
            const TabularMdp mdp(ns, num_actions, transition, initial, gamma);
            return exact_occupancy(mdp, policy_or_uniform(mdp, policy)).probs;
        },
        py::arg("transition"), py::arg("initial"), py::arg("num_actions"), py::arg("gamma"),
        py::arg("policy") = py::none(),
        "Rows s*|A|+a hold p(s_future | s, a). `transition` has the same row layout.");

    m.def(
        "gridworld_transition",
        [](int width, int height, const std::vector<std::pair<int, int>>& walls, double slip_prob) {
            return gridworld(width, height, walls, slip_prob, 0.5).transition();
        },
        py::arg("width") = 5, py::arg("height") = 5, py::arg("walls") = std::vector<std::pair<int, int>>{},
        py::arg("slip_prob") = 0.0);

    m.def(
        "gridworld_occupancy",
        [](int width, int height, const std::vector<std::pair<int, int>>& walls, double slip_prob, double gamma,
           const std::optional<Matrix>& policy) {
            const TabularMdp mdp = gridworld(width, height, walls, slip_prob, gamma);
            return exact_occupancy(mdp, policy_or_uniform(mdp, policy)).probs;
        },
        py::arg("width") = 5, py::arg("height") = 5, py::arg("walls") = std::vector<std::pair<int, int>>{},
        py::arg("slip_prob") = 0.0, py::arg("gamma") = 0.9, py::arg("policy") = py::none());

    m.def(
        "occupancy_error",
        [](const Matrix& estimate, const Matrix& truth) {
            if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
                throw std::invalid_argument("occupancy_error: shape mismatch");
            return (estimate - truth).cwiseAbs().mean();
        },
        py::arg("estimate"), py::arg("truth"));

    m.def(
        "exact_q",
        [](const Matrix& transition, const Vector& initial, int num_actions, double gamma, const Vector& reward,
           const std::optional<Matrix>& policy) {
            const TabularMdp mdp(static_cast<int>(transition.cols()), num_actions, transition, initial, gamma);
            return exact_q(mdp, policy_or_uniform(mdp, policy), reward);
        },
        py::arg("transition"), py::arg("initial"), py::arg("num_actions"), py::arg("gamma"), py::arg("reward"),
        py::arg("policy") = py::none());

    m.def(
        "default_config", [] { return default_config().dump(); },
        "The full config schema with defaults, as a JSON string.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"occlab"};
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line entry point; returns (exit_code, stdout, stderr).");
}
