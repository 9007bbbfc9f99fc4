// Brute-force oracles for the learning code: tabular value iteration,
// semi-MDP option-value iteration, and the closed-form successor
// representation (I - gamma P)^-1. Exact arithmetic where feasible,
// documented tolerances otherwise.
#pragma once

#include <string>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::harness {

using Matrix = std::vector<std::vector<double>>;

// Gauss-Jordan inverse; throws NumericError on a singular matrix.
Matrix invert(const Matrix& a);

// V = rbar + gamma P V, iterated to max-residual < tol.
std::vector<double> value_iterate(const Matrix& p, const std::vector<double>& rbar, double gamma,
                                  double tol = 1e-12);

// Decision-time discounted variant V = gamma (rbar + P V), matching the
// segment-return convention used by the PPO critic targets.
std::vector<double> value_iterate_decision_time(const Matrix& p, const std::vector<double>& rbar,
                                                double gamma, double tol = 1e-12);

// Tabular semi-MDP with one state-transition chain per option.
struct TabularOptionModel {
    double gamma = 0.99;
    std::vector<Matrix> p;                    // [option][s][s']
    std::vector<std::vector<double>> r;       // [option][s] expected one-step reward
    std::vector<std::vector<double>> beta;    // [option][s'] termination on arrival
};

// Fixed point of
//   Q(s,w) = r_w(s) + gamma * sum_s' P_w(s,s') U(s', w)
//   U(s',w) = (1 - beta_w(s')) Q(s',w) + beta_w(s') max_w' Q(s',w')
// iterated to max-residual < tol. Refuses state-option spaces above 1e4.
std::vector<std::vector<double>> option_value_iterate(const TabularOptionModel& model,
                                                      double tol = 1e-10,
                                                      int max_iters = 1000000);

// Successor representation rows M = (I - gamma P)^-1 for a policy chain P.
Matrix sr_matrix(const Matrix& p, double gamma);

// JSON serialization for the `oracle` CLI subcommand:
// {"gamma": g, "options": [{"p": [[..]], "r": [..], "beta": [..]}, ...]}
TabularOptionModel load_option_model(const std::string& path);
std::string option_values_to_json(const std::vector<std::vector<double>>& q);

}  // namespace optlab::harness
