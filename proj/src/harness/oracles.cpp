#include "optlab/harness/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace optlab::harness {

Matrix invert(const Matrix& a) {
    const size_t n = a.size();
    Matrix aug(n, std::vector<double>(2 * n, 0.0));
    for (size_t i = 0; i < n; ++i) {
        if (a[i].size() != n) throw ConfigError("invert: matrix not square");
        for (size_t j = 0; j < n; ++j) aug[i][j] = a[i][j];
        aug[i][n + i] = 1.0;
    }
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(aug[r][col]) > std::abs(aug[pivot][col])) pivot = r;
        if (std::abs(aug[pivot][col]) < 1e-14) throw NumericError("invert: singular matrix");
        std::swap(aug[col], aug[pivot]);
        const double inv = 1.0 / aug[col][col];
        for (double& x : aug[col]) x *= inv;
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double factor = aug[r][col];
            if (factor == 0.0) continue;
            for (size_t j = 0; j < 2 * n; ++j) aug[r][j] -= factor * aug[col][j];
        }
    }
    Matrix out(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) out[i][j] = aug[i][n + j];
    return out;
}

namespace {
std::vector<double> sweep(const Matrix& p, const std::vector<double>& rbar, double gamma,
                          double tol, bool decision_time) {
    const size_t n = p.size();
    std::vector<double> v(n, 0.0);
    for (int iter = 0; iter < 1000000; ++iter) {
        double residual = 0.0;
        std::vector<double> next(n, 0.0);
        for (size_t s = 0; s < n; ++s) {
            double pv = 0.0;
            for (size_t t = 0; t < n; ++t) pv += p[s][t] * v[t];
            next[s] = decision_time ? gamma * (rbar[s] + pv) : rbar[s] + gamma * pv;
            residual = std::max(residual, std::abs(next[s] - v[s]));
        }
        v = std::move(next);
        if (residual < tol) return v;
    }
    throw NumericError("value_iterate: did not converge");
}
}  // namespace

std::vector<double> value_iterate(const Matrix& p, const std::vector<double>& rbar, double gamma,
                                  double tol) {
    return sweep(p, rbar, gamma, tol, false);
}

std::vector<double> value_iterate_decision_time(const Matrix& p, const std::vector<double>& rbar,
                                                double gamma, double tol) {
    return sweep(p, rbar, gamma, tol, true);
}

std::vector<std::vector<double>> option_value_iterate(const TabularOptionModel& model,
                                                      double tol, int max_iters) {
    const size_t num_options = model.p.size();
    if (num_options == 0) throw ConfigError("option_value_iterate: no options");
    const size_t n = model.p[0].size();
    if (n * num_options > 10000)
        throw ConfigError("option_value_iterate: state-option space too large to enumerate");
    for (size_t w = 0; w < num_options; ++w) {
        if (model.p[w].size() != n || model.r[w].size() != n || model.beta[w].size() != n)
            throw ConfigError("option_value_iterate: inconsistent model shapes");
    }

    std::vector<std::vector<double>> q(num_options, std::vector<double>(n, 0.0));
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<double> best(n, -1e300);
        for (size_t s = 0; s < n; ++s)
            for (size_t w = 0; w < num_options; ++w) best[s] = std::max(best[s], q[w][s]);

        double residual = 0.0;
        std::vector<std::vector<double>> next(num_options, std::vector<double>(n, 0.0));
        for (size_t w = 0; w < num_options; ++w) {
            for (size_t s = 0; s < n; ++s) {
                double acc = 0.0;
                for (size_t t = 0; t < n; ++t) {
                    const double u =
                        (1.0 - model.beta[w][t]) * q[w][t] + model.beta[w][t] * best[t];
                    acc += model.p[w][s][t] * u;
                }
                next[w][s] = model.r[w][s] + model.gamma * acc;
                residual = std::max(residual, std::abs(next[w][s] - q[w][s]));
            }
        }
        q = std::move(next);
        if (residual < tol) return q;
    }
    throw NumericError("option_value_iterate: did not converge");
}

Matrix sr_matrix(const Matrix& p, double gamma) {
    const size_t n = p.size();
    Matrix a(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - gamma * p[i][j];
    return invert(a);
}

TabularOptionModel load_option_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("oracle: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("oracle: invalid JSON: ") + e.what());
    }
    TabularOptionModel model;
    model.gamma = j.at("gamma").get<double>();
    for (const auto& opt : j.at("options")) {
        model.p.push_back(opt.at("p").get<Matrix>());
        model.r.push_back(opt.at("r").get<std::vector<double>>());
        model.beta.push_back(opt.at("beta").get<std::vector<double>>());
    }
    return model;
}

std::string option_values_to_json(const std::vector<std::vector<double>>& q) {
    nlohmann::ordered_json j;
    j["q"] = q;
    return j.dump(2);
}

}  // namespace optlab::harness
