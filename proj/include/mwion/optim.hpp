#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mwion {

// Damped least squares for small dense problems. Residuals come in already
// weighted (r_i = (model_i - data_i)/sigma_i), cost is sum r_i^2 (= chi^2).
struct LmOptions {
    int max_iterations = 200;
    double rel_cost_tol = 1e-10;
    double initial_lambda = 1e-3;
    double jacobian_step = 1e-6;   // relative FD step, floored at 1e-12
};

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd jtj;           // J^T J at the optimum (weighted)
    double cost = 0.0;             // chi^2
    int iterations = 0;
    bool converged = false;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

LmResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd p0,
                             const LmOptions& opt = {});

// Covariance from the weighted normal matrix. Directions with a relative
// pivot below `rank_tol` are reported as unbounded (+inf variance) instead of
// being silently regularized -- degenerate fits must say so.
Eigen::MatrixXd covariance_from_jtj(const Eigen::MatrixXd& jtj, double rank_tol = 1e-12);

} // namespace mwion
