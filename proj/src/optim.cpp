#include "mwion/optim.hpp"

#include <cmath>
#include <limits>

namespace mwion {

namespace {

Eigen::MatrixXd numerical_jacobian(const ResidualFn& f, const Eigen::VectorXd& p,
                                   const Eigen::VectorXd& r0, double rel_step) {
    const int n = static_cast<int>(p.size());
    const int m = static_cast<int>(r0.size());
    Eigen::MatrixXd jac(m, n);
    for (int j = 0; j < n; ++j) {
        double h = rel_step * std::abs(p[j]);
        if (h < 1e-12) h = 1e-12;
        Eigen::VectorXd pj = p;
        pj[j] += h;
        jac.col(j) = (f(pj) - r0) / h;
    }
    return jac;
}

} // namespace

LmResult levenberg_marquardt(const ResidualFn& residuals, Eigen::VectorXd p0,
                             const LmOptions& opt) {
    LmResult res;
    Eigen::VectorXd p = std::move(p0);
    Eigen::VectorXd r = residuals(p);
    double cost = r.squaredNorm();
    double lambda = opt.initial_lambda;

    Eigen::MatrixXd jac = numerical_jacobian(residuals, p, r, opt.jacobian_step);
    bool jac_fresh = true;

    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        if (!jac_fresh) {
            jac = numerical_jacobian(residuals, p, r, opt.jacobian_step);
            jac_fresh = true;
        }
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;

        // stationary point or exactly-reproduced data
        if (g.cwiseAbs().maxCoeff() < 1e-12 || cost < 1e-20 * static_cast<double>(r.size())) {
            res.converged = true;
            break;
        }

        // damped normal equations; retry with larger lambda until the step
        // reduces the cost or the damping saturates
        bool accepted = false;
        for (int tries = 0; tries < 32; ++tries) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd p_new = p + step;
            const Eigen::VectorXd r_new = residuals(p_new);
            const double cost_new = r_new.squaredNorm();
            if (cost_new <= cost && std::isfinite(cost_new)) {
                const double rel_drop = (cost - cost_new) / std::max(cost, 1e-300);
                p = p_new;
                r = r_new;
                cost = cost_new;
                lambda = std::max(lambda / 3.0, 1e-12);
                jac_fresh = false;
                accepted = true;
                if (rel_drop < opt.rel_cost_tol) {
                    res.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // no downhill step found at any damping: stationary point
            res.converged = true;
        }
        if (res.converged) break;
    }

    if (!jac_fresh) jac = numerical_jacobian(residuals, p, r, opt.jacobian_step);
    res.params = p;
    res.cost = cost;
    res.jtj = jac.transpose() * jac;
    return res;
}

Eigen::MatrixXd covariance_from_jtj(const Eigen::MatrixXd& jtj, double rank_tol) {
    const int n = static_cast<int>(jtj.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jtj);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    const double inf = std::numeric_limits<double>::infinity();
    if (scale <= 0.0) return Eigen::MatrixXd::Constant(n, n, inf);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> null_dirs;
    for (int k = 0; k < n; ++k) {
        if (ev[k] > rank_tol * scale) {
            cov += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose() / ev[k];
        } else {
            null_dirs.push_back(k);
        }
    }
    // parameters with weight in a null direction are unidentifiable
    for (int k : null_dirs) {
        for (int i = 0; i < n; ++i) {
            if (std::abs(es.eigenvectors()(i, k)) > 1e-8) cov(i, i) = inf;
        }
    }
    return cov;
}

} // namespace mwion
