#include "mwion/fluor.hpp"

#include <cmath>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/optim.hpp"
#include "mwion/rng.hpp"

namespace mwion {

namespace con = constants;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

void CountHistogram::validate() const {
    std::int64_t sum = 0;
    for (std::int64_t b : bins) {
        if (b < 0) throw InvariantViolationError("CountHistogram: negative bin");
        sum += b;
    }
    if (sum != total_shots)
        throw InvariantViolationError("CountHistogram: bins do not sum to total shots");
}

double PoissonMixture::component_mean(int k) const {
    switch (k) {
        case 0: return mean_dark;
        case 1: return mean_one_bright;
        case 2: return mean_two_bright();
    }
    throw std::invalid_argument("PoissonMixture: component index out of range");
}

void PoissonMixture::validate() const {
    if (!(mean_dark > 0.0) || !(mean_one_bright > 0.0))
        throw InvariantViolationError("PoissonMixture: means must be > 0");
    if (weights.minCoeff() < -1e-12 || std::abs(weights.sum() - 1.0) > 1e-9)
        throw InvariantViolationError("PoissonMixture: weights must lie on the simplex");
}

PoissonMixture PoissonMixture::paper_default() {
    PoissonMixture m;
    m.mean_dark = 0.3;
    m.mean_one_bright = 11.3;
    m.weights = Vector3d::Constant(1.0 / 3.0);
    return m;
}

double PoissonMixture::pmf(int k, int count) const {
    const double mu = component_mean(k);
    // log-space Poisson pmf
    double lg = -mu + count * std::log(mu);
    for (int i = 2; i <= count; ++i) lg -= std::log(static_cast<double>(i));
    return std::exp(lg);
}

Vector3d ramsey_reference_probs(double theta_rad) {
    const double c = std::cos(0.5 * theta_rad);
    const double s = std::sin(0.5 * theta_rad);
    const double st = std::sin(theta_rad);
    return Vector3d(c * c * c * c, 0.5 * st * st, s * s * s * s);
}

CountHistogram simulate_detection(const Vector3d& populations, const PoissonMixture& mixture,
                                  std::int64_t shots, std::uint64_t seed) {
    if (shots < 1) throw std::invalid_argument("simulate_detection: shots must be >= 1");
    if (populations.minCoeff() < -1e-12 || std::abs(populations.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("simulate_detection: populations must lie on the simplex");
    mixture.validate();

    Rng rng(seed);
    const double w[3] = {std::max(populations[0], 0.0), std::max(populations[1], 0.0),
                         std::max(populations[2], 0.0)};
    CountHistogram h;
    h.total_shots = shots;
    for (std::int64_t s = 0; s < shots; ++s) {
        const int k = rng.categorical(w, 3);
        const long long c = rng.poisson(mixture.component_mean(k));
        if (c >= static_cast<long long>(h.bins.size())) h.bins.resize(c + 1, 0);
        ++h.bins[c];
    }
    return h;
}

namespace {

int fit_bin_count(const PoissonMixture& m) {
    const double mu = m.mean_two_bright();
    return static_cast<int>(std::ceil(mu + 6.0 * std::sqrt(mu))) + 1;
}

} // namespace

ReferenceFit fit_reference(const std::vector<CountHistogram>& histograms) {
    std::vector<ReferenceCurve> curves;
    curves.reserve(histograms.size());
    const int nbins = fit_bin_count(PoissonMixture::paper_default());
    for (const auto& h : histograms) {
        h.validate();
        ReferenceCurve c;
        c.theta_rad = h.phase_rad;
        c.shots = static_cast<double>(h.total_shots);
        c.counts = VectorXd::Zero(std::max<int>(nbins, static_cast<int>(h.bins.size())));
        for (int i = 0; i < c.counts.size(); ++i) c.counts[i] = double(h.count_at(i));
        curves.push_back(std::move(c));
    }
    return fit_reference_curves(curves);
}

ReferenceFit fit_reference_curves(const std::vector<ReferenceCurve>& curves) {
    if (curves.size() < 3) throw RankDeficiencyError("fit_reference: need at least 3 theta values");
    bool near_zero = false, near_pi = false;
    for (const auto& c : curves) {
        const double th = std::abs(std::remainder(c.theta_rad, 2.0 * con::pi));
        if (th < 0.5) near_zero = true;
        if (std::abs(th - con::pi) < 0.5) near_pi = true;
    }
    if (!near_zero || !near_pi)
        throw RankDeficiencyError(
            "fit_reference: theta grid must cover both ends (near 0 and near pi)");

    // parameters: mu_dark, mu_one, then class-mix rows (w_k0, w_k1) for
    // k = 0, 1, 2 with w_k2 = 1 - w_k0 - w_k1  -> 8 free parameters
    auto unpack = [](const VectorXd& p, PoissonMixture& m, Matrix3d& w) {
        m.mean_dark = std::max(p[0], 1e-6);
        m.mean_one_bright = std::max(p[1], 1e-3);
        for (int k = 0; k < 3; ++k) {
            w(k, 0) = p[2 + 2 * k];
            w(k, 1) = p[3 + 2 * k];
            w(k, 2) = 1.0 - w(k, 0) - w(k, 1);
        }
    };

    auto model_hist = [&](const PoissonMixture& m, const Matrix3d& w, const ReferenceCurve& c) {
        const Vector3d probs = ramsey_reference_probs(c.theta_rad);
        VectorXd out = VectorXd::Zero(c.counts.size());
        for (int i = 0; i < out.size(); ++i) {
            double q = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) q += probs[k] * w(k, j) * m.pmf(j, i);
            out[i] = c.shots * q;
        }
        return out;
    };

    int total_bins = 0;
    for (const auto& c : curves) total_bins += static_cast<int>(c.counts.size());

    auto residuals = [&](const VectorXd& p) {
        PoissonMixture m = PoissonMixture::paper_default();
        Matrix3d w;
        unpack(p, m, w);
        VectorXd r(total_bins);
        int at = 0;
        for (const auto& c : curves) {
            const VectorXd exp_c = model_hist(m, w, c);
            for (int i = 0; i < exp_c.size(); ++i) {
                const double sigma = std::sqrt(std::max(1.0, c.counts[i]));
                r[at++] = (exp_c[i] - c.counts[i]) / sigma;
            }
        }
        return r;
    };

    VectorXd p0(8);
    p0 << 0.3, 11.3, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;  // identity class mix
    const LmResult lm = levenberg_marquardt(residuals, p0);
    if (!lm.converged) {
        std::vector<double> last(lm.params.data(), lm.params.data() + lm.params.size());
        throw FitError("fit_reference: no convergence", last);
    }

    ReferenceFit out;
    Matrix3d w;
    unpack(lm.params, out.mixture, w);
    out.class_mix = w;
    out.iterations = lm.iterations;

    // marginal component usage across the reference set, projected to the
    // simplex for the returned mixture
    Vector3d marginal = Vector3d::Zero();
    for (const auto& c : curves) marginal += w.transpose() * ramsey_reference_probs(c.theta_rad);
    marginal = marginal.cwiseMax(0.0);
    marginal /= marginal.sum();
    out.mixture.weights = marginal;
    out.mixture.validate();

    // pooled Pearson chi^2 against the fitted model
    double chi2 = 0.0;
    int bins_used = 0;
    for (const auto& c : curves) {
        const VectorXd exp_c = model_hist(out.mixture, w, c);
        double pool_exp = 0.0, pool_obs = 0.0;
        for (int i = 0; i < exp_c.size(); ++i) {
            pool_exp += exp_c[i];
            pool_obs += c.counts[i];
            if (pool_exp >= 3.0 || i == exp_c.size() - 1) {
                if (pool_exp > 0.0) {
                    chi2 += (pool_obs - pool_exp) * (pool_obs - pool_exp) / pool_exp;
                    ++bins_used;
                }
                pool_exp = pool_obs = 0.0;
            }
        }
    }
    out.dof = std::max(1, bins_used - 8);
    out.chi2_reduced = chi2 / out.dof;
    return out;
}

PopulationDecomposition decompose_populations(const CountHistogram& h, const PoissonMixture& mix) {
    h.validate();
    mix.validate();
    const int nbins = std::max(fit_bin_count(mix), static_cast<int>(h.bins.size()));
    const double shots = static_cast<double>(h.total_shots);

    // weighted linear LS on the simplex: minimize || (A p - y) / sigma ||
    MatrixXd a(nbins, 3);
    VectorXd y(nbins), sig(nbins);
    for (int c = 0; c < nbins; ++c) {
        for (int k = 0; k < 3; ++k) a(c, k) = shots * mix.pmf(k, c);
        y[c] = static_cast<double>(h.count_at(c));
        sig[c] = std::sqrt(std::max(1.0, y[c]));
    }
    const MatrixXd aw = sig.cwiseInverse().asDiagonal() * a;
    const VectorXd yw = y.cwiseQuotient(sig);

    // substitute p2 = 1 - p0 - p1 and solve the 2-var problem exactly over
    // the triangle (interior, edges, corners)
    const VectorXd base = aw.col(2);
    MatrixXd b(nbins, 2);
    b.col(0) = aw.col(0) - aw.col(2);
    b.col(1) = aw.col(1) - aw.col(2);
    const VectorXd rhs = yw - base;

    auto cost = [&](const Eigen::Vector2d& q) { return (b * q - rhs).squaredNorm(); };
    const Eigen::Matrix2d btb = b.transpose() * b;
    const Eigen::Vector2d btr = b.transpose() * rhs;

    Eigen::Vector2d best = Eigen::Vector2d::Zero();
    double best_cost = std::numeric_limits<double>::infinity();
    auto consider = [&](const Eigen::Vector2d& q) {
        if (q[0] < -1e-12 || q[1] < -1e-12 || q[0] + q[1] > 1.0 + 1e-12) return;
        Eigen::Vector2d qc = q.cwiseMax(0.0);
        if (qc.sum() > 1.0) qc /= qc.sum();
        const double cst = cost(qc);
        if (cst < best_cost) {
            best_cost = cst;
            best = qc;
        }
    };
    consider(btb.ldlt().solve(btr));  // interior candidate
    // edges: p0 = 0, p1 = 0, p0 + p1 = 1
    {
        const double d = btb(1, 1);
        if (d > 0.0) consider(Eigen::Vector2d(0.0, std::clamp(btr[1] / d, 0.0, 1.0)));
    }
    {
        const double d = btb(0, 0);
        if (d > 0.0) consider(Eigen::Vector2d(std::clamp(btr[0] / d, 0.0, 1.0), 0.0));
    }
    {
        // q = (t, 1-t)
        const Eigen::Vector2d u(1.0, -1.0);
        const double den = u.transpose() * btb * u;
        if (den > 0.0) {
            const double num = u.dot(btr) - u.dot(btb * Eigen::Vector2d(0.0, 1.0));
            const double t = std::clamp(num / den, 0.0, 1.0);
            consider(Eigen::Vector2d(t, 1.0 - t));
        }
    }
    consider(Eigen::Vector2d(0.0, 0.0));
    consider(Eigen::Vector2d(1.0, 0.0));
    consider(Eigen::Vector2d(0.0, 1.0));

    PopulationDecomposition out;
    out.p = Vector3d(best[0], best[1], 1.0 - best[0] - best[1]);

    // covariance of (p0, p1) from the unconstrained normal matrix, lifted to
    // the simplex (p2 row/col from the sum constraint)
    const Eigen::Matrix2d cov2 = btb.inverse();
    Matrix3d cov = Matrix3d::Zero();
    cov.topLeftCorner<2, 2>() = cov2;
    cov(2, 2) = cov2.sum();
    cov(0, 2) = cov(2, 0) = -(cov2(0, 0) + cov2(0, 1));
    cov(1, 2) = cov(2, 1) = -(cov2(1, 0) + cov2(1, 1));
    out.covariance = cov;

    // class separation check: overlapping component means cannot be told
    // apart and the covariance is untrustworthy
    const double sep = (mix.mean_one_bright - mix.mean_dark) /
                       std::sqrt(std::max(mix.mean_one_bright, 1e-12));
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(btb);
    const double cond =
        svd.singularValues()(0) / std::max(svd.singularValues()(1), 1e-300);
    out.conditioning_warning = sep < 2.0 || cond > 1e8;
    return out;
}

ParityScanResult fit_parity_scan(const VectorXd& phases, const MatrixXd& populations,
                                 const MatrixXd& population_sigmas,
                                 const std::optional<DirectPopulations>& direct) {
    const int n = static_cast<int>(phases.size());
    if (n < 8) throw std::invalid_argument("fit_parity_scan: need at least 8 phases");
    if (populations.rows() != n || populations.cols() != 3)
        throw std::invalid_argument("fit_parity_scan: populations must be N x 3");
    const double span = phases.maxCoeff() - phases.minCoeff();
    if (span < con::pi * (1.0 - 1e-9))
        throw std::invalid_argument(
            "fit_parity_scan: phases must span a full 2*phi period (pi in phi)");

    // initial guess from a linear fit to the parity channel
    double phi0_guess = 0.0, amp_guess = 0.5;
    {
        MatrixXd x(n, 3);
        VectorXd pr(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = std::cos(2.0 * phases[i]);
            x(i, 1) = std::sin(2.0 * phases[i]);
            x(i, 2) = 1.0;
            pr[i] = populations(i, 0) + populations(i, 2) - populations(i, 1);
        }
        const Eigen::Vector3d c = (x.transpose() * x).ldlt().solve(x.transpose() * pr);
        amp_guess = std::hypot(c[0], c[1]);
        phi0_guess = std::atan2(-c[1], c[0]);
    }

    // parameters: phi0, a_0b, a_2b, o_0b, o_2b; channel order in data is
    // (zero, one, two) bright; constraints a_1b = -(a_0b + a_2b),
    // o_1b = 1 - o_0b - o_2b
    auto channel_params = [](const VectorXd& p, int k, double& a, double& o) {
        const double a0 = p[1], a2 = p[2], o0 = p[3], o2 = p[4];
        if (k == 0) { a = a0; o = o0; }
        else if (k == 2) { a = a2; o = o2; }
        else { a = -(a0 + a2); o = 1.0 - o0 - o2; }
    };
    auto residuals = [&](const VectorXd& p) {
        VectorXd r(3 * n);
        int at = 0;
        for (int k = 0; k < 3; ++k) {
            double a, o;
            channel_params(p, k, a, o);
            for (int i = 0; i < n; ++i) {
                const double model = a * std::cos(2.0 * phases[i] + p[0]) + o;
                const double sig = std::max(population_sigmas(i, k), 1e-6);
                r[at++] = (model - populations(i, k)) / sig;
            }
        }
        return r;
    };

    VectorXd p0(5);
    p0 << phi0_guess, -amp_guess / 4.0, -amp_guess / 4.0, 0.25, 0.25;
    const LmResult lm = levenberg_marquardt(residuals, p0);
    if (!lm.converged) {
        std::vector<double> last(lm.params.data(), lm.params.data() + lm.params.size());
        throw FitError("fit_parity_scan: no convergence", last);
    }

    ParityScanResult out;
    out.phases = phases;
    out.populations = populations;
    out.population_sigmas = population_sigmas;
    out.chi2_reduced = lm.cost / std::max(1, 3 * n - 5);

    double a0, o0, a1, o1, a2, o2;
    channel_params(lm.params, 0, a0, o0);
    channel_params(lm.params, 1, a1, o1);
    channel_params(lm.params, 2, a2, o2);
    double phi0 = lm.params[0];
    double api = a0 + a2 - a1;  // parity amplitude, signed

    const Eigen::MatrixXd cov = covariance_from_jtj(lm.jtj);
    // var(A_pi) with A = 2(a_0b + a_2b) under the sum constraint
    const double var_api = 4.0 * (cov(1, 1) + cov(2, 2) + 2.0 * cov(1, 2));

    if (api < 0.0) {
        api = -api;
        a0 = -a0; a1 = -a1; a2 = -a2;
        phi0 += con::pi;
    }
    phi0 = std::remainder(phi0, 2.0 * con::pi);

    out.a_pi = api;
    out.a_pi_sigma = std::sqrt(std::max(var_api, 0.0));
    out.phi0 = phi0;
    out.amplitudes = Vector3d(a0, a1, a2);
    out.offsets = Vector3d(o0, o1, o2);

    const double coherence = 0.5 * api;  // |rho_uu,dd| = A_pi / 2
    if (direct) {
        // sector population measured without the analysis pulse:
        // zero bright = uu, two bright = dd
        const double sector = direct->p[0] + direct->p[2];
        out.fidelity = 0.5 * sector + coherence;
        out.fidelity_sigma = std::sqrt(0.25 * (direct->sigma[0] * direct->sigma[0] +
                                               direct->sigma[2] * direct->sigma[2]) +
                                       0.25 * var_api);
        out.used_direct_populations = true;
    } else {
        // sector population taken as 2|rho_uu,dd|, exact for the paper-style
        // constructed states
        out.fidelity = api;
        out.fidelity_sigma = out.a_pi_sigma;
        out.used_direct_populations = false;
    }
    return out;
}

} // namespace mwion
