#include "mwion/dynamics.hpp"

#include <cmath>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/optim.hpp"

namespace mwion {

namespace con = constants;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

void MotionalMode::validate() const {
    if (!(frequency_hz > 0.0)) throw std::invalid_argument("MotionalMode: frequency must be > 0");
    if (!(ion_mass_kg > 0.0)) throw std::invalid_argument("MotionalMode: mass must be > 0");
    if (n_ions != 1 && n_ions != 2)
        throw std::invalid_argument("MotionalMode: n_ions must be 1 or 2");
    if (mode_vector.size() != n_ions)
        throw std::invalid_argument("MotionalMode: mode vector size must equal n_ions");
    if (std::abs(mode_vector.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("MotionalMode: mode vector must be normalized");
    if (fock_cutoff < 10) throw std::invalid_argument("MotionalMode: fock_cutoff must be >= 10");
}

MotionalMode MotionalMode::single_ion(double frequency_hz, double mass_kg, int fock_cutoff) {
    MotionalMode m;
    m.frequency_hz = frequency_hz;
    m.ion_mass_kg = mass_kg;
    m.n_ions = 1;
    m.mode_vector = VectorXd::Ones(1);
    m.fock_cutoff = fock_cutoff;
    m.validate();
    return m;
}

MotionalMode MotionalMode::rocking(double frequency_hz, double mass_kg, int fock_cutoff) {
    MotionalMode m;
    m.frequency_hz = frequency_hz;
    m.ion_mass_kg = mass_kg;
    m.n_ions = 2;
    m.mode_vector = VectorXd(2);
    m.mode_vector << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    m.fock_cutoff = fock_cutoff;
    m.validate();
    return m;
}

double MotionalMode::ground_state_extent_m() const {
    return std::sqrt(con::hbar / (2.0 * ion_mass_kg * 2.0 * con::pi * frequency_hz));
}

ThermalState ThermalState::thermal(double nbar, int fock_cutoff) {
    if (!(nbar >= 0.0)) throw std::invalid_argument("ThermalState: nbar must be >= 0");
    ThermalState t;
    t.nbar = nbar;
    t.p = VectorXd::Zero(fock_cutoff + 1);
    if (nbar == 0.0) {
        t.p[0] = 1.0;
        return t;
    }
    const double r = nbar / (nbar + 1.0);
    double w = 1.0 / (nbar + 1.0);
    for (int n = 0; n <= fock_cutoff; ++n) {
        t.p[n] = w;
        w *= r;
    }
    t.p /= t.p.sum();
    return t;
}

void ThermalState::validate() const {
    if (std::abs(p.sum() - 1.0) > 1e-6)
        throw InvariantViolationError("ThermalState: probabilities must sum to 1");
    if (p.minCoeff() < -1e-12)
        throw InvariantViolationError("ThermalState: negative occupation probability");
}

double carrier_rabi(double rabi_rad_s, double detuning_rad_s, double duration_s) {
    if (duration_s < 0.0) throw std::invalid_argument("carrier_rabi: duration must be >= 0");
    const double eff2 = rabi_rad_s * rabi_rad_s + detuning_rad_s * detuning_rad_s;
    if (eff2 == 0.0) return 0.0;
    const double eff = std::sqrt(eff2);
    const double s = std::sin(0.5 * eff * duration_s);
    return rabi_rad_s * rabi_rad_s / eff2 * s * s;
}

// ---------------------------------------------------------------------------

SpinFockBasis::SpinFockBasis(int n_ions, int fock_cutoff)
    : n_ions_(n_ions), nf_(fock_cutoff), spin_dim_(1 << n_ions) {
    if (n_ions < 1 || n_ions > 2) throw std::invalid_argument("SpinFockBasis: 1 or 2 ions");
    if (fock_cutoff < 1) throw std::invalid_argument("SpinFockBasis: cutoff too small");
}

int SpinFockBasis::n_down(int spin) const {
    int c = 0;
    for (int i = 0; i < n_ions_; ++i) c += ion_down(spin, i) ? 1 : 0;
    return c;
}

MatrixXd SpinFockBasis::sideband_hamiltonian(const VectorXd& ion_rates_rad_s,
                                             double detuning_rad_s) const {
    MatrixXd h = MatrixXd::Zero(dim(), dim());
    for (int s = 0; s < spin_dim_; ++s)
        for (int n = 0; n <= nf_; ++n) h(idx(s, n), idx(s, n)) = -detuning_rad_s * n;
    // sigma+_i a-dag: |.. down_i .., n> -> |.. up_i .., n+1>, sqrt(n+1)
    for (int s = 0; s < spin_dim_; ++s) {
        for (int i = 0; i < n_ions_; ++i) {
            if (!ion_down(s, i)) continue;
            const int s_up = flip(s, i);
            for (int n = 0; n + 1 <= nf_; ++n) {
                const double v = 0.5 * ion_rates_rad_s[i] * std::sqrt(n + 1.0);
                h(idx(s_up, n + 1), idx(s, n)) += v;
                h(idx(s, n), idx(s_up, n + 1)) += v;
            }
        }
    }
    return h;
}

MatrixXcd SpinFockBasis::ms_hamiltonian(const VectorXd& ion_rates_rad_s, double detuning_rad_s,
                                        double spin_phase_rad, double motion_phase_rad,
                                        double carrier_shift_rad_s) const {
    MatrixXcd h = MatrixXcd::Zero(dim(), dim());
    const cplx eim = std::exp(cplx(0.0, -motion_phase_rad));
    const cplx eis = std::exp(cplx(0.0, -spin_phase_rad));
    for (int s = 0; s < spin_dim_; ++s) {
        const double sz_half = 0.5 * (n_ions_ - 2 * n_down(s));  // sum_i sigma_z/2
        for (int n = 0; n <= nf_; ++n)
            h(idx(s, n), idx(s, n)) = -detuning_rad_s * n + carrier_shift_rad_s * sz_half;
    }
    // sigma_phi^i = sigma+_i e^{-i phi_s} + h.c.; force op a-dag e^{-i phi_m} + a e^{i phi_m}
    for (int s = 0; s < spin_dim_; ++s) {
        for (int i = 0; i < n_ions_; ++i) {
            if (!ion_down(s, i)) continue;              // raise from |down_i>
            const int s_up = flip(s, i);
            for (int n = 0; n <= nf_; ++n) {
                // sigma+_i e^{-i phi_s} (a-dag e^{-i phi_m} + a e^{i phi_m})
                if (n + 1 <= nf_) {
                    const cplx v = 0.5 * ion_rates_rad_s[i] * std::sqrt(n + 1.0) * eis * eim;
                    h(idx(s_up, n + 1), idx(s, n)) += v;
                    h(idx(s, n), idx(s_up, n + 1)) += std::conj(v);
                }
                if (n - 1 >= 0) {
                    const cplx v =
                        0.5 * ion_rates_rad_s[i] * std::sqrt(static_cast<double>(n)) * eis / eim;
                    h(idx(s_up, n - 1), idx(s, n)) += v;
                    h(idx(s, n), idx(s_up, n - 1)) += std::conj(v);
                }
            }
        }
    }
    return h;
}

MatrixXcd propagator(const MatrixXd& h_rad_s, double t_s) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h_rad_s);
    const VectorXd& ev = es.eigenvalues();
    const MatrixXd& v = es.eigenvectors();
    Eigen::VectorXcd phase(ev.size());
    for (int k = 0; k < ev.size(); ++k) phase[k] = std::exp(cplx(0.0, -ev[k] * t_s));
    return v.cast<cplx>() * phase.asDiagonal() * v.transpose().cast<cplx>();
}

MatrixXcd propagator(const MatrixXcd& h_rad_s, double t_s) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h_rad_s);
    const VectorXd& ev = es.eigenvalues();
    const MatrixXcd& v = es.eigenvectors();
    Eigen::VectorXcd phase(ev.size());
    for (int k = 0; k < ev.size(); ++k) phase[k] = std::exp(cplx(0.0, -ev[k] * t_s));
    return v * phase.asDiagonal() * v.adjoint();
}

MatrixXd heating_block_exponential(int nf, int ell, double gamma_t) {
    const int len = nf + 1 - ell;
    MatrixXd g = MatrixXd::Zero(len, len);
    for (int n = 0; n < len; ++n) {
        const int top = len - 1;
        g(n, n) = (n == top) ? -(n + 0.5 * ell) : -(2.0 * n + ell + 1.0);
        if (n + 1 < len) {
            const double v = std::sqrt((n + 1.0) * (n + 1.0 + ell));
            g(n + 1, n) = v;
            g(n, n + 1) = v;
        }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
    Eigen::VectorXd ex = (es.eigenvalues().array() * gamma_t).exp();
    return es.eigenvectors() * ex.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------

namespace {

VectorXd thermal_at_cutoff(const ThermalState& motion, int nf) {
    if (motion.p.size() == nf + 1) return motion.p;
    return ThermalState::thermal(motion.nbar, nf).p;
}

struct ScanRun {
    VectorXd signal;
    double top_population;
};

ScanRun run_scan(const MotionalMode& mode, SidebandPrep prep, const ThermalState& motion,
                 double rate, double duration, const VectorXd& offsets_hz, int nf) {
    const SpinFockBasis basis(mode.n_ions, nf);
    const VectorXd p = thermal_at_cutoff(motion, nf);
    const int spin0 = prep == SidebandPrep::motion_adding ? basis.spin_dim() - 1 : 0;
    const VectorXd rates = rate * mode.mode_vector;

    ScanRun out;
    out.signal = VectorXd::Zero(offsets_hz.size());
    out.top_population = 0.0;
    for (int k = 0; k < offsets_hz.size(); ++k) {
        const MatrixXd h = basis.sideband_hamiltonian(rates, 2.0 * con::pi * offsets_hz[k]);
        const MatrixXcd u = propagator(h, duration);
        double sig = 0.0, top = 0.0;
        for (int n = 0; n <= nf; ++n) {
            if (p[n] < 1e-15) continue;
            const auto col = u.col(basis.idx(spin0, n));
            double s_n = 0.0, t_n = 0.0;
            for (int s = 0; s < basis.spin_dim(); ++s) {
                const int nd = basis.n_down(s);
                for (int m = 0; m <= nf; ++m) {
                    const double w = std::norm(col[basis.idx(s, m)]);
                    if (nd) s_n += nd * w;
                    if (m == nf) t_n += w;
                }
            }
            sig += p[n] * s_n;
            top += p[n] * t_n;
        }
        out.signal[k] = sig;
        out.top_population = std::max(out.top_population, top);
    }
    return out;
}

constexpr double k_top_tol = 1e-4;
constexpr int k_escalated_cutoff = 60;

} // namespace

VectorXd sideband_scan(const MotionalMode& mode, SidebandPrep prep, const ThermalState& motion,
                       double sideband_rate_rad_s, double pulse_duration_s,
                       const VectorXd& offsets_hz) {
    mode.validate();
    if (!(pulse_duration_s > 0.0))
        throw std::invalid_argument("sideband_scan: pulse duration must be > 0");
    ScanRun run = run_scan(mode, prep, motion, sideband_rate_rad_s, pulse_duration_s, offsets_hz,
                           mode.fock_cutoff);
    if (run.top_population > k_top_tol && mode.fock_cutoff < k_escalated_cutoff)
        run = run_scan(mode, prep, motion, sideband_rate_rad_s, pulse_duration_s, offsets_hz,
                       k_escalated_cutoff);
    if (run.top_population > k_top_tol)
        throw CutoffError("sideband_scan: top Fock level population " +
                          std::to_string(run.top_population) + " exceeds 1e-4 at cutoff " +
                          std::to_string(k_escalated_cutoff));
    return run.signal;
}

NbarFitResult fit_nbar(const VectorXd& offsets_hz, const VectorXd& red_signal,
                       const VectorXd& blue_signal, const VectorXd& red_sigma,
                       const VectorXd& blue_sigma, const MotionalMode& mode,
                       double pulse_duration_s, double nbar_guess, double rate_guess_rad_s) {
    const int n = static_cast<int>(offsets_hz.size());
    if (red_signal.size() != n || blue_signal.size() != n)
        throw std::invalid_argument("fit_nbar: scans must share the offset grid");

    // fit in r = nbar/(nbar+1); the geometric weights (1-r) r^n stay smooth
    // through r = 0 so a noisy ground-state fit may land slightly negative
    auto signal_model = [&](double r, double rate, SidebandPrep prep) {
        const int nf = mode.fock_cutoff;
        ThermalState t;
        t.nbar = std::max(r, 0.0) / (1.0 - std::min(r, 0.995));
        t.p = VectorXd::Zero(nf + 1);
        double w = 1.0 - r;
        for (int m = 0; m <= nf; ++m) {
            t.p[m] = w;
            w *= r;
        }
        return run_scan(mode, prep, t, rate, pulse_duration_s, offsets_hz, nf).signal;
    };
    auto residuals = [&](const Eigen::VectorXd& p) {
        const double r = std::min(p[0], 0.995);
        const double rate = p[1];
        const VectorXd sub = signal_model(r, rate, SidebandPrep::motion_subtracting);
        const VectorXd add = signal_model(r, rate, SidebandPrep::motion_adding);
        Eigen::VectorXd res(2 * n);
        for (int i = 0; i < n; ++i) {
            res[i] = (sub[i] - red_signal[i]) / red_sigma[i];
            res[n + i] = (add[i] - blue_signal[i]) / blue_sigma[i];
        }
        return res;
    };

    Eigen::VectorXd p0(2);
    p0 << nbar_guess / (nbar_guess + 1.0), rate_guess_rad_s;
    LmOptions opt;
    const LmResult lm = levenberg_marquardt(residuals, p0, opt);
    if (!lm.converged) {
        std::vector<double> last(lm.params.data(), lm.params.data() + lm.params.size());
        throw FitError("fit_nbar: no convergence", last);
    }
    const Eigen::MatrixXd cov = covariance_from_jtj(lm.jtj);
    NbarFitResult out;
    const double r = lm.params[0];
    const double dn_dr = 1.0 / ((1.0 - r) * (1.0 - r));
    out.nbar = r / (1.0 - r);
    out.nbar_sigma = std::sqrt(std::abs(cov(0, 0))) * std::abs(dn_dr);
    out.rate_rad_s = lm.params[1];
    out.rate_sigma = std::sqrt(std::abs(cov(1, 1)));
    out.chi2_reduced = lm.cost / std::max(1, 2 * n - 2);
    out.iterations = lm.iterations;
    return out;
}

namespace {

struct CoolRun {
    VectorXd distribution;
    double top_population;
};

CoolRun run_cool(const MotionalMode& mode, const ThermalState& initial, int cycles,
                 double pulse_duration_s, double rate, double repump, double recoil, int nf) {
    const SpinFockBasis basis(mode.n_ions, nf);
    const int sd = basis.spin_dim();
    const VectorXd rates = rate * mode.mode_vector;

    // joint classical distribution over (spin, n); the repump map decoheres
    // each cycle, so populations are all that survives cycle boundaries
    MatrixXd pop = MatrixXd::Zero(sd, nf + 1);
    pop.row(0) = thermal_at_cutoff(initial, nf).transpose();  // all ions |up>

    double top = 0.0;
    if (cycles > 0) {
        const MatrixXd h = basis.sideband_hamiltonian(rates, 0.0);
        const MatrixXcd u = propagator(h, pulse_duration_s);
        const MatrixXd usq = u.cwiseAbs2();  // doubly stochastic transfer matrix
        const MatrixXd eheat = recoil > 0.0 ? heating_block_exponential(nf, 0, recoil) : MatrixXd();

        for (int c = 0; c < cycles; ++c) {
            // unitary pulse + collapse to populations
            MatrixXd next = MatrixXd::Zero(sd, nf + 1);
            VectorXd flat = VectorXd::Zero(basis.dim());
            for (int s = 0; s < sd; ++s)
                for (int n = 0; n <= nf; ++n) flat[basis.idx(s, n)] = pop(s, n);
            const VectorXd after = usq * flat;
            for (int s = 0; s < sd; ++s)
                for (int n = 0; n <= nf; ++n) next(s, n) = after[basis.idx(s, n)];

            // repump: each down ion independently returns to up with prob eta
            MatrixXd repumped = MatrixXd::Zero(sd, nf + 1);
            for (int s = 0; s < sd; ++s) {
                // enumerate outcomes over the down ions of s
                std::vector<int> downs;
                for (int i = 0; i < mode.n_ions; ++i)
                    if (basis.ion_down(s, i)) downs.push_back(i);
                const int m = static_cast<int>(downs.size());
                for (int mask = 0; mask < (1 << m); ++mask) {
                    double w = 1.0;
                    int s2 = s;
                    for (int j = 0; j < m; ++j) {
                        if (mask & (1 << j)) {
                            w *= repump;
                            s2 = basis.flip(s2, downs[j]);  // repumped to up
                        } else {
                            w *= 1.0 - repump;
                        }
                    }
                    if (w > 0.0) repumped.row(s2) += w * next.row(s);
                }
            }

            // flat recoil heating of the motional marginal
            if (recoil > 0.0)
                for (int s = 0; s < sd; ++s)
                    repumped.row(s) = (eheat * repumped.row(s).transpose()).transpose();

            pop = repumped;
            top = std::max(top, pop.col(nf).sum());
        }
    }
    CoolRun out;
    out.distribution = pop.colwise().sum().transpose();
    out.top_population = top;
    return out;
}

} // namespace

VectorXd sideband_cool(const MotionalMode& mode, const ThermalState& initial, int cycles,
                       double pulse_duration_s, double sideband_rate_rad_s,
                       double repump_efficiency, double recoil_heating_per_cycle) {
    mode.validate();
    if (cycles < 0) throw std::invalid_argument("sideband_cool: cycles must be >= 0");
    if (repump_efficiency < 0.0 || repump_efficiency > 1.0)
        throw std::invalid_argument("sideband_cool: repump efficiency must lie in [0, 1]");
    if (cycles == 0) return thermal_at_cutoff(initial, mode.fock_cutoff);

    CoolRun run = run_cool(mode, initial, cycles, pulse_duration_s, sideband_rate_rad_s,
                           repump_efficiency, recoil_heating_per_cycle, mode.fock_cutoff);
    if (run.top_population > k_top_tol && mode.fock_cutoff < k_escalated_cutoff)
        run = run_cool(mode, initial, cycles, pulse_duration_s, sideband_rate_rad_s,
                       repump_efficiency, recoil_heating_per_cycle, k_escalated_cutoff);
    if (run.top_population > k_top_tol)
        throw CutoffError("sideband_cool: top Fock level population exceeds 1e-4");
    return run.distribution;
}

VectorXd apply_heating(const VectorXd& distribution, double rate_quanta_per_s, double duration_s) {
    if (!(rate_quanta_per_s >= 0.0))
        throw std::invalid_argument("apply_heating: rate must be >= 0");
    if (duration_s < 0.0) throw std::invalid_argument("apply_heating: duration must be >= 0");
    const double gt = rate_quanta_per_s * duration_s;
    if (gt == 0.0) return distribution;

    VectorXd p = distribution;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int nf = static_cast<int>(p.size()) - 1;
        const VectorXd out = heating_block_exponential(nf, 0, gt) * p;
        if (out[nf] <= k_top_tol || nf + 1 > k_escalated_cutoff) {
            if (out[nf] > k_top_tol)
                throw CutoffError("apply_heating: top Fock level population exceeds 1e-4");
            return out;
        }
        VectorXd padded = VectorXd::Zero(k_escalated_cutoff + 1);
        padded.head(p.size()) = p;
        p = padded;
    }
    throw CutoffError("apply_heating: top Fock level population exceeds 1e-4");
}

} // namespace mwion
