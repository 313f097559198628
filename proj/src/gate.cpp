#include "mwion/gate.hpp"

#include <cmath>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/rng.hpp"

namespace mwion {

namespace con = constants;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

void validate_density(const TwoQubitDensity& rho) {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw InvariantViolationError("density matrix not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-8 || std::abs(rho.trace().imag()) > 1e-10)
        throw InvariantViolationError("density matrix trace != 1");
    Eigen::SelfAdjointEigenSolver<TwoQubitDensity> es(rho);
    if (es.eigenvalues().minCoeff() < -1e-8)
        throw InvariantViolationError("density matrix not positive semidefinite");
}

double state_fidelity(const TwoQubitDensity& rho) {
    validate_density(rho);
    return 0.5 * (rho(0, 0).real() + rho(3, 3).real()) + std::abs(rho(0, 3));
}

TwoQubitDensity down_down_density() {
    TwoQubitDensity r = TwoQubitDensity::Zero();
    r(3, 3) = 1.0;
    return r;
}

void GateSchedule::validate() const {
    if (!(detuning_delta_hz > 0.0))
        throw std::invalid_argument("GateSchedule: delta must be > 0");
    if (segments.empty()) throw std::invalid_argument("GateSchedule: no segments");
    for (const auto& s : segments)
        if (!(s.duration_s > 0.0))
            throw std::invalid_argument("GateSchedule: segment durations must be > 0");
    if (ion_rates_rad_s.size() == 0)
        throw std::invalid_argument("GateSchedule: ion rates not set");
}

double GateSchedule::total_duration_s() const {
    double t = 0.0;
    for (const auto& s : segments) t += s.duration_s;
    return t;
}

double GateSchedule::closure_defect_rad() const {
    double worst = 0.0;
    for (const auto& s : segments) {
        const double phase = 2.0 * con::pi * detuning_delta_hz * s.duration_s;
        const double frac = std::fmod(phase, 2.0 * con::pi);
        worst = std::max(worst, std::min(frac, 2.0 * con::pi - frac));
    }
    return worst;
}

GateSchedule GateSchedule::two_segment(const MotionalMode& mode, double delta_hz,
                                       bool exact_closure, double spin_phase_rad) {
    GateSchedule g;
    g.mode_frequency_hz = mode.frequency_hz;
    g.detuning_delta_hz = delta_hz;
    g.ion_rates_rad_s = VectorXd::Zero(mode.n_ions);
    const double t = exact_closure ? 1.0 / delta_hz : 200e-6;
    g.segments = {{t, spin_phase_rad, 0.0}, {t, spin_phase_rad, con::pi}};
    return g;
}

GateSchedule GateSchedule::single_segment(const MotionalMode& mode, double delta_hz,
                                          bool exact_closure, double spin_phase_rad) {
    GateSchedule g;
    g.mode_frequency_hz = mode.frequency_hz;
    g.detuning_delta_hz = delta_hz;
    g.ion_rates_rad_s = VectorXd::Zero(mode.n_ions);
    const double t = exact_closure ? 2.0 / delta_hz : 400e-6;
    g.segments = {{t, spin_phase_rad, 0.0}};
    return g;
}

GateSchedule GateSchedule::with_rate(double rate_scale_rad_s, const MotionalMode& mode) const {
    GateSchedule g = *this;
    g.ion_rates_rad_s = rate_scale_rad_s * mode.mode_vector;
    return g;
}

void NoiseModel::validate() const {
    if (freq_jitter_rms_hz < 0.0 || residual_field_t < 0.0 || heating_rate_qps < 0.0)
        throw std::invalid_argument("NoiseModel: magnitudes must be >= 0");
    if (shots < 1) throw std::invalid_argument("NoiseModel: shots must be >= 1");
}

double residual_field_carrier_shift(const GateContext& ctx, const GateSchedule& schedule,
                                    double residual_amplitude_t) {
    if (residual_amplitude_t == 0.0) return 0.0;
    const double f0 = transition_frequency(ctx.atom, ctx.qubit, ctx.frame.magnitude_tesla);
    const double fr = schedule.mode_frequency_hz + schedule.detuning_delta_hz;
    const Eigen::Vector3d amp = residual_amplitude_t * ctx.residual_direction.normalized();
    double shift = 0.0;
    shift += ac_zeeman_shift(ctx.atom, ctx.frame, ctx.qubit, amp, f0 + fr);
    shift += ac_zeeman_shift(ctx.atom, ctx.frame, ctx.qubit, amp, f0 - fr);
    return shift;
}

// ---------------------------------------------------------------------------

namespace {

struct SegmentPropagator {
    // H(phi_m) = G(phi_m) H(0) G(phi_m)^dag with G = exp(-i phi_m n); one
    // eigendecomposition per (shot) serves every segment of common spin phase
    Eigen::VectorXd eigenvalues;
    MatrixXcd eigenvectors;
};

MatrixXcd segment_unitary(const SegmentPropagator& sp, const SpinFockBasis& basis,
                          double duration_s, double motion_phase_rad) {
    const int d = static_cast<int>(sp.eigenvalues.size());
    Eigen::VectorXcd ph(d);
    for (int k = 0; k < d; ++k) ph[k] = std::exp(cplx(0.0, -sp.eigenvalues[k] * duration_s));
    MatrixXcd u = sp.eigenvectors * ph.asDiagonal() * sp.eigenvectors.adjoint();
    if (motion_phase_rad != 0.0) {
        Eigen::VectorXcd g(d);
        for (int s = 0; s < basis.spin_dim(); ++s)
            for (int n = 0; n <= basis.nf(); ++n)
                g[basis.idx(s, n)] = std::exp(cplx(0.0, -motion_phase_rad * n));
        u = g.asDiagonal() * u * g.conjugate().asDiagonal();
    }
    return u;
}

struct ShotResult {
    TwoQubitDensity rho;
    MatrixXcd rho_motion;
    double top_population;
};

// pure-state path (no heating): propagate each initial basis component
ShotResult propagate_pure(const GateSchedule& schedule, const SpinFockBasis& basis,
                          const TwoQubitDensity& rho_spin, const VectorXd& p_motion,
                          double delta_shot_hz, double carrier_shift_hz) {
    const double common_phi_s = schedule.segments.front().spin_phase_rad;
    const MatrixXcd h0 = basis.ms_hamiltonian(schedule.ion_rates_rad_s,
                                              2.0 * con::pi * delta_shot_hz, common_phi_s, 0.0,
                                              2.0 * con::pi * carrier_shift_hz);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h0);
    SegmentPropagator sp{es.eigenvalues(), es.eigenvectors()};

    std::vector<MatrixXcd> units;
    units.reserve(schedule.segments.size());
    for (const auto& seg : schedule.segments) {
        if (seg.spin_phase_rad != common_phi_s)
            throw std::invalid_argument("ms_propagate: segments must share one spin phase");
        units.push_back(segment_unitary(sp, basis, seg.duration_s, seg.motion_phase_rad));
    }

    Eigen::SelfAdjointEigenSolver<TwoQubitDensity> rs(rho_spin);
    ShotResult out;
    out.rho = TwoQubitDensity::Zero();
    out.rho_motion = MatrixXcd::Zero(basis.nf() + 1, basis.nf() + 1);
    out.top_population = 0.0;

    for (int k = 0; k < 4; ++k) {
        const double wk = rs.eigenvalues()[k];
        if (wk < 1e-14) continue;
        for (int n0 = 0; n0 <= basis.nf(); ++n0) {
            const double pn = p_motion[n0];
            if (pn < 1e-15) continue;
            Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis.dim());
            for (int s = 0; s < 4; ++s) psi[basis.idx(s, n0)] = rs.eigenvectors()(s, k);
            for (const auto& u : units) psi = u * psi;
            const double w = wk * pn;
            for (int s1 = 0; s1 < 4; ++s1)
                for (int s2 = 0; s2 < 4; ++s2) {
                    cplx acc = 0.0;
                    for (int m = 0; m <= basis.nf(); ++m)
                        acc += psi[basis.idx(s1, m)] * std::conj(psi[basis.idx(s2, m)]);
                    out.rho(s1, s2) += w * acc;
                }
            for (int s = 0; s < 4; ++s)
                for (int m1 = 0; m1 <= basis.nf(); ++m1)
                    for (int m2 = 0; m2 <= basis.nf(); ++m2)
                        out.rho_motion(m1, m2) +=
                            w * psi[basis.idx(s, m1)] * std::conj(psi[basis.idx(s, m2)]);
            double t = 0.0;
            for (int s = 0; s < 4; ++s) t += std::norm(psi[basis.idx(s, basis.nf())]);
            out.top_population += w * t;
        }
    }
    return out;
}

// density-matrix path with Lindblad heating interleaved in slices
ShotResult propagate_heated(const GateSchedule& schedule, const SpinFockBasis& basis,
                            const TwoQubitDensity& rho_spin, const VectorXd& p_motion,
                            double delta_shot_hz, double carrier_shift_hz,
                            double heating_rate_qps) {
    const int nf = basis.nf();
    const int dim = basis.dim();
    const double common_phi_s = schedule.segments.front().spin_phase_rad;
    const MatrixXcd h0 = basis.ms_hamiltonian(schedule.ion_rates_rad_s,
                                              2.0 * con::pi * delta_shot_hz, common_phi_s, 0.0,
                                              2.0 * con::pi * carrier_shift_hz);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h0);
    SegmentPropagator sp{es.eigenvalues(), es.eigenvectors()};

    MatrixXcd rho = MatrixXcd::Zero(dim, dim);
    for (int s1 = 0; s1 < 4; ++s1)
        for (int s2 = 0; s2 < 4; ++s2)
            for (int n = 0; n <= nf; ++n)
                rho(basis.idx(s1, n), basis.idx(s2, n)) = rho_spin(s1, s2) * p_motion[n];

    for (const auto& seg : schedule.segments) {
        if (seg.spin_phase_rad != common_phi_s)
            throw std::invalid_argument("ms_propagate: segments must share one spin phase");
        const int slices = std::max(2, std::min(8, static_cast<int>(std::ceil(
                                                       seg.duration_s / 50e-6))));
        const double dt = seg.duration_s / slices;
        const MatrixXcd u = segment_unitary(sp, basis, dt, seg.motion_phase_rad);
        std::vector<MatrixXd> eheat(nf + 1);
        for (int l = 0; l <= nf; ++l)
            eheat[l] = heating_block_exponential(nf, l, heating_rate_qps * dt);

        for (int sl = 0; sl < slices; ++sl) {
            rho = u * rho * u.adjoint();
            // heating acts on the motional index pair of every spin block,
            // separately per coherence diagonal l
            for (int s1 = 0; s1 < 4; ++s1)
                for (int s2 = 0; s2 < 4; ++s2) {
                    for (int l = 0; l <= nf; ++l) {
                        const int len = nf + 1 - l;
                        Eigen::VectorXcd diag_hi(len), diag_lo(len);
                        for (int n = 0; n < len; ++n) {
                            diag_hi[n] = rho(basis.idx(s1, n), basis.idx(s2, n + l));
                            if (l > 0) diag_lo[n] = rho(basis.idx(s1, n + l), basis.idx(s2, n));
                        }
                        const Eigen::VectorXcd new_hi = eheat[l] * diag_hi;
                        for (int n = 0; n < len; ++n)
                            rho(basis.idx(s1, n), basis.idx(s2, n + l)) = new_hi[n];
                        if (l > 0) {
                            const Eigen::VectorXcd new_lo = eheat[l] * diag_lo;
                            for (int n = 0; n < len; ++n)
                                rho(basis.idx(s1, n + l), basis.idx(s2, n)) = new_lo[n];
                        }
                    }
                }
        }
    }

    ShotResult out;
    out.rho = TwoQubitDensity::Zero();
    out.rho_motion = MatrixXcd::Zero(nf + 1, nf + 1);
    out.top_population = 0.0;
    for (int s1 = 0; s1 < 4; ++s1)
        for (int s2 = 0; s2 < 4; ++s2) {
            cplx acc = 0.0;
            for (int m = 0; m <= nf; ++m) acc += rho(basis.idx(s1, m), basis.idx(s2, m));
            out.rho(s1, s2) = acc;
        }
    for (int s = 0; s < 4; ++s)
        for (int m1 = 0; m1 <= nf; ++m1)
            for (int m2 = 0; m2 <= nf; ++m2)
                out.rho_motion(m1, m2) += rho(basis.idx(s, m1), basis.idx(s, m2));
    for (int s = 0; s < 4; ++s) out.top_population += rho(basis.idx(s, nf), basis.idx(s, nf)).real();
    return out;
}

ShotResult run_gate_once(const GateSchedule& schedule, const SpinFockBasis& basis,
                         const TwoQubitDensity& rho_spin, const VectorXd& p_motion,
                         double delta_shot_hz, double carrier_shift_hz, double heating_qps) {
    if (heating_qps > 0.0)
        return propagate_heated(schedule, basis, rho_spin, p_motion, delta_shot_hz,
                                carrier_shift_hz, heating_qps);
    return propagate_pure(schedule, basis, rho_spin, p_motion, delta_shot_hz, carrier_shift_hz);
}

constexpr double k_top_tol = 1e-4;
constexpr int k_escalated_cutoff = 60;

} // namespace

GateRunResult ms_propagate_full(const GateSchedule& schedule, const TwoQubitDensity& initial_spin,
                                const ThermalState& initial_motion, const MotionalMode& mode,
                                const NoiseModel* noise, const GateContext* ctx) {
    validate_density(initial_spin);
    mode.validate();
    if (mode.n_ions != 2)
        throw std::invalid_argument("ms_propagate: entangling gate needs a two-ion mode");
    GateRunResult out;
    if (schedule.segments.empty() || schedule.total_duration_s() == 0.0) {
        out.rho = initial_spin;
        const VectorXd p = ThermalState::thermal(initial_motion.nbar, mode.fock_cutoff).p;
        out.motional_state = p.cast<cplx>().asDiagonal();
        return out;
    }
    schedule.validate();
    if (noise) noise->validate();

    double carrier_shift_hz = 0.0;
    if (noise && noise->residual_field_t > 0.0) {
        if (!ctx)
            throw std::invalid_argument(
                "ms_propagate: residual-field noise needs a GateContext for the AC-Zeeman model");
        carrier_shift_hz = residual_field_carrier_shift(*ctx, schedule, noise->residual_field_t);
    }

    int nf = mode.fock_cutoff;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const SpinFockBasis basis(2, nf);
        const VectorXd p = ThermalState::thermal(initial_motion.nbar, nf).p;
        TwoQubitDensity avg = TwoQubitDensity::Zero();
        MatrixXcd avg_motion = MatrixXcd::Zero(nf + 1, nf + 1);
        double top = 0.0;

        const bool noiseless = !noise || (noise->freq_jitter_rms_hz == 0.0 &&
                                          noise->residual_field_t == 0.0 &&
                                          noise->heating_rate_qps == 0.0);
        if (noiseless) {
            const ShotResult r = run_gate_once(schedule, basis, initial_spin, p,
                                               schedule.detuning_delta_hz, 0.0, 0.0);
            avg = r.rho;
            avg_motion = r.rho_motion;
            top = r.top_population;
        } else {
            // identical shots collapse to one when nothing varies per shot
            const int shots = noise->freq_jitter_rms_hz > 0.0 ? noise->shots : 1;
            Rng rng(noise->rng_seed);
            KahanSum re[16], im[16];
            MatrixXcd motion_sum = MatrixXcd::Zero(nf + 1, nf + 1);
            for (int shot = 0; shot < shots; ++shot) {
                // common random numbers: the standardized draw is scaled by
                // the jitter, so sweeps over the jitter magnitude reuse the
                // same realization per shot index
                Rng stream = rng.stream(shot);
                const double eps = noise->freq_jitter_rms_hz * stream.gaussian();
                const ShotResult r =
                    run_gate_once(schedule, basis, initial_spin, p,
                                  schedule.detuning_delta_hz - eps, carrier_shift_hz,
                                  noise->heating_rate_qps);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        re[i * 4 + j].add(r.rho(i, j).real());
                        im[i * 4 + j].add(r.rho(i, j).imag());
                    }
                motion_sum += r.rho_motion;
                top = std::max(top, r.top_population);
            }
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    avg(i, j) =
                        cplx(re[i * 4 + j].sum, im[i * 4 + j].sum) / static_cast<double>(shots);
            avg_motion = motion_sum / static_cast<double>(shots);
        }

        if (top <= k_top_tol) {
            out.rho = avg;
            out.motional_state = avg_motion;
            out.top_population = top;
            out.carrier_shift_hz = carrier_shift_hz;
            return out;
        }
        if (nf >= k_escalated_cutoff)
            throw CutoffError("ms_propagate: top Fock level population exceeds 1e-4 at cutoff " +
                              std::to_string(nf));
        nf = k_escalated_cutoff;
    }
    throw CutoffError("ms_propagate: cutoff escalation failed");
}

TwoQubitDensity ms_propagate(const GateSchedule& schedule, const TwoQubitDensity& initial_spin,
                             const ThermalState& initial_motion, const MotionalMode& mode,
                             const NoiseModel* noise, const GateContext* ctx) {
    return ms_propagate_full(schedule, initial_spin, initial_motion, mode, noise, ctx).rho;
}

// ---------------------------------------------------------------------------

AnalyticMsResult analytic_ms(const GateSchedule& schedule, double nbar) {
    schedule.validate();
    const int n_ions = static_cast<int>(schedule.ion_rates_rad_s.size());
    if (n_ions != 2) throw std::invalid_argument("analytic_ms: two-ion schedules only");
    const double phi_s = schedule.segments.front().spin_phase_rad;
    for (const auto& s : schedule.segments)
        if (s.spin_phase_rad != phi_s)
            throw std::invalid_argument("analytic_ms: closed form needs one common spin phase");

    const double delta = 2.0 * con::pi * schedule.detuning_delta_hz;

    AnalyticMsResult out;
    out.branches.resize(4);
    // branch order ++, +-, -+, -- over the sigma_phi eigenvalues of the ions
    const int signs[4][2] = {{+1, +1}, {+1, -1}, {-1, +1}, {-1, -1}};
    for (int b = 0; b < 4; ++b) {
        BranchSolution& br = out.branches[b];
        br.force_amplitude_rad_s = 0.5 * (signs[b][0] * schedule.ion_rates_rad_s[0] +
                                          signs[b][1] * schedule.ion_rates_rad_s[1]);
        cplx alpha = 0.0;
        double theta = 0.0;
        double t_elapsed = 0.0;
        br.trajectory.emplace_back(0.0, alpha);
        for (const auto& seg : schedule.segments) {
            const double g = br.force_amplitude_rad_s / delta;
            const cplx beta = g * std::exp(cplx(0.0, -seg.motion_phase_rad));
            const double dt_phase = delta * seg.duration_s;
            // sampled loop alpha(t) = beta + (alpha0 - beta) e^{i delta t}
            constexpr int k_samples = 64;
            for (int k = 1; k <= k_samples; ++k) {
                const double tau = seg.duration_s * k / k_samples;
                const cplx a_t = beta + (alpha - beta) * std::exp(cplx(0.0, delta * tau));
                br.trajectory.emplace_back(t_elapsed + tau, a_t);
            }
            // operator composition U_seg = e^{i theta} D(d) R(delta T):
            //   d = beta (1 - e^{i delta T}),  theta = g^2 (sin - delta T)
            const cplx rot = std::exp(cplx(0.0, dt_phase));
            const cplx d = beta * (1.0 - rot);
            const double th_seg = g * g * (std::sin(dt_phase) - dt_phase);
            theta += th_seg + std::imag(d * std::conj(alpha * rot));
            alpha = d + alpha * rot;
            t_elapsed += seg.duration_s;
        }
        br.final_displacement = alpha;
        br.geometric_phase_rad = theta;
    }

    double th_min = out.branches[0].geometric_phase_rad, th_max = th_min;
    for (const auto& b : out.branches) {
        th_min = std::min(th_min, b.geometric_phase_rad);
        th_max = std::max(th_max, b.geometric_phase_rad);
    }
    out.entangling_phase_rad = th_max - th_min;

    // spin density matrix from |dd> in the branch basis:
    // |+->_phi = (|u> + e^{i phi}|d>)/sqrt2 etc., <branch|dd> products
    Eigen::Matrix4cd to_branch;  // <b|s> over s = uu, ud, du, dd
    {
        const cplx em = std::exp(cplx(0.0, -phi_s));  // <+|d> = e^{-i phi}/sqrt2
        const cplx up[2] = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};       // <+|u>, <-|u>
        const cplx dn[2] = {em / std::sqrt(2.0), -em / std::sqrt(2.0)};        // <+|d>, <-|d>
        for (int b = 0; b < 4; ++b) {
            const int b1 = b >> 1, b2 = b & 1;   // 0 = +, 1 = -
            const cplx c1u = up[b1], c1d = dn[b1];
            const cplx c2u = up[b2], c2d = dn[b2];
            to_branch(b, 0) = c1u * c2u;
            to_branch(b, 1) = c1u * c2d;
            to_branch(b, 2) = c1d * c2u;
            to_branch(b, 3) = c1d * c2d;
        }
    }
    TwoQubitDensity rho_b = to_branch * down_down_density() * to_branch.adjoint();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const cplx ai = out.branches[i].final_displacement;
            const cplx aj = out.branches[j].final_displacement;
            const double dth =
                out.branches[i].geometric_phase_rad - out.branches[j].geometric_phase_rad;
            const double overlap = std::exp(-std::norm(ai - aj) * (nbar + 0.5));
            const cplx extra = std::exp(cplx(0.0, -std::imag(aj * std::conj(ai))));
            rho_b(i, j) *= std::exp(cplx(0.0, dth)) * overlap * extra;
        }
    out.rho = to_branch.adjoint() * rho_b * to_branch;
    return out;
}

double calibrate_rate(const GateSchedule& skeleton, const MotionalMode& mode,
                      double target_phase_rad) {
    if (target_phase_rad == 0.0) return 0.0;
    if (target_phase_rad < 0.0)
        throw std::invalid_argument("calibrate_rate: target phase must be >= 0");
    const GateSchedule ref = skeleton.with_rate(1.0, mode);
    const double spread = analytic_ms(ref, 0.0).entangling_phase_rad;
    if (spread <= 0.0)
        throw std::invalid_argument("calibrate_rate: schedule accumulates no entangling phase");
    // branch phases are exactly quadratic in the rate scale
    return std::sqrt(target_phase_rad / spread);
}

} // namespace mwion
