#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "mwion/dynamics.hpp"
#include "mwion/fieldmap.hpp"
#include "mwion/levels.hpp"

namespace mwion {

// two-qubit density matrix, basis {uu, ud, du, dd}
using TwoQubitDensity = Eigen::Matrix4cd;

void validate_density(const TwoQubitDensity& rho);

// Fidelity against Psi = (|dd> - i|uu>)/sqrt2 up to the coherence phase:
// F = 1/2 (rho_uu,uu + rho_dd,dd) + |rho_uu,dd|.
double state_fidelity(const TwoQubitDensity& rho);

TwoQubitDensity down_down_density();

struct GateSegment {
    double duration_s = 0.0;
    double spin_phase_rad = 0.0;    // phi_s, common mean phase of the two tones
    double motion_phase_rad = 0.0;  // phi_m, half the tone phase difference
};

// Two-tone spin-dependent-force drive at f0 +- (f_r + delta). The default
// schedule is two equal segments with the relative drive phase reversed in
// the second one (phi_m stepped by pi), which echoes quasi-static motional
// frequency errors.
struct GateSchedule {
    double mode_frequency_hz = 0.0;
    double detuning_delta_hz = 0.0;        // delta > 0
    Eigen::VectorXd ion_rates_rad_s;       // per-ion rate, signed by mode participation
    std::vector<GateSegment> segments;

    void validate() const;
    double total_duration_s() const;
    // worst per-segment distance of delta*T from loop closure, in radians
    double closure_defect_rad() const;

    // segment skeleton only (rates must still be set / calibrated):
    // exact_closure picks T = 1/delta per segment, otherwise the paper's
    // literal 200 us
    static GateSchedule two_segment(const MotionalMode& mode, double delta_hz, bool exact_closure,
                                    double spin_phase_rad = 1.5707963267948966);
    static GateSchedule single_segment(const MotionalMode& mode, double delta_hz,
                                       bool exact_closure,
                                       double spin_phase_rad = 1.5707963267948966);

    GateSchedule with_rate(double rate_scale_rad_s, const MotionalMode& mode) const;
};

struct NoiseModel {
    double freq_jitter_rms_hz = 0.0;     // quasi-static per shot
    double residual_field_t = 0.0;       // oscillating field amplitude at the ions
    double heating_rate_qps = 0.0;       // quanta per second
    int shots = 1;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Everything needed to turn a residual field amplitude into a carrier
// detuning via the AC-Zeeman model.
struct GateContext {
    AtomModel atom;
    StaticFieldFrame frame;
    TransitionSpec qubit = TransitionSpec::qubit();
    Eigen::Vector3d residual_direction = Eigen::Vector3d::UnitX();
};

// Sum of the AC-Zeeman shifts of the qubit transition from both gate tones
// carrying the residual field amplitude.
double residual_field_carrier_shift(const GateContext& ctx, const GateSchedule& schedule,
                                    double residual_amplitude_t);

struct GateRunResult {
    TwoQubitDensity rho;
    Eigen::MatrixXcd motional_state;   // spin-traced reduced density matrix
    double top_population = 0.0;
    double carrier_shift_hz = 0.0;
};

// Numeric propagation of the bichromatic spin-dependent force, segment by
// segment, exact matrix exponential per constant-parameter segment. With a
// noise model: Monte Carlo over per-shot quasi-static mode-frequency offsets,
// a constant AC-Zeeman carrier shift, and Lindblad heating interleaved in
// slices. Returns the motion-traced two-qubit density matrix.
TwoQubitDensity ms_propagate(const GateSchedule& schedule, const TwoQubitDensity& initial_spin,
                             const ThermalState& initial_motion, const MotionalMode& mode,
                             const NoiseModel* noise = nullptr, const GateContext* ctx = nullptr);

// same propagation, also reporting the reduced motional state
GateRunResult ms_propagate_full(const GateSchedule& schedule, const TwoQubitDensity& initial_spin,
                                const ThermalState& initial_motion, const MotionalMode& mode,
                                const NoiseModel* noise = nullptr,
                                const GateContext* ctx = nullptr);

struct BranchSolution {
    double force_amplitude_rad_s;                          // f_b = sum_i s_i rate_i / 2
    std::vector<std::pair<double, std::complex<double>>> trajectory;  // (t, alpha)
    std::complex<double> final_displacement;
    double geometric_phase_rad;
};

struct AnalyticMsResult {
    std::vector<BranchSolution> branches;   // sigma_phi branch order: ++, +-, -+, --
    double entangling_phase_rad;            // spread of branch phases
    TwoQubitDensity rho;                    // ideal spin state from |dd>
};

// Closed-form phase-space solution for noise-free schedules whose segments
// share one spin phase; cross-checks ms_propagate.
AnalyticMsResult analytic_ms(const GateSchedule& schedule, double nbar);

// Rate scale for which the analytic entangling phase reaches target_phase;
// branch phases are exactly quadratic in the rate.
double calibrate_rate(const GateSchedule& skeleton, const MotionalMode& mode,
                      double target_phase_rad = 1.5707963267948966);

} // namespace mwion
