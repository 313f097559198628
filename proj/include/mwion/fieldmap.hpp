#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mwion/levels.hpp"

namespace mwion {

struct MotionalMode;  // dynamics.hpp

// Oscillating near-field around its null, linearized as a symmetric traceless
// quadrupole in the xz plane:
//   B_osc(d) = B' [ cos2a dx' + sin2a dz', 0, sin2a dx' - cos2a dz' ] cos(2pi f_s t)
// with primes measured from the null position.
struct QuadrupoleField {
    double gradient_t_per_m = 0.0;       // B' >= 0
    double angle_alpha_rad = 0.0;        // normalized to [0, pi)
    double drive_frequency_hz = 0.0;
    Eigen::Vector2d null_xz_m = Eigen::Vector2d::Zero();

    void validate() const;
    // amplitude vector of the cos(2pi f_s t) oscillation at the given
    // displacement from the nominal ion position
    Eigen::Vector3d field_at(const Eigen::Vector3d& displacement_m) const;
};

struct StaticFieldFrame {
    Eigen::Vector3d quantization_axis = Eigen::Vector3d::UnitZ();
    double magnitude_tesla = 0.0;

    void validate() const;
    // bias field in the xz plane, 15 degrees from z
    static StaticFieldFrame paper_default(double magnitude_tesla);
};

struct ShiftMeasurement {
    double dx_m, dz_m;
    double shift_hz;
    double sigma_hz;
};

// Second-order AC-Zeeman shift of a transition from an off-resonant
// oscillating field: the amplitude vector is decomposed into pi/sigma+/-
// components along the quantization axis and every magnetic-dipole coupling
// in the ground manifold contributes its co- and counter-rotating term.
// Throws ResonanceError when the drive sits within `guard_band_hz` of any
// coupled transition.
double ac_zeeman_shift(const AtomModel& atom, const StaticFieldFrame& frame,
                       const TransitionSpec& t, const Eigen::Vector3d& field_amplitude_t,
                       double drive_frequency_hz, double guard_band_hz = 100e3);

struct QuadrupoleFitResult {
    QuadrupoleField field;
    Eigen::Matrix4d covariance;   // order: B', alpha, null_x, null_z
    double chi2_reduced = 0.0;
    int iterations = 0;
};

// Weighted nonlinear least squares for (B', alpha, null position) against a
// measured AC-Zeeman shift map.
QuadrupoleFitResult fit_quadrupole(const std::vector<ShiftMeasurement>& measurements,
                                   const AtomModel& atom, const StaticFieldFrame& frame,
                                   const TransitionSpec& t, double drive_frequency_hz,
                                   const QuadrupoleField& initial_guess);

// free-space comparison figure: (2 pi f / c) * B
double plane_wave_gradient(double field_amplitude_t, double frequency_hz);

struct SidebandPrediction {
    double rabi_rate_rad_s;   // Omega_sb; +inf pi-time encoded below
    double pi_time_s;         // pi / Omega, +inf at zero gradient projection
};

// Omega_sb = mu_el mu_B B' x0 / hbar * cos(alignment), x0 the ground-state
// extent of the addressed mode.
SidebandPrediction predict_sideband(const QuadrupoleField& q, double matrix_element_mub,
                                    const MotionalMode& mode, double alignment_angle_rad);

} // namespace mwion
