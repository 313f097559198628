#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace mwion {

struct MotionalMode {
    double frequency_hz = 0.0;
    double ion_mass_kg = 0.0;
    int n_ions = 1;
    Eigen::VectorXd mode_vector;   // per-ion participation, normalized
    int fock_cutoff = 30;

    void validate() const;
    static MotionalMode single_ion(double frequency_hz, double mass_kg, int fock_cutoff = 30);
    // out-of-phase radial mode of a two-ion crystal, (1, -1)/sqrt2
    static MotionalMode rocking(double frequency_hz, double mass_kg, int fock_cutoff = 30);

    // sqrt(hbar / (2 m omega)), single-ion mass convention with normalized
    // mode vector
    double ground_state_extent_m() const;
};

struct ThermalState {
    double nbar = 0.0;
    Eigen::VectorXd p;   // occupation probabilities 0..cutoff, renormalized

    static ThermalState thermal(double nbar, int fock_cutoff);
    void validate() const;
};

// Two-level Rabi solution: P_up(t) from |down> at detuning Delta,
// P = (Omega^2/Omega_eff^2) sin^2(Omega_eff t / 2).
double carrier_rabi(double rabi_rad_s, double detuning_rad_s, double duration_s);

// ---------------------------------------------------------------------------
// spin (x) Fock machinery shared by the sideband and gate propagators

class SpinFockBasis {
  public:
    SpinFockBasis(int n_ions, int fock_cutoff);

    int n_ions() const { return n_ions_; }
    int nf() const { return nf_; }
    int spin_dim() const { return spin_dim_; }
    int dim() const { return spin_dim_ * (nf_ + 1); }
    // spin-major index; spin bits: bit (n_ions-1-i) of s is ion i,
    // 0 = up, 1 = down
    int idx(int spin, int n) const { return spin * (nf_ + 1) + n; }
    int n_down(int spin) const;
    bool ion_down(int spin, int ion) const { return (spin >> (n_ions_ - 1 - ion)) & 1; }
    int flip(int spin, int ion) const { return spin ^ (1 << (n_ions_ - 1 - ion)); }

    // blue-tone RWA sideband Hamiltonian in the detuning-rotating frame
    // (rad/s):  -delta n + sum_i (rate_i/2)(sigma+_i a-dag + sigma-_i a)
    Eigen::MatrixXd sideband_hamiltonian(const Eigen::VectorXd& ion_rates_rad_s,
                                         double detuning_rad_s) const;

    // bichromatic spin-dependent force in the delta-rotating frame:
    //   -delta n + sum_i (rate_i/2) sigma_phi_s^i (a-dag e^{-i phi_m} + a e^{+i phi_m})
    //   + carrier_shift * sum_i sigma_z^i / 2
    Eigen::MatrixXcd ms_hamiltonian(const Eigen::VectorXd& ion_rates_rad_s,
                                    double detuning_rad_s, double spin_phase_rad,
                                    double motion_phase_rad, double carrier_shift_rad_s) const;

  private:
    int n_ions_, nf_, spin_dim_;
};

// U(t) = V exp(-i Lambda t) V^T for real symmetric H
Eigen::MatrixXcd propagator(const Eigen::MatrixXd& h_rad_s, double t_s);
// same for complex Hermitian H
Eigen::MatrixXcd propagator(const Eigen::MatrixXcd& h_rad_s, double t_s);

// exp(gamma_t * G_ell) for the infinite-temperature heating generator
// restricted to the ell-th coherence diagonal (symmetric tridiagonal,
// reflecting top boundary). gamma_t = rate * time in quanta.
Eigen::MatrixXd heating_block_exponential(int nf, int ell, double gamma_t);

// ---------------------------------------------------------------------------

enum class SidebandPrep {
    motion_adding,      // spins prepared all |down>, drive adds quanta
    motion_subtracting  // spins prepared all |up>, drive subtracts quanta
};

// Frequency scan over the (blue-tone) sideband: for each offset from the
// sideband resonance, propagate and return the thermally averaged expected
// number of ions in |down>. Escalates the Fock cutoff to 60 before failing
// with CutoffError when the top level accumulates > 1e-4 population.
Eigen::VectorXd sideband_scan(const MotionalMode& mode, SidebandPrep prep,
                              const ThermalState& motion, double sideband_rate_rad_s,
                              double pulse_duration_s, const Eigen::VectorXd& offsets_hz);

struct NbarFitResult {
    double nbar = 0.0;
    double nbar_sigma = 0.0;
    double rate_rad_s = 0.0;
    double rate_sigma = 0.0;
    double chi2_reduced = 0.0;
    int iterations = 0;
};

// Simultaneous thermal-model fit to a red (motion-subtracting) and blue
// (motion-adding) scan pair; free parameters are nbar and the sideband rate.
NbarFitResult fit_nbar(const Eigen::VectorXd& offsets_hz, const Eigen::VectorXd& red_signal,
                       const Eigen::VectorXd& blue_signal, const Eigen::VectorXd& red_sigma,
                       const Eigen::VectorXd& blue_sigma, const MotionalMode& mode,
                       double pulse_duration_s, double nbar_guess, double rate_guess_rad_s);

// One cooling cycle = motion-subtracting sideband unitary for
// pulse_duration, then a repump map (each down ion returned to |up> with
// probability repump_efficiency, spin coherence dropped) plus flat diffusive
// recoil heating. Returns the motional occupation distribution; spins start
// all |up>.
Eigen::VectorXd sideband_cool(const MotionalMode& mode, const ThermalState& initial, int cycles,
                              double pulse_duration_s, double sideband_rate_rad_s,
                              double repump_efficiency, double recoil_heating_per_cycle);

// Diffusive (infinite-temperature) heating map raising <n> by rate*duration.
// May return a longer vector than the input when the cutoff had to escalate.
Eigen::VectorXd apply_heating(const Eigen::VectorXd& distribution, double rate_quanta_per_s,
                              double duration_s);

} // namespace mwion
