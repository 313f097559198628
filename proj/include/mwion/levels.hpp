#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mwion {

// Ground-state hyperfine engine for a J = 1/2 ion with half-integer nuclear
// spin. Energies are in Hz relative to the hyperfine centroid; the Zeeman
// Hamiltonian is h*A I.J + g_J mu_B B J_z - g_I mu_N B I_z, with g_I the
// nuclear g-factor in nuclear magnetons (mu_I = g_I mu_N I).
struct AtomModel {
    double nuclear_spin = 2.5;       // I, half-integer
    double hyperfine_a_hz = 0.0;     // A, signed
    double g_j = 2.0;
    double g_i = 0.0;                // nuclear magnetons
    double mass_kg = 0.0;

    // 25Mg+ literature defaults (A from Itano & Wineland 1981,
    // mu_I = -0.85545 mu_N, m = 24.985837 u)
    static AtomModel mg25();

    // keys: A_hfs_hz, g_J, g_I, I2 (twice the nuclear spin), mass_kg
    static AtomModel from_config(const std::string& path);

    void validate() const;
    int two_i() const { return static_cast<int>(nuclear_spin * 2.0 + 0.5); }
    int dim() const { return 2 * (two_i() + 1); }        // (2I+1)(2J+1)
    int f_upper() const { return (two_i() + 1) / 2; }    // I + 1/2
    int f_lower() const { return (two_i() - 1) / 2; }    // I - 1/2
    double zero_field_splitting_hz() const {
        return std::abs(hyperfine_a_hz) * (nuclear_spin + 0.5);
    }
};

struct ZeemanLevel {
    int f_label;          // low-field F quantum number
    int m_f;
    double energy_hz;     // relative to the hyperfine centroid
    // coefficients on |m_I = m_F - 1/2, m_J = +1/2> and
    // |m_I = m_F + 1/2, m_J = -1/2>; one of them is exactly 0 for stretched
    // states
    double amp_mj_up;
    double amp_mj_down;
};

enum class Polarization { pi, sigma_plus, sigma_minus };

int delta_mf_of(Polarization p);

struct TransitionSpec {
    int lower_f, lower_mf;
    int upper_f, upper_mf;
    Polarization polarization;

    TransitionSpec(int lf, int lmf, int uf, int umf, Polarization pol);

    // the paper's qubit |3,1> <-> |2,1> (pi)
    static TransitionSpec qubit();
    // the shift-mapping transition |3,1> -> |2,0> (sigma-)
    static TransitionSpec mapping();

    int delta_mf() const { return upper_mf - lower_mf; }
};

// All 12 levels at field B, eigen-solved per m_F block plus the spherical
// magnetic-moment matrices needed for Rabi rates and AC-Zeeman sums.
class LevelSpectrum {
  public:
    LevelSpectrum(const AtomModel& atom, double b_tesla);

    const std::vector<ZeemanLevel>& levels() const { return levels_; }
    const ZeemanLevel& level(int f, int mf) const;
    int index_of(int f, int mf) const;
    double b_tesla() const { return b_; }

    // <row| mu_q |col> / mu_B over the level basis (ordering of levels()),
    // q in {-1, 0, +1}
    Eigen::MatrixXd moment_matrix(int q) const;

    // d(energy)/dB in Hz/T via Hellmann-Feynman (exact per block)
    double energy_derivative_hz_per_t(int f, int mf) const;

  private:
    const AtomModel atom_;
    double b_;
    std::vector<ZeemanLevel> levels_;
};

std::vector<ZeemanLevel> breit_rabi_levels(const AtomModel& atom, double b_tesla);

double transition_frequency(const AtomModel& atom, const TransitionSpec& t, double b_tesla);

// analytic df/dB (Hellmann-Feynman), Hz/T
double transition_frequency_derivative(const AtomModel& atom, const TransitionSpec& t,
                                       double b_tesla);

struct FieldIndependentPoint {
    double b0_tesla;
    double f0_hz;
};

// Bisection on the finite-difference df/dB (1 uT step); |df/dB| < 10 Hz/mT at
// the returned root. Throws NoRootError when df/dB does not change sign in
// the bracket.
FieldIndependentPoint field_independent_point(const AtomModel& atom, const TransitionSpec& t,
                                              double b_lo_tesla, double b_hi_tesla);

// <upper| mu_q |lower> / mu_B with q fixed by the transition's polarization;
// throws when the polarization is inconsistent with Delta m_F.
double dipole_matrix_element(const AtomModel& atom, const TransitionSpec& t, double b_tesla);

} // namespace mwion
