#include "mwion/levels.hpp"

#include <algorithm>
#include <cmath>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/keyval.hpp"

namespace mwion {

namespace con = constants;

AtomModel AtomModel::mg25() {
    AtomModel a;
    a.nuclear_spin = 2.5;
    a.hyperfine_a_hz = -596.2543768e6;
    a.g_j = 2.002;
    a.g_i = -0.85545 / 2.5;
    a.mass_kg = 24.985837 * con::amu;
    return a;
}

AtomModel AtomModel::from_config(const std::string& path) {
    const KeyValueFile cfg = KeyValueFile::parse_file(path);
    cfg.require({"A_hfs_hz", "g_J", "g_I", "I2", "mass_kg"});
    AtomModel a;
    a.nuclear_spin = static_cast<double>(cfg.get_int("I2")) / 2.0;
    a.hyperfine_a_hz = cfg.get_double("A_hfs_hz");
    a.g_j = cfg.get_double("g_J");
    a.g_i = cfg.get_double("g_I");
    a.mass_kg = cfg.get_double("mass_kg");
    a.validate();
    return a;
}

void AtomModel::validate() const {
    if (!(nuclear_spin > 0.0) || !std::isfinite(nuclear_spin))
        throw std::invalid_argument("AtomModel: nuclear_spin must be positive");
    const double two_i_f = nuclear_spin * 2.0;
    const int two_i_n = static_cast<int>(two_i_f + 0.5);
    if (std::abs(two_i_f - two_i_n) > 1e-12 || two_i_n % 2 == 0)
        throw std::invalid_argument("AtomModel: nuclear_spin must be half-integer");
    if (!(mass_kg > 0.0)) throw std::invalid_argument("AtomModel: mass must be positive");
    if (!std::isfinite(hyperfine_a_hz) || !std::isfinite(g_j) || !std::isfinite(g_i))
        throw std::invalid_argument("AtomModel: non-finite constant");
}

int delta_mf_of(Polarization p) {
    switch (p) {
        case Polarization::pi: return 0;
        case Polarization::sigma_plus: return +1;
        case Polarization::sigma_minus: return -1;
    }
    return 0;
}

TransitionSpec::TransitionSpec(int lf, int lmf, int uf, int umf, Polarization pol)
    : lower_f(lf), lower_mf(lmf), upper_f(uf), upper_mf(umf), polarization(pol) {
    if (std::abs(delta_mf()) > 1)
        throw std::invalid_argument("TransitionSpec: |Delta m_F| must be <= 1");
    if (delta_mf() != delta_mf_of(pol))
        throw std::invalid_argument("TransitionSpec: polarization inconsistent with Delta m_F");
}

TransitionSpec TransitionSpec::qubit() { return TransitionSpec(3, 1, 2, 1, Polarization::pi); }
TransitionSpec TransitionSpec::mapping() {
    return TransitionSpec(3, 1, 2, 0, Polarization::sigma_minus);
}

namespace {

double ladder_factor(double j, double m) {
    // <j,m+1| J+ |j,m>
    return std::sqrt(j * (j + 1.0) - m * (m + 1.0));
}

} // namespace

LevelSpectrum::LevelSpectrum(const AtomModel& atom, double b_tesla) : atom_(atom), b_(b_tesla) {
    atom.validate();
    if (!std::isfinite(b_tesla)) throw std::invalid_argument("LevelSpectrum: non-finite B");
    if (b_tesla < 0.0) throw std::invalid_argument("LevelSpectrum: B must be >= 0");

    const double I = atom.nuclear_spin;
    const double A = atom.hyperfine_a_hz;
    // Zeeman coefficients in Hz per (m_J, m_I)
    const double ze = atom.g_j * con::mu_b * b_tesla / con::h;
    const double zn = -atom.g_i * con::mu_n * b_tesla / con::h;
    const int two_i = atom.two_i();
    const int f_up = atom.f_upper();
    const int f_dn = atom.f_lower();
    const bool upper_manifold_is_high_f = (A > 0.0);

    // one block per m_F = m_I + m_J; interior blocks are 2x2 over
    // {|m_I = m_F-1/2, m_J=+1/2>, |m_I = m_F+1/2, m_J=-1/2>}
    for (int two_mf = -(two_i + 1); two_mf <= two_i + 1; two_mf += 2) {
        const int mf = two_mf / 2;
        const double mi_up = mf - 0.5;   // partner of m_J = +1/2
        const double mi_dn = mf + 0.5;   // partner of m_J = -1/2
        const bool has_up = std::abs(mi_up) <= I + 1e-9;
        const bool has_dn = std::abs(mi_dn) <= I + 1e-9;

        if (has_up && has_dn) {
            const double e_uu = A * mi_up * 0.5 + ze * 0.5 + zn * mi_up;
            const double e_dd = A * mi_dn * (-0.5) - ze * 0.5 + zn * mi_dn;
            // <mi_dn, -1/2| A I+ J- |mi_up, +1/2>
            const double off = 0.5 * A * ladder_factor(I, mi_up) * ladder_factor(0.5, -0.5);

            // exact 2x2 symmetric eigendecomposition
            const double avg = 0.5 * (e_uu + e_dd);
            const double dif = 0.5 * (e_uu - e_dd);
            const double rad = std::hypot(dif, off);
            const double e_lo = avg - rad;
            const double e_hi = avg + rad;
            // eigenvector of e_lo: angle th with (cos th, sin th) on (up, dn)
            const double th = 0.5 * std::atan2(2.0 * off, e_uu - e_dd) + con::pi / 2.0;
            const double c = std::cos(th), s = std::sin(th);
            // lower eigenvalue connects adiabatically to the lower zero-field
            // manifold (F = I+1/2 when A < 0)
            const int f_lo_label = upper_manifold_is_high_f ? f_dn : f_up;
            const int f_hi_label = upper_manifold_is_high_f ? f_up : f_dn;
            levels_.push_back({f_lo_label, mf, e_lo, c, s});
            levels_.push_back({f_hi_label, mf, e_hi, -s, c});
        } else {
            // stretched |m_I = +-I, m_J = +-1/2>: 1x1 block, exactly linear
            const double mi = has_up ? mi_up : mi_dn;
            const double mj = has_up ? 0.5 : -0.5;
            const double e = A * mi * mj + ze * mj + zn * mi;
            levels_.push_back({f_up, mf, e, has_up ? 1.0 : 0.0, has_up ? 0.0 : 1.0});
        }
    }
    std::sort(levels_.begin(), levels_.end(), [](const ZeemanLevel& a, const ZeemanLevel& b) {
        if (a.f_label != b.f_label) return a.f_label < b.f_label;
        return a.m_f < b.m_f;
    });
}

int LevelSpectrum::index_of(int f, int mf) const {
    for (size_t k = 0; k < levels_.size(); ++k)
        if (levels_[k].f_label == f && levels_[k].m_f == mf) return static_cast<int>(k);
    throw std::invalid_argument("unknown level |F=" + std::to_string(f) +
                                ", mF=" + std::to_string(mf) + ">");
}

const ZeemanLevel& LevelSpectrum::level(int f, int mf) const { return levels_[index_of(f, mf)]; }

Eigen::MatrixXd LevelSpectrum::moment_matrix(int q) const {
    if (q < -1 || q > 1) throw std::invalid_argument("moment_matrix: q must be -1, 0 or +1");
    const double I = atom_.nuclear_spin;
    const double gi_b = atom_.g_i * con::mu_n / con::mu_b;
    const int n = static_cast<int>(levels_.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);

    // mu_q / mu_B = -(g_J J_q - gi_b I_q), spherical components
    // J_0 = Jz, J_{+1} = -J+/sqrt2, J_{-1} = J-/sqrt2
    auto amp = [](const ZeemanLevel& l, int which) {
        return which == 0 ? l.amp_mj_up : l.amp_mj_down;
    };
    for (int r = 0; r < n; ++r) {
        for (int cidx = 0; cidx < n; ++cidx) {
            const ZeemanLevel& u = levels_[r];
            const ZeemanLevel& l = levels_[cidx];
            if (u.m_f - l.m_f != q) continue;
            double val = 0.0;
            // product-basis components of |l>: (m_I = mF-1/2, +1/2) and
            // (m_I = mF+1/2, -1/2)
            for (int a = 0; a < 2; ++a) {
                const double ca = amp(l, a);
                if (ca == 0.0) continue;
                const double mi = l.m_f + (a == 0 ? -0.5 : +0.5);
                const double mj = (a == 0 ? 0.5 : -0.5);
                for (int b = 0; b < 2; ++b) {
                    const double cb = amp(u, b);
                    if (cb == 0.0) continue;
                    const double mi2 = u.m_f + (b == 0 ? -0.5 : +0.5);
                    const double mj2 = (b == 0 ? 0.5 : -0.5);
                    double jq = 0.0, iq = 0.0;
                    if (q == 0) {
                        if (mi2 == mi && mj2 == mj) { jq = mj; iq = mi; }
                    } else if (q == +1) {
                        if (mi2 == mi && std::abs(mj2 - (mj + 1)) < 1e-9)
                            jq = -ladder_factor(0.5, mj) / std::sqrt(2.0);
                        if (mj2 == mj && std::abs(mi2 - (mi + 1)) < 1e-9)
                            iq = -ladder_factor(I, mi) / std::sqrt(2.0);
                    } else {
                        if (mi2 == mi && std::abs(mj2 - (mj - 1)) < 1e-9)
                            jq = ladder_factor(0.5, mj - 1) / std::sqrt(2.0);
                        if (mj2 == mj && std::abs(mi2 - (mi - 1)) < 1e-9)
                            iq = ladder_factor(I, mi - 1) / std::sqrt(2.0);
                    }
                    val += cb * ca * (-(atom_.g_j * jq - gi_b * iq));
                }
            }
            m(r, cidx) = val;
        }
    }
    return m;
}

double LevelSpectrum::energy_derivative_hz_per_t(int f, int mf) const {
    // Hellmann-Feynman: dE/dB = <v| dH/dB |v>, dH/dB diagonal in the product
    // basis
    const ZeemanLevel& l = level(f, mf);
    const double ze = atom_.g_j * con::mu_b / con::h;
    const double zn = -atom_.g_i * con::mu_n / con::h;
    double d = 0.0;
    if (l.amp_mj_up != 0.0) {
        const double mi = l.m_f - 0.5;
        d += l.amp_mj_up * l.amp_mj_up * (ze * 0.5 + zn * mi);
    }
    if (l.amp_mj_down != 0.0) {
        const double mi = l.m_f + 0.5;
        d += l.amp_mj_down * l.amp_mj_down * (-ze * 0.5 + zn * mi);
    }
    return d;
}

std::vector<ZeemanLevel> breit_rabi_levels(const AtomModel& atom, double b_tesla) {
    return LevelSpectrum(atom, b_tesla).levels();
}

double transition_frequency(const AtomModel& atom, const TransitionSpec& t, double b_tesla) {
    const LevelSpectrum sp(atom, b_tesla);
    return sp.level(t.upper_f, t.upper_mf).energy_hz - sp.level(t.lower_f, t.lower_mf).energy_hz;
}

double transition_frequency_derivative(const AtomModel& atom, const TransitionSpec& t,
                                       double b_tesla) {
    const LevelSpectrum sp(atom, b_tesla);
    return sp.energy_derivative_hz_per_t(t.upper_f, t.upper_mf) -
           sp.energy_derivative_hz_per_t(t.lower_f, t.lower_mf);
}

FieldIndependentPoint field_independent_point(const AtomModel& atom, const TransitionSpec& t,
                                              double b_lo_tesla, double b_hi_tesla) {
    constexpr double fd_step = 1e-6;          // 1 uT
    constexpr double slope_tol = 10.0 / 1e-3; // 10 Hz/mT in Hz/T
    auto slope = [&](double b) {
        return (transition_frequency(atom, t, b + fd_step) -
                transition_frequency(atom, t, b - fd_step)) /
               (2.0 * fd_step);
    };
    double lo = b_lo_tesla, hi = b_hi_tesla;
    double s_lo = slope(lo), s_hi = slope(hi);
    if (s_lo == 0.0) return {lo, transition_frequency(atom, t, lo)};
    if (s_hi == 0.0) return {hi, transition_frequency(atom, t, hi)};
    if (s_lo * s_hi > 0.0)
        throw NoRootError("field_independent_point: df/dB does not change sign in bracket");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double s_mid = slope(mid);
        if (std::abs(s_mid) < slope_tol && (hi - lo) < 1e-7) {
            return {mid, transition_frequency(atom, t, mid)};
        }
        if (s_mid == 0.0) return {mid, transition_frequency(atom, t, mid)};
        if (s_lo * s_mid < 0.0) {
            hi = mid;
            s_hi = s_mid;
        } else {
            lo = mid;
            s_lo = s_mid;
        }
    }
    const double mid = 0.5 * (lo + hi);
    if (std::abs(slope(mid)) < slope_tol) return {mid, transition_frequency(atom, t, mid)};
    throw NoRootError("field_independent_point: bisection did not reach slope tolerance");
}

double dipole_matrix_element(const AtomModel& atom, const TransitionSpec& t, double b_tesla) {
    if (t.delta_mf() != delta_mf_of(t.polarization))
        throw std::invalid_argument("dipole_matrix_element: polarization inconsistent");
    const LevelSpectrum sp(atom, b_tesla);
    const Eigen::MatrixXd m = sp.moment_matrix(delta_mf_of(t.polarization));
    return m(sp.index_of(t.upper_f, t.upper_mf), sp.index_of(t.lower_f, t.lower_mf));
}

} // namespace mwion
