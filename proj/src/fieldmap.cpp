#include "mwion/fieldmap.hpp"

#include <cmath>
#include <limits>

#include "mwion/constants.hpp"
#include "mwion/dynamics.hpp"
#include "mwion/errors.hpp"
#include "mwion/optim.hpp"

namespace mwion {

namespace con = constants;

void QuadrupoleField::validate() const {
    if (!(gradient_t_per_m >= 0.0) || !std::isfinite(gradient_t_per_m))
        throw std::invalid_argument("QuadrupoleField: gradient must be >= 0");
    if (angle_alpha_rad < 0.0 || angle_alpha_rad >= con::pi)
        throw std::invalid_argument("QuadrupoleField: alpha must lie in [0, pi)");
    if (!null_xz_m.allFinite()) throw std::invalid_argument("QuadrupoleField: non-finite null");
}

Eigen::Vector3d QuadrupoleField::field_at(const Eigen::Vector3d& displacement_m) const {
    const double dx = displacement_m.x() - null_xz_m.x();
    const double dz = displacement_m.z() - null_xz_m.y();
    const double c2a = std::cos(2.0 * angle_alpha_rad);
    const double s2a = std::sin(2.0 * angle_alpha_rad);
    return gradient_t_per_m * Eigen::Vector3d(c2a * dx + s2a * dz, 0.0, s2a * dx - c2a * dz);
}

void StaticFieldFrame::validate() const {
    if (std::abs(quantization_axis.norm() - 1.0) > 1e-12)
        throw std::invalid_argument("StaticFieldFrame: quantization axis not normalized");
    if (!(magnitude_tesla > 0.0))
        throw std::invalid_argument("StaticFieldFrame: field magnitude must be > 0");
}

StaticFieldFrame StaticFieldFrame::paper_default(double magnitude_tesla) {
    StaticFieldFrame f;
    const double th = 15.0 * con::pi / 180.0;
    f.quantization_axis = Eigen::Vector3d(std::sin(th), 0.0, std::cos(th));
    f.magnitude_tesla = magnitude_tesla;
    return f;
}

namespace {

// orthonormal triad (e1, e2, n) with n the quantization axis
void transverse_basis(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
    const Eigen::Vector3d seed =
        std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    e1 = seed.cross(n).normalized();
    e2 = n.cross(e1);
}

} // namespace

double ac_zeeman_shift(const AtomModel& atom, const StaticFieldFrame& frame,
                       const TransitionSpec& t, const Eigen::Vector3d& field_amplitude_t,
                       double drive_frequency_hz, double guard_band_hz) {
    frame.validate();
    if (!(drive_frequency_hz > 0.0))
        throw std::invalid_argument("ac_zeeman_shift: drive frequency must be > 0");

    const LevelSpectrum sp(atom, frame.magnitude_tesla);

    // spherical field components along the quantization axis:
    // B_0 = B.n, B_{+1} = -(B.e1 + i B.e2)/sqrt2, B_{-1} = (B.e1 - i B.e2)/sqrt2
    Eigen::Vector3d e1, e2;
    transverse_basis(frame.quantization_axis, e1, e2);
    const double bx = field_amplitude_t.dot(e1);
    const double by = field_amplitude_t.dot(e2);
    const double bz = field_amplitude_t.dot(frame.quantization_axis);
    const double abs_bq[3] = {std::hypot(bx, by) / std::sqrt(2.0),  // q = -1
                              std::abs(bz),                         // q =  0
                              std::hypot(bx, by) / std::sqrt(2.0)}; // q = +1

    Eigen::MatrixXd mom[3] = {sp.moment_matrix(-1), sp.moment_matrix(0), sp.moment_matrix(+1)};

    const int n = static_cast<int>(sp.levels().size());
    const int idx_lo = sp.index_of(t.lower_f, t.lower_mf);
    const int idx_up = sp.index_of(t.upper_f, t.upper_mf);

    auto level_shift_hz = [&](int i) {
        const double e_i = sp.levels()[i].energy_hz;
        double shift = 0.0;
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            const double e_k = sp.levels()[k].energy_hz;
            for (int q = -1; q <= 1; ++q) {
                // mu.B couples i<->k through exactly one spherical component
                const double mel = mom[q + 1](i, k);
                if (mel == 0.0) continue;
                // |<i| -mu.B |k>|/h, Hz; the (-1)^q B_{-q} phase drops in |.|
                const double rabi_hz = std::abs(mel) * abs_bq[q + 1] * con::mu_b / con::h;
                if (rabi_hz == 0.0) continue;
                if (std::abs(std::abs(e_i - e_k) - drive_frequency_hz) < guard_band_hz)
                    throw ResonanceError("ac_zeeman_shift: drive within guard band of coupled "
                                         "transition");
                const double d = e_i - e_k;
                shift += rabi_hz * rabi_hz / 4.0 *
                         (1.0 / (d - drive_frequency_hz) + 1.0 / (d + drive_frequency_hz));
            }
        }
        return shift;
    };

    return level_shift_hz(idx_up) - level_shift_hz(idx_lo);
}

QuadrupoleFitResult fit_quadrupole(const std::vector<ShiftMeasurement>& measurements,
                                   const AtomModel& atom, const StaticFieldFrame& frame,
                                   const TransitionSpec& t, double drive_frequency_hz,
                                   const QuadrupoleField& initial_guess) {
    const int n = static_cast<int>(measurements.size());
    if (n < 6) throw std::invalid_argument("fit_quadrupole: need at least 6 measurements");
    for (const auto& m : measurements)
        if (!(m.sigma_hz > 0.0))
            throw std::invalid_argument("fit_quadrupole: uncertainties must be > 0");

    // collinear displacement sets cannot constrain a 2D quadrupole
    {
        Eigen::MatrixXd pts(n, 2);
        for (int i = 0; i < n; ++i) pts.row(i) << measurements[i].dx_m, measurements[i].dz_m;
        const Eigen::RowVector2d mean = pts.colwise().mean();
        const Eigen::MatrixXd centered = pts.rowwise() - mean;
        const Eigen::Matrix2d cov = centered.transpose() * centered;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
        if (es.eigenvalues()(0) <= 1e-12 * std::max(es.eigenvalues()(1), 1e-300))
            throw RankDeficiencyError("fit_quadrupole: displacements are collinear");
    }

    // scale parameters to O(1): p = (B', alpha, x0/um, z0/um)
    auto model = [&](const Eigen::VectorXd& p, const ShiftMeasurement& m) {
        QuadrupoleField q;
        q.gradient_t_per_m = p[0];
        q.angle_alpha_rad = p[1];
        q.drive_frequency_hz = drive_frequency_hz;
        q.null_xz_m = Eigen::Vector2d(p[2] * 1e-6, p[3] * 1e-6);
        const Eigen::Vector3d b = q.field_at(Eigen::Vector3d(m.dx_m, 0.0, m.dz_m));
        return ac_zeeman_shift(atom, frame, t, b, drive_frequency_hz);
    };
    auto residuals = [&](const Eigen::VectorXd& p) {
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i)
            r[i] = (model(p, measurements[i]) - measurements[i].shift_hz) / measurements[i].sigma_hz;
        return r;
    };

    Eigen::VectorXd p0(4);
    p0 << initial_guess.gradient_t_per_m, initial_guess.angle_alpha_rad,
        initial_guess.null_xz_m.x() * 1e6, initial_guess.null_xz_m.y() * 1e6;

    // field_at is linear in B', so the shift map only constrains |B'|; signs
    // fold into the alpha periodicity below
    LmOptions opt;
    const LmResult lm = levenberg_marquardt(residuals, p0, opt);
    if (!lm.converged) {
        std::vector<double> last(lm.params.data(), lm.params.data() + lm.params.size());
        throw FitError("fit_quadrupole: no convergence after max iterations", last);
    }

    QuadrupoleFitResult out;
    double bprime = lm.params[0];
    double alpha = lm.params[1];
    if (bprime < 0.0) {
        bprime = -bprime;
        alpha += con::pi / 2.0;  // (-B', a) == (B', a + pi/2)
    }
    alpha = std::fmod(std::fmod(alpha, con::pi) + con::pi, con::pi);
    out.field.gradient_t_per_m = bprime;
    out.field.angle_alpha_rad = alpha;
    out.field.drive_frequency_hz = drive_frequency_hz;
    out.field.null_xz_m = Eigen::Vector2d(lm.params[2] * 1e-6, lm.params[3] * 1e-6);

    Eigen::Matrix4d cov = covariance_from_jtj(lm.jtj);
    // undo the micrometre scaling on the null coordinates
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double s = (i >= 2 ? 1e-6 : 1.0) * (j >= 2 ? 1e-6 : 1.0);
            cov(i, j) *= s;
        }
    // a gradient consistent with zero leaves the quadrupole angle
    // unidentifiable; say so instead of quoting a huge-but-finite number
    if (!(bprime > 2.0 * std::sqrt(std::abs(cov(0, 0))))) {
        cov(1, 1) = std::numeric_limits<double>::infinity();
        cov(0, 1) = cov(1, 0) = cov(1, 2) = cov(2, 1) = cov(1, 3) = cov(3, 1) = 0.0;
    }
    out.covariance = cov;
    out.chi2_reduced = lm.cost / std::max(1, n - 4);
    out.iterations = lm.iterations;
    return out;
}

double plane_wave_gradient(double field_amplitude_t, double frequency_hz) {
    if (!(frequency_hz > 0.0))
        throw std::invalid_argument("plane_wave_gradient: frequency must be > 0");
    return 2.0 * con::pi * frequency_hz / con::c_light * field_amplitude_t;
}

SidebandPrediction predict_sideband(const QuadrupoleField& q, double matrix_element_mub,
                                    const MotionalMode& mode, double alignment_angle_rad) {
    if (!(mode.frequency_hz > 0.0))
        throw std::invalid_argument("predict_sideband: mode frequency must be > 0");
    const double x0 = mode.ground_state_extent_m();
    double proj = std::cos(alignment_angle_rad);
    if (std::abs(proj) < 1e-12) proj = 0.0;  // pi/2 alignment: zero projection
    const double omega =
        std::abs(matrix_element_mub) * con::mu_b * q.gradient_t_per_m * x0 / con::hbar * proj;
    SidebandPrediction out;
    out.rabi_rate_rad_s = std::abs(omega);
    out.pi_time_s = out.rabi_rate_rad_s > 0.0
                        ? con::pi / out.rabi_rate_rad_s
                        : std::numeric_limits<double>::infinity();
    return out;
}

} // namespace mwion
