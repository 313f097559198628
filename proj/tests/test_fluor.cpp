#include <doctest.h>

#include <cmath>
#include <complex>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/fluor.hpp"
#include "mwion/rng.hpp"

using namespace mwion;
namespace con = mwion::constants;
using Eigen::Matrix4cd;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::Vector4cd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

namespace {

// brute-force rotation oracle: global pi/2 pulse of azimuth phi applied to
// both qubits by exact 4x4 conjugation; basis {uu, ud, du, dd}
Matrix4cd analysis_pulse(double phi) {
    Eigen::Matrix2cd u;
    const cplx m_i(0.0, -1.0);
    // exp(-i pi/4 (cos sx + sin sy)) = (I - i sigma_phi)/sqrt2
    u << 1.0, m_i * std::exp(cplx(0.0, -phi)),
         m_i * std::exp(cplx(0.0, phi)), 1.0;
    u /= std::sqrt(2.0);
    Matrix4cd out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) out(a * 2 + b, c * 2 + d) = u(a, c) * u(b, d);
    return out;
}

// bright-class populations (zero, one, two ions bright); |down> is bright
Vector3d bright_populations(const Matrix4cd& rho) {
    const double p_uu = rho(0, 0).real();
    const double p_ud = rho(1, 1).real();
    const double p_du = rho(2, 2).real();
    const double p_dd = rho(3, 3).real();
    return Vector3d(p_uu, p_ud + p_du, p_dd);
}

MatrixXd scan_populations(const Matrix4cd& rho, const VectorXd& phases) {
    MatrixXd pops(phases.size(), 3);
    for (int i = 0; i < phases.size(); ++i) {
        const Matrix4cd u = analysis_pulse(phases[i]);
        pops.row(i) = bright_populations(u * rho * u.adjoint()).transpose();
    }
    return pops;
}

Matrix4cd constructed_rho(double pop_sector, double coherence, double coherence_phase) {
    Matrix4cd rho = Matrix4cd::Zero();
    rho(0, 0) = rho(3, 3) = 0.5 * pop_sector;
    rho(1, 1) = rho(2, 2) = 0.5 * (1.0 - pop_sector);
    rho(0, 3) = coherence * std::exp(cplx(0.0, coherence_phase));
    rho(3, 0) = std::conj(rho(0, 3));
    return rho;
}

VectorXd phase_grid(int n) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = con::pi * i / (n - 1);
    return v;
}

} // namespace

TEST_CASE("ramsey reference probabilities") {
    const Vector3d p0 = ramsey_reference_probs(0.0);
    CHECK(p0[0] == 1.0);
    CHECK(p0[1] == 0.0);
    CHECK(p0[2] == 0.0);
    const Vector3d ppi = ramsey_reference_probs(con::pi);
    CHECK(ppi[0] == doctest::Approx(0.0).epsilon(1e-30));
    CHECK(ppi[2] == doctest::Approx(1.0).epsilon(1e-12));
    const Vector3d ph = ramsey_reference_probs(con::pi / 2.0);
    CHECK(ph[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(ph[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(ph[2] == doctest::Approx(0.25).epsilon(1e-12));
    // algebraic identity: components sum to 1 for all theta
    for (double th = -7.0; th <= 7.0; th += 0.037)
        CHECK(ramsey_reference_probs(th).sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("detection simulation: determinism and calibrated means") {
    const PoissonMixture mix = PoissonMixture::paper_default();
    const CountHistogram a = simulate_detection(Vector3d(1, 0, 0), mix, 100000, 123);
    const CountHistogram b = simulate_detection(Vector3d(1, 0, 0), mix, 100000, 123);
    REQUIRE(a.bins.size() == b.bins.size());
    for (size_t i = 0; i < a.bins.size(); ++i) CHECK(a.bins[i] == b.bins[i]);
    a.validate();

    auto mean = [](const CountHistogram& h) {
        double m = 0.0;
        for (size_t c = 0; c < h.bins.size(); ++c) m += c * double(h.bins[c]);
        return m / double(h.total_shots);
    };
    // dark mean 0.3 within 3 sigma
    CHECK(std::abs(mean(a) - 0.3) < 3.0 * std::sqrt(0.3 / 100000.0));
    // two-bright mean = 2 x one-bright mean
    const CountHistogram two = simulate_detection(Vector3d(0, 0, 1), mix, 100000, 77);
    CHECK(std::abs(mean(two) - mix.mean_two_bright()) <
          3.0 * std::sqrt(mix.mean_two_bright() / 100000.0));
}

TEST_CASE("mixture invariants") {
    PoissonMixture m = PoissonMixture::paper_default();
    CHECK(m.mean_two_bright() == 2.0 * m.mean_one_bright);
    m.weights = Vector3d(0.5, 0.6, -0.1);
    CHECK_THROWS_AS(m.validate(), InvariantViolationError);
    m = PoissonMixture::paper_default();
    m.mean_dark = 0.0;
    CHECK_THROWS_AS(m.validate(), InvariantViolationError);
}

TEST_CASE("reference fit: exact recovery from expected-value curves") {
    PoissonMixture truth = PoissonMixture::paper_default();
    truth.mean_dark = 0.35;
    truth.mean_one_bright = 10.8;
    const int nbins = 50;
    std::vector<ReferenceCurve> curves;
    for (int i = 0; i < 12; ++i) {
        ReferenceCurve c;
        c.theta_rad = con::pi * i / 11.0;
        c.shots = 300.0;
        c.counts = VectorXd::Zero(nbins);
        const Vector3d probs = ramsey_reference_probs(c.theta_rad);
        for (int b = 0; b < nbins; ++b) {
            double q = 0.0;
            for (int k = 0; k < 3; ++k) q += probs[k] * truth.pmf(k, b);
            c.counts[b] = c.shots * q;
        }
        curves.push_back(std::move(c));
    }
    const ReferenceFit fit = fit_reference_curves(curves);
    CHECK(fit.mixture.mean_dark == doctest::Approx(truth.mean_dark).epsilon(1e-8));
    CHECK(fit.mixture.mean_one_bright == doctest::Approx(truth.mean_one_bright).epsilon(1e-8));
    // ideal data: class mix converges to the identity
    CHECK((fit.class_mix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("reference fit: synthetic round trip with recovery and plausible chi2") {
    const PoissonMixture truth = PoissonMixture::paper_default();
    std::vector<CountHistogram> hists;
    for (int i = 0; i < 12; ++i) {
        const double theta = con::pi * i / 11.0;
        CountHistogram h =
            simulate_detection(ramsey_reference_probs(theta), truth, 300, 1000 + i);
        h.phase_rad = theta;
        hists.push_back(std::move(h));
    }
    const ReferenceFit fit = fit_reference(hists);
    CHECK(fit.mixture.mean_dark == doctest::Approx(truth.mean_dark).epsilon(0.25));
    CHECK(fit.mixture.mean_one_bright == doctest::Approx(truth.mean_one_bright).epsilon(0.03));
    CHECK(fit.chi2_reduced > 0.5);
    CHECK(fit.chi2_reduced < 1.7);
}

TEST_CASE("reference fit: converges from a x3 mis-specified dark mean") {
    const PoissonMixture truth = PoissonMixture::paper_default();
    // the fit's internal initial guess uses the defaults; verify explicitly by
    // checking recovery of shifted truth values across seeds (basin check)
    for (uint64_t seed = 0; seed < 10; ++seed) {
        PoissonMixture gen = truth;
        gen.mean_dark = 0.9;  // x3 the guess the fitter starts from
        std::vector<CountHistogram> hists;
        for (int i = 0; i < 12; ++i) {
            const double theta = con::pi * i / 11.0;
            CountHistogram h = simulate_detection(ramsey_reference_probs(theta), gen, 300,
                                                  derive_stream(seed, i));
            h.phase_rad = theta;
            hists.push_back(std::move(h));
        }
        const ReferenceFit fit = fit_reference(hists);
        CHECK(fit.mixture.mean_dark == doctest::Approx(0.9).epsilon(0.35));
        CHECK(fit.mixture.mean_one_bright == doctest::Approx(11.3).epsilon(0.05));
    }
}

TEST_CASE("reference fit: insufficient theta coverage rejected") {
    const PoissonMixture truth = PoissonMixture::paper_default();
    std::vector<CountHistogram> narrow;
    for (int i = 0; i < 5; ++i) {
        CountHistogram h = simulate_detection(ramsey_reference_probs(0.2 * i), truth, 200, i);
        h.phase_rad = 0.2 * i;  // never near pi
        narrow.push_back(std::move(h));
    }
    CHECK_THROWS_AS(fit_reference(narrow), RankDeficiencyError);
}

TEST_CASE("population decomposition: round trip and boundaries") {
    const PoissonMixture mix = PoissonMixture::paper_default();
    const Vector3d truth(0.25, 0.5, 0.25);
    const CountHistogram h = simulate_detection(truth, mix, 300, 2024);
    const PopulationDecomposition d = decompose_populations(h, mix);
    for (int k = 0; k < 3; ++k) {
        const double sig = std::sqrt(d.covariance(k, k));
        CHECK(std::abs(d.p[k] - truth[k]) < 2.0 * sig + 1e-3);
    }
    CHECK(d.p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.p.minCoeff() >= 0.0);

    // all-dark histogram decomposes to p0 ~ 1
    CountHistogram dark;
    dark.bins = {290, 10};
    dark.total_shots = 300;
    const PopulationDecomposition dd = decompose_populations(dark, mix);
    CHECK(dd.p[0] > 0.98);

    // conditioning warning when the component means collapse together
    PoissonMixture close = mix;
    close.mean_dark = 10.0;
    close.mean_one_bright = 10.5;
    const PopulationDecomposition dw = decompose_populations(h, close);
    CHECK(dw.conditioning_warning);
}

TEST_CASE("parity fit: ideal state") {
    const Vector4cd psi = (Eigen::Vector4cd() << cplx(0, -1.0 / std::sqrt(2.0)), 0.0, 0.0,
                           1.0 / std::sqrt(2.0))
                              .finished();
    const Matrix4cd rho = psi * psi.adjoint();
    const VectorXd phases = phase_grid(16);
    const MatrixXd pops = scan_populations(rho, phases);
    const MatrixXd sig = MatrixXd::Constant(16, 3, 1e-4);
    DirectPopulations direct{bright_populations(rho), Vector3d::Constant(1e-4)};
    const ParityScanResult r = fit_parity_scan(phases, pops, sig, direct);
    CHECK(r.a_pi == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.used_direct_populations);
}

TEST_CASE("parity fit: constructed rho gives F = 0.76") {
    const Matrix4cd rho = constructed_rho(0.76, 0.38, -con::pi / 2.0);
    const VectorXd phases = phase_grid(16);
    const MatrixXd pops = scan_populations(rho, phases);
    const MatrixXd sig = MatrixXd::Constant(16, 3, 1e-4);
    SUBCASE("with the direct population measurement") {
        DirectPopulations direct{bright_populations(rho), Vector3d::Constant(1e-4)};
        const ParityScanResult r = fit_parity_scan(phases, pops, sig, direct);
        CHECK(r.a_pi == doctest::Approx(0.76).epsilon(1e-9));
        CHECK(r.fidelity == doctest::Approx(0.76).epsilon(1e-6));
    }
    SUBCASE("scan-only fallback (sector = 2 coherence here)") {
        const ParityScanResult r = fit_parity_scan(phases, pops, sig);
        CHECK(r.fidelity == doctest::Approx(0.76).epsilon(1e-6));
        CHECK_FALSE(r.used_direct_populations);
    }
}

TEST_CASE("parity fit: maximally mixed state") {
    const Matrix4cd rho = Matrix4cd::Identity() * 0.25;
    const VectorXd phases = phase_grid(12);
    const MatrixXd pops = scan_populations(rho, phases);
    const MatrixXd sig = MatrixXd::Constant(12, 3, 1e-4);
    DirectPopulations direct{bright_populations(rho), Vector3d::Constant(1e-4)};
    const ParityScanResult r = fit_parity_scan(phases, pops, sig, direct);
    CHECK(r.a_pi == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.fidelity == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("parity equals p0 + p2 - p1 at every phase by definition") {
    const Matrix4cd rho = constructed_rho(0.8, 0.35, 0.7);
    const VectorXd phases = phase_grid(9);
    const MatrixXd pops = scan_populations(rho, phases);
    for (int i = 0; i < phases.size(); ++i) {
        const double parity = pops(i, 0) + pops(i, 2) - pops(i, 1);
        const Matrix4cd u = analysis_pulse(phases[i]);
        const Matrix4cd r = u * rho * u.adjoint();
        const double direct =
            (r(0, 0) + r(3, 3) - r(1, 1) - r(2, 2)).real();
        CHECK(parity == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("parity amplitude invariant under a global phase-grid shift") {
    const Matrix4cd rho = constructed_rho(0.76, 0.38, 0.4);
    const MatrixXd sig = MatrixXd::Constant(16, 3, 1e-4);
    const VectorXd phases = phase_grid(16);
    const VectorXd shifted = phases.array() + 0.37;
    const ParityScanResult a = fit_parity_scan(phases, scan_populations(rho, phases), sig);
    const ParityScanResult b = fit_parity_scan(shifted, scan_populations(rho, shifted), sig);
    CHECK(std::abs(a.a_pi - b.a_pi) < 1e-9);
}

TEST_CASE("parity fit input validation") {
    const Matrix4cd rho = constructed_rho(0.76, 0.38, 0.0);
    const VectorXd few = phase_grid(5);
    CHECK_THROWS_AS(fit_parity_scan(few, scan_populations(rho, few),
                                    MatrixXd::Constant(5, 3, 1e-3)),
                    std::invalid_argument);
    // narrow span: 8 phases over a quarter period
    VectorXd narrow(8);
    for (int i = 0; i < 8; ++i) narrow[i] = 0.1 * i * con::pi / 4.0;
    CHECK_THROWS_AS(fit_parity_scan(narrow, scan_populations(rho, narrow),
                                    MatrixXd::Constant(8, 3, 1e-3)),
                    std::invalid_argument);
}

TEST_CASE("histogram validation") {
    CountHistogram h;
    h.bins = {10, 5};
    h.total_shots = 14;
    CHECK_THROWS_AS(h.validate(), InvariantViolationError);
    h.total_shots = 15;
    CHECK_NOTHROW(h.validate());
    h.bins[0] = -1;
    h.total_shots = 4;
    CHECK_THROWS_AS(h.validate(), InvariantViolationError);
}
