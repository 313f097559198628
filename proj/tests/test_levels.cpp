#include <doctest.h>

#include <cmath>

#include "mwion/constants.hpp"
#include "mwion/errors.hpp"
#include "mwion/levels.hpp"

using namespace mwion;
namespace con = mwion::constants;

// Reference values frozen from an independent full-matrix (12x12)
// diagonalization of the same atomic constants (numpy, eigh on the product
// basis). The implementation here solves 2x2 blocks instead.
namespace oracle {
constexpr double b0_tesla = 21.281214e-3;
constexpr double f0_hz = 1.686462053e9;
constexpr double qubit_pi_mel = 1.000907;      // |<2,1| mu_0 |3,1>| at B0
constexpr double mapping_sm_mel = 0.585222;    // |<2,0| mu_-1 |3,1>| at B0
constexpr double curvature_half_mt = 58183.03; // f(B0 +- 0.5 mT) - f0, Hz
} // namespace oracle

TEST_CASE("zero-field splitting equals |A|(I+1/2) to machine precision") {
    const AtomModel atom = AtomModel::mg25();
    const LevelSpectrum sp(atom, 0.0);
    const double split = sp.level(2, 0).energy_hz - sp.level(3, 0).energy_hz;
    CHECK(split == doctest::Approx(atom.zero_field_splitting_hz()).epsilon(1e-14));
    // both manifolds degenerate at B = 0
    for (int mf = -2; mf <= 2; ++mf) {
        CHECK(sp.level(2, mf).energy_hz == doctest::Approx(sp.level(2, 0).energy_hz).epsilon(1e-13));
    }
    for (int mf = -3; mf <= 3; ++mf) {
        CHECK(sp.level(3, mf).energy_hz == doctest::Approx(sp.level(3, 0).energy_hz).epsilon(1e-13));
    }
}

TEST_CASE("level count and amplitude normalization") {
    const auto levels = breit_rabi_levels(AtomModel::mg25(), 21.3e-3);
    REQUIRE(levels.size() == 12);
    int n_f2 = 0, n_f3 = 0;
    for (const auto& l : levels) {
        (l.f_label == 2 ? n_f2 : n_f3)++;
        const double norm = l.amp_mj_up * l.amp_mj_up + l.amp_mj_down * l.amp_mj_down;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(n_f2 == 5);
    CHECK(n_f3 == 7);
    // stretched states have exactly one nonzero amplitude
    const LevelSpectrum sp(AtomModel::mg25(), 21.3e-3);
    CHECK(sp.level(3, -3).amp_mj_up == 0.0);
    CHECK(sp.level(3, -3).amp_mj_down == 1.0);
    CHECK(sp.level(3, 3).amp_mj_down == 0.0);
}

TEST_CASE("stretched-state energy exactly linear in B") {
    const AtomModel atom = AtomModel::mg25();
    const double b = 21.3e-3;
    const LevelSpectrum sp(atom, b);
    const double expected = atom.hyperfine_a_hz * (-2.5) * (-0.5) +
                            (atom.g_j * con::mu_b * (-0.5) + 0.85545 / 2.5 * con::mu_n * (-2.5)) *
                                b / con::h;
    // exact linear Zeeman formula, 1e-12 relative
    CHECK(sp.level(3, -3).energy_hz ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("energies sum to the Hamiltonian trace (zero about the centroid)") {
    for (double b : {0.0, 5e-3, 21.3e-3, 30e-3}) {
        const auto levels = breit_rabi_levels(AtomModel::mg25(), b);
        double sum = 0.0;
        for (const auto& l : levels) sum += l.energy_hz;
        CHECK(std::abs(sum) < 1e-4);  // Hz, vs GHz-scale energies
    }
}

TEST_CASE("eigenstate orthonormality") {
    const LevelSpectrum sp(AtomModel::mg25(), 21.3e-3);
    // overlap within each m_F block; different blocks are orthogonal by
    // construction
    for (int mf = -2; mf <= 2; ++mf) {
        const auto& a = sp.level(3, mf);
        const auto& b = sp.level(2, mf);
        const double overlap = a.amp_mj_up * b.amp_mj_up + a.amp_mj_down * b.amp_mj_down;
        CHECK(std::abs(overlap) < 1e-12);
    }
}

TEST_CASE("energies continuous in B") {
    const AtomModel atom = AtomModel::mg25();
    double prev[12];
    bool first = true;
    for (double b = 0.0; b <= 30e-3; b += 0.1e-3) {
        const auto levels = breit_rabi_levels(atom, b);
        if (!first) {
            for (int i = 0; i < 12; ++i)
                CHECK(std::abs(levels[i].energy_hz - prev[i]) < 3e6);  // < 30 MHz per 0.1 mT
        }
        for (int i = 0; i < 12; ++i) prev[i] = levels[i].energy_hz;
        first = false;
    }
}

TEST_CASE("non-finite or negative B rejected") {
    const AtomModel atom = AtomModel::mg25();
    CHECK_THROWS_AS(breit_rabi_levels(atom, std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(breit_rabi_levels(atom, -1e-3), std::invalid_argument);
}

TEST_CASE("qubit transition frequency near 1.69 GHz at 21.3 mT") {
    const double f = transition_frequency(AtomModel::mg25(), TransitionSpec::qubit(), 21.3e-3);
    CHECK(f == doctest::Approx(1.69e9).epsilon(0.01 / 1.69));
    CHECK(f > 0.0);
}

TEST_CASE("unknown level label rejected") {
    const LevelSpectrum sp(AtomModel::mg25(), 21.3e-3);
    CHECK_THROWS_AS(sp.level(4, 0), std::invalid_argument);
    CHECK_THROWS_AS(sp.level(2, 3), std::invalid_argument);
}

TEST_CASE("field-independent point matches the independent oracle") {
    const AtomModel atom = AtomModel::mg25();
    const auto fip = field_independent_point(atom, TransitionSpec::qubit(), 15e-3, 30e-3);
    CHECK(fip.b0_tesla == doctest::Approx(oracle::b0_tesla).epsilon(1e-5));
    CHECK(fip.f0_hz == doctest::Approx(oracle::f0_hz).epsilon(1e-9));
    // slope below 10 Hz/mT
    const double slope =
        transition_frequency_derivative(atom, TransitionSpec::qubit(), fip.b0_tesla);
    CHECK(std::abs(slope) < 10.0 / 1e-3);
    // definitional consistency
    CHECK(fip.f0_hz == transition_frequency(atom, TransitionSpec::qubit(), fip.b0_tesla));
}

TEST_CASE("no stationary point -> no-root error") {
    const AtomModel atom = AtomModel::mg25();
    // transition involving the stretched state: monotone in B over the bracket
    const TransitionSpec mono(3, -3, 2, -2, Polarization::sigma_plus);
    CHECK_THROWS_AS(field_independent_point(atom, mono, 15e-3, 30e-3), NoRootError);
    // qubit transition over a bracket that excludes B0
    CHECK_THROWS_AS(field_independent_point(atom, TransitionSpec::qubit(), 1e-3, 5e-3),
                    NoRootError);
}

TEST_CASE("transition frequency symmetric around B0 to leading order") {
    const AtomModel atom = AtomModel::mg25();
    const auto fip = field_independent_point(atom, TransitionSpec::qubit(), 15e-3, 30e-3);
    const TransitionSpec q = TransitionSpec::qubit();
    const double up = transition_frequency(atom, q, fip.b0_tesla + 0.5e-3) - fip.f0_hz;
    const double dn = transition_frequency(atom, q, fip.b0_tesla - 0.5e-3) - fip.f0_hz;
    CHECK(up == doctest::Approx(oracle::curvature_half_mt).epsilon(1e-3));
    CHECK(std::abs(up - dn) / up < 1e-3);
}

TEST_CASE("analytic df/dB matches central finite differences") {
    const AtomModel atom = AtomModel::mg25();
    const TransitionSpec q = TransitionSpec::qubit();
    for (double b : {5e-3, 15e-3, 25e-3}) {
        const double fd = (transition_frequency(atom, q, b + 1e-6) -
                           transition_frequency(atom, q, b - 1e-6)) /
                          2e-6;
        const double an = transition_frequency_derivative(atom, q, b);
        CHECK(an == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("qubit matrix element reproduces the oracle and the 18.63 ns pi-time") {
    const AtomModel atom = AtomModel::mg25();
    const auto fip = field_independent_point(atom, TransitionSpec::qubit(), 15e-3, 30e-3);
    const double mel = dipole_matrix_element(atom, TransitionSpec::qubit(), fip.b0_tesla);
    CHECK(std::abs(mel) == doctest::Approx(oracle::qubit_pi_mel).epsilon(1e-5));
    const double omega = std::abs(mel) * con::mu_b * 1.9e-3 / con::hbar;
    const double pi_time = con::pi / omega;
    CHECK(pi_time == doctest::Approx(18.63e-9).epsilon(0.10));
}

TEST_CASE("selection rule: |Delta m_F| = 2 couples to nothing") {
    const LevelSpectrum sp(AtomModel::mg25(), 21.3e-3);
    const int i = sp.index_of(2, -1);
    const int j = sp.index_of(3, 1);
    for (int q = -1; q <= 1; ++q) {
        CHECK(sp.moment_matrix(q)(i, j) == 0.0);
        CHECK(sp.moment_matrix(q)(j, i) == 0.0);
    }
    // and the TransitionSpec type itself refuses |Delta m_F| > 1
    CHECK_THROWS_AS(TransitionSpec(3, 1, 2, 3, Polarization::sigma_plus), std::invalid_argument);
}

TEST_CASE("polarization must match Delta m_F") {
    CHECK_THROWS_AS(TransitionSpec(3, 1, 2, 1, Polarization::sigma_plus), std::invalid_argument);
    CHECK_THROWS_AS(TransitionSpec(3, 1, 2, 0, Polarization::pi), std::invalid_argument);
    CHECK_NOTHROW(TransitionSpec(3, 1, 2, 0, Polarization::sigma_minus));
}

TEST_CASE("mapping transition sigma- matrix element") {
    const AtomModel atom = AtomModel::mg25();
    const double mel = dipole_matrix_element(atom, TransitionSpec::mapping(), oracle::b0_tesla);
    CHECK(std::abs(mel) == doctest::Approx(oracle::mapping_sm_mel).epsilon(1e-5));
}

TEST_CASE("matrix element continuous in B (dense grid scan)") {
    const AtomModel atom = AtomModel::mg25();
    const TransitionSpec q = TransitionSpec::qubit();
    double prev = 0.0;
    bool first = true;
    for (double b = 0.0; b <= 30e-3; b += 0.1e-3) {
        const double mel = dipole_matrix_element(atom, q, b);
        if (!first) CHECK(std::abs(mel - prev) <= 0.01 * std::abs(prev));
        prev = mel;
        first = false;
    }
}

TEST_CASE("atomic constants config round trip") {
    const AtomModel ref = AtomModel::mg25();
    const std::string path = "test_atom.cfg";
    {
        FILE* f = fopen(path.c_str(), "w");
        fprintf(f, "# test constants\nA_hfs_hz = %.10e\ng_J = %.10f\ng_I = %.10f\nI2 = 5\n"
                   "mass_kg = %.10e\n",
                ref.hyperfine_a_hz, ref.g_j, ref.g_i, ref.mass_kg);
        fclose(f);
    }
    const AtomModel back = AtomModel::from_config(path);
    CHECK(back.hyperfine_a_hz == doctest::Approx(ref.hyperfine_a_hz));
    CHECK(back.nuclear_spin == 2.5);
    CHECK(back.g_j == doctest::Approx(ref.g_j));
    remove(path.c_str());
}

TEST_CASE("invalid atom models rejected") {
    AtomModel a = AtomModel::mg25();
    a.nuclear_spin = 2.0;  // integer spin: m_F would be half-integer
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);
    a = AtomModel::mg25();
    a.mass_kg = -1.0;
    CHECK_THROWS_AS(a.validate(), std::invalid_argument);
}
