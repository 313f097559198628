#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace mwion {

class Rng;

struct CountHistogram {
    std::vector<std::int64_t> bins;   // occurrences per photon count 0..max
    std::int64_t total_shots = 0;
    double phase_rad = 0.0;           // scan metadata (theta or phi)

    void validate() const;
    std::int64_t count_at(int c) const {
        return c < static_cast<int>(bins.size()) ? bins[c] : 0;
    }
};

// Calibrated three-component detection model; the two-ion bright mean is
// constrained to exactly twice the one-ion bright mean.
struct PoissonMixture {
    Eigen::Vector3d weights = Eigen::Vector3d::Constant(1.0 / 3.0);
    double mean_dark = 0.3;
    double mean_one_bright = 11.3;

    double mean_two_bright() const { return 2.0 * mean_one_bright; }
    double component_mean(int k) const;
    void validate() const;
    // counts between 0.3 dark and ~11 extra per bright ion over the 100 us
    // detection window
    static PoissonMixture paper_default();
    // P(c | component k)
    double pmf(int k, int count) const;
};

// Ramsey bright-class probabilities (P0, P1, P2) at analysis phase theta:
// (cos^4(theta/2), sin^2(theta)/2, sin^4(theta/2)).
Eigen::Vector3d ramsey_reference_probs(double theta_rad);

// Per shot: bright class from `populations`, then a Poisson count at that
// class mean. Deterministic for a given seed.
CountHistogram simulate_detection(const Eigen::Vector3d& populations,
                                  const PoissonMixture& mixture, std::int64_t shots,
                                  std::uint64_t seed);

struct ReferenceFit {
    PoissonMixture mixture;        // calibrated means; weights = marginal component use
    Eigen::Matrix3d class_mix;     // row k: Poisson-component weights of bright class k
    double chi2_reduced = 0.0;
    int dof = 0;
    int iterations = 0;
};

// One reference curve: observed (or expected-value) counts per bin at one
// analysis phase.
struct ReferenceCurve {
    double theta_rad = 0.0;
    double shots = 0.0;
    Eigen::VectorXd counts;
};

// Simultaneous least-squares calibration over a theta grid of Ramsey
// reference histograms; eight free parameters (two means + three class
// shapes of two free weights each), class weights per theta fixed to
// ramsey_reference_probs(theta).
ReferenceFit fit_reference(const std::vector<CountHistogram>& histograms);
// fit core on real-valued curves; zero-residual inputs recover parameters
// exactly
ReferenceFit fit_reference_curves(const std::vector<ReferenceCurve>& curves);

struct PopulationDecomposition {
    Eigen::Vector3d p;             // (p0, p1, p2) = zero/one/two ions bright
    Eigen::Matrix3d covariance;
    bool conditioning_warning = false;
};

// Simplex-constrained least-squares weights of the three fixed Poissonian
// shapes that best reproduce the histogram.
PopulationDecomposition decompose_populations(const CountHistogram& h, const PoissonMixture& mix);

struct DirectPopulations {
    Eigen::Vector3d p;        // measured without the analysis pulse
    Eigen::Vector3d sigma;
};

struct ParityScanResult {
    Eigen::VectorXd phases;
    Eigen::MatrixXd populations;        // N x 3, columns zero/one/two bright
    Eigen::MatrixXd population_sigmas;  // N x 3
    double a_pi = 0.0;                  // parity amplitude, >= 0
    double a_pi_sigma = 0.0;
    double phi0 = 0.0;
    Eigen::Vector3d amplitudes;         // a_k per channel (zero/one/two bright)
    Eigen::Vector3d offsets;            // a0_k
    double fidelity = 0.0;
    double fidelity_sigma = 0.0;
    double chi2_reduced = 0.0;
    bool used_direct_populations = false;
};

// Simultaneous 2phi sinusoid fit with one shared phase offset across the
// three population channels (sum of amplitudes constrained to 0, offsets to
// 1). |rho_uu,dd| = A_pi/2 (fixed by the exact rotation oracle). The sector
// population 1/2(rho_uu,uu + rho_dd,dd) comes from the optional direct
// (no-analysis-pulse) measurement; without it F falls back to A_pi, exact
// when the sector population equals 2|rho_uu,dd|.
ParityScanResult fit_parity_scan(const Eigen::VectorXd& phases,
                                 const Eigen::MatrixXd& populations,
                                 const Eigen::MatrixXd& population_sigmas,
                                 const std::optional<DirectPopulations>& direct = std::nullopt);

} // namespace mwion
