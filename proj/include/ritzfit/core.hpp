#pragma once

// Shared domain types for the Rydberg-series reduction toolkit.
// Every frequency and energy in this codebase is a double in MHz.

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ritzfit {

/// Frequency or energy in MHz. Values must be finite.
using FrequencyMHz = double;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (files, datasets, configuration).
struct ValidationError : Error {
    using Error::Error;
};

/// A quantity left the mathematical domain of a formula (n - delta <= 0,
/// E_n >= E_i, non-positive width, ...).
struct DomainError : Error {
    using Error::Error;
};

/// A model could not be evaluated at a trial parameter vector. The fitter
/// treats this as a rejected step and retries with stronger damping.
struct EvaluationError : Error {
    using Error::Error;
};

/// NaN or Inf where a finite number is required. Never recoverable.
struct NumericError : Error {
    using Error::Error;
};

/// auto_init_guess found no usable line feature in a trace.
struct InitGuessError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Level data
// ---------------------------------------------------------------------------

/// One absolute level energy: 5S_1/2 c.o.m. -> nF_7/2 transition frequency.
struct MeasuredLevel {
    int n = 0;                      // principal quantum number
    FrequencyMHz energy_mhz = 0.0;  // E_n
    FrequencyMHz sigma_mhz = 0.0;   // 1-sigma uncertainty, > 0
};

/// Validated, n-ascending collection of measured levels.
class LevelDataset {
public:
    const std::vector<MeasuredLevel>& levels() const { return levels_; }
    std::size_t size() const { return levels_.size(); }
    int min_n() const { return levels_.front().n; }
    int max_n() const { return levels_.back().n; }
    FrequencyMHz max_energy_mhz() const;

    /// Subset with n_min <= n <= n_max (inclusive). Throws ValidationError
    /// if the selection is empty.
    LevelDataset filtered(int n_min, int n_max) const;

    friend LevelDataset validate_dataset(std::vector<MeasuredLevel> raw);

private:
    LevelDataset() = default;
    std::vector<MeasuredLevel> levels_;
};

/// Sorts by n and enforces the dataset invariants: non-empty, unique n,
/// n >= 1, sigma > 0, energies finite and positive.
LevelDataset validate_dataset(std::vector<MeasuredLevel> raw);

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Chain constants pinning the reduction to the published analysis.
struct PhysicalConstants {
    /// R_Rb85 * c: 10 973 660.672249 m^-1 times the SI speed of light.
    FrequencyMHz rydberg_rb85_mhz = 10'973'660.672249 * 299.792458;

    /// 5S_1/2 c.o.m. -> 5D_5/2 offset added to third-step frequencies.
    FrequencyMHz ground_offset_mhz = 770'571'549.6;
};

// ---------------------------------------------------------------------------
// Fit reporting
// ---------------------------------------------------------------------------

/// Result of one weighted least-squares fit.
struct FitReport {
    std::vector<double> params;
    std::vector<double> sigmas;        // sqrt of covariance diagonal
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    std::vector<double> residuals;     // weighted, (model - datum) / sigma
    int n_iterations = 0;
    bool converged = false;
    std::vector<double> chi2_history;  // chi2 of each accepted iterate
};

// ---------------------------------------------------------------------------
// Level-table file format: CSV `n,energy_mhz,sigma_mhz`
// ---------------------------------------------------------------------------

/// Parses a level table. The sigma column may be omitted from the header,
/// in which case default_sigma_mhz is applied to every level.
LevelDataset read_level_csv(std::istream& in, double default_sigma_mhz = 8.0);
LevelDataset load_level_file(const std::string& path, double default_sigma_mhz = 8.0);

/// Writes `n,energy_mhz,sigma_mhz` with energies at 0.1 MHz resolution.
void write_level_csv(std::ostream& out, const LevelDataset& dataset);

}  // namespace ritzfit
