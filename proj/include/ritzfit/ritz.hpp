#pragma once

// Rydberg-Ritz series formalism: quantum-defect evaluation and the three
// series-fitting methods, plus level prediction and residual statistics.
//
// Method 1 fits E_n = E_i - R/[n - d0 - d2*t_n - d4*t_n^2]^2 with the
// recursion closed through t_n = (E_i - E_n)/R ("balancing both sides"
// against the measured energies), or optionally through the self-consistent
// defect solve. Method 2 substitutes t_n ~ 1/(n-d0)^2, giving the direct
// form with coefficients (d0, a, b). Method 3 is the abridged two-term
// variant (d0, a) appropriate for n >= 20.

#include "ritzfit/core.hpp"
#include "ritzfit/optimize.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ritzfit {

enum class RitzMethod { Method1 = 1, Method2 = 2, Method3 = 3 };

/// Series-limit energy plus defect coefficients. Coefficient meaning depends
/// on the method: (d0, d2, d4, ...) for Method 1, (d0, a, b, ...) for
/// Method 2, (d0, a) for Method 3.
struct RitzParameters {
    FrequencyMHz e_ionisation_mhz = 0.0;
    RitzMethod method = RitzMethod::Method3;
    std::vector<double> coefficients;
};

/// How Method 1 closes the t_n recursion during fitting.
enum class TnClosure {
    MeasuredEnergy,  // t_n = (E_i - E_n_measured) / R with the current E_i
    SelfConsistent,  // t_n from the fixed-point defect solve
};

struct RitzFitOptions {
    TnClosure closure = TnClosure::MeasuredEnergy;
    SolverOptions solver;
    PhysicalConstants constants;
};

struct PerLevelRow {
    int n = 0;
    double e_measured_mhz = 0.0;
    double e_model_mhz = 0.0;
    double residual_mhz = 0.0;  // measured - model
    double effective_n = 0.0;
    double defect = 0.0;
};

struct RitzFitResult {
    RitzParameters params;
    std::vector<double> sigmas;  // [sigma(E_i), sigma(coefficients)...]
    FitReport report;
    std::vector<PerLevelRow> per_level;
    std::vector<std::string> warnings;
    PhysicalConstants constants;
};

/// E_i - R/(n - defect)^2. Throws DomainError if n - defect <= 0.
FrequencyMHz rydberg_energy(int n, double defect, FrequencyMHz e_ionisation_mhz,
                            const PhysicalConstants& constants = {});

/// n* = sqrt(R/(E_i - E_n)). Throws DomainError for unbound states
/// (E_n >= E_i).
double effective_n(FrequencyMHz e_n_mhz, FrequencyMHz e_i_mhz,
                   const PhysicalConstants& constants = {});

struct DefectSolution {
    double defect = 0.0;
    double t = 0.0;  // 1/(n - defect)^2
    int iterations = 0;
};

/// Self-consistent quantum defect: delta = d0 + d2*t + d4*t^2 + ... with
/// t = 1/(n - delta)^2, by fixed-point iteration from delta = d0. Throws
/// EvaluationError (with the last two iterates) if 100 iterations do not
/// reach `tol`.
DefectSolution solve_defect(int n, std::span<const double> coefficients,
                            double tol = 1e-14);

/// order selects the coefficient count: 1 -> {d0}, 2 -> {d0, d2},
/// 3 -> {d0, d2, d4}.
RitzFitResult fit_method1(const LevelDataset& data, int order,
                          const RitzFitOptions& opts = {});

/// order as fit_method1, coefficients {d0}, {d0, a}, {d0, a, b}.
RitzFitResult fit_method2(const LevelDataset& data, int order,
                          const RitzFitOptions& opts = {});

/// Abridged two-coefficient form (d0, a). Adds a warning to the result when
/// the dataset contains levels with n < 20, where the approximation degrades.
RitzFitResult fit_method3(const LevelDataset& data, const RitzFitOptions& opts = {});

/// Evaluates the method-appropriate series formula at n.
FrequencyMHz predict_level(const RitzParameters& params, int n,
                           const PhysicalConstants& constants = {});

struct ResidualStats {
    double mean_mhz = 0.0;
    double std_mhz = 0.0;  // sample (N-1) standard deviation
    double max_abs_mhz = 0.0;
};

ResidualStats residual_stats(const RitzFitResult& result);

// JSON fit report and the Fig.-5-ready per-level table.
std::string ritz_fit_to_json(const RitzFitResult& result);

struct LoadedRitzParameters {
    RitzParameters params;
    PhysicalConstants constants;
};

/// Reads back the `params` + `constants` of a JSON fit report.
LoadedRitzParameters ritz_params_from_json(const std::string& text);

/// CSV `n,E_meas_mhz,E_model_mhz,residual_mhz,effective_n,defect`.
void write_per_level_csv(std::ostream& out, const RitzFitResult& result);

}  // namespace ritzfit
