#pragma once

// Lineshape models for the demodulated scan traces: a plain Lorentzian for
// fast direct-absorption scans and the Wahlquist first-derivative profile of
// a modulation-broadened Lorentzian for lock-in traces.

#include "ritzfit/core.hpp"
#include "ritzfit/optimize.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace ritzfit {

enum class LineModel { Lorentzian, Wahlquist };

struct ScanPoint {
    FrequencyMHz freq_mhz = 0.0;
    double signal = 0.0;  // lock-in / photodiode output, arbitrary units
};

/// Validated scan: >= 8 points, strictly increasing frequencies, finite
/// signals.
class ScanTrace {
public:
    static ScanTrace validate(std::vector<ScanPoint> points);
    const std::vector<ScanPoint>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

private:
    ScanTrace() = default;
    std::vector<ScanPoint> points_;
};

struct LineShapeParams {
    FrequencyMHz center_mhz = 0.0;
    FrequencyMHz fwhm_mhz = 0.0;           // H_1/2 of the underlying line
    FrequencyMHz mod_amplitude_mhz = 0.0;  // H_w, Wahlquist only
    double amplitude = 0.0;
    double baseline = 0.0;
};

/// baseline + amplitude * (fwhm/2)^2 / ((freq-center)^2 + (fwhm/2)^2)
double lorentzian_eval(FrequencyMHz freq, const LineShapeParams& p);

/// First-harmonic derivative profile of a frequency-modulated Lorentzian.
/// With detuning H_d = freq - center, a = H_d/H_w, b = fwhm/(2 H_w),
/// g = 1 + b^2 + a^2 and u = g + sqrt(g^2 - 4a^2):
///
///   f = baseline + amplitude * sign(H_d) * (2/H_w)^2
///                * sqrt(2g - u) / (2 sqrt(u - 2) (u - g))
///
/// The value at H_d = 0 is baseline (the sqrt(2g-u) factor vanishes there).
/// Throws EvaluationError if the expression leaves its domain; never
/// returns NaN silently.
double wahlquist_eval(FrequencyMHz freq, const LineShapeParams& p);

/// Starting parameters from trace features. Lorentzian: extremum position,
/// half-maximum crossings. Wahlquist: zero crossing between the signal
/// extrema, extrema separation, and a 15 MHz default modulation amplitude.
/// Throws InitGuessError when the trace has no usable feature.
LineShapeParams auto_init_guess(const ScanTrace& trace, LineModel model);

struct LineFitOptions {
    bool pin_mod_amplitude = false;  // hold H_w fixed at its initial value
    SolverOptions solver;
};

struct LineFitResult {
    LineModel model = LineModel::Lorentzian;
    LineShapeParams params;
    LineShapeParams sigmas;  // same layout; zero for fixed parameters
    FitReport report;
};

/// Unit-weight LM fit of the chosen model. params.center_mhz of the result
/// is the line-center estimate. A non-converged fit is returned with
/// report.converged = false; it is the caller's call what to do with it.
LineFitResult fit_line_center(const ScanTrace& trace, LineModel model,
                              std::optional<LineShapeParams> init = std::nullopt,
                              const LineFitOptions& opts = {});

// Scan-trace file format: CSV `freq_mhz,signal`.
ScanTrace read_trace_csv(std::istream& in);
ScanTrace load_trace_file(const std::string& path);

/// JSON fit report (params, sigmas, chi2, convergence).
std::string line_fit_to_json(const LineFitResult& fit);

/// Plot-ready columns `freq_mhz,signal,model` for residual inspection.
void write_model_csv(std::ostream& out, const ScanTrace& trace, const LineFitResult& fit);

}  // namespace ritzfit
