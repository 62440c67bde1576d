#include "ritzfit/lineshape.hpp"
#include "csv_util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ritzfit {

namespace {

std::string describe(FrequencyMHz freq, const LineShapeParams& p) {
    std::ostringstream os;
    os.precision(17);
    os << "freq=" << freq << " center=" << p.center_mhz << " fwhm=" << p.fwhm_mhz
       << " mod=" << p.mod_amplitude_mhz << " amplitude=" << p.amplitude
       << " baseline=" << p.baseline;
    return os.str();
}

/// Unscaled Wahlquist factor at detuning hd, without sign, amplitude or
/// baseline. Uses 2g - u = 4a^2/(g + disc) to avoid the cancellation at
/// small |a|, and the factored discriminant which is exact-by-construction
/// non-negative.
double wahlquist_raw(double hd, double fwhm, double mod) {
    const double a = hd / mod;
    const double b = 0.5 * fwhm / mod;
    const double g = 1.0 + b * b + a * a;
    const double disc =
        std::sqrt(((1.0 - a) * (1.0 - a) + b * b) * ((1.0 + a) * (1.0 + a) + b * b));
    const double two_g_minus_u = 4.0 * a * a / (g + disc);
    const double u_minus_2 = g - 2.0 + disc;
    if (!(u_minus_2 > 0.0) || !(disc > 0.0)) {
        throw EvaluationError("wahlquist: expression out of domain (u-2=" +
                              std::to_string(u_minus_2) + ", u-g=" + std::to_string(disc) +
                              ") at hd=" + std::to_string(hd));
    }
    const double scale = 2.0 / mod;
    return scale * scale * std::sqrt(two_g_minus_u) / (2.0 * std::sqrt(u_minus_2) * disc);
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

/// Linear interpolation of the frequency where the signal crosses `level`
/// between points i and i+1.
double crossing_freq(const std::vector<ScanPoint>& pts, std::size_t i, double level) {
    const double s0 = pts[i].signal, s1 = pts[i + 1].signal;
    const double f0 = pts[i].freq_mhz, f1 = pts[i + 1].freq_mhz;
    if (s1 == s0) return 0.5 * (f0 + f1);
    return f0 + (level - s0) * (f1 - f0) / (s1 - s0);
}

LineShapeParams guess_lorentzian(const ScanTrace& trace) {
    const auto& pts = trace.points();
    std::vector<double> sig(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) sig[i] = pts[i].signal;
    const double base = median(sig);

    std::size_t peak = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (std::abs(pts[i].signal - base) > std::abs(pts[peak].signal - base)) peak = i;
    }
    const double amp = pts[peak].signal - base;
    if (amp == 0.0) throw InitGuessError("flat trace: no peak feature");
    const double half = base + 0.5 * amp;

    // Half-maximum crossings on both flanks of the extremum.
    double left = 0.0, right = 0.0;
    bool have_left = false, have_right = false;
    for (std::size_t i = peak; i-- > 0;) {
        const bool below0 = std::abs(pts[i].signal - base) < std::abs(half - base);
        const bool below1 = std::abs(pts[i + 1].signal - base) < std::abs(half - base);
        if (below0 && !below1) {
            left = crossing_freq(pts, i, half);
            have_left = true;
            break;
        }
    }
    for (std::size_t i = peak; i + 1 < pts.size(); ++i) {
        const bool below0 = std::abs(pts[i].signal - base) < std::abs(half - base);
        const bool below1 = std::abs(pts[i + 1].signal - base) < std::abs(half - base);
        if (!below0 && below1) {
            right = crossing_freq(pts, i, half);
            have_right = true;
            break;
        }
    }

    const double center = pts[peak].freq_mhz;
    double fwhm = 0.0;
    if (have_left && have_right) {
        fwhm = right - left;
    } else if (have_left) {
        fwhm = 2.0 * (center - left);
    } else if (have_right) {
        fwhm = 2.0 * (right - center);
    } else {
        throw InitGuessError("no half-maximum crossing found around the extremum");
    }
    if (!(fwhm > 0.0)) throw InitGuessError("degenerate width estimate");

    LineShapeParams p;
    p.center_mhz = center;
    p.fwhm_mhz = fwhm;
    p.amplitude = amp;
    p.baseline = base;
    return p;
}

LineShapeParams guess_wahlquist(const ScanTrace& trace) {
    const auto& pts = trace.points();
    std::vector<double> sig(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) sig[i] = pts[i].signal;
    const double base = median(sig);

    std::size_t imax = 0, imin = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].signal > pts[imax].signal) imax = i;
        if (pts[i].signal < pts[imin].signal) imin = i;
    }
    if (!(pts[imax].signal > base) || !(pts[imin].signal < base)) {
        throw InitGuessError("flat trace: no bipolar derivative feature");
    }

    const std::size_t lo = std::min(imax, imin), hi = std::max(imax, imin);
    // Zero crossing of (signal - baseline) between the extrema, preferring
    // the one nearest their midpoint if noise makes several.
    const double midpoint = 0.5 * (pts[imax].freq_mhz + pts[imin].freq_mhz);
    double center = 0.0;
    bool found = false;
    for (std::size_t i = lo; i < hi; ++i) {
        const double a = pts[i].signal - base, b = pts[i + 1].signal - base;
        if (a == 0.0 || (a < 0.0) != (b < 0.0)) {
            const double c = crossing_freq(pts, i, base);
            if (!found || std::abs(c - midpoint) < std::abs(center - midpoint)) {
                center = c;
                found = true;
            }
        }
    }
    if (!found) throw InitGuessError("no sign change between signal extrema");

    const double separation = std::abs(pts[imax].freq_mhz - pts[imin].freq_mhz);
    if (separation == 0.0) throw InitGuessError("coincident signal extrema");

    LineShapeParams p;
    p.center_mhz = center;
    p.fwhm_mhz = std::sqrt(3.0) * separation;  // exact for the derivative limit
    p.mod_amplitude_mhz = 15.0;
    p.baseline = base;

    const double w1 = wahlquist_raw(pts[imax].freq_mhz - center, p.fwhm_mhz, p.mod_amplitude_mhz);
    const double w2 = wahlquist_raw(pts[imin].freq_mhz - center, p.fwhm_mhz, p.mod_amplitude_mhz);
    const double raw_peak = std::max(std::abs(w1), std::abs(w2));
    if (!(raw_peak > 0.0)) throw InitGuessError("degenerate amplitude estimate");
    const double half_ptp = 0.5 * (pts[imax].signal - pts[imin].signal);
    p.amplitude = (pts[imax].freq_mhz > pts[imin].freq_mhz ? 1.0 : -1.0) * half_ptp / raw_peak;
    return p;
}

/// Residuals of a trace against one of the lineshape models. The center is
/// fitted relative to a reference frequency: on an absolute axis (~2.4e8 MHz
/// against a 20 MHz line) a relative Jacobian step on the raw center would
/// jump clean over the feature. Both models depend on freq - center only,
/// so the shift is exact.
///
/// Parameter layout: [center - f_ref, fwhm, (mod,) amplitude, baseline];
/// mod is present only for a Wahlquist fit with floating modulation.
class TraceModel final : public ResidualModel {
public:
    TraceModel(const ScanTrace& trace, LineModel model, bool float_mod, double pinned_mod,
               double f_ref)
        : trace_(trace),
          model_(model),
          float_mod_(float_mod),
          pinned_mod_(pinned_mod),
          f_ref_(f_ref) {}

    int parameter_count() const override {
        return model_ == LineModel::Wahlquist && float_mod_ ? 5 : 4;
    }
    int residual_count() const override { return static_cast<int>(trace_.size()); }

    double reference() const { return f_ref_; }

    LineShapeParams unpack(std::span<const double> p, bool absolute_center = true) const {
        LineShapeParams s;
        s.center_mhz = p[0] + (absolute_center ? f_ref_ : 0.0);
        s.fwhm_mhz = p[1];
        if (model_ == LineModel::Wahlquist) {
            s.mod_amplitude_mhz = float_mod_ ? p[2] : pinned_mod_;
            s.amplitude = float_mod_ ? p[3] : p[2];
            s.baseline = float_mod_ ? p[4] : p[3];
        } else {
            s.amplitude = p[2];
            s.baseline = p[3];
        }
        return s;
    }

    double residual(std::span<const double> p, int index) const override {
        const LineShapeParams s = unpack(p, /*absolute_center=*/false);
        const auto& pt = trace_.points()[static_cast<std::size_t>(index)];
        const double freq = pt.freq_mhz - f_ref_;
        const double value = model_ == LineModel::Wahlquist ? wahlquist_eval(freq, s)
                                                            : lorentzian_eval(freq, s);
        return value - pt.signal;
    }

private:
    const ScanTrace& trace_;
    LineModel model_;
    bool float_mod_;
    double pinned_mod_;
    double f_ref_;
};

}  // namespace

ScanTrace ScanTrace::validate(std::vector<ScanPoint> points) {
    if (points.size() < 8) {
        throw ValidationError("scan trace has " + std::to_string(points.size()) +
                              " points; need at least 8");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i].freq_mhz) || !std::isfinite(points[i].signal)) {
            throw ValidationError("scan point " + std::to_string(i) + " is not finite");
        }
        if (i > 0 && !(points[i].freq_mhz > points[i - 1].freq_mhz)) {
            throw ValidationError("scan frequencies must be strictly increasing (point " +
                                  std::to_string(i) + ")");
        }
    }
    ScanTrace t;
    t.points_ = std::move(points);
    return t;
}

double lorentzian_eval(FrequencyMHz freq, const LineShapeParams& p) {
    if (!(p.fwhm_mhz > 0.0)) throw DomainError("lorentzian: fwhm must be > 0");
    const double h = 0.5 * p.fwhm_mhz;
    const double d = freq - p.center_mhz;
    return p.baseline + p.amplitude * h * h / (d * d + h * h);
}

double wahlquist_eval(FrequencyMHz freq, const LineShapeParams& p) {
    if (!(p.fwhm_mhz > 0.0)) throw DomainError("wahlquist: fwhm must be > 0");
    if (!(p.mod_amplitude_mhz > 0.0)) throw DomainError("wahlquist: mod amplitude must be > 0");
    const double hd = freq - p.center_mhz;
    if (hd == 0.0) return p.baseline;  // antisymmetric profile vanishes at center

    double value;
    try {
        value = p.amplitude * (hd > 0.0 ? 1.0 : -1.0) *
                wahlquist_raw(hd, p.fwhm_mhz, p.mod_amplitude_mhz);
    } catch (const EvaluationError& e) {
        throw EvaluationError(std::string(e.what()) + " [" + describe(freq, p) + "]");
    }
    if (!std::isfinite(value)) {
        throw EvaluationError("wahlquist: non-finite value [" + describe(freq, p) + "]");
    }
    return p.baseline + value;
}

LineShapeParams auto_init_guess(const ScanTrace& trace, LineModel model) {
    return model == LineModel::Wahlquist ? guess_wahlquist(trace) : guess_lorentzian(trace);
}

LineFitResult fit_line_center(const ScanTrace& trace, LineModel model,
                              std::optional<LineShapeParams> init,
                              const LineFitOptions& opts) {
    const LineShapeParams start = init ? *init : auto_init_guess(trace, model);

    const bool float_mod = model == LineModel::Wahlquist && !opts.pin_mod_amplitude;
    const TraceModel residuals(trace, model, float_mod, start.mod_amplitude_mhz,
                               start.center_mhz);

    std::vector<double> p0;
    p0.push_back(0.0);  // center - f_ref
    p0.push_back(start.fwhm_mhz);
    if (float_mod) p0.push_back(start.mod_amplitude_mhz);
    p0.push_back(start.amplitude);
    p0.push_back(start.baseline);

    LineFitResult result;
    result.model = model;
    result.report = lm_fit(residuals, p0, opts.solver);
    result.params = residuals.unpack(result.report.params);
    result.sigmas = residuals.unpack(result.report.sigmas, /*absolute_center=*/false);
    result.report.params[0] += residuals.reference();  // report the absolute center
    if (model == LineModel::Wahlquist && !float_mod) result.sigmas.mod_amplitude_mhz = 0.0;

    // Both models are even in fwhm (and mod); report the physical branch.
    result.params.fwhm_mhz = std::abs(result.params.fwhm_mhz);
    result.params.mod_amplitude_mhz = std::abs(result.params.mod_amplitude_mhz);
    return result;
}

ScanTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("line 1: empty trace file");
    const auto header = detail::split_csv(line);
    if (header.size() != 2 || header[0] != "freq_mhz" || header[1] != "signal") {
        throw ValidationError("line 1: expected header 'freq_mhz,signal'");
    }
    std::vector<ScanPoint> pts;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 2) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": expected 2 fields, got " + std::to_string(f.size()));
        }
        pts.push_back({detail::parse_double(f[0], "frequency", line_no),
                       detail::parse_double(f[1], "signal", line_no)});
    }
    return ScanTrace::validate(std::move(pts));
}

ScanTrace load_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open trace file '" + path + "'");
    return read_trace_csv(in);
}

std::string line_fit_to_json(const LineFitResult& fit) {
    nlohmann::json params{{"center_mhz", fit.params.center_mhz},
                          {"fwhm_mhz", fit.params.fwhm_mhz},
                          {"amplitude", fit.params.amplitude},
                          {"baseline", fit.params.baseline}};
    nlohmann::json sigmas{{"center_mhz", fit.sigmas.center_mhz},
                          {"fwhm_mhz", fit.sigmas.fwhm_mhz},
                          {"amplitude", fit.sigmas.amplitude},
                          {"baseline", fit.sigmas.baseline}};
    if (fit.model == LineModel::Wahlquist) {
        params["mod_amplitude_mhz"] = fit.params.mod_amplitude_mhz;
        sigmas["mod_amplitude_mhz"] = fit.sigmas.mod_amplitude_mhz;
    }
    const nlohmann::json j{
        {"model", fit.model == LineModel::Wahlquist ? "wahlquist" : "lorentzian"},
        {"converged", fit.report.converged},
        {"n_iterations", fit.report.n_iterations},
        {"chi2", fit.report.chi2},
        {"reduced_chi2", fit.report.reduced_chi2},
        {"params", params},
        {"sigmas", sigmas}};
    return j.dump(2) + "\n";
}

void write_model_csv(std::ostream& out, const ScanTrace& trace, const LineFitResult& fit) {
    out << "freq_mhz,signal,model\n";
    char buf[96];
    for (const auto& pt : trace.points()) {
        const double value = fit.model == LineModel::Wahlquist
                                 ? wahlquist_eval(pt.freq_mhz, fit.params)
                                 : lorentzian_eval(pt.freq_mhz, fit.params);
        std::snprintf(buf, sizeof(buf), "%.4f,%.8g,%.8g\n", pt.freq_mhz, pt.signal, value);
        out << buf;
    }
}

}  // namespace ritzfit
