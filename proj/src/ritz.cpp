#include "ritzfit/ritz.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace ritzfit {

namespace {

/// delta(t) = c0 + c1*t + c2*t^2 + ...
double defect_series(std::span<const double> coeffs, double t) {
    double d = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) d = d * t + coeffs[k];
    return d;
}

/// Effective defect of the direct (Method 2/3) form:
/// d0 + a/(n-d0)^2 + b/(n-d0)^4 + ...
double direct_defect(std::span<const double> coeffs, double n) {
    const double d0 = coeffs[0];
    const double x = n - d0;
    if (!(x > 0.0)) {
        throw EvaluationError("n - d0 <= 0 at n=" + std::to_string(n));
    }
    const double t0 = 1.0 / (x * x);
    return defect_series(coeffs, t0);
}

/// Weighted residuals of one series-fitting method. Parameters are
/// [E_i, coefficients...].
class SeriesModel final : public ResidualModel {
public:
    SeriesModel(const LevelDataset& data, RitzMethod method, int n_coeffs,
                TnClosure closure, const PhysicalConstants& constants)
        : levels_(data.levels()),
          max_energy_(data.max_energy_mhz()),
          method_(method),
          n_coeffs_(n_coeffs),
          closure_(closure),
          r_(constants.rydberg_rb85_mhz) {}

    int parameter_count() const override { return 1 + n_coeffs_; }
    int residual_count() const override { return static_cast<int>(levels_.size()); }

    double residual(std::span<const double> p, int index) const override {
        const auto& level = levels_[static_cast<std::size_t>(index)];
        const double e_i = p[0];
        if (!(e_i > max_energy_)) {
            throw EvaluationError("E_i iterate <= max measured energy");
        }
        const auto coeffs = p.subspan(1);
        const double n = static_cast<double>(level.n);

        double defect;
        if (method_ == RitzMethod::Method1) {
            if (closure_ == TnClosure::MeasuredEnergy) {
                const double t = (e_i - level.energy_mhz) / r_;
                defect = defect_series(coeffs, t);
            } else {
                defect = solve_defect(level.n, coeffs).defect;
            }
        } else {
            defect = direct_defect(coeffs, n);
        }

        const double denom = n - defect;
        if (!(denom > 0.0)) {
            throw EvaluationError("n - delta <= 0 at n=" + std::to_string(level.n));
        }
        const double model = e_i - r_ / (denom * denom);
        return (model - level.energy_mhz) / level.sigma_mhz;
    }

private:
    const std::vector<MeasuredLevel>& levels_;
    double max_energy_;
    RitzMethod method_;
    int n_coeffs_;
    TnClosure closure_;
    double r_;
};

RitzFitResult run_series_fit(const LevelDataset& data, RitzMethod method, int n_coeffs,
                             const RitzFitOptions& opts) {
    if (data.size() < static_cast<std::size_t>(n_coeffs) + 2) {
        throw ValidationError("series fit with " + std::to_string(n_coeffs) +
                              " defect coefficients requires at least " +
                              std::to_string(n_coeffs + 2) + " levels, got " +
                              std::to_string(data.size()));
    }

    const double r = opts.constants.rydberg_rb85_mhz;
    const double n_max = static_cast<double>(data.max_n());
    std::vector<double> init(1 + n_coeffs, 0.0);
    init[0] = data.max_energy_mhz() + r / (n_max * n_max);
    init[1] = 0.016;  // F-series defect magnitude

    const SeriesModel model(data, method, n_coeffs, opts.closure, opts.constants);
    RitzFitResult result;
    result.constants = opts.constants;
    result.report = lm_fit(model, init, opts.solver);

    result.params.method = method;
    result.params.e_ionisation_mhz = result.report.params[0];
    result.params.coefficients.assign(result.report.params.begin() + 1,
                                      result.report.params.end());
    result.sigmas = result.report.sigmas;

    if (!result.report.converged) {
        result.warnings.push_back("fit did not converge; per-level table omitted");
        return result;
    }

    // Per-level table through the prediction formula, so that a later
    // predict_level(params, n) reproduces e_model_mhz exactly.
    result.per_level.reserve(data.size());
    for (const auto& level : data.levels()) {
        PerLevelRow row;
        row.n = level.n;
        row.e_measured_mhz = level.energy_mhz;
        row.e_model_mhz = predict_level(result.params, level.n, opts.constants);
        row.residual_mhz = row.e_measured_mhz - row.e_model_mhz;
        row.effective_n =
            effective_n(level.energy_mhz, result.params.e_ionisation_mhz, opts.constants);
        row.defect = static_cast<double>(level.n) - row.effective_n;
        result.per_level.push_back(row);
    }
    return result;
}

}  // namespace

FrequencyMHz rydberg_energy(int n, double defect, FrequencyMHz e_ionisation_mhz,
                            const PhysicalConstants& constants) {
    const double denom = static_cast<double>(n) - defect;
    if (!(denom > 0.0)) {
        throw DomainError("rydberg_energy: n - defect <= 0 (n=" + std::to_string(n) +
                          ", defect=" + std::to_string(defect) + ")");
    }
    return e_ionisation_mhz - constants.rydberg_rb85_mhz / (denom * denom);
}

double effective_n(FrequencyMHz e_n_mhz, FrequencyMHz e_i_mhz,
                   const PhysicalConstants& constants) {
    const double binding = e_i_mhz - e_n_mhz;
    if (!(binding > 0.0)) {
        throw DomainError("effective_n: state is unbound (E_n >= E_i)");
    }
    return std::sqrt(constants.rydberg_rb85_mhz / binding);
}

DefectSolution solve_defect(int n, std::span<const double> coefficients, double tol) {
    if (n < 1) throw DomainError("solve_defect: n must be >= 1");
    if (coefficients.empty()) throw ValidationError("solve_defect: no coefficients");
    if (!(tol > 0.0)) throw ValidationError("solve_defect: tol must be > 0");

    constexpr int kMaxIterations = 100;
    const double nd = static_cast<double>(n);
    double defect = coefficients[0];
    double previous = defect;
    for (int it = 1; it <= kMaxIterations; ++it) {
        const double denom = nd - defect;
        if (!(denom > 0.0) || !std::isfinite(denom)) {
            throw EvaluationError("solve_defect: n - delta <= 0 during iteration (n=" +
                                  std::to_string(n) + ", delta=" + std::to_string(defect) + ")");
        }
        const double t = 1.0 / (denom * denom);
        const double next = defect_series(coefficients, t);
        if (!std::isfinite(next)) {
            throw EvaluationError("solve_defect: divergent iteration at n=" + std::to_string(n));
        }
        if (std::abs(next - defect) < tol) {
            DefectSolution sol;
            sol.defect = next;
            sol.t = 1.0 / ((nd - next) * (nd - next));
            sol.iterations = it;
            return sol;
        }
        previous = defect;
        defect = next;
    }
    std::ostringstream os;
    os.precision(17);
    os << "solve_defect: no convergence after " << kMaxIterations << " iterations at n=" << n
       << "; last iterates " << previous << ", " << defect;
    throw EvaluationError(os.str());
}

RitzFitResult fit_method1(const LevelDataset& data, int order, const RitzFitOptions& opts) {
    if (order < 1 || order > 3) throw ValidationError("fit_method1: order must be 1, 2 or 3");
    return run_series_fit(data, RitzMethod::Method1, order, opts);
}

RitzFitResult fit_method2(const LevelDataset& data, int order, const RitzFitOptions& opts) {
    if (order < 1 || order > 3) throw ValidationError("fit_method2: order must be 1, 2 or 3");
    return run_series_fit(data, RitzMethod::Method2, order, opts);
}

RitzFitResult fit_method3(const LevelDataset& data, const RitzFitOptions& opts) {
    auto result = run_series_fit(data, RitzMethod::Method3, 2, opts);
    if (data.min_n() < 20) {
        result.warnings.push_back(
            "dataset contains levels with n < 20; the abridged series form is only an "
            "accurate approximation for n >= 20");
    }
    return result;
}

FrequencyMHz predict_level(const RitzParameters& params, int n,
                           const PhysicalConstants& constants) {
    if (n < 1) throw DomainError("predict_level: n must be >= 1");
    if (params.coefficients.empty()) throw ValidationError("predict_level: no coefficients");

    double defect;
    if (params.method == RitzMethod::Method1) {
        defect = solve_defect(n, params.coefficients).defect;
    } else {
        try {
            defect = direct_defect(params.coefficients, static_cast<double>(n));
        } catch (const EvaluationError& e) {
            throw DomainError(e.what());
        }
    }
    return rydberg_energy(n, defect, params.e_ionisation_mhz, constants);
}

ResidualStats residual_stats(const RitzFitResult& result) {
    if (result.per_level.empty()) {
        throw ValidationError("residual_stats: fit result has no per-level table");
    }
    const std::size_t n = result.per_level.size();
    ResidualStats stats;
    for (const auto& row : result.per_level) {
        stats.mean_mhz += row.residual_mhz;
        stats.max_abs_mhz = std::max(stats.max_abs_mhz, std::abs(row.residual_mhz));
    }
    stats.mean_mhz /= static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (const auto& row : result.per_level) {
            const double d = row.residual_mhz - stats.mean_mhz;
            ss += d * d;
        }
        stats.std_mhz = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return stats;
}

std::string ritz_fit_to_json(const RitzFitResult& result) {
    nlohmann::json j;
    j["method"] = static_cast<int>(result.params.method);
    j["order"] = result.params.coefficients.size();
    j["converged"] = result.report.converged;
    j["n_iterations"] = result.report.n_iterations;
    j["chi2"] = result.report.chi2;
    j["reduced_chi2"] = result.report.reduced_chi2;
    j["constants"] = {{"rydberg_rb85_mhz", result.constants.rydberg_rb85_mhz},
                      {"ground_offset_mhz", result.constants.ground_offset_mhz}};
    j["params"] = {{"e_ionisation_mhz", result.params.e_ionisation_mhz},
                   {"coefficients", result.params.coefficients}};
    if (!result.sigmas.empty()) {
        j["sigmas"] = {{"e_ionisation_mhz", result.sigmas[0]},
                       {"coefficients", std::vector<double>(result.sigmas.begin() + 1,
                                                            result.sigmas.end())}};
    }
    const auto& cov = result.report.covariance;
    std::vector<std::vector<double>> cov_rows;
    for (int i = 0; i < cov.rows(); ++i) {
        cov_rows.emplace_back(cov.row(i).begin(), cov.row(i).end());
    }
    j["covariance"] = cov_rows;

    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : result.per_level) {
        rows.push_back({{"n", row.n},
                        {"e_meas_mhz", row.e_measured_mhz},
                        {"e_model_mhz", row.e_model_mhz},
                        {"residual_mhz", row.residual_mhz},
                        {"effective_n", row.effective_n},
                        {"defect", row.defect}});
    }
    j["per_level"] = rows;
    if (!result.per_level.empty()) {
        const auto stats = residual_stats(result);
        j["residual_stats"] = {{"mean_mhz", stats.mean_mhz},
                               {"std_mhz", stats.std_mhz},
                               {"max_abs_mhz", stats.max_abs_mhz}};
    }
    j["warnings"] = result.warnings;
    return j.dump(2) + "\n";
}

LoadedRitzParameters ritz_params_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad fit-report JSON: ") + e.what());
    }
    LoadedRitzParameters loaded;
    try {
        const int method = j.at("method").get<int>();
        if (method < 1 || method > 3) {
            throw ValidationError("bad fit-report JSON: method must be 1, 2 or 3");
        }
        loaded.params.method = static_cast<RitzMethod>(method);
        loaded.params.e_ionisation_mhz = j.at("params").at("e_ionisation_mhz").get<double>();
        loaded.params.coefficients =
            j.at("params").at("coefficients").get<std::vector<double>>();
        if (j.contains("constants")) {
            loaded.constants.rydberg_rb85_mhz =
                j["constants"].at("rydberg_rb85_mhz").get<double>();
            loaded.constants.ground_offset_mhz =
                j["constants"].at("ground_offset_mhz").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad fit-report JSON: ") + e.what());
    }
    if (loaded.params.coefficients.empty()) {
        throw ValidationError("bad fit-report JSON: empty coefficient list");
    }
    return loaded;
}

void write_per_level_csv(std::ostream& out, const RitzFitResult& result) {
    out << "n,E_meas_mhz,E_model_mhz,residual_mhz,effective_n,defect\n";
    char buf[160];
    for (const auto& row : result.per_level) {
        std::snprintf(buf, sizeof(buf), "%d,%.1f,%.3f,%.3f,%.8f,%.8f\n", row.n,
                      row.e_measured_mhz, row.e_model_mhz, row.residual_mhz, row.effective_n,
                      row.defect);
        out << buf;
    }
}

}  // namespace ritzfit
