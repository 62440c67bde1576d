// Reproduction acceptance suite. Each numbered check exercises one headline
// requirement end to end against the shipped data and prints a PASS/FAIL
// line; the process exit code is the number of failures.

#include "ritzfit/analysis.hpp"
#include "ritzfit/core.hpp"
#include "ritzfit/lineshape.hpp"
#include "ritzfit/optimize.hpp"
#include "ritzfit/ritz.hpp"

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ritzfit;

namespace {

int g_failures = 0;
std::vector<FitReport> g_reports;  // every fit run here feeds check 9

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    std::printf("[%s] %2d. %s (%s)\n", pass ? "PASS" : "FAIL", id, what.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

std::string data_path(const char* name) {
    return std::string(RITZFIT_DATA_DIR) + "/" + name;
}

LevelDataset published_levels() { return load_level_file(data_path("table1_levels.csv")); }

void keep(const FitReport& r) { g_reports.push_back(r); }

const double kM1Gen[] = {1010024719.0, 0.016473, -0.0783, 0.028};
const double kM2Gen[] = {1010024719.0, 0.016473, -0.0784, 0.032};
const double kPublishedSigma[] = {8.0, 0.000014, 0.0007, 0.007};

std::vector<int> low_n_grid() {
    auto ns = synthetic::published_ns();
    for (int n = 8; n >= 4; --n) ns.insert(ns.begin(), n);
    return ns;
}

// 1. Method-3 fit of the shipped table reproduces the published parameters.
void check_series_reproduction() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto fit = fit_method3(published_levels());
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    keep(fit.report);

    const double e_i = fit.params.e_ionisation_mhz;
    const double d0 = fit.params.coefficients[0];
    const double a = fit.params.coefficients[1];
    const bool pass = fit.report.converged && std::abs(e_i - 1010024717.0) <= 8.0 &&
                      std::abs(d0 - 0.01640) <= 0.00016 && std::abs(a) <= 0.18 &&
                      elapsed < 1.0;
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "E_i=%.1f d0=%.6f a=%.4f in %.2f ms; windows 1010024717+-8, "
                  "0.01640+-0.00016, 0+-0.18",
                  e_i, d0, a, 1e3 * elapsed);
    report(1, pass, "method-3 fit reproduces the published series parameters", detail);

    // open question follow-up, recorded not gated: which sigma convention
    // matches the published uncertainties (0.00008, 0.09)
    RitzFitOptions unscaled;
    unscaled.solver.scale_sigmas_by_reduced_chi2 = false;
    const auto raw = fit_method3(published_levels(), unscaled);
    std::printf("       note: sigma(d0), sigma(a) = (%.2e, %.3f) chi2-scaled vs (%.2e, %.3f) "
                "unscaled; published (8e-05, 0.09) matches the scaled convention\n",
                fit.sigmas[1], fit.sigmas[2], raw.sigmas[1], raw.sigmas[2]);
}

// 2. Synthetic datasets from the published method-1/2 parameters with 4 MHz
//    noise are recovered within 3x the published sigmas, 20 seeds each.
void check_synthetic_recovery() {
    const auto ns = low_n_grid();
    const PhysicalConstants constants;
    double worst = 0.0;
    bool pass = true;
    for (unsigned seed = 0; seed < 20; ++seed) {
        const auto d1 =
            synthetic::make_series_dataset(synthetic::SeriesForm::Recursive, kM1Gen[0],
                                           constants.rydberg_rb85_mhz, {kM1Gen + 1, 3}, ns,
                                           4.0, 4.0, 9000 + seed);
        const auto f1 = fit_method1(d1, 3);
        keep(f1.report);
        pass = pass && f1.report.converged;
        const double gen1[] = {kM1Gen[0], kM1Gen[1], kM1Gen[2], kM1Gen[3]};
        for (int k = 0; k < 4; ++k) {
            const double dev = std::abs(f1.report.params[k] - gen1[k]) / (3.0 * kPublishedSigma[k]);
            worst = std::max(worst, dev);
            pass = pass && dev <= 1.0;
        }

        const auto d2 =
            synthetic::make_series_dataset(synthetic::SeriesForm::Direct, kM2Gen[0],
                                           constants.rydberg_rb85_mhz, {kM2Gen + 1, 3}, ns,
                                           4.0, 4.0, 9500 + seed);
        const auto f2 = fit_method2(d2, 3);
        keep(f2.report);
        pass = pass && f2.report.converged;
        const double gen2[] = {kM2Gen[0], kM2Gen[1], kM2Gen[2], kM2Gen[3]};
        for (int k = 0; k < 4; ++k) {
            const double dev = std::abs(f2.report.params[k] - gen2[k]) / (3.0 * kPublishedSigma[k]);
            worst = std::max(worst, dev);
            pass = pass && dev <= 1.0;
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "worst |fit-gen| = %.2f of the 3-sigma budget over 20 seeds x 2 methods",
                  worst);
    report(2, pass, "synthetic method-1/2 datasets recover the generator", detail);
}

// 3. Method 1 and method 2 agree on identical data.
void check_method_agreement() {
    bool pass = true;
    double worst_de = 0.0;

    const auto m1 = fit_method1(published_levels(), 2);
    const auto m2 = fit_method2(published_levels(), 2);
    keep(m1.report);
    keep(m2.report);
    pass = pass && m1.report.converged && m2.report.converged;
    worst_de = std::abs(m1.params.e_ionisation_mhz - m2.params.e_ionisation_mhz);
    pass = pass && worst_de <= 1.0;
    for (int k = 0; k < 2; ++k) {
        pass = pass && std::abs(m1.params.coefficients[k] - m2.params.coefficients[k]) <=
                           std::hypot(m1.sigmas[k + 1], m2.sigmas[k + 1]);
    }

    // Synthetic sets mirror the published weighting: low-n levels carry the
    // ~40x larger uncertainty of the older measurements they stand in for.
    const auto ns = low_n_grid();
    const PhysicalConstants constants;
    for (unsigned seed : {11u, 22u, 33u}) {
        const auto d =
            synthetic::make_merged_dataset(synthetic::SeriesForm::Recursive, kM1Gen[0],
                                           constants.rydberg_rb85_mhz, {kM1Gen + 1, 3}, ns,
                                           320.0, 8.0, seed);
        const auto s1 = fit_method1(d, 3);
        const auto s2 = fit_method2(d, 3);
        keep(s1.report);
        keep(s2.report);
        pass = pass && s1.report.converged && s2.report.converged;
        const double de = std::abs(s1.params.e_ionisation_mhz - s2.params.e_ionisation_mhz);
        worst_de = std::max(worst_de, de);
        pass = pass && de <= 1.0;
        for (int k = 0; k < 3; ++k) {
            pass = pass && std::abs(s1.params.coefficients[k] - s2.params.coefficients[k]) <=
                               std::hypot(s1.sigmas[k + 1], s2.sigmas[k + 1]);
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail),
                  "worst |dE_i| = %.4f MHz (<= 1), coefficients within mutual 1 sigma",
                  worst_de);
    report(3, pass, "methods 1 and 2 agree on identical data", detail);
}

// 4. Error budget quadrature.
void check_error_budget() {
    const auto budget = load_budget_file(data_path("table2_budget.csv"));
    const double raw = total_error(budget, 0.0);
    const double rounded = total_error(budget);
    const bool pass = rounded == 8.0 && std::abs(raw - 7.9557) < 1e-3;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "quadrature sum %.4f MHz -> %.1f MHz at 0.1 rounding",
                  raw, rounded);
    report(4, pass, "published error budget totals 8.0 MHz", detail);
}

// 5. Third-step conversion against both published columns.
void check_conversion() {
    std::ifstream in(data_path("table1_transitions.csv"));
    std::string line;
    std::getline(in, line);  // header n,nu3_mhz,e_total_mhz
    int rows = 0, within = 0;
    double worst = 0.0;
    while (std::getline(in, line)) {
        int n = 0;
        double nu3 = 0.0, e = 0.0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &n, &nu3, &e) != 3) continue;
        const double dev = std::abs(third_step_to_total(nu3) - e);
        worst = std::max(worst, dev);
        ++rows;
        if (dev <= 0.5) ++within;
    }
    const bool pass = rows == 28 && within == rows;
    char detail[224];
    std::snprintf(detail, sizeof(detail),
                  "%d/%d rows within 0.5 MHz, worst %.1f MHz; both published columns are "
                  "independently rounded to 1 MHz, so reconstruction from the rounded nu3 "
                  "can be off by up to 1 MHz",
                  within, rows, worst);
    report(5, pass, "nu3 -> E_n conversion matches the published table to 0.5 MHz", detail);
}

// 6. Residual scatter of the method-3 fit.
void check_residual_scatter() {
    const auto fit = fit_method3(published_levels());
    keep(fit.report);
    const auto stats = residual_stats(fit);
    const bool pass =
        fit.report.converged && std::abs(stats.mean_mhz) < 2.0 && stats.std_mhz <= 6.0;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "mean %+.3f MHz, std %.2f MHz (published scatter 4.4)",
                  stats.mean_mhz, stats.std_mhz);
    report(6, pass, "method-3 residuals scatter like the published fit", detail);
}

// 7. Hold-out prediction of the upper series.
void check_holdout() {
    const auto data = published_levels();
    const auto fit = fit_method3(data.filtered(33, 80));
    keep(fit.report);
    bool pass = fit.report.converged;
    double worst = 0.0;
    const auto held_out = data.filtered(85, 100);
    for (const auto& level : held_out.levels()) {
        const double dev = std::abs(predict_level(fit.params, level.n) - level.energy_mhz);
        worst = std::max(worst, dev);
        pass = pass && dev <= 16.0;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "fit n=33-80, predict n=85-100: worst %.2f MHz (<= 16)",
                  worst);
    report(7, pass, "hold-out predictions land on the measured levels", detail);
}

// 8. Lineshape model properties.
void check_lineshape() {
    bool pass = true;
    std::string why;

    LineShapeParams p;
    p.center_mhz = 236429214.0;
    p.fwhm_mhz = 20.0;
    p.mod_amplitude_mhz = 15.0;
    p.amplitude = 102.0;
    p.baseline = 0.37;
    if (wahlquist_eval(p.center_mhz, p) != p.baseline) {
        pass = false;
        why += " center!=baseline";
    }
    std::mt19937_64 rng(88);
    std::uniform_real_distribution<double> ux(1e-3, 120.0);
    for (int i = 0; i < 200; ++i) {
        const double x = ux(rng);
        const double s = wahlquist_eval(p.center_mhz + x, p) +
                         wahlquist_eval(p.center_mhz - x, p) - 2.0 * p.baseline;
        if (std::abs(s) > 1e-12 * std::abs(p.amplitude)) {
            pass = false;
            why += " antisymmetry";
            break;
        }
    }

    // small-modulation limit vs the numerically differentiated Lorentzian
    LineShapeParams sm;
    sm.fwhm_mhz = 20.0;
    sm.mod_amplitude_mhz = sm.fwhm_mhz / 100.0;
    sm.amplitude = 1.0;
    auto lorentz = [&](double x) {
        const double h = 0.5 * sm.fwhm_mhz;
        return h * h / (x * x + h * h);
    };
    std::vector<double> wq, dl;
    for (double x = -60.0; x <= 60.0; x += 0.1) {
        wq.push_back(wahlquist_eval(x, sm));
        dl.push_back(oracles::numeric_derivative(lorentz, x, 1e-4));
    }
    double num = 0.0, den = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < wq.size(); ++i) {
        num += wq[i] * dl[i];
        den += dl[i] * dl[i];
        peak = std::max(peak, std::abs(wq[i]));
    }
    double worst_sm = 0.0;
    for (std::size_t i = 0; i < wq.size(); ++i) {
        worst_sm = std::max(worst_sm, std::abs(wq[i] - (num / den) * dl[i]) / peak);
    }
    if (worst_sm > 0.01) {
        pass = false;
        why += " small-mod";
    }

    const auto trace = load_trace_file(data_path("trace_lorentzian_fastscan.csv"));
    const auto fit = fit_line_center(trace, LineModel::Lorentzian);
    keep(fit.report);
    const double fwhm_err = std::abs(fit.params.fwhm_mhz - 20.0) / 20.0;
    if (!fit.report.converged || fwhm_err > 0.02) {
        pass = false;
        why += " fwhm-refit";
    }

    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "antisymmetry <= 1e-12, small-mod worst %.4f of peak (<= 0.01), fast-scan "
                  "fwhm %.2f MHz (%.1f%% off)%s",
                  worst_sm, fit.params.fwhm_mhz, 100.0 * fwhm_err, why.c_str());
    report(8, pass, "lineshape model properties hold", detail);
}

// 9. Optimizer correctness: Jacobian accuracy, chi2 monotonicity,
//    Monte-Carlo sigma validation.
void check_optimizer() {
    bool pass = true;
    std::string why;

    auto lorentz = [](double x, double c, double w, double a, double b) {
        const double h = 0.5 * w;
        return b + a * h * h / ((x - c) * (x - c) + h * h);
    };

    std::mt19937_64 rng(314159);
    std::uniform_real_distribution<double> uc(-5.0, 5.0), uw(1.0, 10.0), ua(0.3, 4.0),
        ub(-1.0, 1.0), ux(-15.0, 15.0);
    double worst_jac = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const double c = uc(rng), w = uw(rng), a = ua(rng), b = ub(rng);
        std::vector<double> xs(8);
        for (auto& x : xs) x = ux(rng);
        const CallbackModel model(4, 8, [&](std::span<const double> q, int i) {
            return lorentz(xs[i], q[0], q[1], q[2], q[3]);
        });
        const std::vector<double> params{c, w, a, b};
        // step floor 1 is the configuration every fit drives this with; a
        // bare relative step underflows into rounding noise at |c| ~ 0
        const auto jac = numeric_jacobian(model, params, 1e-6, nullptr, 1.0);
        Eigen::MatrixXd exact(8, 4);
        for (int i = 0; i < 8; ++i) {
            const auto truth = oracles::lorentzian_partials(xs[i], c, w, a);
            exact(i, 0) = truth.d_center;
            exact(i, 1) = truth.d_fwhm;
            exact(i, 2) = truth.d_amplitude;
            exact(i, 3) = truth.d_baseline;
        }
        for (int j = 0; j < 4; ++j) {
            // entries far below their column scale are compared against that
            // scale; a pure relative test is ill-posed at the zeros
            const double floor = 0.01 * exact.col(j).cwiseAbs().maxCoeff();
            for (int i = 0; i < 8; ++i) {
                const double err = std::abs(jac(i, j) - exact(i, j)) /
                                   std::max(std::abs(exact(i, j)), floor);
                worst_jac = std::max(worst_jac, err);
            }
        }
    }
    if (worst_jac > 1e-6) {
        pass = false;
        why += " jacobian";
    }

    // chi2 monotone over every accepted step of every fit this suite ran
    std::size_t steps = 0;
    for (const auto& r : g_reports) {
        for (std::size_t k = 1; k < r.chi2_history.size(); ++k) {
            ++steps;
            if (!(r.chi2_history[k] < r.chi2_history[k - 1])) {
                pass = false;
                why += " chi2-monotonicity";
            }
        }
    }

    // Monte-Carlo: 500 noise realizations of a 2-parameter weighted fit
    constexpr int kReps = 500, kN = 20;
    std::vector<double> xs(kN);
    for (int i = 0; i < kN; ++i) xs[i] = 10.0 * i / (kN - 1);
    std::vector<std::vector<double>> fitted(2), quoted(2);
    for (int rep = 0; rep < kReps; ++rep) {
        const auto noise = synthetic::gaussian_noise(kN, 1.0, 70000 + rep);
        std::vector<double> ys(kN);
        for (int i = 0; i < kN; ++i) ys[i] = 1.0 + 2.0 * xs[i] + noise[i];
        const CallbackModel model(2, kN, [&](std::span<const double> q, int i) {
            return q[0] * xs[i] + q[1] - ys[i];
        });
        const auto fit = lm_fit(model, {0.0, 0.0});
        for (int j = 0; j < 2; ++j) {
            fitted[j].push_back(fit.params[j]);
            quoted[j].push_back(fit.sigmas[j]);
        }
    }
    double worst_mc = 0.0;
    for (int j = 0; j < 2; ++j) {
        double mean = 0.0;
        for (double v : fitted[j]) mean += v;
        mean /= kReps;
        double var = 0.0;
        for (double v : fitted[j]) var += (v - mean) * (v - mean);
        const double empirical = std::sqrt(var / (kReps - 1));
        double sigma_mean = 0.0;
        for (double v : quoted[j]) sigma_mean += v;
        sigma_mean /= kReps;
        worst_mc = std::max(worst_mc, std::abs(sigma_mean - empirical) / empirical);
    }
    if (worst_mc > 0.20) {
        pass = false;
        why += " monte-carlo";
    }

    char detail[192];
    std::snprintf(detail, sizeof(detail),
                  "jacobian worst rel err %.1e (<= 1e-6); %zu accepted steps all decrease "
                  "chi2; MC sigma within %.1f%% of scatter (<= 20%%)%s",
                  worst_jac, steps, 100.0 * worst_mc, why.c_str());
    report(9, pass, "optimizer self-checks hold", detail);
}

// 10. Defect solver against the bisection oracle.
void check_defect_solver() {
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<int> un(4, 100);
    std::uniform_real_distribution<double> u0(-0.5, 0.5), u2(-0.2, 0.2), u4(-0.1, 0.1);
    double worst = 0.0;
    bool pass = true;
    for (int i = 0; i < 1000; ++i) {
        const int n = un(rng);
        const double coeffs[] = {u0(rng), u2(rng), u4(rng)};
        const auto sol = solve_defect(n, coeffs);
        const double bis =
            oracles::bisect_defect(n, coeffs, coeffs[0] - 0.5, coeffs[0] + 0.5);
        worst = std::max(worst, std::abs(sol.defect - bis));
        pass = pass && std::abs(sol.defect - bis) <= 1e-12;
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "1000 draws, worst |fp - bisection| = %.2e (<= 1e-12)",
                  worst);
    report(10, pass, "defect solver agrees with the bisection oracle", detail);
}

}  // namespace

int main() {
    std::printf("ritzfit acceptance suite\n");
    try {
        check_series_reproduction();
        check_synthetic_recovery();
        check_method_agreement();
        check_error_budget();
        check_conversion();
        check_residual_scatter();
        check_holdout();
        check_lineshape();
        check_optimizer();
        check_defect_solver();
    } catch (const std::exception& e) {
        std::printf("[FAIL] suite aborted: %s\n", e.what());
        return 99;
    }
    std::printf("%d of 10 checks failed\n", g_failures);
    return g_failures;
}
