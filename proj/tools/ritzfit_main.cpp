// ritzfit: reduce frequency-modulated Rydberg scan data and fit
// Rydberg-Ritz series models to absolute level energies.
//
// Exit codes: 0 success, 1 input error, 2 fit non-convergence.

#include "ritzfit/analysis.hpp"
#include "ritzfit/config.hpp"
#include "ritzfit/core.hpp"
#include "ritzfit/lineshape.hpp"
#include "ritzfit/ritz.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitNoConvergence = 2;

void emit(const std::string& payload, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << payload;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw ritzfit::ValidationError("cannot write output file '" + out_path + "'");
    out << payload;
}

struct LineArgs {
    std::string trace_path;
    std::string model = "wahlquist";
    std::string out_path;
    std::string model_csv_path;
    bool pin_mod = false;
    std::optional<double> center, fwhm, mod, amplitude, baseline;
};

int run_fit_line(const LineArgs& args, const ritzfit::PipelineConfig&) {
    const auto trace = ritzfit::load_trace_file(args.trace_path);
    const auto kind = args.model == "lorentzian" ? ritzfit::LineModel::Lorentzian
                                                 : ritzfit::LineModel::Wahlquist;

    std::optional<ritzfit::LineShapeParams> init;
    const bool has_overrides =
        args.center || args.fwhm || args.mod || args.amplitude || args.baseline;
    try {
        ritzfit::LineShapeParams p = ritzfit::auto_init_guess(trace, kind);
        if (args.center) p.center_mhz = *args.center;
        if (args.fwhm) p.fwhm_mhz = *args.fwhm;
        if (args.mod) p.mod_amplitude_mhz = *args.mod;
        if (args.amplitude) p.amplitude = *args.amplitude;
        if (args.baseline) p.baseline = *args.baseline;
        init = p;
    } catch (const ritzfit::InitGuessError& e) {
        if (!has_overrides || !args.center || !args.fwhm || !args.amplitude) {
            const nlohmann::json j{{"converged", false}, {"error", e.what()}};
            emit(j.dump(2) + "\n", args.out_path);
            return kExitNoConvergence;
        }
        ritzfit::LineShapeParams p;
        p.center_mhz = *args.center;
        p.fwhm_mhz = *args.fwhm;
        p.amplitude = *args.amplitude;
        p.baseline = args.baseline.value_or(0.0);
        p.mod_amplitude_mhz = args.mod.value_or(15.0);
        init = p;
    }

    ritzfit::LineFitOptions opts;
    opts.pin_mod_amplitude = args.pin_mod;
    const auto fit = ritzfit::fit_line_center(trace, kind, init, opts);
    emit(ritzfit::line_fit_to_json(fit), args.out_path);
    if (!args.model_csv_path.empty()) {
        std::ofstream mc(args.model_csv_path);
        if (!mc) {
            throw ritzfit::ValidationError("cannot write model CSV '" + args.model_csv_path +
                                           "'");
        }
        ritzfit::write_model_csv(mc, trace, fit);
    }
    return fit.report.converged ? kExitOk : kExitNoConvergence;
}

int run_reduce(const std::string& scans_path, const std::string& budget_path,
               const std::string& out_path, const ritzfit::PipelineConfig& cfg) {
    const auto sets = ritzfit::load_scan_sets_file(scans_path);
    const auto budget = ritzfit::load_budget_file(budget_path);
    const double sigma = ritzfit::total_error(budget);

    std::vector<ritzfit::MeasuredLevel> levels;
    for (const auto& set : sets) {
        const auto agg = ritzfit::aggregate_scan_set(set);
        ritzfit::MeasuredLevel l;
        l.n = set.n;
        l.energy_mhz = ritzfit::third_step_to_total(agg.mean_mhz, cfg.constants);
        l.sigma_mhz = sigma;
        levels.push_back(l);
    }
    const auto dataset = ritzfit::validate_dataset(std::move(levels));

    std::ostringstream os;
    ritzfit::write_level_csv(os, dataset);
    emit(os.str(), out_path);
    return kExitOk;
}

struct SeriesArgs {
    std::string level_path;
    std::string out_path;
    std::string per_level_path;
    std::optional<int> method;
    std::optional<int> order;
    std::optional<std::string> closure;
    bool no_sigma_scaling = false;
    std::optional<double> default_sigma;
};

int run_fit_series(const SeriesArgs& args, ritzfit::PipelineConfig cfg) {
    if (args.method) cfg.method = *args.method;
    if (args.order) cfg.order = *args.order;
    if (args.default_sigma) cfg.default_sigma_mhz = *args.default_sigma;
    if (args.no_sigma_scaling) cfg.scale_sigmas_by_reduced_chi2 = false;
    if (args.closure) {
        cfg.tn_closure = *args.closure == "self" ? ritzfit::TnClosure::SelfConsistent
                                                 : ritzfit::TnClosure::MeasuredEnergy;
    }

    const auto dataset = ritzfit::load_level_file(args.level_path, cfg.default_sigma_mhz);

    ritzfit::RitzFitOptions opts;
    opts.closure = cfg.tn_closure;
    opts.constants = cfg.constants;
    opts.solver.scale_sigmas_by_reduced_chi2 = cfg.scale_sigmas_by_reduced_chi2;

    ritzfit::RitzFitResult result;
    switch (cfg.method) {
        case 1: result = ritzfit::fit_method1(dataset, cfg.order, opts); break;
        case 2: result = ritzfit::fit_method2(dataset, cfg.order, opts); break;
        default: result = ritzfit::fit_method3(dataset, opts); break;
    }

    emit(ritzfit::ritz_fit_to_json(result), args.out_path);
    if (!args.per_level_path.empty()) {
        std::ofstream pl(args.per_level_path);
        if (!pl) {
            throw ritzfit::ValidationError("cannot write per-level CSV '" +
                                           args.per_level_path + "'");
        }
        ritzfit::write_per_level_csv(pl, result);
    }
    return result.report.converged ? kExitOk : kExitNoConvergence;
}

/// "40", "85..100" or comma list of those.
std::vector<int> parse_n_spec(const std::string& spec) {
    std::vector<int> ns;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dots = item.find("..");
        try {
            if (dots == std::string::npos) {
                ns.push_back(std::stoi(item));
            } else {
                const int lo = std::stoi(item.substr(0, dots));
                const int hi = std::stoi(item.substr(dots + 2));
                if (hi < lo) throw ritzfit::ValidationError("empty range '" + item + "'");
                for (int n = lo; n <= hi; ++n) ns.push_back(n);
            }
        } catch (const std::logic_error&) {
            throw ritzfit::ValidationError("bad n specification '" + item + "'");
        }
    }
    if (ns.empty()) throw ritzfit::ValidationError("no n values requested");
    return ns;
}

int run_predict(const std::string& params_path, const std::string& n_spec,
                const std::string& out_path) {
    std::ifstream in(params_path);
    if (!in) throw ritzfit::ValidationError("cannot open params JSON '" + params_path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const auto loaded = ritzfit::ritz_params_from_json(buffer.str());

    const auto ns = parse_n_spec(n_spec);
    std::ostringstream os;
    os << "n,E_pred_mhz\n";
    char buf[64];
    for (int n : ns) {
        const double e = ritzfit::predict_level(loaded.params, n, loaded.constants);
        std::snprintf(buf, sizeof(buf), "%d,%.3f\n", n, e);
        os << buf;
    }
    emit(os.str(), out_path);
    return kExitOk;
}

int run_budget(const std::string& budget_path, const std::string& out_path, bool as_json) {
    const auto budget = ritzfit::load_budget_file(budget_path);
    const double total = ritzfit::total_error(budget);
    const double raw = ritzfit::total_error(budget, 0.0);
    std::string payload;
    if (as_json) {
        nlohmann::json comps;
        for (const auto& c : budget.components()) comps[c.label] = c.value_mhz;
        const nlohmann::json j{
            {"components", comps}, {"total_mhz", total}, {"total_raw_mhz", raw}};
        payload = j.dump(2) + "\n";
    } else {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "total error: %.1f MHz (quadrature sum %.4f MHz)\n",
                      total, raw);
        payload = buf;
    }
    emit(payload, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rydberg scan reduction and Rydberg-Ritz series fitting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    bool as_json = false;
    app.add_option("--config", config_path, "key=value pipeline configuration file");
    app.add_option("--out", out_path, "write the primary output here instead of stdout");
    app.add_flag("--json", as_json, "machine-readable output where a text summary is default");

    LineArgs line;
    auto* fit_line = app.add_subcommand("fit-line", "fit a lineshape model to a scan trace");
    fit_line->fallthrough();
    fit_line->add_option("trace", line.trace_path, "scan trace CSV (freq_mhz,signal)")
        ->required();
    fit_line->add_option("--model", line.model, "lineshape model")
        ->check(CLI::IsMember({"wahlquist", "lorentzian"}))
        ->capture_default_str();
    fit_line->add_flag("--pin-mod", line.pin_mod, "hold the modulation amplitude fixed");
    fit_line->add_option("--model-csv", line.model_csv_path,
                         "also write freq_mhz,signal,model columns here");
    double center = 0, fwhm = 0, mod = 0, amplitude = 0, baseline = 0;
    auto* oc = fit_line->add_option("--center", center, "initial center (MHz)");
    auto* ow = fit_line->add_option("--fwhm", fwhm, "initial FWHM (MHz)");
    auto* om = fit_line->add_option("--mod", mod, "initial modulation amplitude (MHz)");
    auto* oa = fit_line->add_option("--amplitude", amplitude, "initial amplitude");
    auto* ob = fit_line->add_option("--baseline", baseline, "initial baseline");

    std::string scans_path, budget_path;
    auto* reduce = app.add_subcommand(
        "reduce", "aggregate scan sets into a level table with a quadrature sigma");
    reduce->fallthrough();
    reduce->add_option("--scans", scans_path, "scan-set CSV (n,center_mhz)")->required();
    reduce->add_option("--budget", budget_path, "error-budget CSV (label,value_mhz)")
        ->required();

    SeriesArgs series;
    int method_arg = 0, order_arg = 0;
    std::string closure_arg;
    double default_sigma_arg = 0.0;
    auto* fit_series =
        app.add_subcommand("fit-series", "fit a Rydberg-Ritz series to a level table");
    fit_series->fallthrough();
    fit_series->add_option("levels", series.level_path, "level table CSV")->required();
    auto* om2 = fit_series->add_option("--method", method_arg, "fitting method")
                    ->check(CLI::IsMember({1, 2, 3}));
    auto* oo2 = fit_series->add_option("--order", order_arg,
                                       "defect coefficient count for methods 1-2")
                    ->check(CLI::IsMember({1, 2, 3}));
    auto* ot2 = fit_series->add_option("--tn-closure", closure_arg,
                                       "method-1 recursion closure")
                    ->check(CLI::IsMember({"data", "self"}));
    fit_series->add_flag("--no-sigma-scaling", series.no_sigma_scaling,
                         "do not scale parameter uncertainties by reduced chi2");
    auto* os2 = fit_series->add_option("--default-sigma", default_sigma_arg,
                                       "sigma for tables without a sigma column (MHz)");
    fit_series->add_option("--per-level", series.per_level_path,
                           "write the per-level table CSV here");

    std::string params_path, n_spec;
    auto* predict = app.add_subcommand("predict", "evaluate fitted series parameters at n");
    predict->fallthrough();
    predict->add_option("--params", params_path, "fit-series JSON report")->required();
    predict->add_option("--n", n_spec, "n values: '50', '85..100' or a comma list")
        ->required();

    std::string budget_only_path;
    auto* budget = app.add_subcommand("budget", "quadrature total of an error budget");
    budget->fallthrough();
    budget->add_option("budget", budget_only_path, "error-budget CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ritzfit::PipelineConfig cfg;
        if (!config_path.empty()) cfg = ritzfit::load_config_file(config_path);

        // relative --out paths land in the configured output directory
        if (!out_path.empty() && out_path.front() != '/' && cfg.out_dir != "." &&
            !cfg.out_dir.empty()) {
            out_path = cfg.out_dir + "/" + out_path;
        }

        if (*fit_line) {
            if (*oc) line.center = center;
            if (*ow) line.fwhm = fwhm;
            if (*om) line.mod = mod;
            if (*oa) line.amplitude = amplitude;
            if (*ob) line.baseline = baseline;
            line.out_path = out_path;
            return run_fit_line(line, cfg);
        }
        if (*reduce) return run_reduce(scans_path, budget_path, out_path, cfg);
        if (*fit_series) {
            if (*om2) series.method = method_arg;
            if (*oo2) series.order = order_arg;
            if (*ot2) series.closure = closure_arg;
            if (*os2) series.default_sigma = default_sigma_arg;
            series.out_path = out_path;
            return run_fit_series(series, cfg);
        }
        if (*predict) return run_predict(params_path, n_spec, out_path);
        if (*budget) return run_budget(budget_only_path, out_path, as_json);
    } catch (const ritzfit::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
