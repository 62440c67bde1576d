#include "ritzfit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ritzfit {

namespace {

constexpr double kDampingMax = 1e14;

std::string format_params(std::span<const double> p) {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (j) os << ", ";
        os << p[j];
    }
    os << ']';
    return os.str();
}

/// Sum over a canonical (sorted) order, so that chi2 and the normal
/// equations do not depend on the order data points arrived in. Fits become
/// bit-reproducible under row permutations of the input files.
double stable_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

double chi2_of(const Eigen::VectorXd& r) {
    std::vector<double> terms(r.size());
    for (int i = 0; i < r.size(); ++i) terms[i] = r[i] * r[i];
    return stable_sum(terms);
}

double sorted_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    std::vector<double> terms(a.size());
    for (int i = 0; i < a.size(); ++i) terms[i] = a[i] * b[i];
    return stable_sum(terms);
}

Eigen::MatrixXd normal_matrix(const Eigen::MatrixXd& jac) {
    const int m = static_cast<int>(jac.cols());
    Eigen::MatrixXd normal(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            normal(i, j) = normal(j, i) = sorted_dot(jac.col(i), jac.col(j));
        }
    }
    return normal;
}

Eigen::VectorXd gradient_vector(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r) {
    const int m = static_cast<int>(jac.cols());
    Eigen::VectorXd g(m);
    for (int j = 0; j < m; ++j) g[j] = sorted_dot(jac.col(j), r);
    return g;
}

/// Evaluates all residuals. Model-thrown DomainError/EvaluationError
/// propagates (the caller decides whether the point was a trial step);
/// a non-finite residual is always a hard NumericError.
Eigen::VectorXd eval_residuals(const ResidualModel& model, std::span<const double> p) {
    Eigen::VectorXd r(model.residual_count());
    for (int i = 0; i < model.residual_count(); ++i) {
        r[i] = model.residual(p, i);
        if (!std::isfinite(r[i])) {
            throw NumericError("NaN residual at index " + std::to_string(i) +
                               ", params " + format_params(p));
        }
    }
    return r;
}

/// Plain Cholesky, A = L L^T. Returns the failing pivot index or -1.
int cholesky_factor(Eigen::MatrixXd& a) {
    const int m = static_cast<int>(a.rows());
    for (int k = 0; k < m; ++k) {
        double d = a(k, k);
        for (int j = 0; j < k; ++j) d -= a(k, j) * a(k, j);
        if (!(d > 0.0) || !std::isfinite(d)) return k;
        a(k, k) = std::sqrt(d);
        for (int i = k + 1; i < m; ++i) {
            double s = a(i, k);
            for (int j = 0; j < k; ++j) s -= a(i, j) * a(k, j);
            a(i, k) = s / a(k, k);
        }
    }
    return -1;
}

Eigen::VectorXd cholesky_solve(const Eigen::MatrixXd& l, const Eigen::VectorXd& b) {
    const int m = static_cast<int>(l.rows());
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i) {
        double s = b[i];
        for (int j = 0; j < i; ++j) s -= l(i, j) * y[j];
        y[i] = s / l(i, i);
    }
    Eigen::VectorXd x(m);
    for (int i = m - 1; i >= 0; --i) {
        double s = y[i];
        for (int j = i + 1; j < m; ++j) s -= l(j, i) * x[j];
        x[i] = s / l(i, i);
    }
    return x;
}

/// Inverse from a Cholesky factor, filling a full symmetric matrix.
Eigen::MatrixXd cholesky_inverse(const Eigen::MatrixXd& l) {
    const int m = static_cast<int>(l.rows());
    Eigen::MatrixXd inv(m, m);
    for (int col = 0; col < m; ++col) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e[col] = 1.0;
        inv.col(col) = cholesky_solve(l, e);
    }
    // Symmetrize away the last-bit asymmetry of column-wise solves.
    return 0.5 * (inv + inv.transpose());
}

/// Column equilibration D = diag(1/sqrt(A_jj)). Jacobian column norms can
/// span 7+ orders of magnitude here (an ionisation energy against defect
/// coefficients), which would cost the plain normal equations most of their
/// precision. Returns the index of a non-positive diagonal, -1 if none.
int equilibration(const Eigen::MatrixXd& a, Eigen::VectorXd& d) {
    const int m = static_cast<int>(a.rows());
    d.resize(m);
    for (int j = 0; j < m; ++j) {
        const double diag = a(j, j);
        if (!(diag > 0.0) || !std::isfinite(diag)) return j;
        d[j] = 1.0 / std::sqrt(diag);
    }
    return -1;
}

/// Solves (A + lambda diag(A)) delta = -g through the equilibrated system.
/// Reports the failing pivot index via `bad` (-1 on success).
Eigen::VectorXd solve_damped(const Eigen::MatrixXd& a, const Eigen::VectorXd& g,
                             double lambda, int& bad) {
    const int m = static_cast<int>(a.rows());
    Eigen::VectorXd d;
    bad = equilibration(a, d);
    if (bad >= 0) return {};

    Eigen::MatrixXd hat(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) hat(i, j) = a(i, j) * d[i] * d[j];
        hat(i, i) = 1.0 + lambda;
    }
    bad = cholesky_factor(hat);
    if (bad >= 0) return {};

    Eigen::VectorXd rhs(m);
    for (int j = 0; j < m; ++j) rhs[j] = -g[j] * d[j];
    Eigen::VectorXd y = cholesky_solve(hat, rhs);
    for (int j = 0; j < m; ++j) y[j] *= d[j];
    bad = y.allFinite() ? -1 : 0;
    return y;
}

/// View of a model in normalized parameter space q = p / scale.
class ScaledModel final : public ResidualModel {
public:
    ScaledModel(const ResidualModel& inner, std::vector<double> scale)
        : inner_(inner), scale_(std::move(scale)) {}

    int parameter_count() const override { return inner_.parameter_count(); }
    int residual_count() const override { return inner_.residual_count(); }
    double residual(std::span<const double> q, int index) const override {
        std::vector<double> p(q.size());
        for (std::size_t j = 0; j < q.size(); ++j) p[j] = q[j] * scale_[j];
        return inner_.residual(p, index);
    }

private:
    const ResidualModel& inner_;
    std::vector<double> scale_;
};

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualModel& model,
                                 std::span<const double> params, double step_rel,
                                 JacobianDiagnostics* diagnostics, double step_floor) {
    if (static_cast<int>(params.size()) != model.parameter_count()) {
        throw ValidationError("numeric_jacobian: parameter size mismatch");
    }
    if (!(step_rel > 0.0)) throw ValidationError("numeric_jacobian: step_rel must be > 0");

    const int n = model.residual_count();
    const int m = model.parameter_count();
    Eigen::MatrixXd jac(n, m);
    std::vector<double> probe(params.begin(), params.end());

    bool have_base = false;
    Eigen::VectorXd base;

    for (int j = 0; j < m; ++j) {
        double h = std::max(std::abs(params[j]), step_floor) * step_rel;
        if (h < std::numeric_limits<double>::epsilon()) {
            h = step_rel;  // relative step underflowed
            if (diagnostics) diagnostics->absolute_step_params.push_back(j);
        }

        const double saved = probe[j];
        bool plus_ok = true, minus_ok = true;
        Eigen::VectorXd rp, rm;
        try {
            probe[j] = saved + h;
            rp = eval_residuals(model, probe);
        } catch (const NumericError&) {
            throw;
        } catch (const Error&) {
            plus_ok = false;
        }
        try {
            probe[j] = saved - h;
            rm = eval_residuals(model, probe);
        } catch (const NumericError&) {
            throw;
        } catch (const Error&) {
            minus_ok = false;
        }
        probe[j] = saved;

        if (plus_ok && minus_ok) {
            jac.col(j) = (rp - rm) / (2.0 * h);
        } else if (plus_ok || minus_ok) {
            if (!have_base) {
                base = eval_residuals(model, probe);
                have_base = true;
            }
            jac.col(j) = plus_ok ? ((rp - base) / h).eval() : ((base - rm) / h).eval();
        } else {
            throw EvaluationError("numeric_jacobian: both probes infeasible for parameter " +
                                  std::to_string(j) + " at " + format_params(probe));
        }
    }
    return jac;
}

std::pair<Eigen::MatrixXd, std::vector<double>> covariance_and_sigmas(
    const Eigen::MatrixXd& jacobian, double chi2, int dof,
    bool scale_by_reduced_chi2) {
    if (dof < 1) throw ValidationError("covariance_and_sigmas: dof must be >= 1");

    const Eigen::MatrixXd normal = normal_matrix(jacobian);
    Eigen::VectorXd d;
    int bad = equilibration(normal, d);
    Eigen::MatrixXd hat;
    if (bad < 0) {
        const int m = static_cast<int>(normal.rows());
        hat.resize(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) hat(i, j) = normal(i, j) * d[i] * d[j];
        }
        bad = cholesky_factor(hat);
    }
    if (bad >= 0) {
        throw SingularNormalEquations(
            "rank-deficient Jacobian: parameter " + std::to_string(bad) +
                " is unconstrained by the data",
            bad);
    }
    Eigen::MatrixXd cov = cholesky_inverse(hat);
    for (int i = 0; i < cov.rows(); ++i) {
        for (int j = 0; j < cov.cols(); ++j) cov(i, j) *= d[i] * d[j];
    }
    if (scale_by_reduced_chi2) cov *= chi2 / static_cast<double>(dof);

    std::vector<double> sigmas(cov.rows());
    for (int j = 0; j < cov.rows(); ++j) sigmas[j] = std::sqrt(std::max(cov(j, j), 0.0));
    return {std::move(cov), std::move(sigmas)};
}

FitReport lm_fit(const ResidualModel& model, std::vector<double> init,
                 const SolverOptions& opts) {
    const int m = model.parameter_count();
    const int n = model.residual_count();
    if (static_cast<int>(init.size()) != m) {
        throw ValidationError("lm_fit: init has " + std::to_string(init.size()) +
                              " entries, model has " + std::to_string(m) + " parameters");
    }
    if (n < m) {
        throw ValidationError("lm_fit: " + std::to_string(n) + " data points cannot constrain " +
                              std::to_string(m) + " parameters");
    }

    // Normalization scale per parameter: max(|init|, 1) rounded up to a
    // power of two, so the q <-> p conversion is exact and a grid-aligned
    // shift of the problem translates the whole iteration bit for bit.
    std::vector<double> scale(m);
    for (int j = 0; j < m; ++j) {
        const double magnitude = std::max(std::abs(init[j]), 1.0);
        int exponent = 0;
        const double mantissa = std::frexp(magnitude, &exponent);
        scale[j] = mantissa == 0.5 ? magnitude : std::ldexp(1.0, exponent);
    }
    const ScaledModel scaled(model, scale);

    std::vector<double> q(m);
    for (int j = 0; j < m; ++j) q[j] = init[j] / scale[j];

    // Initial point must be evaluable; infeasibility here is the caller's bug.
    Eigen::VectorXd r = eval_residuals(scaled, q);
    double chi2 = chi2_of(r);

    FitReport report;
    report.chi2_history.push_back(chi2);

    double lambda = opts.initial_damping;
    bool converged = false;
    int iter = 0;

    for (; iter < opts.max_iterations && !converged; ++iter) {
        const Eigen::MatrixXd jac =
            numeric_jacobian(scaled, q, opts.jacobian_step_rel, nullptr, 1.0);
        const Eigen::MatrixXd normal = normal_matrix(jac);
        const Eigen::VectorXd grad = gradient_vector(jac, r);

        // Parameter-tolerance test on the undamped Gauss-Newton step: near
        // the minimum it approximates the remaining distance, and unlike the
        // damped step it cannot shrink below param_tol just because lambda
        // was inflated while creeping along a curved valley.
        {
            int bad = -1;
            const Eigen::VectorXd gn = solve_damped(normal, grad, 0.0, bad);
            if (bad < 0) {
                double rel = 0.0;
                for (int j = 0; j < m; ++j) {
                    rel = std::max(rel, std::abs(gn[j]) / std::max(std::abs(q[j]), 1.0));
                }
                if (rel <= opts.param_tol) {
                    converged = true;
                    ++iter;
                    break;
                }
            }
        }

        bool stepped = false;
        double last_solvable_step = std::numeric_limits<double>::infinity();
        while (!stepped) {
            int bad = -1;
            const Eigen::VectorXd delta = solve_damped(normal, grad, lambda, bad);
            const bool solvable = bad < 0;

            if (solvable) {
                double rel_step = 0.0;
                for (int j = 0; j < m; ++j) {
                    rel_step = std::max(rel_step,
                                        std::abs(delta[j]) / std::max(std::abs(q[j]), 1.0));
                }
                last_solvable_step = rel_step;

                std::vector<double> trial(m);
                for (int j = 0; j < m; ++j) trial[j] = q[j] + delta[j];

                bool feasible = true;
                Eigen::VectorXd r_trial;
                try {
                    r_trial = eval_residuals(scaled, trial);
                } catch (const NumericError&) {
                    throw;
                } catch (const Error&) {
                    feasible = false;
                }

                if (feasible) {
                    const double chi2_trial = chi2_of(r_trial);
                    if (chi2_trial < chi2) {
                        const double drop = chi2 - chi2_trial;
                        q = std::move(trial);
                        r = std::move(r_trial);
                        chi2 = chi2_trial;
                        report.chi2_history.push_back(chi2);
                        lambda = std::max(lambda / 10.0, 1e-300);
                        stepped = true;
                        if (drop <= opts.chi2_tol * std::max(chi2, 1.0)) converged = true;
                        break;
                    }
                }
            }

            lambda *= 10.0;
            if (lambda > kDampingMax) {
                // No resolvable improvement left. If the final proposals were
                // already below the step tolerance this is stationarity at
                // numerical resolution; otherwise (singular system, stuck on
                // a wall) it is a genuine failure.
                converged = last_solvable_step <= opts.param_tol;
                break;
            }
        }
        if (!stepped) {
            ++iter;
            break;
        }
    }

    report.converged = converged;
    report.n_iterations = iter;
    report.chi2 = chi2;
    const int dof = n - m;
    report.reduced_chi2 = dof > 0 ? chi2 / dof : std::numeric_limits<double>::quiet_NaN();

    report.params.resize(m);
    for (int j = 0; j < m; ++j) report.params[j] = q[j] * scale[j];
    report.residuals.assign(r.data(), r.data() + n);

    // Covariance in original parameter units from the Jacobian at the
    // solution. For a failed fit a singular system is reported as zero
    // covariance so the diagnostics still come back to the caller.
    try {
        Eigen::MatrixXd jac_q =
            numeric_jacobian(scaled, q, opts.jacobian_step_rel, nullptr, 1.0);
        for (int j = 0; j < m; ++j) jac_q.col(j) /= scale[j];
        auto [cov, sigmas] = covariance_and_sigmas(
            jac_q, chi2, std::max(dof, 1),
            opts.scale_sigmas_by_reduced_chi2 && dof > 0);
        report.covariance = std::move(cov);
        report.sigmas = std::move(sigmas);
    } catch (const SingularNormalEquations&) {
        if (converged) throw;
        report.covariance = Eigen::MatrixXd::Zero(m, m);
        report.sigmas.assign(m, 0.0);
    }
    return report;
}

}  // namespace ritzfit
