#pragma once

// Weighted nonlinear least squares via Levenberg-Marquardt with numeric
// Jacobians. One engine drives every fit in the toolkit: lineshape centers,
// series parameters, and the synthetic-data tests.

#include "ritzfit/core.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ritzfit {

/// Abstract weighted-residual evaluator. residual(p, i) returns
/// (model_i(p) - datum_i) / sigma_i for data point i.
class ResidualModel {
public:
    virtual ~ResidualModel() = default;
    virtual int parameter_count() const = 0;
    virtual int residual_count() const = 0;
    virtual double residual(std::span<const double> params, int index) const = 0;
};

/// Wraps a lambda as a ResidualModel.
class CallbackModel final : public ResidualModel {
public:
    using Fn = std::function<double(std::span<const double>, int)>;
    CallbackModel(int n_params, int n_residuals, Fn fn)
        : n_params_(n_params), n_residuals_(n_residuals), fn_(std::move(fn)) {}

    int parameter_count() const override { return n_params_; }
    int residual_count() const override { return n_residuals_; }
    double residual(std::span<const double> params, int index) const override {
        return fn_(params, index);
    }

private:
    int n_params_;
    int n_residuals_;
    Fn fn_;
};

struct SolverOptions {
    int max_iterations = 200;
    double param_tol = 1e-10;
    double chi2_tol = 1e-12;
    double initial_damping = 1e-3;
    double jacobian_step_rel = 1e-6;
    /// Multiply the covariance by chi2/dof before extracting sigmas.
    bool scale_sigmas_by_reduced_chi2 = true;
};

/// The damped normal equations lost rank even at maximum damping, or the
/// covariance could not be formed. parameter_index names the first
/// unconstrained parameter (failing Cholesky pivot).
struct SingularNormalEquations : Error {
    SingularNormalEquations(const std::string& msg, int index)
        : Error(msg), parameter_index(index) {}
    int parameter_index;
};

struct JacobianDiagnostics {
    /// Parameters whose relative step underflowed and fell back to an
    /// absolute step of step_rel.
    std::vector<int> absolute_step_params;
};

/// Central-difference Jacobian, entry (i, j) = d residual_i / d param_j,
/// with step step_rel * max(|param_j|, step_floor). A step that underflows
/// machine precision falls back to an absolute step of step_rel (flagged in
/// the diagnostics). Falls back to a one-sided difference when a probe point
/// is infeasible.
Eigen::MatrixXd numeric_jacobian(const ResidualModel& model,
                                 std::span<const double> params, double step_rel,
                                 JacobianDiagnostics* diagnostics = nullptr,
                                 double step_floor = 0.0);

/// Covariance (J^T J)^-1 of a weighted Jacobian plus the 1-sigma parameter
/// uncertainties. With scaling enabled the covariance is multiplied by
/// chi2/dof. Throws SingularNormalEquations on rank deficiency.
std::pair<Eigen::MatrixXd, std::vector<double>> covariance_and_sigmas(
    const Eigen::MatrixXd& jacobian, double chi2, int dof,
    bool scale_by_reduced_chi2);

/// Levenberg-Marquardt minimization of sum_i residual_i(p)^2.
///
/// Damping follows the classic Marquardt schedule (x10 on rejection, /10 on
/// acceptance) and accepted steps never increase chi2. Parameters are
/// normalized internally by max(|init|, 1) so that magnitudes spanning many
/// orders (E_i ~ 1e9 against defects ~1e-2) keep the normal equations well
/// conditioned. Exhausted damping yields converged=false with diagnostics
/// retained rather than an exception; a NaN residual always throws.
FitReport lm_fit(const ResidualModel& model, std::vector<double> init,
                 const SolverOptions& opts = {});

}  // namespace ritzfit
