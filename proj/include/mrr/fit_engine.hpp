#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mrr {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct ParameterSpec
{
    std::string name;
    double initial = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool fixed = false;
};

struct FitSettings
{
    int max_iterations = 200;
    double gradient_tolerance = 1e-10;
    double step_tolerance = 1e-12;
    double function_tolerance = 1e-15;
    double initial_damping = 1e-3;
};

// Weighted problem: minimize ½ Σ w_k r_k(p)². jacobian is optional; when empty,
// central differences are used.
struct FitProblem
{
    ResidualFn residuals;
    JacobianFn jacobian;
    std::vector<ParameterSpec> parameters;
    Eigen::VectorXd weights;
    FitSettings settings;
};

struct FitResult
{
    std::vector<std::string> names;
    Eigen::VectorXd estimates;
    Eigen::VectorXd sigmas;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    double chi2_reduced = 0.0;
    int dof = 0;
    bool converged = false;
    int iterations = 0;
    std::string termination;
    std::vector<double> cost_history; // ½χ² after each accepted step, starting at the initial guess
};

// Levenberg-Marquardt with box constraints handled by a smooth reparametrization.
// Uncertainties come from (JᵀWJ)⁻¹ scaled by the reduced chi-square.
// Throws InputError for malformed problems, ModelError when the initial residual is not finite.
FitResult least_squares(const FitProblem& problem);

// Central-difference Jacobian of the unweighted residuals, step max(1e-6|p|, 1e-8),
// falling back to one-sided differences at the bounds.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& point,
                                 const std::vector<ParameterSpec>& parameters = {});

// Max elementwise relative deviation between the supplied analytic Jacobian and
// central differences. Returns 0 when the problem has no analytic Jacobian.
double check_jacobian(const FitProblem& problem, const Eigen::VectorXd& point);

} // namespace mrr
