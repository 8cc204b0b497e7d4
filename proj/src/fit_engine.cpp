#include "mrr/fit_engine.hpp"

#include "mrr/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace mrr {

namespace {

// Maps an unconstrained internal coordinate u onto [lower, upper].
struct BoundTransform
{
    double lower;
    double upper;

    bool has_lower() const { return std::isfinite(lower); }
    bool has_upper() const { return std::isfinite(upper); }

    double to_external(double u) const
    {
        if (has_lower() && has_upper())
            return lower + (upper - lower) * 0.5 * (1.0 + std::sin(u));
        if (has_lower())
            return lower - 1.0 + std::sqrt(u * u + 1.0);
        if (has_upper())
            return upper + 1.0 - std::sqrt(u * u + 1.0);
        return u;
    }

    double derivative(double u) const
    {
        if (has_lower() && has_upper())
            return (upper - lower) * 0.5 * std::cos(u);
        if (has_lower())
            return u / std::sqrt(u * u + 1.0);
        if (has_upper())
            return -u / std::sqrt(u * u + 1.0);
        return 1.0;
    }

    // Values on a bound are nudged inward so the derivative does not vanish.
    double to_internal(double p) const
    {
        if (has_lower() && has_upper()) {
            const double width = upper - lower;
            const double s = std::clamp(2.0 * (p - lower) / width - 1.0, -1.0 + 1e-8, 1.0 - 1e-8);
            return std::asin(s);
        }
        if (has_lower()) {
            const double z = std::max(p - lower + 1.0, 1.0 + 5e-7);
            return std::sqrt(z * z - 1.0);
        }
        if (has_upper()) {
            const double z = std::max(upper - p + 1.0, 1.0 + 5e-7);
            return std::sqrt(z * z - 1.0);
        }
        return p;
    }
};

double fd_step(double p)
{
    return std::max(1e-6 * std::abs(p), 1e-8);
}

bool all_finite(const Eigen::VectorXd& v)
{
    return v.allFinite();
}

// Covariance of the free parameters from a weighted Jacobian, with column
// scaling so that wildly different parameter magnitudes stay well conditioned.
Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jw)
{
    const Eigen::Index n = jw.cols();
    Eigen::VectorXd scale(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double norm = jw.col(j).norm();
        scale[j] = norm > 0.0 ? norm : 1.0;
    }
    const Eigen::MatrixXd js = jw * scale.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd info = js.transpose() * js;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(info);
    cod.setThreshold(1e-14);
    const Eigen::MatrixXd inv = cod.pseudoInverse();
    return scale.cwiseInverse().asDiagonal() * inv * scale.cwiseInverse().asDiagonal();
}

} // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& point,
                                 const std::vector<ParameterSpec>& parameters)
{
    const Eigen::VectorXd r0 = residuals(point);
    Eigen::MatrixXd jac(r0.size(), point.size());
    Eigen::VectorXd probe = point;
    for (Eigen::Index j = 0; j < point.size(); ++j) {
        const double h = fd_step(point[j]);
        double lower = -std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        if (static_cast<std::size_t>(j) < parameters.size()) {
            lower = parameters[j].lower;
            upper = parameters[j].upper;
        }
        const bool can_up = point[j] + h <= upper;
        const bool can_down = point[j] - h >= lower;
        if (can_up && can_down) {
            probe[j] = point[j] + h;
            const Eigen::VectorXd rp = residuals(probe);
            probe[j] = point[j] - h;
            const Eigen::VectorXd rm = residuals(probe);
            jac.col(j) = (rp - rm) / (2.0 * h);
        } else if (can_up) {
            probe[j] = point[j] + h;
            jac.col(j) = (residuals(probe) - r0) / h;
        } else {
            probe[j] = point[j] - h;
            jac.col(j) = (r0 - residuals(probe)) / h;
        }
        probe[j] = point[j];
    }
    return jac;
}

double check_jacobian(const FitProblem& problem, const Eigen::VectorXd& point)
{
    if (!problem.jacobian)
        return 0.0;
    const Eigen::MatrixXd analytic = problem.jacobian(point);
    const Eigen::MatrixXd numeric = numeric_jacobian(problem.residuals, point, problem.parameters);
    if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols())
        throw InputError("analytic Jacobian has the wrong shape");
    const double floor = 1e-8 * std::max(numeric.cwiseAbs().maxCoeff(), analytic.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < numeric.rows(); ++i) {
        for (Eigen::Index j = 0; j < numeric.cols(); ++j) {
            const double a = analytic(i, j);
            const double n = numeric(i, j);
            const double denom = std::max({std::abs(a), std::abs(n), floor});
            if (denom == 0.0)
                continue;
            worst = std::max(worst, std::abs(a - n) / denom);
        }
    }
    return worst;
}

FitResult least_squares(const FitProblem& problem)
{
    const std::size_t n_params = problem.parameters.size();
    if (n_params == 0)
        throw InputError("fit problem has no parameters");
    if (!problem.residuals)
        throw InputError("fit problem has no residual function");

    std::vector<std::size_t> free_index;
    std::vector<BoundTransform> transforms;
    Eigen::VectorXd p0(n_params);
    for (std::size_t j = 0; j < n_params; ++j) {
        const ParameterSpec& spec = problem.parameters[j];
        if (!(spec.lower <= spec.upper))
            throw InputError(fmt::format("parameter '{}' has lower bound above upper bound", spec.name));
        if (!(spec.initial >= spec.lower && spec.initial <= spec.upper) || !std::isfinite(spec.initial))
            throw InputError(fmt::format("initial guess {} for '{}' violates its bounds [{}, {}]", spec.initial,
                                         spec.name, spec.lower, spec.upper));
        p0[j] = spec.initial;
        if (!spec.fixed) {
            free_index.push_back(j);
            transforms.push_back({spec.lower, spec.upper});
        }
    }

    const Eigen::VectorXd r_init = problem.residuals(p0);
    if (!all_finite(r_init))
        throw ModelError("residuals are not finite at the initial guess");
    const Eigen::Index n_data = r_init.size();
    const auto n_free = static_cast<Eigen::Index>(free_index.size());
    if (n_data < n_free)
        throw InputError(fmt::format("{} residuals cannot determine {} free parameters", n_data, n_free));

    Eigen::VectorXd sqrt_w = Eigen::VectorXd::Ones(n_data);
    if (problem.weights.size() != 0) {
        if (problem.weights.size() != n_data)
            throw InputError("weight vector length differs from the residual length");
        for (Eigen::Index k = 0; k < n_data; ++k) {
            const double w = problem.weights[k];
            if (!(w > 0.0) || !std::isfinite(w))
                throw InputError(fmt::format("weight {} at index {} must be positive and finite", w, k));
            sqrt_w[k] = std::sqrt(w);
        }
    }

    auto external = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd p = p0;
        for (Eigen::Index k = 0; k < n_free; ++k)
            p[free_index[k]] = transforms[k].to_external(u[k]);
        return p;
    };
    auto weighted_residual = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return problem.residuals(p).cwiseProduct(sqrt_w);
    };
    // Weighted Jacobian with respect to the free external parameters.
    auto weighted_jacobian = [&](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
        const Eigen::MatrixXd full = problem.jacobian ? problem.jacobian(p)
                                                      : numeric_jacobian(problem.residuals, p, problem.parameters);
        Eigen::MatrixXd jac(n_data, n_free);
        for (Eigen::Index k = 0; k < n_free; ++k)
            jac.col(k) = full.col(free_index[k]).cwiseProduct(sqrt_w);
        return jac;
    };

    Eigen::VectorXd u(n_free);
    for (Eigen::Index k = 0; k < n_free; ++k)
        u[k] = transforms[k].to_internal(p0[free_index[k]]);

    const FitSettings& cfg = problem.settings;
    FitResult result;
    Eigen::VectorXd p = external(u);
    Eigen::VectorXd r = weighted_residual(p);
    double cost = 0.5 * r.squaredNorm();
    result.cost_history.push_back(cost);

    double lambda = cfg.initial_damping;
    double nu = 2.0;
    bool recompute = true;
    Eigen::MatrixXd jac_u;
    Eigen::MatrixXd normal;
    Eigen::VectorXd grad;
    Eigen::VectorXd scale;
    int iter = 0;

    if (n_free == 0) {
        result.converged = true;
        result.termination = "no free parameters";
    }

    while (n_free > 0 && iter < cfg.max_iterations) {
        if (recompute) {
            const Eigen::MatrixXd jac_p = weighted_jacobian(p);
            jac_u = jac_p;
            for (Eigen::Index k = 0; k < n_free; ++k)
                jac_u.col(k) *= transforms[k].derivative(u[k]);
            normal = jac_u.transpose() * jac_u;
            grad = jac_u.transpose() * r;
            scale = normal.diagonal().cwiseSqrt();
            for (Eigen::Index k = 0; k < n_free; ++k)
                if (!(scale[k] > 0.0))
                    scale[k] = 1.0;
            recompute = false;

            if (cost == 0.0) {
                result.converged = true;
                result.termination = "zero residual";
                break;
            }
            // Cosine between the residual and each Jacobian column.
            const double rnorm = r.norm();
            double cos_max = 0.0;
            for (Eigen::Index k = 0; k < n_free; ++k)
                cos_max = std::max(cos_max, std::abs(grad[k]) / (scale[k] * rnorm));
            if (cos_max <= cfg.gradient_tolerance) {
                result.converged = true;
                result.termination = "gradient tolerance";
                break;
            }
        }

        // Solve the scaled damped system (Â + λI) ŝ = -ĝ.
        Eigen::MatrixXd scaled = scale.cwiseInverse().asDiagonal() * normal * scale.cwiseInverse().asDiagonal();
        scaled.diagonal().array() += lambda;
        const Eigen::VectorXd rhs = -grad.cwiseQuotient(scale);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
        Eigen::VectorXd step = ldlt.solve(rhs).cwiseQuotient(scale);
        ++iter;
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            lambda *= nu;
            nu *= 2.0;
            continue;
        }

        const double step_norm = step.cwiseProduct(scale).norm();
        const double u_norm = u.cwiseProduct(scale).norm();
        if (step_norm <= cfg.step_tolerance * (u_norm + cfg.step_tolerance)) {
            result.converged = true;
            result.termination = "step tolerance";
            break;
        }

        const Eigen::VectorXd u_new = u + step;
        const Eigen::VectorXd p_new = external(u_new);
        Eigen::VectorXd r_new;
        bool finite = true;
        try {
            r_new = weighted_residual(p_new);
            finite = all_finite(r_new);
        } catch (const ModelError&) {
            finite = false;
        }
        const double cost_new = finite ? 0.5 * r_new.squaredNorm() : std::numeric_limits<double>::infinity();
        const double predicted = -(step.dot(grad) + 0.5 * step.dot(normal * step));

        if (cost_new < cost) {
            const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : 1.0;
            const double reduction = (cost - cost_new) / cost;
            u = u_new;
            p = p_new;
            r = r_new;
            cost = cost_new;
            result.cost_history.push_back(cost);
            lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            recompute = true;
            if (reduction <= cfg.function_tolerance) {
                result.converged = true;
                result.termination = "function tolerance";
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if (lambda > 1e30) {
                result.converged = true;
                result.termination = "no further decrease";
                break;
            }
        }
    }
    if (!result.converged)
        result.termination = "max iterations";

    result.iterations = iter;
    result.estimates = p;
    for (const ParameterSpec& spec : problem.parameters)
        result.names.push_back(spec.name);
    result.chi2 = r.squaredNorm();
    result.dof = static_cast<int>(n_data - n_free);
    result.chi2_reduced = result.chi2 / std::max(result.dof, 1);

    result.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_params), static_cast<Eigen::Index>(n_params));
    result.sigmas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
    if (n_free > 0) {
        const Eigen::MatrixXd cov_free = covariance_from_jacobian(weighted_jacobian(p)) * result.chi2_reduced;
        for (Eigen::Index a = 0; a < n_free; ++a)
            for (Eigen::Index b = 0; b < n_free; ++b)
                result.covariance(free_index[a], free_index[b]) = cov_free(a, b);
        for (Eigen::Index k = 0; k < n_free; ++k)
            result.sigmas[free_index[k]] = std::sqrt(std::max(cov_free(k, k), 0.0));
    }
    return result;
}

} // namespace mrr
