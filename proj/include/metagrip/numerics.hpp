#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <utility>

#include "metagrip/errors.hpp"

namespace metagrip {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct NewtonSettings {
    double tolerance = 1e-10;      // residual 2-norm threshold
    int max_iterations = 50;
    double damping_floor = 1.0 / (1 << 20);  // smallest accepted step scale
    double fd_step = 1e-6;         // finite-difference step for the Jacobian
    double singular_condition = 1e12;
};

struct SolveReport {
    Vector solution;
    double residual_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Central-difference Jacobian: entry (i,j) = (f_i(x + h e_j) - f_i(x - h e_j)) / (2h).
template <class F>
Matrix fd_jacobian(F&& f, const Vector& x, double h = 1e-6) {
    Vector probe = x;
    probe(0) += h;
    const Vector f_plus0 = f(probe);
    Matrix jac(f_plus0.size(), x.size());
    probe(0) -= 2.0 * h;
    jac.col(0) = (f_plus0 - Vector(f(probe))) / (2.0 * h);
    probe(0) = x(0);
    for (Eigen::Index j = 1; j < x.size(); ++j) {
        probe(j) = x(j) + h;
        const Vector fp = f(probe);
        probe(j) = x(j) - h;
        const Vector fm = f(probe);
        probe(j) = x(j);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

/// Ratio of extreme singular values; infinity when the matrix is rank deficient.
inline double condition_estimate(const Matrix& jac) {
    const Eigen::JacobiSVD<Matrix> svd(jac);
    const auto& sigma = svd.singularValues();
    const double smin = sigma(sigma.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return sigma(0) / smin;
}

/// Damped Newton iteration for a square nonlinear system r(x) = 0.
///
/// The step is halved until the residual norm decreases; if the scale drops
/// below settings.damping_floor the report comes back non-converged rather
/// than accepting an ascent step. Throws SingularJacobian when the condition
/// estimate blows up.
template <class F, class J>
SolveReport solve_newton_with_jacobian(F&& residual, J&& jacobian, Vector x,
                                       const NewtonSettings& settings = {}) {
    SolveReport report;
    Vector r = residual(x);
    double rnorm = r.norm();
    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        if (rnorm <= settings.tolerance) {
            report.solution = std::move(x);
            report.residual_norm = rnorm;
            report.iterations = iter;
            report.converged = true;
            return report;
        }
        if (iter == settings.max_iterations) break;

        const Matrix jac = jacobian(x);
        if (condition_estimate(jac) > settings.singular_condition) {
            throw SingularJacobian("newton: jacobian condition estimate above " +
                                   std::to_string(settings.singular_condition));
        }
        const Vector step = jac.partialPivLu().solve(-r);

        double scale = 1.0;
        Vector x_next;
        Vector r_next;
        double rnorm_next;
        while (true) {
            x_next = x + scale * step;
            r_next = residual(x_next);
            rnorm_next = r_next.norm();
            if (rnorm_next < rnorm || rnorm_next <= settings.tolerance) break;
            scale *= 0.5;
            if (scale < settings.damping_floor) {
                report.solution = std::move(x);
                report.residual_norm = rnorm;
                report.iterations = iter;
                report.converged = false;
                return report;
            }
        }
        x = std::move(x_next);
        r = std::move(r_next);
        rnorm = rnorm_next;
    }
    report.solution = std::move(x);
    report.residual_norm = rnorm;
    report.iterations = settings.max_iterations;
    report.converged = false;
    return report;
}

/// Damped Newton with an internal finite-difference Jacobian.
template <class F>
SolveReport solve_newton(F&& residual, Vector x0, const NewtonSettings& settings = {}) {
    auto fd = [&](const Vector& x) { return fd_jacobian(residual, x, settings.fd_step); };
    return solve_newton_with_jacobian(residual, fd, std::move(x0), settings);
}

namespace detail {

// Cramer solve of a 2x2 system; the determinant cutoff flags kinematic
// singularities.
inline Eigen::Vector2d solve2(const Eigen::Matrix2d& m, const Eigen::Vector2d& rhs,
                              const char* what) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (std::abs(det) < 1e-12) throw SingularJacobian(std::string(what) + ": singular 2x2 system");
    return {( m(1, 1) * rhs(0) - m(0, 1) * rhs(1)) / det,
            (-m(1, 0) * rhs(0) + m(0, 0) * rhs(1)) / det};
}

}  // namespace detail

}  // namespace metagrip
