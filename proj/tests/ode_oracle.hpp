#pragma once

// Test-only cross-check oracle: adaptive Runge-Kutta-Fehlberg (4/5)
// integration of dp/dt = M p, independent of the matrix-exponential
// propagation path it verifies.

#include <cmath>
#include <eigen3/Eigen/Dense>
#include <stdexcept>

namespace ionbath::test_oracle {

inline Eigen::VectorXd integrate_master_equation(const Eigen::MatrixXd& generator,
                                                 Eigen::VectorXd p, double t_final,
                                                 double tolerance = 1e-11) {
    if (t_final < 0.0) throw std::invalid_argument("oracle: negative time");
    double t = 0.0;
    double h = t_final > 0.0 ? std::min(0.1, t_final) : 0.0;

    auto deriv = [&generator](const Eigen::VectorXd& y) { return generator * y; };

    while (t < t_final) {
        h = std::min(h, t_final - t);
        const Eigen::VectorXd k1 = deriv(p);
        const Eigen::VectorXd k2 = deriv(p + h * (k1 / 4.0));
        const Eigen::VectorXd k3 = deriv(p + h * (3.0 / 32.0 * k1 + 9.0 / 32.0 * k2));
        const Eigen::VectorXd k4 = deriv(
            p + h * (1932.0 / 2197.0 * k1 - 7200.0 / 2197.0 * k2 + 7296.0 / 2197.0 * k3));
        const Eigen::VectorXd k5 =
            deriv(p + h * (439.0 / 216.0 * k1 - 8.0 * k2 + 3680.0 / 513.0 * k3 -
                           845.0 / 4104.0 * k4));
        const Eigen::VectorXd k6 =
            deriv(p + h * (-8.0 / 27.0 * k1 + 2.0 * k2 - 3544.0 / 2565.0 * k3 +
                           1859.0 / 4104.0 * k4 - 11.0 / 40.0 * k5));

        const Eigen::VectorXd p4 = p + h * (25.0 / 216.0 * k1 + 1408.0 / 2565.0 * k3 +
                                            2197.0 / 4104.0 * k4 - k5 / 5.0);
        const Eigen::VectorXd p5 =
            p + h * (16.0 / 135.0 * k1 + 6656.0 / 12825.0 * k3 +
                     28561.0 / 56430.0 * k4 - 9.0 / 50.0 * k5 + 2.0 / 55.0 * k6);

        const double err = (p5 - p4).cwiseAbs().maxCoeff();
        if (err <= tolerance || h < 1e-12) {
            t += h;
            p = p5;
        }
        const double scale =
            err > 0.0 ? 0.9 * std::pow(tolerance / err, 0.2) : 4.0;
        h *= std::min(4.0, std::max(0.1, scale));
    }
    return p;
}

}  // namespace ionbath::test_oracle
