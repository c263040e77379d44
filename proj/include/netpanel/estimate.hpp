#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace netpanel {

/// Result of an estimation run. Standard errors are the square roots of the
/// covariance diagonal; t-ratios are (simulated mean - observed) / simulated sd
/// evaluated at theta_hat.
struct ParameterEstimate {
    std::vector<std::string> labels;
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd standard_errors;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd convergence_tratios;
    int iterations = 0;
    bool converged = false;
    // Simulated statistics sat on the all-ties / no-ties boundary too often.
    bool degenerate = false;
    // Observed data perfectly predicted; the estimate diverges.
    bool separation = false;
    std::vector<std::string> diagnostics;

    double max_abs_tratio() const;
};

}  // namespace netpanel
