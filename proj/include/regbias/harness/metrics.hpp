#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace regbias::harness {

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

/// Two-sided 95% region of the run-averaged NEES of a consistent estimator:
/// chi-square quantiles with dim * runs degrees of freedom, divided by runs.
Interval nees_two_sided_bounds(int dim, int runs, double confidence = 0.95);

/// Upper end of the one-sided region, chi2_{confidence}(dim * runs) / runs.
double nees_one_sided_upper(int dim, int runs, double confidence = 0.95);

/// 95% region of an RMSE over `runs` scalar errors drawn from N(0, sigma^2).
Interval rmse_region(double sigma, int runs, double confidence = 0.95);

/// Confidence interval for the true RMS given an observed RMSE over `runs` samples.
Interval rmse_confidence(double rmse, int runs, double confidence = 0.95);

struct NeesPoint {
    double value = 0.0;
    Interval two_sided;
    double one_sided_upper = 0.0;
};

/// Run-averaged e^T Sigma^-1 e for one frame. Throws NumericalError on a singular covariance.
NeesPoint nees_series(std::span<const Eigen::VectorXd> errors, std::span<const Eigen::MatrixXd> covariances);

double nees(const Eigen::VectorXd& e, const Eigen::MatrixXd& Sigma);

/// Mean and standard error of the mean.
struct SampleMean {
    double mean = 0.0;
    double std_error = 0.0;
};
SampleMean sample_mean(std::span<const double> xs);

} // namespace regbias::harness
