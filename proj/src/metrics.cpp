#include "regbias/harness/metrics.hpp"

#include "regbias/types.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>

namespace regbias::harness {

namespace {
double chi2_quantile(double dof, double p)
{
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}
} // namespace

Interval nees_two_sided_bounds(int dim, int runs, double confidence)
{
    if (dim < 1 || runs < 1) throw InvalidInput("NEES bounds need positive dimension and run count");
    const double alpha = 1.0 - confidence;
    const double dof = static_cast<double>(dim) * runs;
    return {chi2_quantile(dof, alpha / 2) / runs, chi2_quantile(dof, 1.0 - alpha / 2) / runs};
}

double nees_one_sided_upper(int dim, int runs, double confidence)
{
    if (dim < 1 || runs < 1) throw InvalidInput("NEES bounds need positive dimension and run count");
    return chi2_quantile(static_cast<double>(dim) * runs, confidence) / runs;
}

Interval rmse_region(double sigma, int runs, double confidence)
{
    const Interval n = nees_two_sided_bounds(1, runs, confidence);
    return {sigma * std::sqrt(n.low), sigma * std::sqrt(n.high)};
}

Interval rmse_confidence(double rmse, int runs, double confidence)
{
    const Interval n = nees_two_sided_bounds(1, runs, confidence);
    return {rmse / std::sqrt(n.high), rmse / std::sqrt(n.low)};
}

double nees(const Eigen::VectorXd& e, const Eigen::MatrixXd& Sigma)
{
    if (Sigma.rows() != e.size() || Sigma.cols() != e.size()) throw InvalidInput("NEES dimensions disagree");
    Eigen::LLT<Eigen::MatrixXd> llt(symmetrized(Sigma));
    if (llt.info() != Eigen::Success) throw NumericalError("NEES covariance is not positive definite");
    return e.dot(llt.solve(e));
}

NeesPoint nees_series(std::span<const Eigen::VectorXd> errors, std::span<const Eigen::MatrixXd> covariances)
{
    if (errors.empty() || errors.size() != covariances.size())
        throw InvalidInput("NEES needs matching, non-empty error and covariance lists");
    const int runs = static_cast<int>(errors.size());
    const int dim = static_cast<int>(errors.front().size());
    double sum = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) sum += nees(errors[i], covariances[i]);
    NeesPoint p;
    p.value = sum / runs;
    p.two_sided = nees_two_sided_bounds(dim, runs);
    p.one_sided_upper = nees_one_sided_upper(dim, runs);
    return p;
}

SampleMean sample_mean(std::span<const double> xs)
{
    SampleMean m;
    if (xs.empty()) return m;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) m.mean += x;
    m.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.std_error = std::sqrt(ss / (n - 1) / n);
    }
    return m;
}

} // namespace regbias::harness
