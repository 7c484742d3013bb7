#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

// Finite-dimensional divergences and relative-error bounds for densities:
// Gaussian closed forms, gridded 1-D densities and the Pareto pair whose
// density ratio is unbounded.
namespace pathweight::measures {

// Multivariate normal N(mean, covariance). Construction validates symmetry
// (1e-12 componentwise) and positive definiteness (Cholesky).
class GaussianMeasure {
public:
    GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    static GaussianMeasure standard(int d);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::LLT<Eigen::MatrixXd>& cholesky() const { return llt_; }
    double log_det() const;

    // Marginal on the first j coordinates.
    GaussianMeasure leading_marginal(int j) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Throws InputError unless cov is symmetric and Cholesky-factorizable.
void require_spd(const Eigen::MatrixXd& cov, const char* what);

// KL(p | q) via the Gaussian closed form.
double gaussian_kl(const GaussianMeasure& p, const GaussianMeasure& q);

// chi^2(p | q) = E_q[(dp/dq)^2] - 1; +inf when 2 Sigma_p^-1 - Sigma_q^-1 is
// not positive definite.
double gaussian_chi2(const GaussianMeasure& p, const GaussianMeasure& q);

// sqrt(exp(eps . Sigma eps) - 1): relative error of the eps-shifted proposal.
double perturbed_gaussian_error(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& eps);

// Relative error of exp(gamma . Y + c), Y ~ N(mu, cov). Independent of mu, c.
double lognormal_error(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& cov);

// sqrt(exp(kl) - 1).
double kl_lower_bound(double kl);

struct RefinedBounds {
    double lower;
    double upper;  // +inf when M is infinite
};

// kl_forward = KL(proposal | optimal), kl_reverse = KL(optimal | proposal).
RefinedBounds refined_bounds(double m, double M, double kl_forward, double kl_reverse);

// 1-D density tabulated on a strictly increasing grid.
class GriddedDensity1D {
public:
    GriddedDensity1D(std::vector<double> nodes, std::vector<double> values);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& values() const { return values_; }
    double mass() const { return mass_; }
    bool is_normalized(double tol = 1e-10) const;
    GriddedDensity1D normalized() const;

private:
    std::vector<double> nodes_;
    std::vector<double> values_;
    double mass_;
};

struct RatioExtremes {
    double m_hat;
    double M_hat;
    bool diverging;
};

// min/max of p/q over the shared nodes. `diverging` is set when the maximum
// over the whole grid exceeds the maximum over the first tenth of the node
// extent by more than a factor 10.
RatioExtremes density_ratio_extremes(const GriddedDensity1D& p, const GriddedDensity1D& q);

// Normalized Jensen functional E[f(phi)] - f(E[phi]) by trapezoid quadrature.
double jensen_functional(const std::function<double(double)>& f, const GriddedDensity1D& density,
                         const std::function<double(double)>& phi);

// KL of the leading j-dimensional marginals, j = 1..d.
std::vector<double> kl_marginal_chain(const GaussianMeasure& p, const GaussianMeasure& q);

// sqrt(c^d - 1) for a product of d identical factors with second moment c.
double product_dimension_blowup(double c, int d);

// Pareto density alpha x^(-alpha-1) on [1, inf).
class ParetoDensity {
public:
    explicit ParetoDensity(double alpha);

    double alpha() const { return alpha_; }
    double pdf(double x) const;
    // Tabulated on n geometrically spaced nodes over [1, upper]; not normalized.
    GriddedDensity1D tabulate(double upper, int n) const;

private:
    double alpha_;
};

// Geometric grid on [lo, hi] with n nodes; lo > 0.
std::vector<double> geometric_grid(double lo, double hi, int n);

}  // namespace pathweight::measures
