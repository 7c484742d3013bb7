#include "pathweight/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pathweight/errors.hpp"
#include "pathweight/numerics.hpp"

namespace pathweight::measures {

void require_spd(const Eigen::MatrixXd& cov, const char* what) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) {
        throw InputError(std::string(what) + ": covariance must be square and non-empty");
    }
    if (!cov.allFinite()) throw InputError(std::string(what) + ": covariance has non-finite entries");
    if (((cov - cov.transpose()).array().abs() > 1e-12).any()) {
        throw InputError(std::string(what) + ": covariance is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any()) {
        throw InputError(std::string(what) + ": covariance is not positive definite");
    }
}

GaussianMeasure::GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    require_spd(cov_, "GaussianMeasure");
    if (mean_.size() != cov_.rows()) throw InputError("GaussianMeasure: mean/covariance dimension mismatch");
    if (!mean_.allFinite()) throw InputError("GaussianMeasure: mean has non-finite entries");
    llt_.compute(cov_);
}

GaussianMeasure GaussianMeasure::standard(int d) {
    return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
}

double GaussianMeasure::log_det() const {
    return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

GaussianMeasure GaussianMeasure::leading_marginal(int j) const {
    if (j < 1 || j > dim()) throw InputError("leading_marginal: index out of range");
    return {mean_.head(j), cov_.topLeftCorner(j, j)};
}

namespace {

void require_same_dim(const GaussianMeasure& p, const GaussianMeasure& q) {
    if (p.dim() != q.dim()) throw InputError("Gaussian measures have different dimensions");
}

}  // namespace

double gaussian_kl(const GaussianMeasure& p, const GaussianMeasure& q) {
    require_same_dim(p, q);
    const Eigen::MatrixXd qinv_p = q.cholesky().solve(p.covariance());
    const Eigen::VectorXd diff = q.mean() - p.mean();
    const double maha = diff.dot(q.cholesky().solve(diff));
    const double kl = 0.5 * (qinv_p.trace() + maha - p.dim() + q.log_det() - p.log_det());
    return std::max(kl, 0.0);
}

double gaussian_chi2(const GaussianMeasure& p, const GaussianMeasure& q) {
    require_same_dim(p, q);
    const int d = p.dim();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd p_prec = p.cholesky().solve(I);
    const Eigen::MatrixXd q_prec = q.cholesky().solve(I);
    Eigen::MatrixXd lambda = 2.0 * p_prec - q_prec;
    lambda = 0.5 * (lambda + lambda.transpose());
    Eigen::LLT<Eigen::MatrixXd> lambda_llt(lambda);
    if (lambda_llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const double lambda_logdet = 2.0 * lambda_llt.matrixLLT().diagonal().array().log().sum();
    // int p^2/q = |Sq|^(1/2) |Sp|^-1 |Lambda|^(-1/2)
    //             * exp(h' Lambda^-1 h / 2 - mp' Pp mp + mq' Pq mq / 2)
    const Eigen::VectorXd h = 2.0 * p_prec * p.mean() - q_prec * q.mean();
    const double expo = 0.5 * h.dot(lambda_llt.solve(h)) - p.mean().dot(p_prec * p.mean()) +
                        0.5 * q.mean().dot(q_prec * q.mean());
    const double log_second = 0.5 * q.log_det() - p.log_det() - 0.5 * lambda_logdet + expo;
    return std::max(std::expm1(log_second), 0.0);
}

double perturbed_gaussian_error(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& eps) {
    require_spd(sigma, "perturbed_gaussian_error");
    if (eps.size() != sigma.rows()) throw InputError("perturbed_gaussian_error: dimension mismatch");
    return std::sqrt(std::expm1(eps.dot(sigma * eps)));
}

double lognormal_error(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& cov) {
    require_spd(cov, "lognormal_error");
    if (gamma.size() != cov.rows()) throw InputError("lognormal_error: dimension mismatch");
    return std::sqrt(std::expm1(gamma.dot(cov * gamma)));
}

double kl_lower_bound(double kl) {
    if (!(kl >= 0.0) || !std::isfinite(kl)) throw InputError("kl_lower_bound: divergence must be finite and >= 0");
    return std::sqrt(std::expm1(kl));
}

RefinedBounds refined_bounds(double m, double M, double kl_forward, double kl_reverse) {
    if (!(m >= 0.0 && m <= 1.0)) throw InputError("refined_bounds: m must lie in [0, 1]");
    if (!(M >= 1.0)) throw InputError("refined_bounds: M must lie in [1, inf]");
    if (m > M) throw InputError("refined_bounds: m > M");
    if (!(kl_forward >= 0.0) || !(kl_reverse >= 0.0)) throw InputError("refined_bounds: negative divergence");
    RefinedBounds out{};
    out.lower = std::sqrt(std::expm1(m * kl_forward + kl_reverse));
    out.upper = std::isinf(M) ? std::numeric_limits<double>::infinity()
                              : std::sqrt(std::expm1(M * kl_forward + kl_reverse));
    return out;
}

GriddedDensity1D::GriddedDensity1D(std::vector<double> nodes, std::vector<double> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
    if (nodes_.size() != values_.size() || nodes_.size() < 2) {
        throw InputError("GriddedDensity1D: need at least two nodes and matching values");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i] > nodes_[i - 1])) throw InputError("GriddedDensity1D: nodes must be strictly increasing");
    }
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("GriddedDensity1D: values must be finite and >= 0");
    }
    mass_ = trapezoid(nodes_, values_);
    if (!(mass_ > 0.0)) throw InputError("GriddedDensity1D: zero mass");
}

bool GriddedDensity1D::is_normalized(double tol) const { return std::abs(mass_ - 1.0) <= tol; }

GriddedDensity1D GriddedDensity1D::normalized() const {
    std::vector<double> v(values_);
    for (double& x : v) x /= mass_;
    return {nodes_, std::move(v)};
}

RatioExtremes density_ratio_extremes(const GriddedDensity1D& p, const GriddedDensity1D& q) {
    if (p.nodes() != q.nodes()) throw InputError("density_ratio_extremes: node vectors differ");
    const auto& x = p.nodes();
    const double tail_start = x.front() + 0.1 * (x.back() - x.front());
    RatioExtremes out{std::numeric_limits<double>::infinity(), 0.0, false};
    double head_max = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double qi = q.values()[i];
        if (!(qi > 0.0)) throw InputError("density_ratio_extremes: q vanishes at a node");
        const double r = p.values()[i] / qi;
        out.m_hat = std::min(out.m_hat, r);
        out.M_hat = std::max(out.M_hat, r);
        if (x[i] <= tail_start) head_max = std::max(head_max, r);
    }
    out.diverging = head_max > 0.0 ? out.M_hat > 10.0 * head_max : out.M_hat > 0.0;
    return out;
}

double jensen_functional(const std::function<double(double)>& f, const GriddedDensity1D& density,
                         const std::function<double(double)>& phi) {
    if (!density.is_normalized()) throw InputError("jensen_functional: density is not normalized");
    const auto& x = density.nodes();
    const auto& w = density.values();
    std::vector<double> f_phi(x.size()), phi_w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = phi(x[i]);
        f_phi[i] = f(v) * w[i];
        phi_w[i] = v * w[i];
    }
    return trapezoid(x, f_phi) - f(trapezoid(x, phi_w));
}

std::vector<double> kl_marginal_chain(const GaussianMeasure& p, const GaussianMeasure& q) {
    require_same_dim(p, q);
    std::vector<double> chain;
    chain.reserve(p.dim());
    for (int j = 1; j <= p.dim(); ++j) {
        chain.push_back(gaussian_kl(p.leading_marginal(j), q.leading_marginal(j)));
    }
    return chain;
}

double product_dimension_blowup(double c, int d) {
    if (d < 1) throw InputError("product_dimension_blowup: d must be >= 1");
    if (!(c > 1.0)) {
        throw InputError("product_dimension_blowup: c must exceed 1 (c = 1 only for the optimal factor)");
    }
    return std::sqrt(std::expm1(d * std::log(c)));
}

ParetoDensity::ParetoDensity(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InputError("ParetoDensity: alpha must be > 0");
}

double ParetoDensity::pdf(double x) const {
    return x < 1.0 ? 0.0 : alpha_ * std::pow(x, -alpha_ - 1.0);
}

GriddedDensity1D ParetoDensity::tabulate(double upper, int n) const {
    std::vector<double> nodes = geometric_grid(1.0, upper, n);
    std::vector<double> values(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) values[i] = pdf(nodes[i]);
    return {std::move(nodes), std::move(values)};
}

std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InputError("geometric_grid: need 0 < lo < hi and n >= 2");
    std::vector<double> x(n);
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i) x[i] = lo * std::exp(step * i);
    x.back() = hi;
    return x;
}

}  // namespace pathweight::measures
