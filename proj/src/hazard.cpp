#include "lcmdp/hazard.hpp"

#include "lcmdp/errors.hpp"
#include "lcmdp/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace lcmdp {

HazardCurve::HazardCurve(std::vector<double> im_grid, std::vector<double> lambda_grid)
    : im_{std::move(im_grid)}, lambda_{std::move(lambda_grid)} {
    if (im_.size() != lambda_.size() || im_.size() < 2) {
        throw ValidationError("hazard curve needs equal-length grids with at least two points");
    }
    for (std::size_t i = 0; i < im_.size(); ++i) {
        if (!(im_[i] > 0.0) || !std::isfinite(im_[i])) {
            throw ValidationError("hazard curve intensities must be positive and finite");
        }
        if (!(lambda_[i] > 0.0) || !std::isfinite(lambda_[i])) {
            throw ValidationError("hazard curve exceedance rates must be positive and finite");
        }
        if (i > 0 && !(im_[i] > im_[i - 1])) {
            throw ValidationError("hazard curve intensities must be strictly increasing");
        }
        if (i > 0 && lambda_[i] > lambda_[i - 1]) {
            throw ValidationError("hazard curve exceedance rates must be non-increasing");
        }
    }
}

HazardCurve HazardCurve::from_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open hazard curve file " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("hazard curve file is empty: " + path.string());
    }
    std::vector<double> im;
    std::vector<double> lambda;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        double x = 0.0;
        double y = 0.0;
        if (!(fields >> x >> y)) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected two numeric columns (im, lambda)");
        }
        im.push_back(x);
        lambda.push_back(y);
    }
    return HazardCurve(std::move(im), std::move(lambda));
}

double HazardCurve::exceedance_rate(double im) const {
    if (!(im >= im_.front() && im <= im_.back())) {
        throw std::out_of_range("intensity outside the hazard curve grid");
    }
    auto upper = std::upper_bound(im_.begin(), im_.end(), im);
    if (upper == im_.end()) {
        return lambda_.back();
    }
    const std::size_t i = static_cast<std::size_t>(upper - im_.begin()) - 1;
    if (im == im_[i]) {
        return lambda_[i];
    }
    const double w = (std::log(im) - std::log(im_[i])) / (std::log(im_[i + 1]) - std::log(im_[i]));
    return std::exp(std::log(lambda_[i]) + w * (std::log(lambda_[i + 1]) - std::log(lambda_[i])));
}

double HazardCurve::intensity_at_rate(double rate) const {
    if (!(rate > 0.0)) {
        throw std::out_of_range("exceedance rate must be positive");
    }
    if (rate >= lambda_.front()) {
        return im_.front();
    }
    if (rate <= lambda_.back()) {
        return im_.back();
    }
    // first segment whose right end falls below the target
    std::size_t i = 0;
    while (lambda_[i + 1] >= rate) {
        ++i;
    }
    const double w = (std::log(rate) - std::log(lambda_[i])) /
                     (std::log(lambda_[i + 1]) - std::log(lambda_[i]));
    return std::exp(std::log(im_[i]) + w * (std::log(im_[i + 1]) - std::log(im_[i])));
}

double annual_event_probability(const HazardCurve& curve) {
    return -std::expm1(-curve.total_rate());
}

double conditional_im_cdf(const HazardCurve& curve, double im) {
    return 1.0 - curve.exceedance_rate(im) / curve.total_rate();
}

double conditional_im_quantile(const HazardCurve& curve, double u) {
    if (!(u >= 0.0 && u < 1.0)) {
        throw std::out_of_range("quantile level must lie in [0, 1)");
    }
    return curve.intensity_at_rate((1.0 - u) * curve.total_rate());
}

ImPmf discretize_annual_im(const HazardCurve& curve, std::size_t n_bins) {
    if (n_bins == 0) {
        throw ValidationError("discretize_annual_im: n_bins must be >= 1");
    }
    const double log_lo = std::log(curve.im_min());
    const double log_hi = std::log(curve.im_max());
    std::vector<double> edges(n_bins + 1);
    for (std::size_t k = 0; k <= n_bins; ++k) {
        edges[k] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) /
                                         static_cast<double>(n_bins));
    }
    edges.front() = curve.im_min();
    edges.back() = curve.im_max();

    // Masses are differences of the normalized exceedance ratio; the last bin
    // absorbs lambda(im_max)/lambda_max so the total telescopes to exactly one.
    ImPmf pmf;
    pmf.im_points.resize(n_bins);
    pmf.masses.resize(n_bins);
    const double total = curve.total_rate();
    double previous_ratio = 1.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
        const double ratio = k + 1 == n_bins ? 0.0 : curve.exceedance_rate(edges[k + 1]) / total;
        pmf.masses[k] = previous_ratio - ratio;
        pmf.im_points[k] = std::sqrt(edges[k] * edges[k + 1]);
        previous_ratio = ratio;
    }
    return pmf;
}

void SiteLayout::validate() const {
    if (sites.empty()) {
        throw ValidationError("site layout needs at least one site");
    }
    if (!(correlation_range_km > 0.0) || !std::isfinite(correlation_range_km)) {
        throw ValidationError("correlation range must be positive");
    }
    for (const auto& s : sites) {
        if (!std::isfinite(s.x_km) || !std::isfinite(s.y_km)) {
            throw ValidationError("site coordinates must be finite");
        }
    }
}

Matrix build_correlation_matrix(const SiteLayout& layout) {
    layout.validate();
    const std::size_t n = layout.sites.size();
    Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        r(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::hypot(layout.sites[i].x_km - layout.sites[j].x_km,
                                        layout.sites[i].y_km - layout.sites[j].y_km);
            const double rho = std::exp(-3.0 * d / layout.correlation_range_km);
            r(i, j) = rho;
            r(j, i) = rho;
        }
    }
    return r;
}

namespace {

bool try_cholesky(const Matrix& a, double jitter, Matrix& l) {
    const std::size_t n = a.rows();
    l = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j) + jitter;
        for (std::size_t k = 0; k < j; ++k) {
            diag -= l(j, k) * l(j, k);
        }
        if (!(diag > 0.0)) {
            return false;
        }
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= l(i, k) * l(j, k);
            }
            l(i, j) = s / l(j, j);
        }
    }
    return true;
}

} // namespace

Matrix cholesky_with_jitter(const Matrix& r) {
    if (r.rows() != r.cols() || r.rows() == 0) {
        throw DecompositionError("cholesky: matrix must be square and non-empty");
    }
    Matrix l;
    if (try_cholesky(r, 0.0, l)) {
        return l;
    }
    for (double jitter = 1e-12; jitter <= 1e-8 * 1.0000001; jitter *= 10.0) {
        if (try_cholesky(r, jitter, l)) {
            return l;
        }
    }
    throw DecompositionError("correlation matrix is not positive definite after jitter 1e-8");
}

CorrelatedFieldSampler::CorrelatedFieldSampler(const SiteLayout& layout,
                                               std::vector<HazardCurve> curves)
    : curves_{std::move(curves)}, chol_{cholesky_with_jitter(build_correlation_matrix(layout))} {
    if (curves_.size() != layout.sites.size()) {
        throw ValidationError("one hazard curve per site is required");
    }
}

std::vector<double> CorrelatedFieldSampler::sample_latent(Rng& rng) const {
    const std::size_t n = curves_.size();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(n);
    for (auto& v : z) {
        v = normal(rng);
    }
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k <= i; ++k) {
            y[i] += chol_(i, k) * z[k];
        }
    }
    return y;
}

std::vector<double> CorrelatedFieldSampler::sample(Rng& rng) const {
    auto y = sample_latent(rng);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double u = normal_cdf(y[i]);
        y[i] = curves_[i].intensity_at_rate((1.0 - u) * curves_[i].total_rate());
    }
    return y;
}

std::vector<double> sample_correlated_field(const SiteLayout& layout,
                                            std::span<const HazardCurve> curves, Rng& rng) {
    CorrelatedFieldSampler sampler(layout, std::vector<HazardCurve>(curves.begin(), curves.end()));
    return sampler.sample(rng);
}

} // namespace lcmdp
