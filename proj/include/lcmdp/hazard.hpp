#pragma once

#include "lcmdp/matrix.hpp"

#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace lcmdp {

using Rng = std::mt19937_64;

/// Tabulated annual exceedance frequency lambda(im) for one site.
///
/// Interpolation between grid points is piecewise linear in (ln im, ln lambda).
class HazardCurve {
public:
    /// Throws ValidationError unless im is strictly increasing and positive,
    /// lambda is positive and non-increasing, and both have the same length >= 2.
    HazardCurve(std::vector<double> im_grid, std::vector<double> lambda_grid);

    /// Reads a two-column CSV `im,lambda` with a header row.
    static HazardCurve from_csv(const std::filesystem::path& path);

    const std::vector<double>& im_grid() const { return im_; }
    const std::vector<double>& lambda_grid() const { return lambda_; }
    double im_min() const { return im_.front(); }
    double im_max() const { return im_.back(); }

    /// Total event rate, i.e. lambda at the smallest tabulated intensity.
    double total_rate() const { return lambda_.front(); }

    /// lambda(im) for im inside the grid; std::out_of_range otherwise.
    double exceedance_rate(double im) const;

    /// Smallest im whose interpolated exceedance rate equals `rate`.
    /// Rates at or below lambda(im_max) map to im_max (lumped tail).
    double intensity_at_rate(double rate) const;

private:
    std::vector<double> im_;
    std::vector<double> lambda_;
};

/// Poisson occurrence: 1 - exp(-lambda_max).
double annual_event_probability(const HazardCurve& curve);

/// IM distribution conditional on an event: 1 - lambda(im) / lambda_max.
double conditional_im_cdf(const HazardCurve& curve, double im);

/// Inverse of conditional_im_cdf; u past the CDF value at im_max returns im_max.
double conditional_im_quantile(const HazardCurve& curve, double u);

/// Discrete stand-in for the conditional IM density.
struct ImPmf {
    std::vector<double> im_points;
    std::vector<double> masses;
};

/// Log-spaced bins over [im_min, im_max]; the residual tail mass beyond im_max
/// goes to the last bin and each bin is represented by its edges' geometric mean.
ImPmf discretize_annual_im(const HazardCurve& curve, std::size_t n_bins);

struct SitePosition {
    double x_km = 0.0;
    double y_km = 0.0;
};

struct SiteLayout {
    std::vector<SitePosition> sites;
    double correlation_range_km = 1.0;

    void validate() const;
};

/// rho_ij = exp(-3 d_ij / r).
Matrix build_correlation_matrix(const SiteLayout& layout);

/// Lower Cholesky factor of a symmetric matrix. Retries with diagonal jitter
/// 1e-12, 1e-11, ..., 1e-8 before throwing DecompositionError.
Matrix cholesky_with_jitter(const Matrix& r);

/// Gaussian-copula sampler for spatially correlated intensity fields.
class CorrelatedFieldSampler {
public:
    CorrelatedFieldSampler(const SiteLayout& layout, std::vector<HazardCurve> curves);

    std::size_t site_count() const { return curves_.size(); }
    const Matrix& cholesky_factor() const { return chol_; }

    /// Correlated standard normals y = L z.
    std::vector<double> sample_latent(Rng& rng) const;

    /// Intensities im_k = F_k^{-1}(Phi(y_k)).
    std::vector<double> sample(Rng& rng) const;

private:
    std::vector<HazardCurve> curves_;
    Matrix chol_;
};

std::vector<double> sample_correlated_field(const SiteLayout& layout,
                                            std::span<const HazardCurve> curves, Rng& rng);

} // namespace lcmdp
