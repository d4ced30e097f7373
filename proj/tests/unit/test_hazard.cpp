#include "doctest.h"

#include "lcmdp/errors.hpp"
#include "lcmdp/hazard.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace lcmdp;

namespace {

HazardCurve two_point() { return HazardCurve({0.1, 1.0}, {0.2, 0.002}); }

HazardCurve flat_rate(double rate) { return HazardCurve({0.05, 2.0}, {rate, rate * 1e-3}); }

// Log-log interpolation written out independently of the library.
double loglog(double x0, double y0, double x1, double y1, double x) {
    const double t = (std::log(x) - std::log(x0)) / (std::log(x1) - std::log(x0));
    return std::exp(std::log(y0) + t * (std::log(y1) - std::log(y0)));
}

} // namespace

TEST_SUITE("hazard") {

TEST_CASE("curve validation") {
    CHECK_THROWS_AS(HazardCurve({0.1}, {0.1}), ValidationError);
    CHECK_THROWS_AS(HazardCurve({0.1, 0.1}, {0.1, 0.01}), ValidationError);
    CHECK_THROWS_AS(HazardCurve({0.1, 0.2}, {0.01, 0.1}), ValidationError);
    CHECK_THROWS_AS(HazardCurve({0.1, 0.2}, {0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(HazardCurve({-0.1, 0.2}, {0.1, 0.01}), ValidationError);
    CHECK_THROWS_AS(two_point().exceedance_rate(2.0), std::out_of_range);
}

TEST_CASE("csv reader") {
    const auto path = std::filesystem::temp_directory_path() / "lcmdp_hazard_test.csv";
    {
        std::ofstream out(path);
        out << "im,lambda\n0.1,0.2\n0.5,0.01\n1.0,0.002\n";
    }
    const auto c = HazardCurve::from_csv(path);
    CHECK(c.im_grid().size() == 3);
    CHECK(c.exceedance_rate(0.5) == doctest::Approx(0.01));
    {
        std::ofstream out(path);
        out << "im,lambda\n0.1,0.2\n0.05,0.01\n";
    }
    CHECK_THROWS_AS(HazardCurve::from_csv(path), ValidationError);
    std::filesystem::remove(path);
}

TEST_CASE("annual event probability") {
    CHECK(annual_event_probability(flat_rate(std::log(2.0))) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(annual_event_probability(flat_rate(0.2)) == doctest::Approx(0.18127).epsilon(1e-5));
    CHECK(annual_event_probability(flat_rate(1e-12)) == doctest::Approx(1e-12).epsilon(1e-6));
}

TEST_CASE("conditional im cdf") {
    const auto c = two_point();
    CHECK(conditional_im_cdf(c, 0.1) == 0.0);
    CHECK(conditional_im_cdf(c, 1.0) == doctest::Approx(1.0 - 0.002 / 0.2).epsilon(1e-14));
    const double mid = std::sqrt(0.1 * 1.0);
    const double expected = 1.0 - loglog(0.1, 0.2, 1.0, 0.002, mid) / 0.2;
    CHECK(conditional_im_cdf(c, mid) == doctest::Approx(expected).epsilon(1e-13));
    CHECK(conditional_im_cdf(c, 0.37) == doctest::Approx(1.0 - loglog(0.1, 0.2, 1.0, 0.002, 0.37) / 0.2));
}

TEST_CASE("conditional quantile inverts the cdf") {
    const HazardCurve c({0.05, 0.1, 0.4, 1.0, 2.0}, {0.15, 0.05, 0.006, 5e-4, 3e-5});
    for (double u : {0.0, 0.1, 0.5, 0.9, 0.99}) {
        const double im = conditional_im_quantile(c, u);
        CHECK(conditional_im_cdf(c, im) == doctest::Approx(u).epsilon(1e-10));
    }
    CHECK(conditional_im_quantile(c, 0.99999999) == doctest::Approx(2.0));
}

TEST_CASE("discretization") {
    const auto c = two_point();
    const auto one = discretize_annual_im(c, 1);
    REQUIRE(one.masses.size() == 1);
    CHECK(one.masses[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(one.im_points[0] == doctest::Approx(std::sqrt(0.1 * 1.0)));

    const auto four = discretize_annual_im(c, 4);
    std::vector<double> edges(5);
    for (int k = 0; k <= 4; ++k) {
        edges[static_cast<std::size_t>(k)] = 0.1 * std::pow(10.0, k / 4.0);
    }
    auto cdf = [](double x) { return 1.0 - loglog(0.1, 0.2, 1.0, 0.002, x) / 0.2; };
    for (std::size_t k = 0; k < 4; ++k) {
        const double upper = k == 3 ? 1.0 : cdf(edges[k + 1]);
        CHECK(four.masses[k] == doctest::Approx(upper - cdf(edges[k])).epsilon(1e-12));
        CHECK(four.im_points[k] == doctest::Approx(std::sqrt(edges[k] * edges[k + 1])));
    }

    const HazardCurve sf({0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0},
                         {0.15, 0.05, 0.02, 0.006, 0.0025, 0.001, 5e-4, 1e-4, 3e-5});
    for (std::size_t bins : {1u, 7u, 100u, 1000u}) {
        const auto pmf = discretize_annual_im(sf, bins);
        double sum = 0.0;
        for (double m : pmf.masses) {
            CHECK(m >= 0.0);
            sum += m;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(discretize_annual_im(sf, 0), ValidationError);
}

TEST_CASE("correlation matrix") {
    SiteLayout one{{{0.0, 0.0}, {0.0, 0.0}}, 10.0};
    CHECK(build_correlation_matrix(one)(0, 1) == doctest::Approx(1.0));
    SiteLayout at_r{{{0.0, 0.0}, {3.0, 4.0}}, 5.0};
    CHECK(build_correlation_matrix(at_r)(0, 1) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
    CHECK(build_correlation_matrix(at_r)(0, 1) == doctest::Approx(0.049787).epsilon(1e-5));

    SiteLayout line{{{0.0, 0.0}, {10.0, 0.0}, {20.0, 0.0}}, 40.0};
    const auto r = build_correlation_matrix(line);
    const double e1 = std::exp(-0.75), e2 = std::exp(-1.5);
    const double hand[3][3] = {{1.0, e1, e2}, {e1, 1.0, e1}, {e2, e1, 1.0}};
    Eigen::Matrix3d m;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(r(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) == doctest::Approx(hand[i][j]).epsilon(1e-14));
            m(i, j) = r(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    CHECK_THROWS_AS(build_correlation_matrix(SiteLayout{{{0.0, 0.0}}, 0.0}), ValidationError);
}

TEST_CASE("cholesky jitter handles coincident sites") {
    SiteLayout same{{{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}}, 20.0};
    const auto l = cholesky_with_jitter(build_correlation_matrix(same));
    CHECK(l(0, 0) == doctest::Approx(1.0));
    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(cholesky_with_jitter(bad), DecompositionError);
}

TEST_CASE("latent field correlation matches R") {
    SiteLayout layout{{{0.0, 0.0}, {1.2, 0.8}, {2.0, -0.5}, {15.0, 0.0}}, 20.0};
    const HazardCurve c({0.05, 2.0}, {0.15, 3e-5});
    CorrelatedFieldSampler sampler(layout, std::vector<HazardCurve>(4, c));
    const auto r = build_correlation_matrix(layout);
    Rng rng(42);
    const int n = 100000;
    std::vector<std::vector<double>> z(4, std::vector<double>(n));
    for (int i = 0; i < n; ++i) {
        const auto y = sampler.sample_latent(rng);
        for (std::size_t k = 0; k < 4; ++k) {
            z[k][static_cast<std::size_t>(i)] = y[k];
        }
    }
    auto pearson = [&](std::size_t a, std::size_t b) {
        double ma = 0, mb = 0;
        for (int i = 0; i < n; ++i) {
            ma += z[a][static_cast<std::size_t>(i)];
            mb += z[b][static_cast<std::size_t>(i)];
        }
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (int i = 0; i < n; ++i) {
            const double da = z[a][static_cast<std::size_t>(i)] - ma, db = z[b][static_cast<std::size_t>(i)] - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        return sab / std::sqrt(saa * sbb);
    };
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = a + 1; b < 4; ++b) {
            CHECK(std::abs(pearson(a, b) - r(a, b)) <= 0.02);
        }
    }

    SiteLayout far{{{0.0, 0.0}, {1000.0, 0.0}}, 1.0};
    CorrelatedFieldSampler indep(far, std::vector<HazardCurve>(2, c));
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto y = indep.sample_latent(rng);
        s += y[0] * y[1];
    }
    CHECK(std::abs(s / n) <= 0.02);
}

TEST_CASE("single-site marginal passes a KS check") {
    const HazardCurve c({0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0},
                        {0.15, 0.05, 0.02, 0.006, 0.0025, 0.001, 5e-4, 1e-4, 3e-5});
    SiteLayout layout{{{0.0, 0.0}}, 20.0};
    Rng rng(7);
    const int n = 100000;
    std::vector<double> ims(n);
    for (auto& im : ims) {
        im = sample_correlated_field(layout, std::span<const HazardCurve>(&c, 1), rng)[0];
    }
    std::sort(ims.begin(), ims.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = conditional_im_cdf(c, ims[static_cast<std::size_t>(i)]);
        if (ims[static_cast<std::size_t>(i)] >= 2.0) {
            // Tail lumped at im_max: the empirical CDF jumps to 1 there.
            ks = std::max(ks, std::abs(static_cast<double>(i) / n - f));
            break;
        }
        ks = std::max(ks, std::max(std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)));
    }
    CHECK(ks <= 0.01);
}

}
