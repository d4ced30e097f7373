#include "doctest.h"

#include "lcmdp/errors.hpp"
#include "lcmdp/fragility.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

using namespace lcmdp;

namespace {

FragilityModel known_model() {
    FragilityModel m(3, 3);
    for (int l = 1; l <= 3; ++l) {
        m.coefficients(1, l, 2) = {-1.0 + 0.3 * l, 1.2};
        m.coefficients(1, l, 3) = {-2.5 + 0.4 * l, 1.8};
        m.coefficients(2, l, 3) = {-1.2 + 0.3 * l, 1.5};
    }
    return m;
}

std::vector<TransitionRecord> sample_records(const FragilityModel& m, int per_context, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<TransitionRecord> out;
    int traj = 0;
    for (int i = 1; i <= 2; ++i) {
        for (int l = 1; l <= 3; ++l) {
            for (int k = 0; k < per_context; ++k) {
                const double im = std::exp(std::log(0.05) + unif(rng) * (std::log(2.0) - std::log(0.05)));
                const auto p = transition_prob(m, i, l, im);
                double u = unif(rng), cum = 0.0;
                int j = i;
                for (int c = i; c <= 3; ++c) {
                    cum += p[static_cast<std::size_t>(c - 1)];
                    if (u < cum) {
                        j = c;
                        break;
                    }
                }
                out.push_back({traj++ % 97, k, i, j, l, im});
            }
        }
    }
    return out;
}

// Softmax from the coefficients, written independently of the library.
double hand_prob(const FragilityModel& m, const TransitionRecord& r) {
    if (r.prior_sds == 3) {
        return r.posterior_sds == 3 ? 1.0 : 0.0;
    }
    double denom = 1.0, num = r.posterior_sds == r.prior_sds ? 1.0 : 0.0;
    for (int j = r.prior_sds + 1; j <= 3; ++j) {
        const auto& c = m.coefficients(r.prior_sds, r.cds, j);
        const double e = std::exp(c.intercept + c.slope * std::log(r.im));
        denom += e;
        if (j == r.posterior_sds) {
            num = e;
        }
    }
    return num / denom;
}

} // namespace

TEST_SUITE("fragility") {

TEST_CASE("softmax basics") {
    const FragilityModel zero(3, 3);
    const auto p = transition_prob(zero, 1, 2, 0.4);
    for (double v : p) {
        CHECK(v == doctest::Approx(1.0 / 3.0));
    }
    CHECK(transition_prob(zero, 3, 1, 0.4) == std::vector<double>{0.0, 0.0, 1.0});
    FragilityModel steep(3, 3);
    steep.coefficients(1, 1, 2) = {0.0, 1.0};
    steep.coefficients(1, 1, 3) = {0.0, 3.0};
    CHECK(transition_prob(steep, 1, 1, 1e6)[2] > 0.999999);
    FragilityModel none(3, 3);
    none.set_status(2, 1, ContextStatus::NoData);
    CHECK(transition_prob(none, 2, 1, 1.0) == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("log likelihood") {
    const FragilityModel zero(3, 3);
    CHECK(log_likelihood(zero, {}) == 0.0);
    const std::vector<TransitionRecord> one{{0, 0, 1, 2, 1, 0.3}};
    CHECK(log_likelihood(zero, one) == doctest::Approx(std::log(1.0 / 3.0)));

    const auto model = known_model();
    const auto records = sample_records(model, 200, 3);
    // Per-trajectory products, then logs summed.
    std::map<int, double> product;
    for (const auto& r : records) {
        auto [it, fresh] = product.emplace(r.trajectory, 1.0);
        it->second *= hand_prob(model, r);
    }
    double expected = 0.0;
    for (const auto& [t, p] : product) {
        expected += std::log(p);
    }
    CHECK(log_likelihood(model, records) == doctest::Approx(expected).epsilon(1e-10));

    std::string diag;
    const std::vector<TransitionRecord> impossible{{5, 2, 2, 3, 1, 0.3}};
    FragilityModel none(3, 3);
    none.set_status(2, 1, ContextStatus::NoData);
    CHECK(std::isinf(log_likelihood(none, impossible, &diag)));
    CHECK(diag.find("trajectory 5") != std::string::npos);
    CHECK_THROWS_AS(log_likelihood(zero, std::vector<TransitionRecord>{{0, 0, 2, 1, 1, 0.3}}), ValidationError);
}

TEST_CASE("gradient matches finite differences") {
    const auto model = known_model();
    const auto records = sample_records(model, 100, 4);
    CHECK(log_likelihood_gradient(model, {}) == std::vector<double>(model.parameter_count(), 0.0));
    FragilityModel probe = model;
    auto theta = model.flat_parameters();
    for (double& t : theta) {
        t += 0.1;
    }
    probe.set_flat_parameters(theta);
    const auto g = log_likelihood_gradient(probe, records);
    const double h = 1e-5;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        auto up = theta, down = theta;
        up[k] += h;
        down[k] -= h;
        FragilityModel mu = probe, md = probe;
        mu.set_flat_parameters(up);
        md.set_flat_parameters(down);
        const double fd = (log_likelihood(mu, records) - log_likelihood(md, records)) / (2.0 * h);
        CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
    }
}

TEST_CASE("maximum likelihood recovery") {
    const auto truth = known_model();
    const auto records = sample_records(truth, 30000, 8);
    const auto fit = fit_mle(records, 3, 3);
    CHECK(fit.all_converged());
    for (const auto& c : fit.contexts) {
        CHECK(c.gradient_norm <= 1e-8);
    }
    for (int i = 1; i <= 2; ++i) {
        for (int l = 1; l <= 3; ++l) {
            for (int k = 0; k < 20; ++k) {
                const double im = std::exp(std::log(0.05) + k * (std::log(2.0) - std::log(0.05)) / 19.0);
                const auto a = transition_prob(truth, i, l, im);
                const auto b = transition_prob(fit.model, i, l, im);
                for (std::size_t j = 0; j < 3; ++j) {
                    CHECK(std::abs(a[j] - b[j]) <= 0.02);
                }
            }
        }
    }
}

TEST_CASE("degenerate and duplicated data") {
    std::vector<TransitionRecord> stay;
    for (int k = 0; k < 200; ++k) {
        stay.push_back({k, 0, 1, 1, 1, 0.05 + 0.01 * k});
    }
    const auto fit = fit_mle(stay, 3, 3);
    for (int k = 0; k < 200; ++k) {
        CHECK(transition_prob(fit.model, 1, 1, 0.05 + 0.01 * k)[0] >= 0.99);
    }
    CHECK(fit.model.status(2, 2) == ContextStatus::NoData);

    const auto records = sample_records(known_model(), 300, 12);
    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    const auto a = fit_mle(records, 3, 3).model.flat_parameters();
    const auto b = fit_mle(doubled, 3, 3).model.flat_parameters();
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-6));
    }
}

TEST_CASE("json round trip") {
    auto m = known_model();
    m.set_status(2, 3, ContextStatus::NotConverged);
    const auto back = FragilityModel::from_json(m.to_json());
    CHECK(back == m);
    const auto path = std::filesystem::temp_directory_path() / "lcmdp_fragility_test.json";
    m.save(path, R"({"note": 1})");
    CHECK(FragilityModel::load(path) == m);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(FragilityModel::from_json("{\"format\": \"other\"}"), ValidationError);
}

TEST_CASE("hazard marginalization") {
    const auto m = known_model();
    ImPmf single{{0.4}, {1.0}};
    const auto none = marginalize_over_hazard(m, single, 0.0);
    for (const auto& k : none.by_cds) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(k(i, j) == (i == j ? 1.0 : 0.0));
            }
        }
    }
    const double p = 0.13;
    const auto one = marginalize_over_hazard(m, single, p);
    for (int l = 1; l <= 3; ++l) {
        for (int i = 1; i <= 3; ++i) {
            const auto tp = transition_prob(m, i, l, 0.4);
            for (int j = 1; j <= 3; ++j) {
                const double expected = (i == j ? 1.0 - p : 0.0) + p * tp[static_cast<std::size_t>(j - 1)];
                CHECK(one.for_cds(l)(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) ==
                      doctest::Approx(expected).epsilon(1e-14));
            }
        }
    }
    const HazardCurve c({0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0},
                        {0.15, 0.05, 0.02, 0.006, 0.0025, 0.001, 5e-4, 1e-4, 3e-5});
    const auto coarse = marginalize_over_hazard(m, discretize_annual_im(c, 10), 0.14);
    const auto fine = marginalize_over_hazard(m, discretize_annual_im(c, 1000), 0.14);
    for (int l = 1; l <= 3; ++l) {
        CHECK(is_row_stochastic(coarse.for_cds(l), 1e-12));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(std::abs(coarse.for_cds(l)(i, j) - fine.for_cds(l)(i, j)) <= 1e-3);
            }
        }
    }
}

}
