#include "lcmdp/fragility.hpp"

#include "lcmdp/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace lcmdp {

using json = nlohmann::ordered_json;

std::string to_string(ContextStatus s) {
    switch (s) {
    case ContextStatus::Fitted:
        return "fitted";
    case ContextStatus::NoData:
        return "no_data";
    case ContextStatus::NotConverged:
        return "not_converged";
    }
    return "unknown";
}

namespace {

ContextStatus status_from_string(const std::string& s) {
    if (s == "fitted") {
        return ContextStatus::Fitted;
    }
    if (s == "no_data") {
        return ContextStatus::NoData;
    }
    if (s == "not_converged") {
        return ContextStatus::NotConverged;
    }
    throw ValidationError("unknown fragility context status '" + s + "'");
}

} // namespace

FragilityModel::FragilityModel(int n_sds, int n_cds) : n_sds_{n_sds}, n_cds_{n_cds} {
    if (n_sds < 2 || n_cds < 1) {
        throw ValidationError("fragility model needs n_sds >= 2 and n_cds >= 1");
    }
    for (int i = 1; i < n_sds; ++i) {
        for (int l = 1; l <= n_cds; ++l) {
            context_start_.push_back(coefficients_.size());
            coefficients_.resize(coefficients_.size() + static_cast<std::size_t>(n_sds - i));
            status_.push_back(ContextStatus::Fitted);
        }
    }
    context_start_.push_back(coefficients_.size());
}

std::size_t FragilityModel::context_index(int prior, int cds) const {
    if (prior < 1 || prior >= n_sds_ || cds < 1 || cds > n_cds_) {
        throw std::out_of_range("fragility context (prior SDS, CDS) out of range");
    }
    return static_cast<std::size_t>((prior - 1) * n_cds_ + (cds - 1));
}

std::size_t FragilityModel::coefficient_index(int prior, int cds, int to) const {
    if (to <= prior || to > n_sds_) {
        throw std::out_of_range("fragility candidate state must exceed the prior state");
    }
    return context_start_[context_index(prior, cds)] + static_cast<std::size_t>(to - prior - 1);
}

LogitCoefficients& FragilityModel::coefficients(int prior, int cds, int to) {
    return coefficients_[coefficient_index(prior, cds, to)];
}

const LogitCoefficients& FragilityModel::coefficients(int prior, int cds, int to) const {
    return coefficients_[coefficient_index(prior, cds, to)];
}

ContextStatus FragilityModel::status(int prior, int cds) const {
    return status_[context_index(prior, cds)];
}

void FragilityModel::set_status(int prior, int cds, ContextStatus s) {
    status_[context_index(prior, cds)] = s;
}

std::size_t FragilityModel::context_offset(int prior, int cds) const {
    return 2 * context_start_[context_index(prior, cds)];
}

std::vector<double> FragilityModel::flat_parameters() const {
    std::vector<double> theta;
    theta.reserve(parameter_count());
    for (const auto& c : coefficients_) {
        theta.push_back(c.intercept);
        theta.push_back(c.slope);
    }
    return theta;
}

void FragilityModel::set_flat_parameters(std::span<const double> theta) {
    if (theta.size() != parameter_count()) {
        throw ValidationError("fragility parameter vector has the wrong length");
    }
    for (std::size_t k = 0; k < coefficients_.size(); ++k) {
        coefficients_[k] = {theta[2 * k], theta[2 * k + 1]};
    }
}

bool operator==(const FragilityModel& a, const FragilityModel& b) {
    if (a.n_sds_ != b.n_sds_ || a.n_cds_ != b.n_cds_ || a.status_ != b.status_ ||
        a.coefficients_.size() != b.coefficients_.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.coefficients_.size(); ++k) {
        if (a.coefficients_[k].intercept != b.coefficients_[k].intercept ||
            a.coefficients_[k].slope != b.coefficients_[k].slope) {
            return false;
        }
    }
    return true;
}

std::string FragilityModel::to_json() const {
    json doc;
    doc["format"] = "lcmdp-fragility-v1";
    doc["n_sds"] = n_sds_;
    doc["n_cds"] = n_cds_;
    doc["features"] = "logit_j = intercept + slope * ln(im); reference j = prior_sds";
    json contexts = json::array();
    for (int i = 1; i < n_sds_; ++i) {
        for (int l = 1; l <= n_cds_; ++l) {
            json ctx;
            ctx["prior_sds"] = i;
            ctx["cds"] = l;
            ctx["status"] = to_string(status(i, l));
            json coefs = json::array();
            for (int j = i + 1; j <= n_sds_; ++j) {
                const auto& c = coefficients(i, l, j);
                coefs.push_back({{"to_sds", j}, {"intercept", c.intercept}, {"slope", c.slope}});
            }
            ctx["coefficients"] = std::move(coefs);
            contexts.push_back(std::move(ctx));
        }
    }
    doc["contexts"] = std::move(contexts);
    return doc.dump(2);
}

FragilityModel FragilityModel::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("fragility model: ") + e.what());
    }
    try {
        FragilityModel model(doc.at("n_sds").get<int>(), doc.at("n_cds").get<int>());
        std::vector<bool> seen(model.status_.size(), false);
        for (const auto& ctx : doc.at("contexts")) {
            const int i = ctx.at("prior_sds").get<int>();
            const int l = ctx.at("cds").get<int>();
            model.set_status(i, l, status_from_string(ctx.at("status").get<std::string>()));
            seen[model.context_index(i, l)] = true;
            for (const auto& c : ctx.at("coefficients")) {
                auto& target = model.coefficients(i, l, c.at("to_sds").get<int>());
                target.intercept = c.at("intercept").get<double>();
                target.slope = c.at("slope").get<double>();
            }
        }
        if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
            throw ValidationError("fragility model file is missing contexts");
        }
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("fragility model: ") + e.what());
    } catch (const std::out_of_range& e) {
        throw ValidationError(std::string("fragility model: ") + e.what());
    }
}

void FragilityModel::save(const std::filesystem::path& path, const std::string& diagnostics_json) const {
    std::string text = to_json();
    if (!diagnostics_json.empty()) {
        auto doc = json::parse(text);
        doc["diagnostics"] = json::parse(diagnostics_json);
        text = doc.dump(2);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write fragility model to " + path.string());
    }
    out << text << '\n';
}

FragilityModel FragilityModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open fragility model " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json(buffer.str());
}

namespace {

// Softmax over the candidates {prior, ..., n_sds} of a context, written into p[prior-1 ...].
void context_probabilities(const FragilityModel& model, int prior, int cds, double log_im,
                           std::vector<double>& p) {
    const int n = model.n_sds();
    std::fill(p.begin(), p.end(), 0.0);
    if (prior >= n || model.status(prior, cds) == ContextStatus::NoData) {
        p[static_cast<std::size_t>(prior - 1)] = 1.0;
        return;
    }
    double max_logit = 0.0;
    for (int j = prior + 1; j <= n; ++j) {
        const auto& c = model.coefficients(prior, cds, j);
        const double eta = c.intercept + c.slope * log_im;
        p[static_cast<std::size_t>(j - 1)] = eta;
        max_logit = std::max(max_logit, eta);
    }
    p[static_cast<std::size_t>(prior - 1)] = 0.0;
    double total = 0.0;
    for (int j = prior; j <= n; ++j) {
        auto& v = p[static_cast<std::size_t>(j - 1)];
        v = std::exp(v - max_logit);
        total += v;
    }
    for (int j = prior; j <= n; ++j) {
        p[static_cast<std::size_t>(j - 1)] /= total;
    }
}

void check_record(const FragilityModel& model, const TransitionRecord& r) {
    if (r.prior_sds < 1 || r.prior_sds > model.n_sds() || r.posterior_sds < r.prior_sds ||
        r.posterior_sds > model.n_sds() || r.cds < 1 || r.cds > model.n_cds() || !(r.im > 0.0)) {
        throw ValidationError("invalid transition record (trajectory " + std::to_string(r.trajectory) +
                              ", step " + std::to_string(r.step) + ")");
    }
}

} // namespace

std::vector<double> transition_prob(const FragilityModel& model, int prior, int cds, double im) {
    if (prior < 1 || prior > model.n_sds() || cds < 1 || cds > model.n_cds()) {
        throw std::out_of_range("transition_prob: state index out of range");
    }
    if (!(im > 0.0)) {
        throw ValidationError("transition_prob: im must be positive");
    }
    std::vector<double> p(static_cast<std::size_t>(model.n_sds()), 0.0);
    context_probabilities(model, prior, cds, std::log(im), p);
    return p;
}

double log_likelihood(const FragilityModel& model, std::span<const TransitionRecord> records,
                      std::string* diagnostic) {
    std::vector<double> p(static_cast<std::size_t>(model.n_sds()));
    double total = 0.0;
    for (const auto& r : records) {
        check_record(model, r);
        context_probabilities(model, r.prior_sds, r.cds, std::log(r.im), p);
        const double pj = p[static_cast<std::size_t>(r.posterior_sds - 1)];
        if (!(pj > 0.0)) {
            if (diagnostic != nullptr) {
                std::ostringstream msg;
                msg << "record (trajectory " << r.trajectory << ", step " << r.step << ") has "
                    << "probability 0: SDS " << r.prior_sds << " -> " << r.posterior_sds << " at CDS "
                    << r.cds;
                *diagnostic = msg.str();
            }
            return -std::numeric_limits<double>::infinity();
        }
        total += std::log(pj);
    }
    return total;
}

std::vector<double> log_likelihood_gradient(const FragilityModel& model,
                                            std::span<const TransitionRecord> records) {
    std::vector<double> grad(model.parameter_count(), 0.0);
    std::vector<double> p(static_cast<std::size_t>(model.n_sds()));
    for (const auto& r : records) {
        check_record(model, r);
        if (r.prior_sds == model.n_sds() || model.status(r.prior_sds, r.cds) == ContextStatus::NoData) {
            continue;
        }
        const double log_im = std::log(r.im);
        context_probabilities(model, r.prior_sds, r.cds, log_im, p);
        const std::size_t offset = model.context_offset(r.prior_sds, r.cds);
        for (int j = r.prior_sds + 1; j <= model.n_sds(); ++j) {
            const double residual =
                (j == r.posterior_sds ? 1.0 : 0.0) - p[static_cast<std::size_t>(j - 1)];
            const std::size_t k = offset + 2 * static_cast<std::size_t>(j - r.prior_sds - 1);
            grad[k] += residual;
            grad[k + 1] += residual * log_im;
        }
    }
    return grad;
}

namespace {

struct ContextData {
    std::vector<double> log_im;
    std::vector<int> outcome; ///< posterior - prior, 0 = reference
};

// Penalized mean negative log-likelihood of one context and its gradient.
double context_objective(const ContextData& data, int candidates, double ridge,
                         std::span<const double> theta, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> p(static_cast<std::size_t>(candidates) + 1);
    double nll = 0.0;
    for (std::size_t r = 0; r < data.log_im.size(); ++r) {
        const double x = data.log_im[r];
        double max_logit = 0.0;
        p[0] = 0.0;
        for (int j = 1; j <= candidates; ++j) {
            const double eta = theta[2 * (j - 1)] + theta[2 * (j - 1) + 1] * x;
            p[static_cast<std::size_t>(j)] = eta;
            max_logit = std::max(max_logit, eta);
        }
        double total = 0.0;
        for (auto& v : p) {
            v = std::exp(v - max_logit);
            total += v;
        }
        const int y = data.outcome[r];
        nll -= std::log(p[static_cast<std::size_t>(y)] / total);
        for (int j = 1; j <= candidates; ++j) {
            const double residual = p[static_cast<std::size_t>(j)] / total - (y == j ? 1.0 : 0.0);
            grad[2 * (j - 1)] += residual;
            grad[2 * (j - 1) + 1] += residual * x;
        }
    }
    const double inv_n = 1.0 / static_cast<double>(data.log_im.size());
    double penalty = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        grad[k] = grad[k] * inv_n + 2.0 * ridge * theta[k];
        penalty += theta[k] * theta[k];
    }
    return nll * inv_n + ridge * penalty;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

// BFGS on the inverse Hessian with Armijo backtracking, starting from zero.
ContextFitReport fit_context(const ContextData& data, int candidates, const FitOptions& options,
                             std::vector<double>& theta) {
    ContextFitReport report;
    report.records = data.log_im.size();
    const std::size_t n = theta.size();
    std::fill(theta.begin(), theta.end(), 0.0);
    std::vector<double> grad(n);
    std::vector<double> h(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] = 1.0;
    }
    double f = context_objective(data, candidates, options.ridge, theta, grad);
    std::vector<double> direction(n);
    std::vector<double> trial(n);
    std::vector<double> trial_grad(n);
    std::vector<double> s(n);
    std::vector<double> y(n);
    std::vector<double> hy(n);
    bool first_update = true;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        report.iterations = iter;
        report.gradient_norm = inf_norm(grad);
        if (report.gradient_norm < options.gradient_tol) {
            report.status = ContextStatus::Fitted;
            return report;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc -= h[i * n + j] * grad[j];
            }
            direction[i] = acc;
        }
        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            slope += direction[i] * grad[i];
        }
        if (!(slope < 0.0)) {
            // Lost descent: restart from steepest descent.
            for (std::size_t i = 0; i < n; ++i) {
                std::fill(h.begin() + static_cast<long>(i * n), h.begin() + static_cast<long>((i + 1) * n), 0.0);
                h[i * n + i] = 1.0;
                direction[i] = -grad[i];
            }
            slope = -std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0);
            first_update = true;
        }
        double step = 1.0;
        double f_trial = 0.0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] = theta[i] + step * direction[i];
            }
            f_trial = context_objective(data, candidates, options.ridge, trial, trial_grad);
            // Near the optimum the decrease falls below the objective's rounding
            // noise; there a smaller gradient is the usable signal.
            const bool in_noise = std::abs(f_trial - f) <= 1e-14 * std::max(1.0, std::abs(f));
            if (std::isfinite(f_trial) &&
                (f_trial <= f + 1e-4 * step * slope || (in_noise && inf_norm(trial_grad) < inf_norm(grad)))) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            report.status = ContextStatus::NotConverged;
            return report;
        }
        double sy = 0.0;
        double yy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial[i] - theta[i];
            y[i] = trial_grad[i] - grad[i];
            sy += s[i] * y[i];
            yy += y[i] * y[i];
        }
        theta = trial;
        grad = trial_grad;
        f = f_trial;
        if (sy > 1e-300) {
            if (first_update) {
                const double scale = sy / yy;
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        h[i * n + j] = i == j ? scale : 0.0;
                    }
                }
                first_update = false;
            }
            double yhy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    acc += h[i * n + j] * y[j];
                }
                hy[i] = acc;
                yhy += y[i] * acc;
            }
            const double rho = 1.0 / sy;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    h[i * n + j] += (1.0 + rho * yhy) * rho * s[i] * s[j] -
                                    rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
    }
    report.iterations = options.max_iterations;
    report.gradient_norm = inf_norm(grad);
    report.status = report.gradient_norm < options.gradient_tol ? ContextStatus::Fitted
                                                                : ContextStatus::NotConverged;
    return report;
}

} // namespace

bool FitResult::all_converged() const {
    return std::all_of(contexts.begin(), contexts.end(),
                       [](const ContextFitReport& c) { return c.status == ContextStatus::Fitted; });
}

std::string FitResult::diagnostics_json() const {
    json list = json::array();
    for (const auto& c : contexts) {
        list.push_back({{"prior_sds", c.prior_sds},
                        {"cds", c.cds},
                        {"records", c.records},
                        {"iterations", c.iterations},
                        {"gradient_inf_norm", c.gradient_norm},
                        {"status", to_string(c.status)}});
    }
    return list.dump();
}

FitResult fit_mle(std::span<const TransitionRecord> records, int n_sds, int n_cds,
                  const FitOptions& options) {
    FitResult result{FragilityModel(n_sds, n_cds), {}};
    FragilityModel& model = result.model;
    const int n_contexts = (n_sds - 1) * n_cds;
    std::vector<ContextData> data(static_cast<std::size_t>(n_contexts));
    for (const auto& r : records) {
        check_record(model, r);
        if (r.prior_sds == n_sds) {
            continue;
        }
        auto& d = data[static_cast<std::size_t>((r.prior_sds - 1) * n_cds + (r.cds - 1))];
        d.log_im.push_back(std::log(r.im));
        d.outcome.push_back(r.posterior_sds - r.prior_sds);
    }
    result.contexts.resize(static_cast<std::size_t>(n_contexts));
    std::vector<std::vector<double>> thetas(static_cast<std::size_t>(n_contexts));

#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n_contexts; ++c) {
        const int prior = c / n_cds + 1;
        const int cds = c % n_cds + 1;
        const int candidates = n_sds - prior;
        auto& theta = thetas[static_cast<std::size_t>(c)];
        theta.assign(2 * static_cast<std::size_t>(candidates), 0.0);
        ContextFitReport report;
        if (data[static_cast<std::size_t>(c)].log_im.empty()) {
            report.status = ContextStatus::NoData;
        } else {
            report = fit_context(data[static_cast<std::size_t>(c)], candidates, options, theta);
        }
        report.prior_sds = prior;
        report.cds = cds;
        result.contexts[static_cast<std::size_t>(c)] = report;
    }

    for (int c = 0; c < n_contexts; ++c) {
        const auto& report = result.contexts[static_cast<std::size_t>(c)];
        const auto& theta = thetas[static_cast<std::size_t>(c)];
        for (int j = report.prior_sds + 1; j <= n_sds; ++j) {
            const auto k = 2 * static_cast<std::size_t>(j - report.prior_sds - 1);
            model.coefficients(report.prior_sds, report.cds, j) = {theta[k], theta[k + 1]};
        }
        model.set_status(report.prior_sds, report.cds, report.status);
    }
    return result;
}

AnnualSeismicKernel marginalize_over_hazard(const FragilityModel& model, const ImPmf& pmf,
                                            double p_event) {
    if (!(p_event >= 0.0 && p_event <= 1.0)) {
        throw ValidationError("marginalize_over_hazard: p_event must lie in [0, 1]");
    }
    if (pmf.im_points.size() != pmf.masses.size() || pmf.im_points.empty()) {
        throw ValidationError("marginalize_over_hazard: malformed IM pmf");
    }
    const int n = model.n_sds();
    AnnualSeismicKernel kernel;
    for (int l = 1; l <= model.n_cds(); ++l) {
        Matrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) {
            const auto row = static_cast<std::size_t>(i - 1);
            std::vector<double> mixed(static_cast<std::size_t>(n), 0.0);
            for (std::size_t k = 0; k < pmf.masses.size(); ++k) {
                const auto p = transition_prob(model, i, l, pmf.im_points[k]);
                for (std::size_t j = 0; j < p.size(); ++j) {
                    mixed[j] += pmf.masses[k] * p[j];
                }
            }
            for (std::size_t j = 0; j < mixed.size(); ++j) {
                m(row, j) = p_event * mixed[j];
            }
            m(row, row) += 1.0 - p_event;
        }
        kernel.by_cds.push_back(std::move(m));
    }
    return kernel;
}

} // namespace lcmdp
