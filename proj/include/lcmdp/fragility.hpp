#pragma once

#include "lcmdp/hazard.hpp"
#include "lcmdp/matrix.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lcmdp {

/// One observed SDS transition during a hazard event. States are 1-based.
struct TransitionRecord {
    int trajectory = 0;
    int step = 0;
    int prior_sds = 1;
    int posterior_sds = 1;
    int cds = 1;
    double im = 1.0;
};

struct LogitCoefficients {
    double intercept = 0.0;
    double slope = 0.0;
};

enum class ContextStatus {
    Fitted,       ///< optimizer converged
    NoData,       ///< no records; the context keeps its current state with certainty
    NotConverged, ///< iteration cap or stalled line search; last iterate kept
};

std::string to_string(ContextStatus s);

/// Softmax fragility: for prior state i < n_sds and corrosion state l, the
/// probability of ending in state j >= i at intensity im is proportional to
/// exp(intercept_j + slope_j * ln im), with j = i fixed at zero logit.
///
/// Flat parameter layout (used by gradients): contexts ordered by prior state
/// then CDS, candidates j ascending, each contributing (intercept, slope).
class FragilityModel {
public:
    FragilityModel() = default;
    FragilityModel(int n_sds, int n_cds);

    int n_sds() const { return n_sds_; }
    int n_cds() const { return n_cds_; }

    LogitCoefficients& coefficients(int prior, int cds, int to);
    const LogitCoefficients& coefficients(int prior, int cds, int to) const;

    ContextStatus status(int prior, int cds) const;
    void set_status(int prior, int cds, ContextStatus s);

    std::size_t parameter_count() const { return coefficients_.size() * 2; }
    /// Offset of context (prior, cds) into the flat parameter vector.
    std::size_t context_offset(int prior, int cds) const;
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(std::span<const double> theta);

    void save(const std::filesystem::path& path, const std::string& diagnostics_json = {}) const;
    static FragilityModel load(const std::filesystem::path& path);
    std::string to_json() const;
    static FragilityModel from_json(const std::string& text);

    friend bool operator==(const FragilityModel& a, const FragilityModel& b);

private:
    std::size_t context_index(int prior, int cds) const;
    std::size_t coefficient_index(int prior, int cds, int to) const;

    int n_sds_ = 0;
    int n_cds_ = 0;
    std::vector<LogitCoefficients> coefficients_;
    std::vector<std::size_t> context_start_;
    std::vector<ContextStatus> status_;
};

/// Probability vector over posterior states (index j-1 for state j).
std::vector<double> transition_prob(const FragilityModel& model, int prior, int cds, double im);

/// Sum of log transition probabilities. Returns -inf when any record is
/// impossible under the model and describes the first one in `diagnostic`.
double log_likelihood(const FragilityModel& model, std::span<const TransitionRecord> records,
                      std::string* diagnostic = nullptr);

/// Gradient of log_likelihood in the flat parameter layout.
std::vector<double> log_likelihood_gradient(const FragilityModel& model,
                                            std::span<const TransitionRecord> records);

struct FitOptions {
    double ridge = 1e-6;          ///< penalty on the per-record mean negative log-likelihood
    double gradient_tol = 1e-8;   ///< infinity norm of the penalized objective's gradient
    int max_iterations = 500;
};

struct ContextFitReport {
    int prior_sds = 1;
    int cds = 1;
    std::size_t records = 0;
    int iterations = 0;
    double gradient_norm = 0.0;
    ContextStatus status = ContextStatus::NoData;
};

struct FitResult {
    FragilityModel model;
    std::vector<ContextFitReport> contexts;

    bool all_converged() const;
    std::string diagnostics_json() const;
};

/// Maximum-likelihood fit, one independent quasi-Newton problem per context.
FitResult fit_mle(std::span<const TransitionRecord> records, int n_sds, int n_cds,
                  const FitOptions& options = {});

/// Annual SDS transition matrices, one per CDS.
struct AnnualSeismicKernel {
    std::vector<Matrix> by_cds;
    const Matrix& for_cds(int cds) const { return by_cds.at(static_cast<std::size_t>(cds - 1)); }
};

/// Row (i | l) = (1 - p_event) e_i + p_event * sum_k mass_k * transition_prob(i, l, im_k).
AnnualSeismicKernel marginalize_over_hazard(const FragilityModel& model, const ImPmf& pmf,
                                            double p_event);

} // namespace lcmdp
