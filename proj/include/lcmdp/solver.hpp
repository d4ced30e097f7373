#pragma once

#include "lcmdp/factored_mdp.hpp"
#include "lcmdp/matrix.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lcmdp {

/// Dense N-order tensor, row-major: the last axis varies fastest, matching
/// the joint-state linearization of FactoredMdp.
class ValueTensor {
public:
    ValueTensor() = default;
    explicit ValueTensor(std::vector<std::size_t> dims, double fill = 0.0);
    ValueTensor(std::vector<std::size_t> dims, std::vector<double> values);

    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t order() const { return dims_.size(); }
    std::size_t size() const { return values_.size(); }

    std::span<const double> vec() const { return values_; }
    std::span<double> vec() { return values_; }

    std::size_t linear_index(std::span<const std::size_t> index) const;
    std::vector<std::size_t> multi_index(std::size_t linear) const;

    double& operator[](std::size_t linear) { return values_[linear]; }
    double operator[](std::size_t linear) const { return values_[linear]; }

private:
    std::vector<std::size_t> dims_;
    std::vector<double> values_;
};

/// Contracts `axis` (0-based) of the tensor with the first index of `matrix`:
/// out[.., j, ..] = sum_i tensor[.., i, ..] * matrix(i, j).
/// Passing P^T therefore applies P along that axis. Throws std::invalid_argument
/// when the matrix is not n_axis x n_axis.
ValueTensor mode_k_product(const ValueTensor& tensor, const Matrix& matrix, std::size_t axis);

/// (P_1 (x) ... (x) P_N) v_next computed with one contraction per component;
/// the Kronecker matrix is never formed.
std::vector<double> expected_future_values(std::span<const Matrix* const> matrices,
                                           std::span<const double> v_next);

/// Same product with the component matrices of one joint action of `mdp`.
std::vector<double> expected_future_values(const FactoredMdp& mdp, std::size_t joint_action,
                                           std::span<const double> v_next);

/// Reference product for one joint action: each row of P_a is expanded
/// densely before the dot product. O(|S|^2) time, O(|S|) memory.
std::vector<double> naive_expected_values(const FactoredMdp& mdp, std::size_t joint_action,
                                          std::span<const double> v_next);

/// Epoch-indexed decision rule; actions[t][s] is the joint action at epoch t.
struct Policy {
    std::size_t state_count = 0;
    std::vector<std::vector<std::uint16_t>> actions;

    int horizon() const { return static_cast<int>(actions.size()); }
    std::uint16_t action(int epoch, std::size_t state) const {
        return actions.at(static_cast<std::size_t>(epoch))[state];
    }
};

/// Closed-form operation and memory counts for one backward step.
struct ComplexityCounts {
    double naive_flops = 0.0;    ///< |A| |S|^2
    double naive_bytes = 0.0;    ///< (|A| |S|^2 + |S|) doubles
    double sparse_flops = 0.0;   ///< sum over joint actions of nnz(P_a)
    double sparse_bytes = 0.0;   ///< (sum_a nnz(P_a) + |S|) doubles
    double tensor_flops = 0.0;   ///< |A| |S| sum_k |S_k|
    double tensor_bytes = 0.0;   ///< (sum_k |A_k| |S_k|^2 + |S|) doubles
};

struct SolveReport {
    std::vector<double> epoch_seconds; ///< wall time of each backward step, epoch T-1 first
    double total_seconds = 0.0;
    double planned_bytes = 0.0;        ///< working-set estimate checked against the budget
    ComplexityCounts complexity;
};

ComplexityCounts complexity_report(const FactoredMdp& mdp);
/// Homogeneous system: N components with `states` states, `actions` actions and
/// `nnz_per_row` non-zeros per component row.
ComplexityCounts complexity_report(std::size_t components, std::size_t states, std::size_t actions,
                                   double nnz_per_row);

struct SolveOptions {
    double memory_budget_bytes = 4.0e9;
    bool store_policy = true;
    bool keep_all_values = false;
    /// Evaluation order of joint actions; empty means ascending. Must be a permutation.
    std::vector<std::size_t> action_order;
    /// Called after each epoch with (t, V_t, pi_t), newest epoch first.
    std::function<void(int, std::span<const double>, std::span<const std::uint16_t>)> on_epoch;
};

struct SolveResult {
    std::vector<double> initial_values;          ///< V_0
    std::vector<std::vector<double>> values;     ///< V_0 .. V_T when keep_all_values
    Policy policy;
    SolveReport report;
};

/// Working-set estimate of tensor_value_iteration for the given options.
double planned_memory_bytes(const FactoredMdp& mdp, const SolveOptions& options);

/// Finite-horizon backward induction from V_T = 0 using per-component
/// contractions and a streaming minimum over joint actions. Ties go to the
/// smallest joint-action index; Q-values within a relative 1e-13 count as tied. Throws ResourceError before allocating when
/// the plan exceeds options.memory_budget_bytes.
SolveResult tensor_value_iteration(const FactoredMdp& mdp, const SolveOptions& options = {});

/// Textbook backward induction over explicitly expanded joint matrices.
/// Refuses (ResourceError) above `state_cap` joint states.
SolveResult naive_value_iteration(const FactoredMdp& mdp, std::size_t state_cap = 100000,
                                  bool keep_all_values = false);

/// Backward induction with a fixed policy (no minimization).
std::vector<double> evaluate_policy(const FactoredMdp& mdp, const Policy& policy);

} // namespace lcmdp
