#pragma once

#include "lcmdp/matrix.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lcmdp {

/// One component of a factored MDP: a transition matrix per local action plus
/// the per-state ingredients of the structured cost.
struct FactoredComponent {
    std::string name;
    std::vector<Matrix> transitions;  ///< one row-stochastic matrix per local action
    std::vector<double> state_cost;   ///< additive cost per local state; empty means zero
    std::vector<std::uint8_t> failed; ///< failure indicator per local state; empty means never
};

/// Finite-horizon MDP whose joint transition for action a = (a_1, ..., a_N)
/// is the Kronecker product P_{a_1} (x) ... (x) P_{a_N}.
///
/// Joint indices are row-major over components: the last component's local
/// index varies fastest, for both states and actions. Joint action 0 is the
/// all-first-action tuple.
///
/// Cost: C(s, a) = joint_action_cost[a] + sum_k state_cost_k(s_k) + scenario_cost[mask(s)],
/// where bit k of mask(s) is set when component k is in a failed state.
struct FactoredMdp {
    std::vector<FactoredComponent> components;
    std::vector<double> joint_action_cost;
    std::vector<double> scenario_cost; ///< 2^N entries indexed by failure mask, or empty
    double discount = 1.0;
    int horizon = 0;

    /// Throws ValidationError on shape or stochasticity problems (tolerance 1e-8).
    void validate() const;

    std::vector<std::size_t> state_dims() const;
    std::vector<std::size_t> action_dims() const;
    std::size_t joint_state_count() const;
    std::size_t joint_action_count() const;

    std::vector<std::size_t> decode_state(std::size_t joint) const;
    std::size_t encode_state(std::span<const std::size_t> local) const;
    std::vector<std::size_t> decode_action(std::size_t joint) const;
    std::size_t encode_action(std::span<const std::size_t> local) const;

    /// State-dependent part of the cost (local costs plus failure scenario).
    double state_cost(std::size_t joint_state) const;
    double cost(std::size_t joint_state, std::size_t joint_action) const {
        return joint_action_cost[joint_action] + state_cost(joint_state);
    }
};

} // namespace lcmdp
