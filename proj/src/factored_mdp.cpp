#include "lcmdp/factored_mdp.hpp"

#include "lcmdp/errors.hpp"

#include <cmath>
#include <string>

namespace lcmdp {

void FactoredMdp::validate() const {
    if (components.empty()) {
        throw ValidationError("factored MDP has no components");
    }
    if (!(discount >= 0.0 && discount <= 1.0)) {
        throw ValidationError("discount factor must lie in [0, 1]");
    }
    if (horizon < 0) {
        throw ValidationError("horizon must be non-negative");
    }
    for (const auto& c : components) {
        if (c.transitions.empty()) {
            throw ValidationError("component '" + c.name + "' has no actions");
        }
        const std::size_t n = c.transitions.front().rows();
        for (std::size_t a = 0; a < c.transitions.size(); ++a) {
            const auto& m = c.transitions[a];
            if (m.rows() != n || m.cols() != n || n == 0) {
                throw ValidationError("component '" + c.name + "': transition matrices must share one square shape");
            }
            if (!is_row_stochastic(m, 1e-8)) {
                throw ValidationError("component '" + c.name + "': action " + std::to_string(a) +
                                      " matrix is not row-stochastic");
            }
        }
        if (!c.state_cost.empty() && c.state_cost.size() != n) {
            throw ValidationError("component '" + c.name + "': state cost length mismatch");
        }
        if (!c.failed.empty() && c.failed.size() != n) {
            throw ValidationError("component '" + c.name + "': failure indicator length mismatch");
        }
    }
    if (joint_action_cost.size() != joint_action_count()) {
        throw ValidationError("joint action cost table has the wrong length");
    }
    if (!scenario_cost.empty() && scenario_cost.size() != (std::size_t{1} << components.size())) {
        throw ValidationError("scenario cost table must have 2^N entries");
    }
    if (joint_action_count() > 65535) {
        throw ValidationError("more than 65535 joint actions are not supported");
    }
}

std::vector<std::size_t> FactoredMdp::state_dims() const {
    std::vector<std::size_t> d;
    for (const auto& c : components) {
        d.push_back(c.transitions.front().rows());
    }
    return d;
}

std::vector<std::size_t> FactoredMdp::action_dims() const {
    std::vector<std::size_t> d;
    for (const auto& c : components) {
        d.push_back(c.transitions.size());
    }
    return d;
}

std::size_t FactoredMdp::joint_state_count() const {
    std::size_t n = 1;
    for (const auto& c : components) {
        n *= c.transitions.front().rows();
    }
    return n;
}

std::size_t FactoredMdp::joint_action_count() const {
    std::size_t n = 1;
    for (const auto& c : components) {
        n *= c.transitions.size();
    }
    return n;
}

namespace {

std::vector<std::size_t> decode_mixed_radix(std::size_t index, const std::vector<std::size_t>& dims) {
    std::vector<std::size_t> out(dims.size());
    for (std::size_t k = dims.size(); k-- > 0;) {
        out[k] = index % dims[k];
        index /= dims[k];
    }
    return out;
}

std::size_t encode_mixed_radix(std::span<const std::size_t> local, const std::vector<std::size_t>& dims) {
    if (local.size() != dims.size()) {
        throw std::out_of_range("joint index: wrong number of components");
    }
    std::size_t index = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (local[k] >= dims[k]) {
            throw std::out_of_range("joint index: local index out of range");
        }
        index = index * dims[k] + local[k];
    }
    return index;
}

} // namespace

std::vector<std::size_t> FactoredMdp::decode_state(std::size_t joint) const {
    return decode_mixed_radix(joint, state_dims());
}

std::size_t FactoredMdp::encode_state(std::span<const std::size_t> local) const {
    return encode_mixed_radix(local, state_dims());
}

std::vector<std::size_t> FactoredMdp::decode_action(std::size_t joint) const {
    return decode_mixed_radix(joint, action_dims());
}

std::size_t FactoredMdp::encode_action(std::span<const std::size_t> local) const {
    return encode_mixed_radix(local, action_dims());
}

double FactoredMdp::state_cost(std::size_t joint_state) const {
    const auto local = decode_state(joint_state);
    double cost = 0.0;
    std::size_t mask = 0;
    for (std::size_t k = 0; k < components.size(); ++k) {
        const auto& c = components[k];
        if (!c.state_cost.empty()) {
            cost += c.state_cost[local[k]];
        }
        if (!c.failed.empty() && c.failed[local[k]] != 0) {
            mask |= std::size_t{1} << k;
        }
    }
    if (!scenario_cost.empty()) {
        cost += scenario_cost[mask];
    }
    return cost;
}

} // namespace lcmdp
