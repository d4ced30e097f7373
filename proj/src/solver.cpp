#include "lcmdp/solver.hpp"

#include "lcmdp/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lcmdp {

ValueTensor::ValueTensor(std::vector<std::size_t> dims, double fill) : dims_{std::move(dims)} {
    std::size_t n = 1;
    for (auto d : dims_) {
        n *= d;
    }
    values_.assign(n, fill);
}

ValueTensor::ValueTensor(std::vector<std::size_t> dims, std::vector<double> values)
    : dims_{std::move(dims)}, values_{std::move(values)} {
    std::size_t n = 1;
    for (auto d : dims_) {
        n *= d;
    }
    if (n != values_.size()) {
        throw std::invalid_argument("ValueTensor: value count does not match the dimensions");
    }
}

std::size_t ValueTensor::linear_index(std::span<const std::size_t> index) const {
    if (index.size() != dims_.size()) {
        throw std::out_of_range("ValueTensor: wrong number of indices");
    }
    std::size_t linear = 0;
    for (std::size_t k = 0; k < dims_.size(); ++k) {
        if (index[k] >= dims_[k]) {
            throw std::out_of_range("ValueTensor: index out of range");
        }
        linear = linear * dims_[k] + index[k];
    }
    return linear;
}

std::vector<std::size_t> ValueTensor::multi_index(std::size_t linear) const {
    if (linear >= values_.size()) {
        throw std::out_of_range("ValueTensor: linear index out of range");
    }
    std::vector<std::size_t> index(dims_.size());
    for (std::size_t k = dims_.size(); k-- > 0;) {
        index[k] = linear % dims_[k];
        linear /= dims_[k];
    }
    return index;
}

namespace {

struct AxisShape {
    std::size_t outer;
    std::size_t n;
    std::size_t inner;
};

AxisShape axis_shape(std::span<const std::size_t> dims, std::size_t axis) {
    AxisShape s{1, dims[axis], 1};
    for (std::size_t k = 0; k < axis; ++k) {
        s.outer *= dims[k];
    }
    for (std::size_t k = axis + 1; k < dims.size(); ++k) {
        s.inner *= dims[k];
    }
    return s;
}

constexpr std::size_t parallel_threshold = 1 << 15;

// Q-values this close are ties. The two solvers sum in different orders, so
// exact ties can differ in the last few bits.
double tie_tolerance(double q) { return 1e-13 * std::max(1.0, std::abs(q)); }

// out[o, s, i] = sum_{s'} P(s, s') in[o, s', i]
void apply_axis(const SparseMatrix& p, const double* in, double* out, AxisShape shape) {
    const auto rows = static_cast<long long>(shape.outer * shape.n);
    const std::size_t n = shape.n;
    const std::size_t inner = shape.inner;
#pragma omp parallel for schedule(static) if (shape.outer * shape.n * shape.inner > parallel_threshold)
    for (long long os = 0; os < rows; ++os) {
        const auto o = static_cast<std::size_t>(os) / n;
        const auto s = static_cast<std::size_t>(os) % n;
        double* dst = out + static_cast<std::size_t>(os) * inner;
        std::fill(dst, dst + inner, 0.0);
        for (std::size_t k = p.row_ptr[s]; k < p.row_ptr[s + 1]; ++k) {
            const double w = p.val[k];
            const double* src = in + (o * n + p.col[k]) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
                dst[i] += w * src[i];
            }
        }
    }
}

// Sparse copies of every component action matrix.
struct KroneckerOperator {
    std::vector<std::size_t> dims;
    std::vector<std::vector<SparseMatrix>> matrices; // [component][local action]

    explicit KroneckerOperator(const FactoredMdp& mdp) : dims{mdp.state_dims()} {
        for (const auto& c : mdp.components) {
            std::vector<SparseMatrix> local;
            for (const auto& m : c.transitions) {
                local.push_back(SparseMatrix::from_dense(m));
            }
            matrices.push_back(std::move(local));
        }
    }

    std::size_t bytes() const {
        std::size_t b = 0;
        for (const auto& comp : matrices) {
            for (const auto& m : comp) {
                b += m.nnz() * (sizeof(double) + sizeof(std::uint32_t)) + m.row_ptr.size() * sizeof(std::size_t);
            }
        }
        return b;
    }

    // Applies components N-1 .. 1 and returns the buffer holding the result
    // (v_next itself when there is a single component).
    const double* apply_tail(std::span<const std::size_t> local_actions, const double* v_next,
                             double* buf_a, double* buf_b) const {
        const double* current = v_next;
        double* target = buf_a;
        for (std::size_t k = dims.size(); k-- > 1;) {
            apply_axis(matrices[k][local_actions[k]], current, target, axis_shape(dims, k));
            current = target;
            target = target == buf_a ? buf_b : buf_a;
        }
        return current;
    }

    std::vector<double> apply(std::span<const std::size_t> local_actions, std::span<const double> v_next) const {
        const std::size_t n = v_next.size();
        std::vector<double> a(dims.size() > 1 ? n : 0);
        std::vector<double> b(dims.size() > 2 ? n : 0);
        const double* tail = apply_tail(local_actions, v_next.data(), a.data(), b.data());
        std::vector<double> out(n);
        apply_axis(matrices[0][local_actions[0]], tail, out.data(), axis_shape(dims, 0));
        return out;
    }
};

// Per-state cost added after the action minimum (it does not depend on the action).
class StateCostSweep {
public:
    explicit StateCostSweep(const FactoredMdp& mdp) : dims_{mdp.state_dims()}, scenario_{mdp.scenario_cost} {
        for (const auto& c : mdp.components) {
            const std::size_t n = c.transitions.front().rows();
            std::vector<double> cost(n, 0.0);
            std::vector<std::size_t> bit(n, 0);
            for (std::size_t s = 0; s < n; ++s) {
                if (!c.state_cost.empty()) {
                    cost[s] = c.state_cost[s];
                }
                if (!c.failed.empty() && c.failed[s] != 0) {
                    bit[s] = std::size_t{1} << costs_.size();
                }
            }
            costs_.push_back(std::move(cost));
            bits_.push_back(std::move(bit));
        }
        active_ = !scenario_.empty();
        for (const auto& c : mdp.components) {
            active_ = active_ || !c.state_cost.empty();
        }
    }

    bool active() const { return active_; }

    // values[s] += state_cost(s) over the whole joint space
    void add_to(std::span<double> values) const {
        if (!active_) {
            return;
        }
        const std::size_t n0 = dims_[0];
        const std::size_t inner = values.size() / n0;
        const std::size_t rest = dims_.size() - 1;
#pragma omp parallel for schedule(static) if (values.size() > parallel_threshold)
        for (long long s0 = 0; s0 < static_cast<long long>(n0); ++s0) {
            std::vector<std::size_t> idx(rest, 0);
            const auto base = static_cast<std::size_t>(s0);
            for (std::size_t i = 0; i < inner; ++i) {
                double cost = costs_[0][base];
                std::size_t mask = bits_[0][base];
                for (std::size_t k = 0; k < rest; ++k) {
                    cost += costs_[k + 1][idx[k]];
                    mask |= bits_[k + 1][idx[k]];
                }
                if (!scenario_.empty()) {
                    cost += scenario_[mask];
                }
                values[base * inner + i] += cost;
                for (std::size_t k = rest; k-- > 0;) {
                    if (++idx[k] < dims_[k + 1]) {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
    }

private:
    std::vector<std::size_t> dims_;
    std::vector<double> scenario_;
    std::vector<std::vector<double>> costs_;
    std::vector<std::vector<std::size_t>> bits_;
    bool active_ = false;
};

std::vector<std::size_t> resolve_action_order(const SolveOptions& options, std::size_t n_actions) {
    std::vector<std::size_t> order(n_actions);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.action_order.empty()) {
        return order;
    }
    std::vector<std::size_t> sorted = options.action_order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != order) {
        throw ValidationError("action_order must be a permutation of the joint actions");
    }
    return options.action_order;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

ValueTensor mode_k_product(const ValueTensor& tensor, const Matrix& matrix, std::size_t axis) {
    if (axis >= tensor.order()) {
        throw std::invalid_argument("mode_k_product: axis out of range");
    }
    const auto shape = axis_shape(tensor.dims(), axis);
    if (matrix.rows() != shape.n || matrix.cols() != shape.n) {
        throw std::invalid_argument("mode_k_product: matrix must be n_k x n_k for the chosen axis");
    }
    ValueTensor out(tensor.dims());
    const auto in = tensor.vec();
    auto dst = out.vec();
    for (std::size_t o = 0; o < shape.outer; ++o) {
        for (std::size_t j = 0; j < shape.n; ++j) {
            for (std::size_t i = 0; i < shape.n; ++i) {
                const double w = matrix(i, j);
                if (w == 0.0) {
                    continue;
                }
                const std::size_t src = (o * shape.n + i) * shape.inner;
                const std::size_t out_base = (o * shape.n + j) * shape.inner;
                for (std::size_t r = 0; r < shape.inner; ++r) {
                    dst[out_base + r] += w * in[src + r];
                }
            }
        }
    }
    return out;
}

std::vector<double> expected_future_values(std::span<const Matrix* const> matrices,
                                           std::span<const double> v_next) {
    if (matrices.empty()) {
        throw std::invalid_argument("expected_future_values: no component matrices");
    }
    std::vector<std::size_t> dims;
    std::size_t total = 1;
    for (const Matrix* m : matrices) {
        if (m->rows() != m->cols()) {
            throw std::invalid_argument("expected_future_values: component matrices must be square");
        }
        dims.push_back(m->rows());
        total *= m->rows();
    }
    if (total != v_next.size()) {
        throw std::invalid_argument("expected_future_values: value vector length mismatch");
    }
    std::vector<double> current(v_next.begin(), v_next.end());
    std::vector<double> next(total);
    for (std::size_t k = dims.size(); k-- > 0;) {
        apply_axis(SparseMatrix::from_dense(*matrices[k]), current.data(), next.data(), axis_shape(dims, k));
        current.swap(next);
    }
    return current;
}

std::vector<double> expected_future_values(const FactoredMdp& mdp, std::size_t joint_action,
                                           std::span<const double> v_next) {
    const auto local = mdp.decode_action(joint_action);
    std::vector<const Matrix*> matrices;
    for (std::size_t k = 0; k < local.size(); ++k) {
        matrices.push_back(&mdp.components[k].transitions[local[k]]);
    }
    return expected_future_values(matrices, v_next);
}

std::vector<double> naive_expected_values(const FactoredMdp& mdp, std::size_t joint_action,
                                          std::span<const double> v_next) {
    const auto local = mdp.decode_action(joint_action);
    const auto dims = mdp.state_dims();
    const std::size_t total = mdp.joint_state_count();
    if (v_next.size() != total) {
        throw std::invalid_argument("naive_expected_values: value vector length mismatch");
    }
    std::vector<double> out(total);
    std::vector<double> row(total);
    std::vector<double> scratch(total);
    for (std::size_t s = 0; s < total; ++s) {
        const auto idx = mdp.decode_state(s);
        // Expand row s of the Kronecker product one component at a time.
        std::size_t len = 1;
        row[0] = 1.0;
        for (std::size_t k = 0; k < dims.size(); ++k) {
            const auto r = mdp.components[k].transitions[local[k]].row(idx[k]);
            for (std::size_t p = 0; p < len; ++p) {
                for (std::size_t q = 0; q < dims[k]; ++q) {
                    scratch[p * dims[k] + q] = row[p] * r[q];
                }
            }
            len *= dims[k];
            std::copy(scratch.begin(), scratch.begin() + static_cast<long>(len), row.begin());
        }
        double acc = 0.0;
        for (std::size_t j = 0; j < total; ++j) {
            acc += row[j] * v_next[j];
        }
        out[s] = acc;
    }
    return out;
}

ComplexityCounts complexity_report(const FactoredMdp& mdp) {
    ComplexityCounts c;
    const double states = static_cast<double>(mdp.joint_state_count());
    const double actions = static_cast<double>(mdp.joint_action_count());
    double sum_local_states = 0.0;
    double tensor_matrix_entries = 0.0;
    for (const auto& comp : mdp.components) {
        const double n = static_cast<double>(comp.transitions.front().rows());
        sum_local_states += n;
        tensor_matrix_entries += static_cast<double>(comp.transitions.size()) * n * n;
    }
    // nnz(P_a) is the product of the component nnz counts of that joint action
    std::vector<double> nnz_sum_prefix{1.0};
    double total_nnz = 1.0;
    for (const auto& comp : mdp.components) {
        double sum = 0.0;
        for (const auto& m : comp.transitions) {
            sum += static_cast<double>(SparseMatrix::from_dense(m).nnz());
        }
        total_nnz *= sum;
    }
    c.naive_flops = actions * states * states;
    c.naive_bytes = 8.0 * (actions * states * states + states);
    c.sparse_flops = total_nnz;
    c.sparse_bytes = 8.0 * (total_nnz + states);
    c.tensor_flops = actions * states * sum_local_states;
    c.tensor_bytes = 8.0 * (tensor_matrix_entries + states);
    return c;
}

ComplexityCounts complexity_report(std::size_t components, std::size_t states, std::size_t actions,
                                   double nnz_per_row) {
    ComplexityCounts c;
    double joint_states = 1.0;
    double joint_actions = 1.0;
    double joint_nnz = 1.0;
    for (std::size_t k = 0; k < components; ++k) {
        joint_states *= static_cast<double>(states);
        joint_actions *= static_cast<double>(actions);
        joint_nnz *= nnz_per_row * static_cast<double>(states);
    }
    const double n = static_cast<double>(states);
    c.naive_flops = joint_actions * joint_states * joint_states;
    c.naive_bytes = 8.0 * (joint_actions * joint_states * joint_states + joint_states);
    c.sparse_flops = joint_actions * joint_nnz;
    c.sparse_bytes = 8.0 * (joint_actions * joint_nnz + joint_states);
    c.tensor_flops = joint_actions * joint_states * static_cast<double>(components) * n;
    c.tensor_bytes = 8.0 * (static_cast<double>(components * actions) * n * n + joint_states);
    return c;
}

double planned_memory_bytes(const FactoredMdp& mdp, const SolveOptions& options) {
    const double states = static_cast<double>(mdp.joint_state_count());
    const std::size_t n = mdp.components.size();
    const double buffers = 2.0 + static_cast<double>(std::min<std::size_t>(n - 1, 2));
    double bytes = buffers * 8.0 * states + 2.0 * states;
    const double horizon = static_cast<double>(std::max(mdp.horizon, 0));
    if (options.store_policy) {
        bytes += horizon * 2.0 * states;
    }
    if (options.keep_all_values) {
        bytes += (horizon + 1.0) * 8.0 * states;
    } else {
        bytes += 8.0 * states; // returned V_0
    }
    for (const auto& c : mdp.components) {
        for (const auto& m : c.transitions) {
            bytes += 12.0 * static_cast<double>(SparseMatrix::from_dense(m).nnz()) +
                     8.0 * static_cast<double>(m.rows() + 1);
        }
    }
    const double inner = states / static_cast<double>(mdp.components.front().transitions.front().rows());
    bytes += 8.0 * inner * static_cast<double>(omp_get_max_threads());
    return bytes;
}

SolveResult tensor_value_iteration(const FactoredMdp& mdp, const SolveOptions& options) {
    mdp.validate();
    const auto start = std::chrono::steady_clock::now();
    SolveResult result;
    result.report.complexity = complexity_report(mdp);
    result.report.planned_bytes = planned_memory_bytes(mdp, options);
    if (result.report.planned_bytes > options.memory_budget_bytes) {
        std::ostringstream msg;
        msg << "memory plan of " << result.report.planned_bytes / 1e9 << " GB exceeds the budget of "
            << options.memory_budget_bytes / 1e9 << " GB (" << mdp.joint_state_count() << " joint states, "
            << mdp.joint_action_count() << " joint actions, horizon " << mdp.horizon << ")";
        throw ResourceError(msg.str());
    }

    const std::size_t n_states = mdp.joint_state_count();
    const std::size_t n_actions = mdp.joint_action_count();
    const auto order = resolve_action_order(options, n_actions);
    const KroneckerOperator op(mdp);
    const StateCostSweep state_costs(mdp);
    const auto dims = op.dims;
    const std::size_t n0 = dims[0];
    const std::size_t inner = n_states / n0;
    const double gamma = mdp.discount;

    std::vector<double> v_next(n_states, 0.0);
    std::vector<double> v_min(n_states);
    std::vector<std::uint16_t> arg(n_states);
    std::vector<double> buf_a(dims.size() > 1 ? n_states : 0);
    std::vector<double> buf_b(dims.size() > 2 ? n_states : 0);
    result.policy.state_count = n_states;
    if (options.store_policy) {
        result.policy.actions.resize(static_cast<std::size_t>(mdp.horizon));
    }
    if (options.keep_all_values) {
        result.values.resize(static_cast<std::size_t>(mdp.horizon) + 1);
        result.values.back() = v_next;
    }

    for (int t = mdp.horizon - 1; t >= 0; --t) {
        const auto epoch_start = std::chrono::steady_clock::now();
        bool first = true;
        for (std::size_t a : order) {
            const auto local = mdp.decode_action(a);
            const double* tail = op.apply_tail(local, v_next.data(), buf_a.data(), buf_b.data());
            const SparseMatrix& p0 = op.matrices[0][local[0]];
            const double action_cost = mdp.joint_action_cost[a];
            const auto a16 = static_cast<std::uint16_t>(a);
            // Last contraction fused with the running (value, action index) minimum.
#pragma omp parallel if (n_states > parallel_threshold)
            {
                std::vector<double> acc(inner);
#pragma omp for schedule(static)
                for (long long s0 = 0; s0 < static_cast<long long>(n0); ++s0) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    const auto row = static_cast<std::size_t>(s0);
                    for (std::size_t k = p0.row_ptr[row]; k < p0.row_ptr[row + 1]; ++k) {
                        const double w = p0.val[k];
                        const double* src = tail + static_cast<std::size_t>(p0.col[k]) * inner;
                        for (std::size_t i = 0; i < inner; ++i) {
                            acc[i] += w * src[i];
                        }
                    }
                    double* best = v_min.data() + row * inner;
                    std::uint16_t* best_a = arg.data() + row * inner;
                    for (std::size_t i = 0; i < inner; ++i) {
                        const double q = action_cost + gamma * acc[i];
                        const double tol = tie_tolerance(best[i]);
                        if (first || q < best[i] - tol || (q <= best[i] + tol && a16 < best_a[i])) {
                            best[i] = q;
                            best_a[i] = a16;
                        }
                    }
                }
            }
            first = false;
        }
        state_costs.add_to(v_min);
        v_next.swap(v_min);
        if (options.store_policy) {
            result.policy.actions[static_cast<std::size_t>(t)] = arg;
        }
        if (options.keep_all_values) {
            result.values[static_cast<std::size_t>(t)] = v_next;
        }
        if (options.on_epoch) {
            options.on_epoch(t, v_next, arg);
        }
        result.report.epoch_seconds.push_back(seconds_since(epoch_start));
    }
    result.initial_values = std::move(v_next);
    result.report.total_seconds = seconds_since(start);
    return result;
}

SolveResult naive_value_iteration(const FactoredMdp& mdp, std::size_t state_cap, bool keep_all_values) {
    mdp.validate();
    const std::size_t n_states = mdp.joint_state_count();
    if (n_states > state_cap) {
        throw ResourceError("naive value iteration refused: " + std::to_string(n_states) +
                            " joint states exceed the oracle cap of " + std::to_string(state_cap));
    }
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n_actions = mdp.joint_action_count();
    constexpr std::size_t materialize_limit = 4096;

    // Materialize every joint matrix up front when they are small enough.
    std::vector<Matrix> joint;
    if (n_states <= materialize_limit && n_actions * n_states * n_states <= 64u * 1024u * 1024u) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            const auto local = mdp.decode_action(a);
            Matrix p = mdp.components[0].transitions[local[0]];
            for (std::size_t k = 1; k < local.size(); ++k) {
                p = kronecker(p, mdp.components[k].transitions[local[k]]);
            }
            joint.push_back(std::move(p));
        }
    }

    SolveResult result;
    result.report.complexity = complexity_report(mdp);
    result.policy.state_count = n_states;
    result.policy.actions.resize(static_cast<std::size_t>(mdp.horizon));
    std::vector<double> v_next(n_states, 0.0);
    if (keep_all_values) {
        result.values.resize(static_cast<std::size_t>(mdp.horizon) + 1);
        result.values.back() = v_next;
    }
    std::vector<double> state_cost(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        state_cost[s] = mdp.state_cost(s);
    }
    for (int t = mdp.horizon - 1; t >= 0; --t) {
        const auto epoch_start = std::chrono::steady_clock::now();
        std::vector<double> v(n_states, 0.0);
        std::vector<std::uint16_t> pi(n_states, 0);
        for (std::size_t a = 0; a < n_actions; ++a) {
            const auto expected = joint.empty() ? naive_expected_values(mdp, a, v_next) : multiply(joint[a], v_next);
            for (std::size_t s = 0; s < n_states; ++s) {
                const double q = mdp.joint_action_cost[a] + mdp.discount * expected[s];
                if (a == 0 || q < v[s] - tie_tolerance(v[s])) {
                    v[s] = q;
                    pi[s] = static_cast<std::uint16_t>(a);
                }
            }
        }
        for (std::size_t s = 0; s < n_states; ++s) {
            v[s] += state_cost[s];
        }
        v_next = std::move(v);
        result.policy.actions[static_cast<std::size_t>(t)] = std::move(pi);
        if (keep_all_values) {
            result.values[static_cast<std::size_t>(t)] = v_next;
        }
        result.report.epoch_seconds.push_back(seconds_since(epoch_start));
    }
    result.initial_values = std::move(v_next);
    result.report.total_seconds = seconds_since(start);
    return result;
}

std::vector<double> evaluate_policy(const FactoredMdp& mdp, const Policy& policy) {
    mdp.validate();
    const std::size_t n_states = mdp.joint_state_count();
    if (policy.horizon() != mdp.horizon || policy.state_count != n_states) {
        throw ValidationError("evaluate_policy: policy does not match the MDP");
    }
    const KroneckerOperator op(mdp);
    const StateCostSweep state_costs(mdp);
    std::vector<double> v_next(n_states, 0.0);
    for (int t = mdp.horizon - 1; t >= 0; --t) {
        const auto& pi = policy.actions[static_cast<std::size_t>(t)];
        std::vector<double> v(n_states, 0.0);
        for (std::size_t a = 0; a < mdp.joint_action_count(); ++a) {
            if (std::find(pi.begin(), pi.end(), static_cast<std::uint16_t>(a)) == pi.end()) {
                continue;
            }
            const auto expected = op.apply(mdp.decode_action(a), v_next);
            for (std::size_t s = 0; s < n_states; ++s) {
                if (pi[s] == a) {
                    v[s] = mdp.joint_action_cost[a] + mdp.discount * expected[s];
                }
            }
        }
        state_costs.add_to(v);
        v_next = std::move(v);
    }
    return v_next;
}

} // namespace lcmdp
