// Adam with bias correction over an arbitrary group of dense parameter blocks.
#pragma once

#include "ugd/core.hpp"

#include <cmath>
#include <vector>

namespace ugd {

/// Non-owning view of one parameter block and its gradient.
struct param_ref
{
    double* value;
    const double* grad;
    Index size;
};

template <class Param, class Grad>
param_ref block(Param& value, const Grad& grad)
{
    if (value.size() != grad.size())
        throw dim_mismatch("adam: parameter and gradient sizes differ");
    return {value.data(), grad.data(), value.size()};
}

struct adam_state
{
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<Vector> first;  ///< one moment buffer per block
    std::vector<Vector> second;
};

/// One Adam update of every block. Gradients are checked for finiteness
/// before anything is modified.
inline void adam_step(const std::vector<param_ref>& blocks, adam_state& state)
{
    for (const auto& b : blocks)
        for (Index i = 0; i < b.size; ++i)
            if (!std::isfinite(b.grad[i]))
                throw non_finite_gradient("adam: non-finite gradient entry");

    if (state.first.empty()) {
        for (const auto& b : blocks) {
            state.first.push_back(Vector::Zero(b.size));
            state.second.push_back(Vector::Zero(b.size));
        }
    }
    if (state.first.size() != blocks.size())
        throw dim_mismatch("adam: block count changed between steps");

    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        if (state.first[k].size() != b.size)
            throw dim_mismatch("adam: moment shape does not match its parameter block");
        Eigen::Map<Vector> value(b.value, b.size);
        Eigen::Map<const Vector> grad(b.grad, b.size);
        auto& m = state.first[k];
        auto& v = state.second[k];
        m = state.beta1 * m + (1.0 - state.beta1) * grad;
        v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseAbs2();
        value.array() -= state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    }
}

} // namespace ugd
