#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pulsealign/tensor.hpp"

namespace pulsealign {

// Reverse-mode autodiff over whole-tensor operations. Each op appends one
// backward step to the tape; backward() replays them newest-first, adding
// into parent .grad buffers. Parameters are leaf Vars that outlive the tape;
// activations are freed when the per-step graph handles are dropped.
template <typename S>
struct Var {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;

    Var() = default;
    explicit Var(Tensor<S> v, bool needs_grad = false)
        : value(std::move(v)), grad(value.shape), requires_grad(needs_grad) {}

    void zero_grad() { grad.fill(S(0)); }
};

template <typename S>
using VarPtr = std::shared_ptr<Var<S>>;

template <typename S>
VarPtr<S> make_var(Tensor<S> value, bool requires_grad = false) {
    return std::make_shared<Var<S>>(std::move(value), requires_grad);
}

template <typename S>
VarPtr<S> make_param(Tensor<S> value) {
    return make_var(std::move(value), true);
}

template <typename S>
class Tape {
public:
    bool recording = true;

    void push(std::function<void()> backward_step) {
        if (recording) steps_.push_back(std::move(backward_step));
    }

    // Seed d(loss)/d(loss) = 1 and propagate. The loss must be a scalar.
    void backward(const VarPtr<S>& loss) {
        require(loss->value.size() == 1, ErrorKind::Usage, "backward expects a scalar loss");
        loss->grad.fill(S(1));
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    void clear() { steps_.clear(); }
    std::size_t step_count() const { return steps_.size(); }

private:
    std::vector<std::function<void()>> steps_;
};

// Named leaf with optimizer metadata. `decay` marks tensors subject to
// decoupled weight decay; batch-norm scale/shift and the temperature opt out.
template <typename S>
struct NamedParam {
    std::string name;
    VarPtr<S> var;
    bool decay = true;
};

// Non-trainable state that still has to travel with a checkpoint
// (batch-norm running statistics).
template <typename S>
struct NamedBuffer {
    std::string name;
    Tensor<S>* tensor = nullptr;
};

} // namespace pulsealign
