#include "hazebridge/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include "tensor_impl.hpp"

namespace hazebridge {

namespace {

std::atomic<bool> g_checked{false};
thread_local int g_no_grad_depth = 0;

}  // namespace

void set_checked_mode(bool on) { g_checked.store(on, std::memory_order_relaxed); }
bool checked_mode() { return g_checked.load(std::memory_order_relaxed); }

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace detail {

void check_finite(const std::vector<real>& v, const char* op_name) {
    for (real x : v) {
        if (!std::isfinite(x))
            throw DomainError(std::string(op_name) + ": non-finite value produced");
    }
}

Tensor make_op_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn) {
    if (checked_mode()) check_finite(data, "op");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    bool tape = false;
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p.requires_grad()) tape = true;
    }
    if (tape) {
        impl->requires_grad = true;
        impl->parents = std::move(parents);
        impl->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(impl));
}

}  // namespace detail

using detail::TensorImpl;

Tensor::Tensor() : impl_(nullptr) {}
Tensor::Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

bool Tensor::defined() const { return impl_ != nullptr; }

static std::shared_ptr<TensorImpl> fresh(const Shape& shape, std::vector<real> data) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data = std::move(data);
    return impl;
}

Tensor Tensor::zeros(const Shape& shape) {
    return Tensor(fresh(shape, std::vector<real>(shape_numel(shape), real(0))));
}

Tensor Tensor::ones(const Shape& shape) { return full(shape, real(1)); }

Tensor Tensor::full(const Shape& shape, real value) {
    return Tensor(fresh(shape, std::vector<real>(shape_numel(shape), value)));
}

Tensor Tensor::scalar(real value) { return full({}, value); }

Tensor Tensor::from_data(const Shape& shape, std::vector<real> values) {
    if (checked_mode()) detail::check_finite(values, "from_data");
    return Tensor(fresh(shape, std::move(values)));
}

Tensor Tensor::randn(const Shape& shape, Rng& rng) {
    std::vector<real> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal();
    return Tensor(fresh(shape, std::move(v)));
}

Tensor Tensor::uniform(const Shape& shape, real lo, real hi, Rng& rng) {
    std::vector<real> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(fresh(shape, std::move(v)));
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::ndim() const { return static_cast<int64_t>(impl_->shape.size()); }
int64_t Tensor::numel() const { return impl_ ? static_cast<int64_t>(impl_->data.size()) : 0; }

int64_t Tensor::extent(int64_t axis) const {
    return impl_->shape[detail::normalize_axis(axis, ndim(), "extent")];
}

std::span<const real> Tensor::data() const { return impl_->data; }
std::span<real> Tensor::mutable_data() { return impl_->data; }

real Tensor::item() const {
    if (numel() != 1) throw ContractError("item(): tensor has " + std::to_string(numel()) + " elements");
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    if (on && impl_->backward_fn)
        throw ContractError("set_requires_grad: only leaf tensors can be toggled");
    impl_->requires_grad = on;
    return *this;
}

bool Tensor::has_tape() const { return impl_ && static_cast<bool>(impl_->backward_fn); }

std::span<const real> Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad(): no gradient accumulated");
    return impl_->grad;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::detach() const {
    return Tensor(fresh(impl_->shape, impl_->data));
}

Tensor Tensor::clone() const { return detach(); }

// ---- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ContractError("backward: loss must be a defined scalar tensor");
    TensorImpl* root = loss.impl().get();
    if (!root->requires_grad) return;  // constant graph, nothing to do

    // Post-order DFS (iterative); reversed vector is reverse topological order.
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    struct Frame {
        TensorImpl* node;
        size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            TensorImpl* p = f.node->parents[f.next++].impl().get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backward_fn) {
            node->ensure_grad();
            node->backward_fn(*node);
        }
    }
}

real grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, real eps) {
    Tensor xg = x.clone();
    xg.set_requires_grad(true);
    Tensor y = f(xg);
    if (y.numel() != 1) throw ContractError("grad_check: f must return a scalar");
    backward(y);
    std::vector<real> analytic(x.numel(), real(0));
    if (xg.has_grad()) {
        auto g = xg.grad();
        analytic.assign(g.begin(), g.end());
    }

    Tensor xp = x.clone();
    auto buf = xp.mutable_data();
    real max_rel = 0;
    NoGradGuard ng;
    for (int64_t i = 0; i < x.numel(); ++i) {
        const real orig = buf[i];
        buf[i] = orig + eps;
        const real fp = f(xp).item();
        buf[i] = orig - eps;
        const real fm = f(xp).item();
        buf[i] = orig;
        const real fd = (fp - fm) / (2 * eps);
        const real g = analytic[i];
        const real denom = std::max({std::abs(g), std::abs(fd), real(1e-4)});
        max_rel = std::max(max_rel, std::abs(g - fd) / denom);
    }
    return max_rel;
}

}  // namespace hazebridge
