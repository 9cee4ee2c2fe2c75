#include "drqr/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace drqr::ad {

Tape::Id Tape::push(Eigen::VectorXd value) {
    Id id = static_cast<Id>(nodes_.size());
    nodes_.push_back({std::move(value), Eigen::VectorXd()});
    backward_ops_.emplace_back();
    return id;
}

Tape::Id Tape::constant(Eigen::VectorXd v) { return push(std::move(v)); }

Tape::Id Tape::zeros(Eigen::Index n) { return push(Eigen::VectorXd::Zero(n)); }

Tape::Id Tape::param_vector(Tensor& b) {
    Id out = push(b.value.col(0));
    backward_ops_.back() = [this, out, &b] { b.grad.col(0) += grad(out); };
    return out;
}

Tape::Id Tape::matvec(Tensor& w, Id x) {
    Id out = push(w.value * value(x));
    backward_ops_.back() = [this, out, x, &w] {
        const Eigen::VectorXd& g = grad(out);
        w.grad.noalias() += g * value(x).transpose();
        grad(x).noalias() += w.value.transpose() * g;
    };
    return out;
}

Tape::Id Tape::embed(Tensor& table, Eigen::Index row) {
    Id out = push(table.value.row(row).transpose());
    backward_ops_.back() = [this, out, row, &table] {
        table.grad.row(row) += grad(out).transpose();
    };
    return out;
}

Tape::Id Tape::affine_scalar(Tensor& w, Id x, Tensor& bias) {
    Eigen::VectorXd v(1);
    v(0) = w.value.col(0).dot(value(x)) + bias.value(0, 0);
    Id out = push(std::move(v));
    backward_ops_.back() = [this, out, x, &w, &bias] {
        double g = grad(out)(0);
        w.grad.col(0) += g * value(x);
        grad(x) += g * w.value.col(0);
        bias.grad(0, 0) += g;
    };
    return out;
}

Tape::Id Tape::add(Id a, Id b) {
    Id out = push(value(a) + value(b));
    backward_ops_.back() = [this, out, a, b] {
        grad(a) += grad(out);
        grad(b) += grad(out);
    };
    return out;
}

Tape::Id Tape::sub(Id a, Id b) {
    Id out = push(value(a) - value(b));
    backward_ops_.back() = [this, out, a, b] {
        grad(a) += grad(out);
        grad(b) -= grad(out);
    };
    return out;
}

Tape::Id Tape::hadamard(Id a, Id b) {
    Id out = push(value(a).cwiseProduct(value(b)));
    backward_ops_.back() = [this, out, a, b] {
        grad(a) += grad(out).cwiseProduct(value(b));
        grad(b) += grad(out).cwiseProduct(value(a));
    };
    return out;
}

Tape::Id Tape::scale(Id a, double s) {
    Id out = push(value(a) * s);
    backward_ops_.back() = [this, out, a, s] { grad(a) += s * grad(out); };
    return out;
}

Tape::Id Tape::axpby(double sa, Id a, double sb, Id b) {
    Id out = push(sa * value(a) + sb * value(b));
    backward_ops_.back() = [this, out, a, b, sa, sb] {
        grad(a) += sa * grad(out);
        grad(b) += sb * grad(out);
    };
    return out;
}

Tape::Id Tape::one_minus(Id a) {
    Id out = push(Eigen::VectorXd::Ones(value(a).size()) - value(a));
    backward_ops_.back() = [this, out, a] { grad(a) -= grad(out); };
    return out;
}

Tape::Id Tape::sigmoid(Id a) {
    Eigen::VectorXd y = value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    Id out = push(std::move(y));
    backward_ops_.back() = [this, out, a] {
        const Eigen::VectorXd& y = value(out);
        grad(a).array() += grad(out).array() * y.array() * (1.0 - y.array());
    };
    return out;
}

Tape::Id Tape::tanh(Id a) {
    Eigen::VectorXd y = value(a).array().tanh();
    Id out = push(std::move(y));
    backward_ops_.back() = [this, out, a] {
        const Eigen::VectorXd& y = value(out);
        grad(a).array() += grad(out).array() * (1.0 - y.array() * y.array());
    };
    return out;
}

Tape::Id Tape::softmax(Id a) {
    const Eigen::VectorXd& x = value(a);
    Eigen::VectorXd y = (x.array() - x.maxCoeff()).exp();
    y /= y.sum();
    Id out = push(std::move(y));
    backward_ops_.back() = [this, out, a] {
        const Eigen::VectorXd& y = value(out);
        const Eigen::VectorXd& g = grad(out);
        double gy = g.dot(y);
        grad(a).array() += y.array() * (g.array() - gy);
    };
    return out;
}

Tape::Id Tape::log(Id a) {
    Eigen::VectorXd y = value(a).array().log();
    Id out = push(std::move(y));
    backward_ops_.back() = [this, out, a] {
        grad(a).array() += grad(out).array() / value(a).array();
    };
    return out;
}

Tape::Id Tape::concat(Id a, Id b) {
    Eigen::VectorXd v(value(a).size() + value(b).size());
    v << value(a), value(b);
    Id out = push(std::move(v));
    backward_ops_.back() = [this, out, a, b] {
        Eigen::Index na = value(a).size();
        grad(a) += grad(out).head(na);
        grad(b) += grad(out).tail(value(b).size());
    };
    return out;
}

Tape::Id Tape::concat3(Id a, Id b, Id c) { return concat(concat(a, b), c); }

Tape::Id Tape::dot(Id a, Id b) {
    Eigen::VectorXd v(1);
    v(0) = value(a).dot(value(b));
    Id out = push(std::move(v));
    backward_ops_.back() = [this, out, a, b] {
        double g = grad(out)(0);
        grad(a) += g * value(b);
        grad(b) += g * value(a);
    };
    return out;
}

Tape::Id Tape::stack_scalars(std::span<const Id> scalars) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(scalars.size()));
    for (std::size_t i = 0; i < scalars.size(); ++i) v(static_cast<Eigen::Index>(i)) = scalar(scalars[i]);
    Id out = push(std::move(v));
    std::vector<Id> ids(scalars.begin(), scalars.end());
    backward_ops_.back() = [this, out, ids = std::move(ids)] {
        for (std::size_t i = 0; i < ids.size(); ++i)
            grad(ids[i])(0) += grad(out)(static_cast<Eigen::Index>(i));
    };
    return out;
}

Tape::Id Tape::pick(Id a, Eigen::Index i) {
    Eigen::VectorXd v(1);
    v(0) = value(a)(i);
    Id out = push(std::move(v));
    backward_ops_.back() = [this, out, a, i] { grad(a)(i) += grad(out)(0); };
    return out;
}

Tape::Id Tape::weighted_sum(Id coeffs, std::span<const Id> vectors) {
    if (static_cast<std::size_t>(value(coeffs).size()) != vectors.size())
        throw std::invalid_argument("weighted_sum size mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(value(vectors[0]).size());
    for (std::size_t i = 0; i < vectors.size(); ++i)
        v += value(coeffs)(static_cast<Eigen::Index>(i)) * value(vectors[i]);
    Id out = push(std::move(v));
    std::vector<Id> ids(vectors.begin(), vectors.end());
    backward_ops_.back() = [this, out, coeffs, ids = std::move(ids)] {
        const Eigen::VectorXd& g = grad(out);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            Eigen::Index ei = static_cast<Eigen::Index>(i);
            grad(coeffs)(ei) += g.dot(value(ids[i]));
            grad(ids[i]) += value(coeffs)(ei) * g;
        }
    };
    return out;
}

Tape::Id Tape::gate_mix(Id gate, Id a, Id b) {
    double q = scalar(gate);
    Id out = push(q * value(a) + (1.0 - q) * value(b));
    backward_ops_.back() = [this, out, gate, a, b] {
        const Eigen::VectorXd& g = grad(out);
        double q = scalar(gate);
        grad(gate)(0) += g.dot(value(a) - value(b));
        grad(a) += q * g;
        grad(b) += (1.0 - q) * g;
    };
    return out;
}

Tape::Id Tape::scatter_add(Id coeffs, std::span<const Eigen::Index> ext_ids,
                           Eigen::Index ext_size) {
    if (static_cast<std::size_t>(value(coeffs).size()) != ext_ids.size())
        throw std::invalid_argument("scatter_add size mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(ext_size);
    for (std::size_t i = 0; i < ext_ids.size(); ++i)
        v(ext_ids[i]) += value(coeffs)(static_cast<Eigen::Index>(i));
    Id out = push(std::move(v));
    std::vector<Eigen::Index> ids(ext_ids.begin(), ext_ids.end());
    backward_ops_.back() = [this, out, coeffs, ids = std::move(ids)] {
        for (std::size_t i = 0; i < ids.size(); ++i)
            grad(coeffs)(static_cast<Eigen::Index>(i)) += grad(out)(ids[i]);
    };
    return out;
}

Tape::Id Tape::zero_pad(Id a, Eigen::Index n) {
    Eigen::Index na = value(a).size();
    if (n < na) throw std::invalid_argument("zero_pad target shorter than input");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v.head(na) = value(a);
    Id out = push(std::move(v));
    backward_ops_.back() = [this, out, a, na] { grad(a) += grad(out).head(na); };
    return out;
}

Tape::Id Tape::mask(Id a, Eigen::VectorXd mask) {
    Id out = push(value(a).cwiseProduct(mask));
    backward_ops_.back() = [this, out, a, mask = std::move(mask)] {
        grad(a) += grad(out).cwiseProduct(mask);
    };
    return out;
}

Tape::Id Tape::scaled_sum(std::span<const Id> scalars, double s) {
    Eigen::VectorXd v(1);
    double total = 0.0;
    for (Id id : scalars) total += scalar(id);
    v(0) = s * total;
    Id out = push(std::move(v));
    std::vector<Id> ids(scalars.begin(), scalars.end());
    backward_ops_.back() = [this, out, s, ids = std::move(ids)] {
        double g = s * grad(out)(0);
        for (Id id : ids) grad(id)(0) += g;
    };
    return out;
}

void Tape::backward(Id loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("backward needs a 1-dim loss node");
    for (auto& node : nodes_) node.grad = Eigen::VectorXd::Zero(node.value.size());
    grad(loss)(0) = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;)
        if (backward_ops_[i]) backward_ops_[i]();
}

}  // namespace drqr::ad
