#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace drqr::ad {

/// Named parameter tensor with an accumulating gradient buffer.
struct Tensor {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    Tensor() = default;
    Tensor(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)),
          value(Eigen::MatrixXd::Zero(rows, cols)),
          grad(Eigen::MatrixXd::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
    Eigen::Index size() const { return value.size(); }
};

/// Reverse-mode tape over vector-valued nodes. Parameters participate as
/// Tensor references; their gradients accumulate across backward() calls
/// until zero_grad(), which is what batch accumulation relies on.
class Tape {
  public:
    using Id = std::int32_t;

    Id constant(Eigen::VectorXd v);
    Id zeros(Eigen::Index n);

    /// b interpreted as a column vector (b.col(0)).
    Id param_vector(Tensor& b);
    /// W * x
    Id matvec(Tensor& w, Id x);
    /// row `row` of the embedding matrix, as a vector
    Id embed(Tensor& table, Eigen::Index row);
    /// dot(w.col(0), x) + bias(0,0), 1-dim result
    Id affine_scalar(Tensor& w, Id x, Tensor& bias);

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id hadamard(Id a, Id b);
    Id scale(Id a, double s);
    /// elementwise a + s*(b - a) is not needed; this is a*sa + b*sb
    Id axpby(double sa, Id a, double sb, Id b);
    /// (1 - a) elementwise
    Id one_minus(Id a);

    Id sigmoid(Id a);
    Id tanh(Id a);
    Id softmax(Id a);
    Id log(Id a);

    Id concat(Id a, Id b);
    Id concat3(Id a, Id b, Id c);
    Id dot(Id a, Id b);
    /// stacks 1-dim nodes into one vector node
    Id stack_scalars(std::span<const Id> scalars);
    /// 1-dim node holding a[i]
    Id pick(Id a, Eigen::Index i);
    /// sum_i a_i * b_i where a is a coefficient vector and b_i are equal-size
    /// nodes (attention-weighted context)
    Id weighted_sum(Id coeffs, std::span<const Id> vectors);
    /// gate*a + (1-gate)*b with a 1-dim gate node
    Id gate_mix(Id gate, Id a, Id b);
    /// scatter-add of coeffs into an ext_size vector at positions ext_ids
    Id scatter_add(Id coeffs, std::span<const Eigen::Index> ext_ids, Eigen::Index ext_size);
    /// zero-pad to length n (n >= len(a))
    Id zero_pad(Id a, Eigen::Index n);
    /// elementwise multiply by a constant mask (dropout)
    Id mask(Id a, Eigen::VectorXd mask);
    /// sum of 1-dim nodes, scaled
    Id scaled_sum(std::span<const Id> scalars, double scale);

    const Eigen::VectorXd& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    double scalar(Id id) const { return value(id)(0); }

    /// Runs reverse accumulation from a 1-dim loss node. Node gradients are
    /// reset first; tensor gradients accumulate.
    void backward(Id loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Eigen::VectorXd value;
        Eigen::VectorXd grad;
    };

    Id push(Eigen::VectorXd value);
    Eigen::VectorXd& grad(Id id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    std::vector<Node> nodes_;
    std::vector<std::function<void()>> backward_ops_;  // one per node, may be empty
};

}  // namespace drqr::ad
