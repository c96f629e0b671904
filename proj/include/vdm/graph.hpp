#pragma once

#include <string>
#include <vector>

#include "vdm/tensor.hpp"

namespace vdm {

// Named parameter storage shared by networks and the optimizer. Gradients are
// accumulated here by Graph::backward.
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    int add(std::string name, Tensor init) {
        Entry e;
        e.name = std::move(name);
        e.grad = Tensor(init.shape());
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        return static_cast<int>(entries_.size()) - 1;
    }

    Entry& operator[](int id) { return entries_[static_cast<std::size_t>(id)]; }
    const Entry& operator[](int id) const { return entries_[static_cast<std::size_t>(id)]; }
    int count() const { return static_cast<int>(entries_.size()); }

    void zero_grad() {
        for (auto& e : entries_) e.grad.fill(0.0);
    }

  private:
    std::vector<Entry> entries_;
};

// Reverse-mode automatic differentiation on a tape of tensor-valued nodes.
// Node granularity is whole vectors/matrices (matvec, elementwise maps,
// reductions) so small-network training stays cheap. The tape is acyclic by
// construction: an op may only reference already-created node ids, and the
// backward pass walks the tape once in reverse creation order.
class Graph {
  public:
    explicit Graph(ParamStore* params) : params_(params) {}

    // Leaf nodes.
    int input(Tensor v);             // constant w.r.t. parameters (still receives a gradient)
    int input_scalar(double v);
    int param(int param_id);         // tracked parameter leaf

    // Elementwise binary (matching shapes).
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int div(int a, int b);

    // Scalar-broadcast ops: s is a node of shape {1}.
    int smul(int s, int v);          // s * v elementwise

    // Constant-coefficient ops.
    int scale(int a, double c);      // c * a
    int addc(int a, double c);       // a + c (broadcast constant)

    // Elementwise maps.
    int tanh_(int a);
    int exp_(int a);
    int sigmoid_(int a);
    int sqrt_(int a);
    int sin_(int a);
    int cos_(int a);

    // Linear algebra and reductions.
    int matvec(int w, int x);        // w: {m,n}, x: {n} -> {m}
    int sum(int a);                  // -> scalar
    int sqsum(int a);                // sum of squares -> scalar
    int dot(int a, int b);           // -> scalar
    int concat(int a, int b);        // 1-D concatenation

    // Sinusoidal conditioning features of a scalar node s (log-SNR / 4):
    // [s/4, sin(2^j s/4), cos(2^j s/4)] for j = 0..3 -> shape {9}.
    int time_features(int s);
    static constexpr std::size_t kTimeFeatureDim = 9;

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    // Reverse pass from a scalar loss node. Seeds d(loss)/d(loss) = 1, visits
    // each node exactly once, and accumulates parameter gradients into the
    // ParamStore (adding to whatever is already there, so batches can sum).
    void backward(int loss);

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    enum class Op {
        Input, Param, Add, Sub, Mul, Div, SMul, Scale, AddC,
        Tanh, Exp, Sigmoid, Sqrt, Sin, Cos,
        MatVec, Sum, SqSum, Dot, Concat, TimeFeatures,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        double c = 0.0;   // constant coefficient for Scale/AddC
        int param_id = -1;
        Tensor val;
        Tensor grad;
    };

    int push(Node n);
    Node& at(int id) { return nodes_[static_cast<std::size_t>(id)]; }

    ParamStore* params_;
    std::vector<Node> nodes_;
};

}  // namespace vdm
