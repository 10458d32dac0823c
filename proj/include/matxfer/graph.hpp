#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "matxfer/tensor.hpp"

namespace matxfer {

// Bump when the op set or any backward rule changes meaning; checkpoints
// record it so stale files are rejected instead of silently misread.
constexpr std::uint32_t kOpCatalogVersion = 1;

enum class Op {
    Input,
    Param,
    Conv2d,        // stride 1 or 2, zero 'same' padding K/2
    Upsample2,     // nearest neighbor x2
    LeakyRelu,     // slope 0.2
    InstanceNorm,  // per channel, eps 1e-5, no affine
    Concat,        // along channels
    GlobalAvgPool, // [C,H,W] -> [C]
    FullyConnected,
    Sigmoid,
    Tanh,
    Add,           // same shape, or [C] broadcast against [C,H,W]
    Sub,
    Mul,
    ScalarMul,
    Abs,
    LogPlusC,      // log(x + c)
    MeanReduce,    // -> [1]
};

const char* op_name(Op op);

struct GradCheckReport {
    double worst_rel_err = 0.0;
    int worst_node = -1;         // parameter node holding the worst entry
    std::string worst_param;
    std::size_t worst_index = 0; // flat index within that parameter
    std::size_t checked = 0;
    bool passed(double tolerance) const { return worst_rel_err < tolerance; }
};

// Reverse-mode graph over the fixed op catalog above. Nodes are appended in
// topological order by construction (an op can only reference existing ids).
// forward() evaluates every node; value buffers are allocated once and reused
// across calls, so per-evaluation memory is constant after the first pass.
// Single-writer: forward/backward mutate cached state.
class Graph {
public:
    int input(std::vector<int> shape, std::string name);
    int param(Tensor value, std::string name);

    // x [C,H,W], w [O,C,K,K], b [O] (pass -1 for no bias) -> [O,Ho,Wo]
    int conv2d(int x, int w, int b, int stride = 1);
    int upsample2(int x);
    int leaky_relu(int x);
    int instance_norm(int x);
    int concat(int a, int b);
    int global_avg_pool(int x);
    // x [N], w [M,N], b [M] -> [M]
    int fully_connected(int x, int w, int b);
    int sigmoid(int x);
    int tanh(int x);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scalar_mul(int x, float s);
    int abs(int x);
    int log_plus(int x, float c);
    int mean_reduce(int x);

    void set_input(int node, const Tensor& v);
    void forward();
    // forward(), then the node's value; MeanReduce nodes report their
    // internal double accumulator so difference quotients are not limited
    // by float32 quantization of the loss.
    double forward_scalar(int node);

    // Scalar loss; seeds the cotangent 1 and accumulates into every node's
    // grad. Rejected if forward has not run since the last structural change.
    void backward(int loss_node);
    // Seed an arbitrary node with an externally computed cotangent, for loss
    // terms that are differentiated outside the graph.
    void backward_from(int node, const Tensor& cotangent);

    const Tensor& value(int node) const;
    const Tensor& grad(int node) const;
    Tensor& param_value(int node);
    Tensor& grad_mutable(int node);

    const std::vector<int>& params() const { return params_; }
    const std::string& node_name(int node) const;
    Op node_op(int node) const;
    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Bytes held by activation and gradient buffers (everything that is not
    // a parameter), for the constant-memory streaming check.
    std::size_t activation_bytes() const;

    // Central differences, step 1e-3, against freshly computed backward
    // gradients. Relative error uses max(1e-2, |analytic|, |numeric|) as the
    // denominator: below that floor the difference quotient is float32 noise
    // and an absolute comparison at 1e-4-ish scale is the honest test.
    GradCheckReport gradient_check(int loss_node, double tolerance);
    // Same comparison against caller-supplied gradients, one tensor per
    // entry of params() in order.
    GradCheckReport gradient_check(int loss_node, double tolerance,
                                   const std::vector<Tensor>& grads);

private:
    struct Node {
        Op op;
        std::string name;
        int a = -1, b = -1, c = -1;
        int stride = 1;
        float scalar = 0.0f;
        Tensor value;
        Tensor grad;
        std::vector<double> aux;
    };

    int add_node(Node n);
    const Node& at(int id) const;
    Node& at(int id);
    void eval(int id);
    void propagate(int id);
    void zero_grads();

    std::vector<Node> nodes_;
    std::vector<int> params_;
    bool forward_done_ = false;
};

} // namespace matxfer
