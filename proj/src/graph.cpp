#include "matxfer/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace matxfer {

namespace {

[[noreturn]] void shape_fail(const char* op, int id, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + " node " + std::to_string(id) + ": " + detail);
}

bool is_chw(const Tensor& t) { return t.ndim() == 3; }

} // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Param: return "param";
        case Op::Conv2d: return "conv2d";
        case Op::Upsample2: return "upsample2";
        case Op::LeakyRelu: return "leaky-relu";
        case Op::InstanceNorm: return "instance-norm";
        case Op::Concat: return "concat";
        case Op::GlobalAvgPool: return "global-average-pool";
        case Op::FullyConnected: return "fully-connected";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::ScalarMul: return "scalar-mul";
        case Op::Abs: return "abs";
        case Op::LogPlusC: return "log-plus-c";
        case Op::MeanReduce: return "mean-reduce";
    }
    return "?";
}

int Graph::add_node(Node n) {
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::at(int id) const {
    if (id < 0 || id >= node_count())
        throw std::out_of_range("graph: no node " + std::to_string(id));
    return nodes_[static_cast<std::size_t>(id)];
}

Graph::Node& Graph::at(int id) {
    return const_cast<Node&>(static_cast<const Graph*>(this)->at(id));
}

int Graph::input(std::vector<int> shape, std::string name) {
    Node n;
    n.op = Op::Input;
    n.name = std::move(name);
    n.value = Tensor(std::move(shape));
    return add_node(std::move(n));
}

int Graph::param(Tensor value, std::string name) {
    Node n;
    n.op = Op::Param;
    n.name = std::move(name);
    n.value = std::move(value);
    int id = add_node(std::move(n));
    params_.push_back(id);
    return id;
}

int Graph::conv2d(int x, int w, int b, int stride) {
    const Tensor& xv = at(x).value;
    const Tensor& wv = at(w).value;
    int id = node_count();
    if (!is_chw(xv)) shape_fail("conv2d", id, "input must be [C,H,W], got " + xv.shape_str());
    if (wv.ndim() != 4 || wv.dim(2) != wv.dim(3))
        shape_fail("conv2d", id, "weight must be [O,C,K,K], got " + wv.shape_str());
    if (wv.dim(1) != xv.dim(0))
        shape_fail("conv2d", id, "weight " + wv.shape_str() + " expects " +
                                 std::to_string(wv.dim(1)) + " input channels, input is " + xv.shape_str());
    if (b >= 0) {
        const Tensor& bv = at(b).value;
        if (bv.ndim() != 1 || bv.dim(0) != wv.dim(0))
            shape_fail("conv2d", id, "bias " + bv.shape_str() + " must be [" + std::to_string(wv.dim(0)) + "]");
    }
    if (stride != 1 && stride != 2)
        shape_fail("conv2d", id, "stride must be 1 or 2");
    int k = wv.dim(2), p = k / 2;
    int ho = (xv.dim(1) + 2 * p - k) / stride + 1;
    int wo = (xv.dim(2) + 2 * p - k) / stride + 1;
    if (ho < 1 || wo < 1) shape_fail("conv2d", id, "output would be empty for input " + xv.shape_str());
    Node n;
    n.op = Op::Conv2d;
    n.a = x; n.b = w; n.c = b;
    n.stride = stride;
    n.value = Tensor({wv.dim(0), ho, wo});
    return add_node(std::move(n));
}

int Graph::upsample2(int x) {
    const Tensor& xv = at(x).value;
    if (!is_chw(xv)) shape_fail("upsample2", node_count(), "input must be [C,H,W], got " + xv.shape_str());
    Node n;
    n.op = Op::Upsample2;
    n.a = x;
    n.value = Tensor({xv.dim(0), xv.dim(1) * 2, xv.dim(2) * 2});
    return add_node(std::move(n));
}

int Graph::leaky_relu(int x) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = x;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

int Graph::instance_norm(int x) {
    const Tensor& xv = at(x).value;
    if (!is_chw(xv)) shape_fail("instance-norm", node_count(), "input must be [C,H,W], got " + xv.shape_str());
    Node n;
    n.op = Op::InstanceNorm;
    n.a = x;
    n.value = Tensor(xv.shape);
    n.aux.assign(static_cast<std::size_t>(xv.dim(0)) * 2, 0.0);
    return add_node(std::move(n));
}

int Graph::concat(int a, int b) {
    const Tensor& av = at(a).value;
    const Tensor& bv = at(b).value;
    int id = node_count();
    if (!is_chw(av) || !is_chw(bv))
        shape_fail("concat", id, "inputs must be [C,H,W], got " + av.shape_str() + " and " + bv.shape_str());
    if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        shape_fail("concat", id, "spatial sizes differ: " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::Concat;
    n.a = a; n.b = b;
    n.value = Tensor({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    return add_node(std::move(n));
}

int Graph::global_avg_pool(int x) {
    const Tensor& xv = at(x).value;
    if (!is_chw(xv)) shape_fail("global-average-pool", node_count(), "input must be [C,H,W], got " + xv.shape_str());
    Node n;
    n.op = Op::GlobalAvgPool;
    n.a = x;
    n.value = Tensor({xv.dim(0)});
    return add_node(std::move(n));
}

int Graph::fully_connected(int x, int w, int b) {
    const Tensor& xv = at(x).value;
    const Tensor& wv = at(w).value;
    const Tensor& bv = at(b).value;
    int id = node_count();
    if (xv.ndim() != 1) shape_fail("fully-connected", id, "input must be [N], got " + xv.shape_str());
    if (wv.ndim() != 2 || wv.dim(1) != xv.dim(0))
        shape_fail("fully-connected", id, "weight " + wv.shape_str() + " does not match input " + xv.shape_str());
    if (bv.ndim() != 1 || bv.dim(0) != wv.dim(0))
        shape_fail("fully-connected", id, "bias " + bv.shape_str() + " must be [" + std::to_string(wv.dim(0)) + "]");
    Node n;
    n.op = Op::FullyConnected;
    n.a = x; n.b = w; n.c = b;
    n.value = Tensor({wv.dim(0)});
    return add_node(std::move(n));
}

int Graph::sigmoid(int x) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = x;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

int Graph::tanh(int x) {
    Node n;
    n.op = Op::Tanh;
    n.a = x;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

namespace {

// add supports [C] against [C,H,W] in either order; sub/mul are same-shape.
enum class Broadcast { None, AVec, BVec };

} // namespace

int Graph::add(int a, int b) {
    const Tensor& av = at(a).value;
    const Tensor& bv = at(b).value;
    int id = node_count();
    Node n;
    n.op = Op::Add;
    n.a = a; n.b = b;
    if (av.same_shape(bv)) {
        n.value = Tensor(av.shape);
    } else if (av.ndim() == 1 && bv.ndim() == 3 && av.dim(0) == bv.dim(0)) {
        n.value = Tensor(bv.shape);
    } else if (bv.ndim() == 1 && av.ndim() == 3 && bv.dim(0) == av.dim(0)) {
        n.value = Tensor(av.shape);
    } else {
        shape_fail("add", id, "incompatible shapes " + av.shape_str() + " and " + bv.shape_str());
    }
    return add_node(std::move(n));
}

int Graph::sub(int a, int b) {
    const Tensor& av = at(a).value;
    const Tensor& bv = at(b).value;
    if (!av.same_shape(bv))
        shape_fail("sub", node_count(), "shapes differ: " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::Sub;
    n.a = a; n.b = b;
    n.value = Tensor(av.shape);
    return add_node(std::move(n));
}

int Graph::mul(int a, int b) {
    const Tensor& av = at(a).value;
    const Tensor& bv = at(b).value;
    if (!av.same_shape(bv))
        shape_fail("mul", node_count(), "shapes differ: " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::Mul;
    n.a = a; n.b = b;
    n.value = Tensor(av.shape);
    return add_node(std::move(n));
}

int Graph::scalar_mul(int x, float s) {
    Node n;
    n.op = Op::ScalarMul;
    n.a = x;
    n.scalar = s;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

int Graph::abs(int x) {
    Node n;
    n.op = Op::Abs;
    n.a = x;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

int Graph::log_plus(int x, float c) {
    Node n;
    n.op = Op::LogPlusC;
    n.a = x;
    n.scalar = c;
    n.value = Tensor(at(x).value.shape);
    return add_node(std::move(n));
}

int Graph::mean_reduce(int x) {
    Node n;
    n.op = Op::MeanReduce;
    n.a = x;
    n.value = Tensor({1});
    n.aux.assign(1, 0.0);
    return add_node(std::move(n));
}

void Graph::set_input(int node, const Tensor& v) {
    Node& n = at(node);
    if (n.op != Op::Input)
        throw std::invalid_argument("set_input: node " + std::to_string(node) + " is not an input");
    if (!n.value.same_shape(v))
        shape_fail("input", node, "expected " + n.value.shape_str() + ", got " + v.shape_str());
    std::copy(v.data.begin(), v.data.end(), n.value.data.begin());
    forward_done_ = false;
}

void Graph::eval(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;

        case Op::Conv2d: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& w = nodes_[n.b].value;
            const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
            const int O = w.dim(0), K = w.dim(2), P = K / 2, S = n.stride;
            const int Ho = n.value.dim(1), Wo = n.value.dim(2);
            float* od = n.value.data.data();
            for (int o = 0; o < O; ++o) {
                const float bias = n.c >= 0 ? nodes_[n.c].value.data[o] : 0.f;
                std::fill(od + static_cast<std::size_t>(o) * Ho * Wo,
                          od + static_cast<std::size_t>(o + 1) * Ho * Wo, bias);
            }
            for (int o = 0; o < O; ++o) {
                for (int c = 0; c < C; ++c) {
                    const float* xc = x.data.data() + static_cast<std::size_t>(c) * H * W;
                    const float* wk = w.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const float wv = wk[ky * K + kx];
                            const int offx = kx - P;
                            int ox0 = 0;
                            if (offx < 0) ox0 = (-offx + S - 1) / S;
                            int ox1 = (W - 1 - offx) / S;
                            if (ox1 > Wo - 1) ox1 = Wo - 1;
                            for (int oy = 0; oy < Ho; ++oy) {
                                const int iy = oy * S + ky - P;
                                if (iy < 0 || iy >= H) continue;
                                const float* xrow = xc + static_cast<std::size_t>(iy) * W + offx;
                                float* orow = od + (static_cast<std::size_t>(o) * Ho + oy) * Wo;
                                if (S == 1) {
                                    for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += wv * xrow[ox];
                                } else {
                                    for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += wv * xrow[ox * S];
                                }
                            }
                        }
                    }
                }
            }
            break;
        }

        case Op::Upsample2: {
            const Tensor& x = nodes_[n.a].value;
            const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
            for (int c = 0; c < C; ++c) {
                const float* xc = x.data.data() + static_cast<std::size_t>(c) * H * W;
                float* oc = n.value.data.data() + static_cast<std::size_t>(c) * 4 * H * W;
                for (int y = 0; y < 2 * H; ++y) {
                    const float* xrow = xc + static_cast<std::size_t>(y / 2) * W;
                    float* orow = oc + static_cast<std::size_t>(y) * 2 * W;
                    for (int xpos = 0; xpos < 2 * W; ++xpos) orow[xpos] = xrow[xpos / 2];
                }
            }
            break;
        }

        case Op::LeakyRelu: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i) {
                float v = x.data[i];
                n.value.data[i] = v >= 0.0f ? v : 0.2f * v;
            }
            break;
        }

        case Op::InstanceNorm: {
            const Tensor& x = nodes_[n.a].value;
            const int C = x.dim(0);
            const std::size_t N = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
            for (int c = 0; c < C; ++c) {
                const float* xc = x.data.data() + static_cast<std::size_t>(c) * N;
                float* oc = n.value.data.data() + static_cast<std::size_t>(c) * N;
                double sum = 0.0, sumsq = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    double v = xc[i];
                    sum += v;
                    sumsq += v * v;
                }
                double mean = sum / static_cast<double>(N);
                double var = sumsq / static_cast<double>(N) - mean * mean;
                if (var < 0.0) var = 0.0;
                double istd = 1.0 / std::sqrt(var + 1e-5);
                n.aux[static_cast<std::size_t>(c) * 2] = mean;
                n.aux[static_cast<std::size_t>(c) * 2 + 1] = istd;
                for (std::size_t i = 0; i < N; ++i)
                    oc[i] = static_cast<float>((xc[i] - mean) * istd);
            }
            break;
        }

        case Op::Concat: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            std::copy(a.data.begin(), a.data.end(), n.value.data.begin());
            std::copy(b.data.begin(), b.data.end(), n.value.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
            break;
        }

        case Op::GlobalAvgPool: {
            const Tensor& x = nodes_[n.a].value;
            const int C = x.dim(0);
            const std::size_t N = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
            for (int c = 0; c < C; ++c) {
                const float* xc = x.data.data() + static_cast<std::size_t>(c) * N;
                double sum = 0.0;
                for (std::size_t i = 0; i < N; ++i) sum += xc[i];
                n.value.data[static_cast<std::size_t>(c)] = static_cast<float>(sum / static_cast<double>(N));
            }
            break;
        }

        case Op::FullyConnected: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& w = nodes_[n.b].value;
            const Tensor& b = nodes_[n.c].value;
            const int M = w.dim(0), N = w.dim(1);
            for (int m = 0; m < M; ++m) {
                const float* wm = w.data.data() + static_cast<std::size_t>(m) * N;
                float acc = b.data[static_cast<std::size_t>(m)];
                for (int i = 0; i < N; ++i) acc += wm[i] * x.data[static_cast<std::size_t>(i)];
                n.value.data[static_cast<std::size_t>(m)] = acc;
            }
            break;
        }

        case Op::Sigmoid: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i)
                n.value.data[i] = 1.0f / (1.0f + std::exp(-x.data[i]));
            break;
        }

        case Op::Tanh: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i)
                n.value.data[i] = std::tanh(x.data[i]);
            break;
        }

        case Op::Add: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            if (a.same_shape(b)) {
                for (std::size_t i = 0; i < a.numel(); ++i)
                    n.value.data[i] = a.data[i] + b.data[i];
            } else {
                const Tensor& big = a.ndim() == 3 ? a : b;
                const Tensor& vec = a.ndim() == 3 ? b : a;
                const std::size_t N = static_cast<std::size_t>(big.dim(1)) * big.dim(2);
                for (int c = 0; c < big.dim(0); ++c) {
                    const float v = vec.data[static_cast<std::size_t>(c)];
                    const float* src = big.data.data() + static_cast<std::size_t>(c) * N;
                    float* dst = n.value.data.data() + static_cast<std::size_t>(c) * N;
                    for (std::size_t i = 0; i < N; ++i) dst[i] = src[i] + v;
                }
            }
            break;
        }

        case Op::Sub: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            for (std::size_t i = 0; i < a.numel(); ++i)
                n.value.data[i] = a.data[i] - b.data[i];
            break;
        }

        case Op::Mul: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            for (std::size_t i = 0; i < a.numel(); ++i)
                n.value.data[i] = a.data[i] * b.data[i];
            break;
        }

        case Op::ScalarMul: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i)
                n.value.data[i] = n.scalar * x.data[i];
            break;
        }

        case Op::Abs: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i)
                n.value.data[i] = std::fabs(x.data[i]);
            break;
        }

        case Op::LogPlusC: {
            const Tensor& x = nodes_[n.a].value;
            for (std::size_t i = 0; i < x.numel(); ++i) {
                float arg = x.data[i] + n.scalar;
                if (!(arg > 0.0f))
                    throw std::domain_error("log-plus-c node " + std::to_string(id) +
                                            ": argument " + std::to_string(arg) + " not positive");
                n.value.data[i] = std::log(arg);
            }
            break;
        }

        case Op::MeanReduce: {
            const Tensor& x = nodes_[n.a].value;
            double sum = 0.0;
            for (std::size_t i = 0; i < x.numel(); ++i) sum += x.data[i];
            double mean = sum / static_cast<double>(x.numel());
            n.aux[0] = mean;
            n.value.data[0] = static_cast<float>(mean);
            break;
        }
    }
}

void Graph::forward() {
    for (int i = 0; i < node_count(); ++i) eval(i);
    forward_done_ = true;
}

double Graph::forward_scalar(int node) {
    forward();
    const Node& n = at(node);
    if (n.value.numel() != 1)
        throw std::invalid_argument("forward_scalar: node " + std::to_string(node) + " is not scalar");
    return n.op == Op::MeanReduce ? n.aux[0] : static_cast<double>(n.value.data[0]);
}

void Graph::zero_grads() {
    for (Node& n : nodes_) {
        if (n.grad.same_shape(n.value) && !n.grad.data.empty())
            n.grad.zero();
        else
            n.grad = Tensor(n.value.shape);
    }
}

void Graph::propagate(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;

        case Op::Conv2d: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& w = nodes_[n.b].value;
            Tensor& gx = nodes_[n.a].grad;
            Tensor& gw = nodes_[n.b].grad;
            const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
            const int O = w.dim(0), K = w.dim(2), P = K / 2, S = n.stride;
            const int Ho = n.value.dim(1), Wo = n.value.dim(2);
            if (n.c >= 0) {
                Tensor& gb = nodes_[n.c].grad;
                for (int o = 0; o < O; ++o) {
                    const float* go = g.data.data() + static_cast<std::size_t>(o) * Ho * Wo;
                    float acc = 0.0f;
                    for (int i = 0; i < Ho * Wo; ++i) acc += go[i];
                    gb.data[static_cast<std::size_t>(o)] += acc;
                }
            }
            for (int o = 0; o < O; ++o) {
                for (int c = 0; c < C; ++c) {
                    const float* xc = x.data.data() + static_cast<std::size_t>(c) * H * W;
                    float* gxc = gx.data.data() + static_cast<std::size_t>(c) * H * W;
                    const float* wk = w.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
                    float* gwk = gw.data.data() + (static_cast<std::size_t>(o) * C + c) * K * K;
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const float wv = wk[ky * K + kx];
                            const int offx = kx - P;
                            int ox0 = 0;
                            if (offx < 0) ox0 = (-offx + S - 1) / S;
                            int ox1 = (W - 1 - offx) / S;
                            if (ox1 > Wo - 1) ox1 = Wo - 1;
                            float wacc = 0.0f;
                            for (int oy = 0; oy < Ho; ++oy) {
                                const int iy = oy * S + ky - P;
                                if (iy < 0 || iy >= H) continue;
                                const float* xrow = xc + static_cast<std::size_t>(iy) * W + offx;
                                float* gxrow = gxc + static_cast<std::size_t>(iy) * W + offx;
                                const float* grow = g.data.data() + (static_cast<std::size_t>(o) * Ho + oy) * Wo;
                                for (int ox = ox0; ox <= ox1; ++ox) {
                                    const float gv = grow[ox];
                                    wacc += xrow[ox * S] * gv;
                                    gxrow[ox * S] += wv * gv;
                                }
                            }
                            gwk[ky * K + kx] += wacc;
                        }
                    }
                }
            }
            break;
        }

        case Op::Upsample2: {
            Tensor& gx = nodes_[n.a].grad;
            const int C = gx.dim(0), H = gx.dim(1), W = gx.dim(2);
            for (int c = 0; c < C; ++c) {
                float* gxc = gx.data.data() + static_cast<std::size_t>(c) * H * W;
                const float* gc = g.data.data() + static_cast<std::size_t>(c) * 4 * H * W;
                for (int y = 0; y < 2 * H; ++y) {
                    const float* grow = gc + static_cast<std::size_t>(y) * 2 * W;
                    float* gxrow = gxc + static_cast<std::size_t>(y / 2) * W;
                    for (int xpos = 0; xpos < 2 * W; ++xpos) gxrow[xpos / 2] += grow[xpos];
                }
            }
            break;
        }

        case Op::LeakyRelu: {
            const Tensor& x = nodes_[n.a].value;
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < x.numel(); ++i)
                gx.data[i] += (x.data[i] >= 0.0f ? 1.0f : 0.2f) * g.data[i];
            break;
        }

        case Op::InstanceNorm: {
            Tensor& gx = nodes_[n.a].grad;
            const int C = n.value.dim(0);
            const std::size_t N = static_cast<std::size_t>(n.value.dim(1)) * n.value.dim(2);
            for (int c = 0; c < C; ++c) {
                const float* xh = n.value.data.data() + static_cast<std::size_t>(c) * N;
                const float* gc = g.data.data() + static_cast<std::size_t>(c) * N;
                float* gxc = gx.data.data() + static_cast<std::size_t>(c) * N;
                const double istd = n.aux[static_cast<std::size_t>(c) * 2 + 1];
                double mg = 0.0, mgx = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    mg += gc[i];
                    mgx += static_cast<double>(gc[i]) * xh[i];
                }
                mg /= static_cast<double>(N);
                mgx /= static_cast<double>(N);
                for (std::size_t i = 0; i < N; ++i)
                    gxc[i] += static_cast<float>(istd * (gc[i] - mg - xh[i] * mgx));
            }
            break;
        }

        case Op::Concat: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < ga.numel(); ++i) ga.data[i] += g.data[i];
            for (std::size_t i = 0; i < gb.numel(); ++i) gb.data[i] += g.data[ga.numel() + i];
            break;
        }

        case Op::GlobalAvgPool: {
            Tensor& gx = nodes_[n.a].grad;
            const int C = gx.dim(0);
            const std::size_t N = static_cast<std::size_t>(gx.dim(1)) * gx.dim(2);
            const float inv = 1.0f / static_cast<float>(N);
            for (int c = 0; c < C; ++c) {
                const float gv = g.data[static_cast<std::size_t>(c)] * inv;
                float* gxc = gx.data.data() + static_cast<std::size_t>(c) * N;
                for (std::size_t i = 0; i < N; ++i) gxc[i] += gv;
            }
            break;
        }

        case Op::FullyConnected: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& w = nodes_[n.b].value;
            Tensor& gx = nodes_[n.a].grad;
            Tensor& gw = nodes_[n.b].grad;
            Tensor& gb = nodes_[n.c].grad;
            const int M = w.dim(0), N = w.dim(1);
            for (int m = 0; m < M; ++m) {
                const float gm = g.data[static_cast<std::size_t>(m)];
                const float* wm = w.data.data() + static_cast<std::size_t>(m) * N;
                float* gwm = gw.data.data() + static_cast<std::size_t>(m) * N;
                gb.data[static_cast<std::size_t>(m)] += gm;
                for (int i = 0; i < N; ++i) {
                    gx.data[static_cast<std::size_t>(i)] += wm[i] * gm;
                    gwm[i] += x.data[static_cast<std::size_t>(i)] * gm;
                }
            }
            break;
        }

        case Op::Sigmoid: {
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < n.value.numel(); ++i) {
                const float s = n.value.data[i];
                gx.data[i] += s * (1.0f - s) * g.data[i];
            }
            break;
        }

        case Op::Tanh: {
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < n.value.numel(); ++i) {
                const float t = n.value.data[i];
                gx.data[i] += (1.0f - t * t) * g.data[i];
            }
            break;
        }

        case Op::Add: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            if (ga.same_shape(gb)) {
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    ga.data[i] += g.data[i];
                    gb.data[i] += g.data[i];
                }
            } else {
                Tensor& gbig = ga.ndim() == 3 ? ga : gb;
                Tensor& gvec = ga.ndim() == 3 ? gb : ga;
                const std::size_t N = static_cast<std::size_t>(gbig.dim(1)) * gbig.dim(2);
                for (int c = 0; c < gbig.dim(0); ++c) {
                    const float* src = g.data.data() + static_cast<std::size_t>(c) * N;
                    float* dst = gbig.data.data() + static_cast<std::size_t>(c) * N;
                    float acc = 0.0f;
                    for (std::size_t i = 0; i < N; ++i) {
                        dst[i] += src[i];
                        acc += src[i];
                    }
                    gvec.data[static_cast<std::size_t>(c)] += acc;
                }
            }
            break;
        }

        case Op::Sub: {
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += g.data[i];
                gb.data[i] -= g.data[i];
            }
            break;
        }

        case Op::Mul: {
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            Tensor& ga = nodes_[n.a].grad;
            Tensor& gb = nodes_[n.b].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga.data[i] += b.data[i] * g.data[i];
                gb.data[i] += a.data[i] * g.data[i];
            }
            break;
        }

        case Op::ScalarMul: {
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) gx.data[i] += n.scalar * g.data[i];
            break;
        }

        case Op::Abs: {
            const Tensor& x = nodes_[n.a].value;
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const float v = x.data[i];
                const float s = v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f);
                gx.data[i] += s * g.data[i];
            }
            break;
        }

        case Op::LogPlusC: {
            const Tensor& x = nodes_[n.a].value;
            Tensor& gx = nodes_[n.a].grad;
            for (std::size_t i = 0; i < g.numel(); ++i)
                gx.data[i] += g.data[i] / (x.data[i] + n.scalar);
            break;
        }

        case Op::MeanReduce: {
            Tensor& gx = nodes_[n.a].grad;
            const float gv = g.data[0] / static_cast<float>(gx.numel());
            for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gv;
            break;
        }
    }
}

void Graph::backward(int loss_node) {
    const Node& n = at(loss_node);
    if (n.value.numel() != 1)
        throw std::invalid_argument("backward: node " + std::to_string(loss_node) + " is not scalar");
    backward_from(loss_node, Tensor::scalar(1.0f));
}

void Graph::backward_from(int node, const Tensor& cotangent) {
    Node& n = at(node);
    if (!forward_done_)
        throw std::logic_error("backward before forward");
    if (!cotangent.same_shape(n.value))
        shape_fail("backward_from", node,
                   "cotangent " + cotangent.shape_str() + " does not match value " + n.value.shape_str());
    zero_grads();
    std::copy(cotangent.data.begin(), cotangent.data.end(), n.grad.data.begin());
    for (int i = node; i >= 0; --i) propagate(i);
}

const Tensor& Graph::value(int node) const { return at(node).value; }

const Tensor& Graph::grad(int node) const {
    const Node& n = at(node);
    if (n.grad.data.empty())
        throw std::logic_error("grad: backward has not run");
    return n.grad;
}

Tensor& Graph::param_value(int node) {
    Node& n = at(node);
    if (n.op != Op::Param)
        throw std::invalid_argument("param_value: node " + std::to_string(node) + " is not a parameter");
    return n.value;
}

Tensor& Graph::grad_mutable(int node) {
    Node& n = at(node);
    if (n.grad.data.empty())
        throw std::logic_error("grad_mutable: backward has not run");
    return n.grad;
}

const std::string& Graph::node_name(int node) const { return at(node).name; }

Op Graph::node_op(int node) const { return at(node).op; }

std::size_t Graph::activation_bytes() const {
    std::size_t total = 0;
    for (const Node& n : nodes_) {
        if (n.op == Op::Param) continue;
        total += n.value.data.capacity() * sizeof(float);
        total += n.grad.data.capacity() * sizeof(float);
        total += n.aux.capacity() * sizeof(double);
    }
    return total;
}

GradCheckReport Graph::gradient_check(int loss_node, double tolerance) {
    forward_scalar(loss_node);
    backward(loss_node);
    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (int p : params_) grads.push_back(at(p).grad);
    return gradient_check(loss_node, tolerance, grads);
}

GradCheckReport Graph::gradient_check(int loss_node, double tolerance,
                                      const std::vector<Tensor>& grads) {
    (void)tolerance;
    if (grads.size() != params_.size())
        throw std::invalid_argument("gradient_check: expected " + std::to_string(params_.size()) +
                                    " gradient tensors, got " + std::to_string(grads.size()));
    const double h = 1e-3;
    GradCheckReport report;
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        const int pid = params_[pi];
        Tensor& pv = at(pid).value;
        if (!grads[pi].same_shape(pv))
            shape_fail("gradient_check", pid,
                       "gradient " + grads[pi].shape_str() + " does not match parameter " + pv.shape_str());
        for (std::size_t i = 0; i < pv.numel(); ++i) {
            const float orig = pv.data[i];
            pv.data[i] = orig + static_cast<float>(h);
            const double fp = forward_scalar(loss_node);
            pv.data[i] = orig - static_cast<float>(h);
            const double fm = forward_scalar(loss_node);
            pv.data[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = grads[pi].data[i];
            const double denom = std::max({1e-2, std::fabs(an), std::fabs(fd)});
            const double rel = std::fabs(an - fd) / denom;
            ++report.checked;
            if (rel > report.worst_rel_err) {
                report.worst_rel_err = rel;
                report.worst_node = pid;
                report.worst_param = at(pid).name;
                report.worst_index = i;
            }
        }
    }
    forward();
    return report;
}

} // namespace matxfer
