#include "vdm/graph.hpp"

#include <cmath>

namespace vdm {

namespace {
inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
}  // namespace

int Graph::push(Node n) {
    n.grad = Tensor(n.val.shape());
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Graph::input(Tensor v) {
    v.require_finite("graph input");
    Node n;
    n.op = Op::Input;
    n.val = std::move(v);
    return push(std::move(n));
}

int Graph::input_scalar(double v) { return input(Tensor::scalar(v)); }

int Graph::param(int param_id) {
    Node n;
    n.op = Op::Param;
    n.param_id = param_id;
    n.val = (*params_)[param_id].value;
    return push(std::move(n));
}

int Graph::add(int a, int b) {
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.val = value(a) + value(b);
    return push(std::move(n));
}

int Graph::sub(int a, int b) {
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.val = value(a) - value(b);
    return push(std::move(n));
}

int Graph::mul(int a, int b) {
    if (!value(a).same_shape(value(b))) throw DimensionError("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= value(b)[i];
    return push(std::move(n));
}

int Graph::div(int a, int b) {
    if (!value(a).same_shape(value(b))) throw DimensionError("div: shape mismatch");
    Node n;
    n.op = Op::Div;
    n.a = a;
    n.b = b;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] /= value(b)[i];
    n.val.require_finite("div result");
    return push(std::move(n));
}

int Graph::smul(int s, int v) {
    if (value(s).size() != 1) throw DimensionError("smul: scalar operand must have size 1");
    Node n;
    n.op = Op::SMul;
    n.a = s;
    n.b = v;
    const double c = value(s)[0];
    n.val = value(v);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] *= c;
    return push(std::move(n));
}

int Graph::scale(int a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.c = c;
    n.val = c * value(a);
    return push(std::move(n));
}

int Graph::addc(int a, double c) {
    Node n;
    n.op = Op::AddC;
    n.a = a;
    n.c = c;
    n.val = value(a);
    for (std::size_t i = 0; i < n.val.size(); ++i) n.val[i] += c;
    return push(std::move(n));
}

#define VDM_MAP_OP(NAME, OP_TAG, EXPR)            \
    int Graph::NAME(int a) {                      \
        Node n;                                   \
        n.op = Op::OP_TAG;                        \
        n.a = a;                                  \
        n.val = value(a);                         \
        for (auto& x : n.val.values()) x = EXPR;  \
        return push(std::move(n));                \
    }

VDM_MAP_OP(tanh_, Tanh, std::tanh(x))
VDM_MAP_OP(exp_, Exp, std::exp(x))
VDM_MAP_OP(sigmoid_, Sigmoid, sigmoid(x))
VDM_MAP_OP(sqrt_, Sqrt, std::sqrt(x))
VDM_MAP_OP(sin_, Sin, std::sin(x))
VDM_MAP_OP(cos_, Cos, std::cos(x))
#undef VDM_MAP_OP

int Graph::matvec(int w, int x) {
    const Tensor& W = value(w);
    const Tensor& v = value(x);
    if (W.shape().size() != 2 || v.shape().size() != 1 || W.cols() != v.size()) {
        throw DimensionError("matvec: need {m,n} matrix and {n} vector");
    }
    Node n;
    n.op = Op::MatVec;
    n.a = w;
    n.b = x;
    n.val = Tensor({W.rows()});
    for (std::size_t r = 0; r < W.rows(); ++r) {
        double s = 0.0;
        const double* row = W.data() + r * W.cols();
        for (std::size_t c = 0; c < W.cols(); ++c) s += row[c] * v[c];
        n.val[r] = s;
    }
    return push(std::move(n));
}

int Graph::sum(int a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    double s = 0.0;
    for (double x : value(a).values()) s += x;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

int Graph::sqsum(int a) {
    Node n;
    n.op = Op::SqSum;
    n.a = a;
    n.val = Tensor::scalar(squared_norm(value(a)));
    return push(std::move(n));
}

int Graph::dot(int a, int b) {
    Node n;
    n.op = Op::Dot;
    n.a = a;
    n.b = b;
    n.val = Tensor::scalar(vdm::dot(value(a), value(b)));
    return push(std::move(n));
}

int Graph::concat(int a, int b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape().size() != 1 || tb.shape().size() != 1) {
        throw DimensionError("concat: 1-D operands only");
    }
    Node n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    n.val = Tensor({ta.size() + tb.size()});
    for (std::size_t i = 0; i < ta.size(); ++i) n.val[i] = ta[i];
    for (std::size_t i = 0; i < tb.size(); ++i) n.val[ta.size() + i] = tb[i];
    return push(std::move(n));
}

int Graph::time_features(int s) {
    if (value(s).size() != 1) throw DimensionError("time_features: scalar operand required");
    Node n;
    n.op = Op::TimeFeatures;
    n.a = s;
    const double q = value(s)[0] / 4.0;
    n.val = Tensor({kTimeFeatureDim});
    n.val[0] = q;
    for (int j = 0; j < 4; ++j) {
        const double f = std::ldexp(1.0, j);  // 2^j
        n.val[static_cast<std::size_t>(1 + 2 * j)] = std::sin(f * q);
        n.val[static_cast<std::size_t>(2 + 2 * j)] = std::cos(f * q);
    }
    return push(std::move(n));
}

void Graph::backward(int loss) {
    if (value(loss).size() != 1) throw ContractError("backward: loss must be a scalar node");
    for (auto& n : nodes_) n.grad.fill(0.0);
    at(loss).grad[0] = 1.0;

    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
        Node& n = at(id);
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Input:
                break;
            case Op::Param:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    (*params_)[n.param_id].grad[i] += g[i];
                }
                break;
            case Op::Add:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    at(n.a).grad[i] += g[i];
                    at(n.b).grad[i] += g[i];
                }
                break;
            case Op::Sub:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    at(n.a).grad[i] += g[i];
                    at(n.b).grad[i] -= g[i];
                }
                break;
            case Op::Mul:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    at(n.a).grad[i] += g[i] * value(n.b)[i];
                    at(n.b).grad[i] += g[i] * value(n.a)[i];
                }
                break;
            case Op::Div:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double bi = value(n.b)[i];
                    at(n.a).grad[i] += g[i] / bi;
                    at(n.b).grad[i] -= g[i] * value(n.a)[i] / (bi * bi);
                }
                break;
            case Op::SMul: {
                const double s = value(n.a)[0];
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    acc += g[i] * value(n.b)[i];
                    at(n.b).grad[i] += g[i] * s;
                }
                at(n.a).grad[0] += acc;
                break;
            }
            case Op::Scale:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i] * n.c;
                break;
            case Op::AddC:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i];
                break;
            case Op::Tanh:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double y = n.val[i];
                    at(n.a).grad[i] += g[i] * (1.0 - y * y);
                }
                break;
            case Op::Exp:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i] * n.val[i];
                break;
            case Op::Sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double y = n.val[i];
                    at(n.a).grad[i] += g[i] * y * (1.0 - y);
                }
                break;
            case Op::Sqrt:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i] * 0.5 / n.val[i];
                break;
            case Op::Sin:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] += g[i] * std::cos(value(n.a)[i]);
                break;
            case Op::Cos:
                for (std::size_t i = 0; i < g.size(); ++i) at(n.a).grad[i] -= g[i] * std::sin(value(n.a)[i]);
                break;
            case Op::MatVec: {
                const Tensor& W = value(n.a);
                const Tensor& x = value(n.b);
                for (std::size_t r = 0; r < W.rows(); ++r) {
                    const double gr = g[r];
                    double* wg = at(n.a).grad.data() + r * W.cols();
                    const double* wrow = W.data() + r * W.cols();
                    for (std::size_t c = 0; c < W.cols(); ++c) {
                        wg[c] += gr * x[c];
                        at(n.b).grad[c] += gr * wrow[c];
                    }
                }
                break;
            }
            case Op::Sum:
                for (std::size_t i = 0; i < value(n.a).size(); ++i) at(n.a).grad[i] += g[0];
                break;
            case Op::SqSum:
                for (std::size_t i = 0; i < value(n.a).size(); ++i) {
                    at(n.a).grad[i] += g[0] * 2.0 * value(n.a)[i];
                }
                break;
            case Op::Dot:
                for (std::size_t i = 0; i < value(n.a).size(); ++i) {
                    at(n.a).grad[i] += g[0] * value(n.b)[i];
                    at(n.b).grad[i] += g[0] * value(n.a)[i];
                }
                break;
            case Op::Concat: {
                const std::size_t na = value(n.a).size();
                for (std::size_t i = 0; i < na; ++i) at(n.a).grad[i] += g[i];
                for (std::size_t i = 0; i < value(n.b).size(); ++i) at(n.b).grad[i] += g[na + i];
                break;
            }
            case Op::TimeFeatures: {
                // d/ds of [s/4, sin(2^j s/4), cos(2^j s/4)].
                double acc = g[0] * 0.25;
                const double q = value(n.a)[0] / 4.0;
                for (int j = 0; j < 4; ++j) {
                    const double f = std::ldexp(1.0, j);
                    acc += g[static_cast<std::size_t>(1 + 2 * j)] * std::cos(f * q) * f * 0.25;
                    acc -= g[static_cast<std::size_t>(2 + 2 * j)] * std::sin(f * q) * f * 0.25;
                }
                at(n.a).grad[0] += acc;
                break;
            }
        }
    }
}

}  // namespace vdm
