#include "isa/graph.hpp"

#include <algorithm>
#include <cmath>

namespace isa {

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Array2 v) {
    Node n;
    n.op = Op::constant;
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Graph::parameter(const std::string& name, const Array2& v) {
    Node n;
    n.op = Op::parameter;
    n.value = v;
    n.requires_grad = true;
    NodeId id = push(std::move(n));
    params_.emplace_back(name, id);
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::matmul;
    n.a = a;
    n.b = b;
    n.value = isa::matmul(nodes_[a].value, nodes_[b].value);
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n;
    n.op = Op::transpose;
    n.a = a;
    n.value = isa::transpose(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::add;
    n.a = a;
    n.b = b;
    n.value = isa::add(nodes_[a].value, nodes_[b].value);
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n;
    n.op = Op::scale;
    n.a = a;
    n.c = c;
    n.value = isa::scale(nodes_[a].value, c);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::add_row(NodeId a, NodeId row) {
    Node n;
    n.op = Op::add_row;
    n.a = a;
    n.b = row;
    n.value = isa::add_row(nodes_[a].value, nodes_[row].value);
    n.requires_grad = nodes_[a].requires_grad || nodes_[row].requires_grad;
    return push(std::move(n));
}

NodeId Graph::softmax_over(NodeId a, Axis axis) {
    Node n;
    n.op = Op::softmax;
    n.a = a;
    n.axis = axis;
    n.value = isa::softmax_over(nodes_[a].value, axis);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::activation(NodeId a) {
    Node n;
    n.op = Op::gelu;
    n.a = a;
    n.value = isa::activation(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = Op::sigmoid;
    n.a = a;
    n.value = isa::sigmoid(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::l2_normalize(NodeId a) {
    Node n;
    n.op = Op::l2norm;
    n.a = a;
    n.value = isa::l2_normalize(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::l1_normalize_rows(NodeId a) {
    Node n;
    n.op = Op::l1norm;
    n.a = a;
    n.value = isa::l1_normalize_rows(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::cross_entropy(NodeId p, Array2 y) {
    Node n;
    n.op = Op::cross_entropy;
    n.a = p;
    n.value = Array2::full(1, 1, isa::cross_entropy(nodes_[p].value, y));
    n.aux = std::move(y);
    n.requires_grad = nodes_[p].requires_grad;
    return push(std::move(n));
}

NodeId Graph::binary_cross_entropy(NodeId p, Array2 y) {
    Node n;
    n.op = Op::bce;
    n.a = p;
    n.value = Array2::full(1, 1, isa::binary_cross_entropy(nodes_[p].value, y));
    n.aux = std::move(y);
    n.requires_grad = nodes_[p].requires_grad;
    return push(std::move(n));
}

NodeId Graph::vcat(NodeId a, NodeId b) {
    Node n;
    n.op = Op::vcat;
    n.a = a;
    n.b = b;
    n.value = isa::vcat(nodes_[a].value, nodes_[b].value);
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Graph::im2col3x3(NodeId a, int h, int w) {
    Node n;
    n.op = Op::im2col;
    n.a = a;
    n.h = h;
    n.w = w;
    n.value = isa::im2col3x3(nodes_[a].value, h, w);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Graph::mean_rows(NodeId a) {
    int r = nodes_[a].value.rows;
    NodeId weights = constant(Array2::full(1, r, 1.0 / r));
    return matmul(weights, a);
}

double Graph::scalar_value(NodeId id) const {
    const Array2& v = nodes_[id].value;
    if (v.rows != 1 || v.cols != 1) throw DimensionError("scalar_value: node is " + shape_str(v));
    return v.data[0];
}

void Graph::ensure_grad(Node& n) {
    if (n.grad.rows == 0) n.grad = Array2::zeros(n.value.rows, n.value.cols);
}

Array2 Graph::grad(NodeId id) const {
    const Node& n = nodes_[id];
    if (n.grad.rows == 0) return Array2::zeros(n.value.rows, n.value.cols);
    return n.grad;
}

Gradients Graph::parameter_grads() const {
    Gradients out;
    for (const auto& [name, id] : params_) out[name] = grad(id);
    return out;
}

void Graph::backward(NodeId root) {
    if (ran_backward_) throw Error("Graph::backward called twice");
    ran_backward_ = true;
    const Array2& rv = nodes_[root].value;
    if (rv.rows != 1 || rv.cols != 1) throw DimensionError("backward: root is " + shape_str(rv));
    if (!nodes_[root].requires_grad) return;
    ensure_grad(nodes_[root]);
    nodes_[root].grad.data[0] = 1.0;
    for (NodeId id = root; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.rows == 0) continue;
        backprop_into(id);
    }
}

void Graph::backprop_into(NodeId id) {
    Node& n = nodes_[id];
    const Array2& g = n.grad;
    auto want = [&](NodeId x) { return x >= 0 && nodes_[x].requires_grad; };

    switch (n.op) {
        case Op::constant:
        case Op::parameter:
            break;
        case Op::matmul: {
            if (want(n.a)) {
                Node& na = nodes_[n.a];
                ensure_grad(na);
                Array2 da = isa::matmul(g, isa::transpose(nodes_[n.b].value));
                for (size_t i = 0; i < da.data.size(); ++i) na.grad.data[i] += da.data[i];
            }
            if (want(n.b)) {
                Node& nb = nodes_[n.b];
                ensure_grad(nb);
                Array2 db = isa::matmul(isa::transpose(nodes_[n.a].value), g);
                for (size_t i = 0; i < db.data.size(); ++i) nb.grad.data[i] += db.data[i];
            }
            break;
        }
        case Op::transpose: {
            if (want(n.a)) {
                Node& na = nodes_[n.a];
                ensure_grad(na);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) na.grad.at(j, i) += g.at(i, j);
            }
            break;
        }
        case Op::add: {
            for (NodeId x : {n.a, n.b}) {
                if (!want(x)) continue;
                Node& nx = nodes_[x];
                ensure_grad(nx);
                for (size_t i = 0; i < g.data.size(); ++i) nx.grad.data[i] += g.data[i];
            }
            break;
        }
        case Op::scale: {
            if (want(n.a)) {
                Node& na = nodes_[n.a];
                ensure_grad(na);
                for (size_t i = 0; i < g.data.size(); ++i) na.grad.data[i] += n.c * g.data[i];
            }
            break;
        }
        case Op::add_row: {
            if (want(n.a)) {
                Node& na = nodes_[n.a];
                ensure_grad(na);
                for (size_t i = 0; i < g.data.size(); ++i) na.grad.data[i] += g.data[i];
            }
            if (want(n.b)) {
                Node& nb = nodes_[n.b];
                ensure_grad(nb);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) nb.grad.at(0, j) += g.at(i, j);
            }
            break;
        }
        case Op::softmax: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& s = n.value;
            if (n.axis == Axis::cols) {
                for (int i = 0; i < s.rows; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < s.cols; ++j) acc += g.at(i, j) * s.at(i, j);
                    for (int j = 0; j < s.cols; ++j)
                        na.grad.at(i, j) += s.at(i, j) * (g.at(i, j) - acc);
                }
            } else {
                for (int j = 0; j < s.cols; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < s.rows; ++i) acc += g.at(i, j) * s.at(i, j);
                    for (int i = 0; i < s.rows; ++i)
                        na.grad.at(i, j) += s.at(i, j) * (g.at(i, j) - acc);
                }
            }
            break;
        }
        case Op::gelu: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& x = na.value;
            for (size_t i = 0; i < g.data.size(); ++i)
                na.grad.data[i] += gelu_grad_scalar(x.data[i]) * g.data[i];
            break;
        }
        case Op::sigmoid: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& s = n.value;
            for (size_t i = 0; i < g.data.size(); ++i)
                na.grad.data[i] += s.data[i] * (1.0 - s.data[i]) * g.data[i];
            break;
        }
        case Op::l2norm: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& x = na.value;
            const Array2& out = n.value;
            for (int i = 0; i < x.rows; ++i) {
                double norm = 0.0;
                for (int j = 0; j < x.cols; ++j) norm += x.at(i, j) * x.at(i, j);
                norm = std::sqrt(norm);
                double gdot = 0.0;
                for (int j = 0; j < x.cols; ++j) gdot += g.at(i, j) * out.at(i, j);
                for (int j = 0; j < x.cols; ++j)
                    na.grad.at(i, j) += (g.at(i, j) - out.at(i, j) * gdot) / norm;
            }
            break;
        }
        case Op::l1norm: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& x = na.value;
            const Array2& out = n.value;
            for (int i = 0; i < x.rows; ++i) {
                double s = 0.0;
                for (int j = 0; j < x.cols; ++j) s += x.at(i, j);
                s = std::max(s, 1e-30);
                double gdot = 0.0;
                for (int j = 0; j < x.cols; ++j) gdot += g.at(i, j) * out.at(i, j);
                for (int j = 0; j < x.cols; ++j) na.grad.at(i, j) += (g.at(i, j) - gdot) / s;
            }
            break;
        }
        case Op::cross_entropy: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& p = na.value;
            const Array2& y = n.aux;
            double gs = g.data[0];
            for (size_t i = 0; i < p.data.size(); ++i) {
                if (y.data[i] == 0.0 || p.data[i] <= kLogEps) continue;
                na.grad.data[i] -= gs * y.data[i] / (p.data[i] * p.rows);
            }
            break;
        }
        case Op::bce: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const Array2& p = na.value;
            const Array2& y = n.aux;
            double gs = g.data[0] / static_cast<double>(p.data.size());
            for (size_t i = 0; i < p.data.size(); ++i) {
                double pi = p.data[i];
                if (pi <= kLogEps || pi >= 1.0 - kLogEps) continue;
                na.grad.data[i] += gs * (-y.data[i] / pi + (1.0 - y.data[i]) / (1.0 - pi));
            }
            break;
        }
        case Op::vcat: {
            int ra = nodes_[n.a].value.rows;
            if (want(n.a)) {
                Node& na = nodes_[n.a];
                ensure_grad(na);
                for (size_t i = 0; i < na.grad.data.size(); ++i) na.grad.data[i] += g.data[i];
            }
            if (want(n.b)) {
                Node& nb = nodes_[n.b];
                ensure_grad(nb);
                size_t off = static_cast<size_t>(ra) * g.cols;
                for (size_t i = 0; i < nb.grad.data.size(); ++i) nb.grad.data[i] += g.data[off + i];
            }
            break;
        }
        case Op::im2col: {
            if (!want(n.a)) break;
            Node& na = nodes_[n.a];
            ensure_grad(na);
            const int c = na.value.cols;
            for (int r = 0; r < n.h; ++r) {
                for (int col = 0; col < n.w; ++col) {
                    int pix = r * n.w + col;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            int o = (dr + 1) * 3 + (dc + 1);
                            int rr = r + dr, cc = col + dc;
                            if (rr < 0 || rr >= n.h || cc < 0 || cc >= n.w) continue;
                            int src = rr * n.w + cc;
                            for (int k = 0; k < c; ++k)
                                na.grad.at(src, k) += g.at(pix, o * c + k);
                        }
                    }
                }
            }
            break;
        }
    }
}

}  // namespace isa
