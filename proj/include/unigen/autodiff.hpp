#pragma once

#include <cassert>
#include <cmath>
#include <deque>
#include <functional>
#include <vector>

#include "unigen/matrix.hpp"
#include "unigen/params.hpp"

namespace unigen {

// Reverse-mode autodiff over dense matrices. A Tape owns every node of one
// forward pass; backward() walks the nodes in reverse creation order, which
// is a valid topological order because ops only consume earlier nodes.
//
// Forward-only evaluation (momentum encoder, inference) builds a tape and
// simply never calls backward, so train and eval share one forward path.
class Tape {
public:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void()> backward;
    };

    Node* constant(Matrix v) { return make(std::move(v)); }

    Node* param(Parameter& p) {
        Node* n = make(p.value);
        Parameter* pp = &p;
        n->backward = [n, pp]() { add_inplace(pp->grad, n->grad); };
        return n;
    }

    Node* matmul(Node* a, Node* b) {
        Node* n = make(unigen::matmul(a->value, b->value));
        n->backward = [n, a, b]() {
            add_inplace(a->grad, matmul_nt(n->grad, b->value));
            add_inplace(b->grad, matmul_tn(a->value, n->grad));
        };
        return n;
    }

    // a * b^T
    Node* matmul_t(Node* a, Node* b) {
        Node* n = make(matmul_nt(a->value, b->value));
        n->backward = [n, a, b]() {
            add_inplace(a->grad, unigen::matmul(n->grad, b->value));
            add_inplace(b->grad, matmul_tn(n->grad, a->value));
        };
        return n;
    }

    Node* add(Node* a, Node* b) {
        assert(a->value.same_shape(b->value));
        Matrix v = a->value;
        add_inplace(v, b->value);
        Node* n = make(std::move(v));
        n->backward = [n, a, b]() {
            add_inplace(a->grad, n->grad);
            add_inplace(b->grad, n->grad);
        };
        return n;
    }

    Node* sub(Node* a, Node* b) {
        assert(a->value.same_shape(b->value));
        Matrix v = a->value;
        add_inplace(v, b->value, -1.0);
        Node* n = make(std::move(v));
        n->backward = [n, a, b]() {
            add_inplace(a->grad, n->grad);
            add_inplace(b->grad, n->grad, -1.0);
        };
        return n;
    }

    // Adds a 1 x C bias node to every row.
    Node* add_row_broadcast(Node* a, Node* bias) {
        assert(bias->value.rows == 1 && bias->value.cols == a->value.cols);
        Matrix v = a->value;
        for (int i = 0; i < v.rows; ++i)
            for (int j = 0; j < v.cols; ++j) v.at(i, j) += bias->value.at(0, j);
        Node* n = make(std::move(v));
        n->backward = [n, a, bias]() {
            add_inplace(a->grad, n->grad);
            for (int i = 0; i < n->grad.rows; ++i)
                for (int j = 0; j < n->grad.cols; ++j)
                    bias->grad.at(0, j) += n->grad.at(i, j);
        };
        return n;
    }

    Node* scale(Node* a, double c) {
        Matrix v = a->value;
        for (auto& x : v.a) x *= c;
        Node* n = make(std::move(v));
        n->backward = [n, a, c]() { add_inplace(a->grad, n->grad, c); };
        return n;
    }

    Node* add_const(Node* a, const Matrix& c) {
        assert(a->value.same_shape(c));
        Matrix v = a->value;
        add_inplace(v, c);
        Node* n = make(std::move(v));
        n->backward = [n, a]() { add_inplace(a->grad, n->grad); };
        return n;
    }

    Node* mul_const(Node* a, Matrix c) {
        assert(a->value.same_shape(c));
        Matrix v = a->value;
        for (std::size_t i = 0; i < v.a.size(); ++i) v.a[i] *= c.a[i];
        Node* n = make(std::move(v));
        n->backward = [n, a, c = std::move(c)]() {
            for (std::size_t i = 0; i < c.a.size(); ++i) a->grad.a[i] += n->grad.a[i] * c.a[i];
        };
        return n;
    }

    Node* tanh_op(Node* a) {
        Matrix v = a->value;
        for (auto& x : v.a) x = std::tanh(x);
        Node* n = make(std::move(v));
        n->backward = [n, a]() {
            for (std::size_t i = 0; i < n->grad.a.size(); ++i)
                a->grad.a[i] += n->grad.a[i] * (1.0 - n->value.a[i] * n->value.a[i]);
        };
        return n;
    }

    Node* gelu(Node* a) {
        constexpr double c1 = 0.7978845608028654; // sqrt(2/pi)
        constexpr double c2 = 0.044715;
        Matrix v = a->value;
        for (auto& x : v.a) {
            const double u = c1 * (x + c2 * x * x * x);
            x = 0.5 * x * (1.0 + std::tanh(u));
        }
        Node* n = make(std::move(v));
        n->backward = [n, a]() {
            for (std::size_t i = 0; i < n->grad.a.size(); ++i) {
                const double x = a->value.a[i];
                const double u = c1 * (x + c2 * x * x * x);
                const double t = std::tanh(u);
                const double d =
                    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c1 * (1.0 + 3.0 * c2 * x * x);
                a->grad.a[i] += n->grad.a[i] * d;
            }
        };
        return n;
    }

    // Rows scaled to unit Euclidean norm.
    Node* row_l2_normalize(Node* a, double eps = 1e-12) {
        Matrix v = a->value;
        std::vector<double> norms(v.rows);
        for (int i = 0; i < v.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < v.cols; ++j) s += v.at(i, j) * v.at(i, j);
            norms[i] = std::sqrt(s + eps);
            for (int j = 0; j < v.cols; ++j) v.at(i, j) /= norms[i];
        }
        Node* n = make(std::move(v));
        n->backward = [n, a, norms = std::move(norms)]() {
            for (int i = 0; i < n->value.rows; ++i) {
                double yg = 0.0;
                for (int j = 0; j < n->value.cols; ++j) yg += n->value.at(i, j) * n->grad.at(i, j);
                for (int j = 0; j < n->value.cols; ++j)
                    a->grad.at(i, j) +=
                        (n->grad.at(i, j) - n->value.at(i, j) * yg) / norms[i];
            }
        };
        return n;
    }

    Node* log_softmax_rows(Node* a) {
        Matrix v = a->value;
        for (int i = 0; i < v.rows; ++i) {
            double mx = v.at(i, 0);
            for (int j = 1; j < v.cols; ++j) mx = std::max(mx, v.at(i, j));
            double sum = 0.0;
            for (int j = 0; j < v.cols; ++j) sum += std::exp(v.at(i, j) - mx);
            const double lse = mx + std::log(sum);
            for (int j = 0; j < v.cols; ++j) v.at(i, j) -= lse;
        }
        Node* n = make(std::move(v));
        n->backward = [n, a]() {
            for (int i = 0; i < n->value.rows; ++i) {
                double gsum = 0.0;
                for (int j = 0; j < n->value.cols; ++j) gsum += n->grad.at(i, j);
                for (int j = 0; j < n->value.cols; ++j)
                    a->grad.at(i, j) +=
                        n->grad.at(i, j) - std::exp(n->value.at(i, j)) * gsum;
            }
        };
        return n;
    }

    Node* softmax_rows_op(Node* a) {
        Node* n = make(softmax_rows(a->value));
        n->backward = [n, a]() {
            for (int i = 0; i < n->value.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < n->value.cols; ++j) dot += n->grad.at(i, j) * n->value.at(i, j);
                for (int j = 0; j < n->value.cols; ++j)
                    a->grad.at(i, j) += n->value.at(i, j) * (n->grad.at(i, j) - dot);
            }
        };
        return n;
    }

    // Column vector of per-row log-sum-exp values.
    Node* logsumexp_rows(Node* a) {
        Matrix v(a->value.rows, 1);
        for (int i = 0; i < a->value.rows; ++i) {
            double mx = a->value.at(i, 0);
            for (int j = 1; j < a->value.cols; ++j) mx = std::max(mx, a->value.at(i, j));
            double sum = 0.0;
            for (int j = 0; j < a->value.cols; ++j) sum += std::exp(a->value.at(i, j) - mx);
            v.at(i, 0) = mx + std::log(sum);
        }
        Node* n = make(std::move(v));
        n->backward = [n, a]() {
            for (int i = 0; i < a->value.rows; ++i) {
                const double g = n->grad.at(i, 0);
                if (g == 0.0) continue;
                for (int j = 0; j < a->value.cols; ++j)
                    a->grad.at(i, j) += g * std::exp(a->value.at(i, j) - n->value.at(i, 0));
            }
        };
        return n;
    }

    Node* concat_rows(const std::vector<Node*>& parts) {
        assert(!parts.empty());
        int rows = 0;
        const int cols = parts[0]->value.cols;
        for (const Node* p : parts) {
            assert(p->value.cols == cols);
            rows += p->value.rows;
        }
        Matrix v(rows, cols);
        int r = 0;
        for (const Node* p : parts) {
            std::copy(p->value.a.begin(), p->value.a.end(),
                      v.a.begin() + static_cast<std::size_t>(r) * cols);
            r += p->value.rows;
        }
        Node* n = make(std::move(v));
        n->backward = [n, parts, cols]() {
            int r = 0;
            for (Node* p : parts) {
                for (int i = 0; i < p->value.rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        p->grad.at(i, j) += n->grad.at(r + i, j);
                r += p->value.rows;
            }
        };
        return n;
    }

    Node* concat_cols(const std::vector<Node*>& parts) {
        assert(!parts.empty());
        const int rows = parts[0]->value.rows;
        int cols = 0;
        for (const Node* p : parts) {
            assert(p->value.rows == rows);
            cols += p->value.cols;
        }
        Matrix v(rows, cols);
        int c = 0;
        for (const Node* p : parts) {
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < p->value.cols; ++j) v.at(i, c + j) = p->value.at(i, j);
            c += p->value.cols;
        }
        Node* n = make(std::move(v));
        n->backward = [n, parts, rows]() {
            int c = 0;
            for (Node* p : parts) {
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < p->value.cols; ++j)
                        p->grad.at(i, j) += n->grad.at(i, c + j);
                c += p->value.cols;
            }
        };
        return n;
    }

    // 1 x C mean over rows.
    Node* mean_rows(Node* a) {
        Matrix v(1, a->value.cols);
        for (int i = 0; i < a->value.rows; ++i)
            for (int j = 0; j < a->value.cols; ++j) v.at(0, j) += a->value.at(i, j);
        const double inv = 1.0 / a->value.rows;
        for (auto& x : v.a) x *= inv;
        Node* n = make(std::move(v));
        n->backward = [n, a, inv]() {
            for (int i = 0; i < a->value.rows; ++i)
                for (int j = 0; j < a->value.cols; ++j)
                    a->grad.at(i, j) += n->grad.at(0, j) * inv;
        };
        return n;
    }

    Node* layer_norm_rows(Node* a, Node* gain, Node* bias, double eps = 1e-5) {
        assert(gain->value.rows == 1 && gain->value.cols == a->value.cols);
        assert(bias->value.rows == 1 && bias->value.cols == a->value.cols);
        const int R = a->value.rows, C = a->value.cols;
        Matrix xhat(R, C);
        std::vector<double> inv_std(R);
        for (int i = 0; i < R; ++i) {
            double mu = 0.0;
            for (int j = 0; j < C; ++j) mu += a->value.at(i, j);
            mu /= C;
            double var = 0.0;
            for (int j = 0; j < C; ++j) {
                const double d = a->value.at(i, j) - mu;
                var += d * d;
            }
            var /= C;
            inv_std[i] = 1.0 / std::sqrt(var + eps);
            for (int j = 0; j < C; ++j) xhat.at(i, j) = (a->value.at(i, j) - mu) * inv_std[i];
        }
        Matrix v(R, C);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j)
                v.at(i, j) = xhat.at(i, j) * gain->value.at(0, j) + bias->value.at(0, j);
        Node* n = make(std::move(v));
        n->backward = [n, a, gain, bias, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)]() {
            const int R = a->value.rows, C = a->value.cols;
            for (int i = 0; i < R; ++i) {
                double mean_gx = 0.0, mean_gxx = 0.0;
                for (int j = 0; j < C; ++j) {
                    const double gy = n->grad.at(i, j);
                    bias->grad.at(0, j) += gy;
                    gain->grad.at(0, j) += gy * xhat.at(i, j);
                    const double gx = gy * gain->value.at(0, j);
                    mean_gx += gx;
                    mean_gxx += gx * xhat.at(i, j);
                }
                mean_gx /= C;
                mean_gxx /= C;
                for (int j = 0; j < C; ++j) {
                    const double gx = n->grad.at(i, j) * gain->value.at(0, j);
                    a->grad.at(i, j) +=
                        inv_std[i] * (gx - mean_gx - xhat.at(i, j) * mean_gxx);
                }
            }
        };
        return n;
    }

    // Gathers rows of an embedding table; backward scatter-adds into the
    // parameter gradient.
    Node* embedding(Parameter& table, std::vector<int> ids) {
        Matrix v(static_cast<int>(ids.size()), table.value.cols);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            assert(ids[i] >= 0 && ids[i] < table.value.rows);
            for (int j = 0; j < table.value.cols; ++j)
                v.at(static_cast<int>(i), j) = table.value.at(ids[i], j);
        }
        Node* n = make(std::move(v));
        Parameter* tp = &table;
        n->backward = [n, tp, ids = std::move(ids)]() {
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (int j = 0; j < tp->value.cols; ++j)
                    tp->grad.at(ids[i], j) += n->grad.at(static_cast<int>(i), j);
        };
        return n;
    }

    // Scalar node: sum of the elementwise product with a constant weight
    // matrix.
    Node* weighted_sum(Node* a, Matrix w) {
        assert(a->value.same_shape(w));
        Matrix v(1, 1);
        v.at(0, 0) = dot_all(a->value, w);
        Node* n = make(std::move(v));
        n->backward = [n, a, w = std::move(w)]() {
            const double g = n->grad.at(0, 0);
            if (g == 0.0) return;
            add_inplace(a->grad, w, g);
        };
        return n;
    }

    Node* sum_all(Node* a) { return weighted_sum(a, Matrix::filled(a->value.rows, a->value.cols, 1.0)); }

    // Root must be a 1x1 scalar node.
    void backward(Node* root) {
        assert(root->value.rows == 1 && root->value.cols == 1);
        root->grad.at(0, 0) = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->backward) it->backward();
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    Node* make(Matrix v) {
        nodes_.push_back(Node{std::move(v), Matrix(), nullptr});
        Node& n = nodes_.back();
        n.grad = Matrix(n.value.rows, n.value.cols);
        return &n;
    }

    std::deque<Node> nodes_;
};

} // namespace unigen
