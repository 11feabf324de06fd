// SPDX-License-Identifier: Apache-2.0
#include "espo/substrate/tape.hpp"

#include <algorithm>
#include <cmath>

namespace espo::nn {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

NodeId Tape::push(Tensor values, bool requires_grad, std::string label,
                  std::function<void(Tape&, NodeId)> backprop) {
    Node n;
    n.values = std::move(values);
    n.requires_grad = record_ && requires_grad;
    n.label = std::move(label);
    if (n.requires_grad) n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::ensure_grad(NodeId id) {
    Node& n = nodes_[id];
    if (!n.grad_ready) {
        n.grad = Tensor::zeros(n.values.shape());
        n.grad_ready = true;
    }
}

void Tape::accumulate(NodeId id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    ensure_grad(id);
    Tensor& dst = nodes_[id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void Tape::bind(const ParameterSet& params) {
    if (bound_) throw ConsistencyError("tape already has a bound parameter set");
    bound_ = &params;
}

NodeId Tape::param(const std::string& name) {
    if (!bound_) throw ConsistencyError("tape has no bound parameter set");
    for (const auto& [n, id] : param_leaves_) {
        if (n == name) return id;
    }
    NodeId id = push(bound_->at(name), true, name, {});
    param_leaves_.emplace_back(name, id);
    return id;
}

NodeId Tape::constant(Tensor v, std::string label) {
    return push(std::move(v), false, std::move(label), {});
}

void Tape::check_scalar(NodeId id, const char* op) const {
    if (nodes_[id].values.size() != 1) {
        throw InputDomainError(std::string(op) + ": operand is not a scalar");
    }
}

// ---------------------------------------------------------------------------
// tensor ops
// ---------------------------------------------------------------------------

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].values;
    const Tensor& tb = nodes_[b].values;
    const bool bias = ta.rank() == 2 && tb.rank() == 1 && tb.size() == ta.cols();
    if (!bias && !ta.same_shape(tb)) throw InputDomainError("add: shape mismatch");

    Tensor out = ta;
    if (bias) {
        for (std::size_t r = 0; r < ta.rows(); ++r)
            for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) += tb[c];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    }
    return push(std::move(out), needs_grad(a) || needs_grad(b), "add",
                [a, b, bias](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    t.accumulate(a, go);
                    if (!t.nodes_[b].requires_grad) return;
                    if (bias) {
                        t.ensure_grad(b);
                        Tensor& gb = t.nodes_[b].grad;
                        const std::size_t rows = go.rows(), cols = go.cols();
                        for (std::size_t r = 0; r < rows; ++r)
                            for (std::size_t c = 0; c < cols; ++c) gb[c] += go.at(r, c);
                    } else {
                        t.accumulate(b, go);
                    }
                });
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& ta = nodes_[a].values;
    const Tensor& tb = nodes_[b].values;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) {
        throw InputDomainError("matmul: incompatible shapes");
    }
    const std::size_t T = ta.rows(), K = ta.cols(), O = tb.cols();
    Tensor out({T, O});
    for (std::size_t i = 0; i < T; ++i) {
        double* orow = out.data() + i * O;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = ta.at(i, k);
            const double* brow = tb.data() + k * O;
            for (std::size_t j = 0; j < O; ++j) orow[j] += av * brow[j];
        }
    }
    return push(std::move(out), needs_grad(a) || needs_grad(b), "matmul",
                [a, b, T, K, O](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    const Tensor& ta = t.nodes_[a].values;
                    const Tensor& tb = t.nodes_[b].values;
                    if (t.nodes_[a].requires_grad) {
                        t.ensure_grad(a);
                        Tensor& ga = t.nodes_[a].grad;
                        for (std::size_t i = 0; i < T; ++i)
                            for (std::size_t k = 0; k < K; ++k) {
                                double acc = 0.0;
                                const double* grow = go.data() + i * O;
                                const double* brow = tb.data() + k * O;
                                for (std::size_t j = 0; j < O; ++j) acc += grow[j] * brow[j];
                                ga.at(i, k) += acc;
                            }
                    }
                    if (t.nodes_[b].requires_grad) {
                        t.ensure_grad(b);
                        Tensor& gb = t.nodes_[b].grad;
                        for (std::size_t k = 0; k < K; ++k)
                            for (std::size_t i = 0; i < T; ++i) {
                                const double av = ta.at(i, k);
                                const double* grow = go.data() + i * O;
                                double* brow = gb.data() + k * O;
                                for (std::size_t j = 0; j < O; ++j) brow[j] += av * grow[j];
                            }
                    }
                });
}

NodeId Tape::embed_rows(NodeId table, std::vector<int> ids) {
    const Tensor& tt = nodes_[table].values;
    if (tt.rank() != 2) throw InputDomainError("embed_rows: table must be rank 2");
    const std::size_t V = tt.rows(), W = tt.cols(), T = ids.size();
    Tensor out({T, W});
    for (std::size_t t = 0; t < T; ++t) {
        if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= V) {
            throw InputDomainError("embed_rows: id out of range");
        }
        const double* src = tt.data() + static_cast<std::size_t>(ids[t]) * W;
        std::copy(src, src + W, out.data() + t * W);
    }
    return push(std::move(out), needs_grad(table), "embed_rows",
                [table, ids = std::move(ids), W](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    t.ensure_grad(table);
                    Tensor& gt = t.nodes_[table].grad;
                    for (std::size_t r = 0; r < ids.size(); ++r) {
                        double* dst = gt.data() + static_cast<std::size_t>(ids[r]) * W;
                        const double* src = go.data() + r * W;
                        for (std::size_t c = 0; c < W; ++c) dst[c] += src[c];
                    }
                });
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
    const Tensor& tx = nodes_[x].values;
    const Tensor& tg = nodes_[gain].values;
    const Tensor& tb = nodes_[bias].values;
    if (tx.rank() != 2 || tg.size() != tx.cols() || tb.size() != tx.cols()) {
        throw InputDomainError("layer_norm: shape mismatch");
    }
    const std::size_t T = tx.rows(), W = tx.cols();
    Tensor out({T, W});
    std::vector<double> xhat(T * W);
    std::vector<double> inv_sigma(T);
    for (std::size_t r = 0; r < T; ++r) {
        const double* row = tx.data() + r * W;
        double mu = 0.0;
        for (std::size_t c = 0; c < W; ++c) mu += row[c];
        mu /= static_cast<double>(W);
        double var = 0.0;
        for (std::size_t c = 0; c < W; ++c) {
            const double d = row[c] - mu;
            var += d * d;
        }
        var /= static_cast<double>(W);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[r] = is;
        for (std::size_t c = 0; c < W; ++c) {
            const double xh = (row[c] - mu) * is;
            xhat[r * W + c] = xh;
            out.at(r, c) = tg[c] * xh + tb[c];
        }
    }
    const bool rg = needs_grad(x) || needs_grad(gain) || needs_grad(bias);
    return push(std::move(out), rg, "layer_norm",
                [x, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma),
                 W](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    const Tensor& tg = t.nodes_[gain].values;
                    const std::size_t T = go.rows();
                    if (t.nodes_[gain].requires_grad) {
                        t.ensure_grad(gain);
                        Tensor& gg = t.nodes_[gain].grad;
                        for (std::size_t r = 0; r < T; ++r)
                            for (std::size_t c = 0; c < W; ++c)
                                gg[c] += go.at(r, c) * xhat[r * W + c];
                    }
                    if (t.nodes_[bias].requires_grad) {
                        t.ensure_grad(bias);
                        Tensor& gb = t.nodes_[bias].grad;
                        for (std::size_t r = 0; r < T; ++r)
                            for (std::size_t c = 0; c < W; ++c) gb[c] += go.at(r, c);
                    }
                    if (t.nodes_[x].requires_grad) {
                        t.ensure_grad(x);
                        Tensor& gx = t.nodes_[x].grad;
                        const double invW = 1.0 / static_cast<double>(W);
                        for (std::size_t r = 0; r < T; ++r) {
                            double mean_h = 0.0, mean_hx = 0.0;
                            for (std::size_t c = 0; c < W; ++c) {
                                const double h = tg[c] * go.at(r, c);
                                mean_h += h;
                                mean_hx += h * xhat[r * W + c];
                            }
                            mean_h *= invW;
                            mean_hx *= invW;
                            for (std::size_t c = 0; c < W; ++c) {
                                const double h = tg[c] * go.at(r, c);
                                gx.at(r, c) += inv_sigma[r] *
                                               (h - mean_h - xhat[r * W + c] * mean_hx);
                            }
                        }
                    }
                });
}

NodeId Tape::attention(NodeId q, NodeId k, NodeId v, int heads) {
    const Tensor& tq = nodes_[q].values;
    const Tensor& tk = nodes_[k].values;
    const Tensor& tv = nodes_[v].values;
    if (!tq.same_shape(tk) || !tq.same_shape(tv) || tq.rank() != 2) {
        throw InputDomainError("attention: q/k/v shape mismatch");
    }
    const std::size_t T = tq.rows(), W = tq.cols();
    if (heads <= 0 || W % static_cast<std::size_t>(heads) != 0) {
        throw InputDomainError("attention: width not divisible by heads");
    }
    const std::size_t H = static_cast<std::size_t>(heads), D = W / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(D));

    Tensor out({T, W});
    std::vector<double> attn(H * T * T);  // softmax weights, kept for backward
    std::vector<double> scores(T);
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t off = h * D;
        for (std::size_t i = 0; i < T; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < T; ++j) {
                double s = 0.0;
                for (std::size_t d = 0; d < D; ++d) s += tq.at(i, off + d) * tk.at(j, off + d);
                s *= scale;
                scores[j] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < T; ++j) {
                const double e = std::exp(scores[j] - mx);
                attn[(h * T + i) * T + j] = e;
                z += e;
            }
            const double inv_z = 1.0 / z;
            for (std::size_t j = 0; j < T; ++j) attn[(h * T + i) * T + j] *= inv_z;
            for (std::size_t d = 0; d < D; ++d) {
                double acc = 0.0;
                for (std::size_t j = 0; j < T; ++j)
                    acc += attn[(h * T + i) * T + j] * tv.at(j, off + d);
                out.at(i, off + d) = acc;
            }
        }
    }
    const bool rg = needs_grad(q) || needs_grad(k) || needs_grad(v);
    return push(std::move(out), rg, "attention",
                [q, k, v, H, D, T, scale, attn = std::move(attn)](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    const Tensor& tq = t.nodes_[q].values;
                    const Tensor& tk = t.nodes_[k].values;
                    const Tensor& tv = t.nodes_[v].values;
                    t.ensure_grad(q);
                    t.ensure_grad(k);
                    t.ensure_grad(v);
                    Tensor& gq = t.nodes_[q].grad;
                    Tensor& gk = t.nodes_[k].grad;
                    Tensor& gv = t.nodes_[v].grad;
                    std::vector<double> da(T), ds(T);
                    for (std::size_t h = 0; h < H; ++h) {
                        const std::size_t off = h * D;
                        for (std::size_t i = 0; i < T; ++i) {
                            const double* arow = attn.data() + (h * T + i) * T;
                            // dV and dA
                            double dot = 0.0;
                            for (std::size_t j = 0; j < T; ++j) {
                                double acc = 0.0;
                                for (std::size_t d = 0; d < D; ++d)
                                    acc += go.at(i, off + d) * tv.at(j, off + d);
                                da[j] = acc;
                                dot += arow[j] * acc;
                            }
                            for (std::size_t j = 0; j < T; ++j) {
                                ds[j] = arow[j] * (da[j] - dot);
                                for (std::size_t d = 0; d < D; ++d)
                                    gv.at(j, off + d) += arow[j] * go.at(i, off + d);
                            }
                            for (std::size_t j = 0; j < T; ++j) {
                                const double s = ds[j] * scale;
                                for (std::size_t d = 0; d < D; ++d) {
                                    gq.at(i, off + d) += s * tk.at(j, off + d);
                                    gk.at(j, off + d) += s * tq.at(i, off + d);
                                }
                            }
                        }
                    }
                });
}

NodeId Tape::gelu(NodeId x) {
    const Tensor& tx = nodes_[x].values;
    Tensor out = tx;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double xv = tx[i];
        out[i] = 0.5 * xv * (1.0 + std::erf(xv * kInvSqrt2));
    }
    return push(std::move(out), needs_grad(x), "gelu", [x](Tape& t, NodeId self) {
        const Tensor& go = t.nodes_[self].grad;
        const Tensor& tx = t.nodes_[x].values;
        t.ensure_grad(x);
        Tensor& gx = t.nodes_[x].grad;
        for (std::size_t i = 0; i < tx.size(); ++i) {
            const double xv = tx[i];
            const double cdf = 0.5 * (1.0 + std::erf(xv * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xv * xv);
            gx[i] += go[i] * (cdf + xv * pdf);
        }
    });
}

NodeId Tape::log_softmax_rows(NodeId x) {
    const Tensor& tx = nodes_[x].values;
    if (tx.rank() != 2) throw InputDomainError("log_softmax_rows: rank-2 input required");
    const std::size_t T = tx.rows(), V = tx.cols();
    Tensor out({T, V});
    for (std::size_t r = 0; r < T; ++r) {
        const double* row = tx.data() + r * V;
        double mx = row[0];
        for (std::size_t c = 1; c < V; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < V; ++c) z += std::exp(row[c] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t c = 0; c < V; ++c) out.at(r, c) = row[c] - lse;
    }
    return push(std::move(out), needs_grad(x), "log_softmax",
                [x](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[self].grad;
                    const Tensor& ty = t.nodes_[self].values;
                    t.ensure_grad(x);
                    Tensor& gx = t.nodes_[x].grad;
                    const std::size_t T = ty.rows(), V = ty.cols();
                    for (std::size_t r = 0; r < T; ++r) {
                        double gsum = 0.0;
                        for (std::size_t c = 0; c < V; ++c) gsum += go.at(r, c);
                        for (std::size_t c = 0; c < V; ++c)
                            gx.at(r, c) += go.at(r, c) - std::exp(ty.at(r, c)) * gsum;
                    }
                });
}

NodeId Tape::sum(NodeId x) {
    const Tensor& tx = nodes_[x].values;
    double acc = 0.0;
    for (std::size_t i = 0; i < tx.size(); ++i) acc += tx[i];
    return push(Tensor::scalar(acc), needs_grad(x), "sum", [x](Tape& t, NodeId self) {
        const double g = t.nodes_[self].grad.value();
        t.ensure_grad(x);
        Tensor& gx = t.nodes_[x].grad;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
}

NodeId Tape::gather_weighted(NodeId x, std::vector<GatherTerm> terms) {
    const Tensor& tx = nodes_[x].values;
    if (tx.rank() != 2) throw InputDomainError("gather_weighted: rank-2 input required");
    double acc = 0.0;
    for (const auto& gt : terms) {
        if (gt.row >= tx.rows() || gt.col >= tx.cols()) {
            throw InputDomainError("gather_weighted: index out of range");
        }
        acc += gt.weight * tx.at(gt.row, gt.col);
    }
    return push(Tensor::scalar(acc), needs_grad(x), "gather_weighted",
                [x, terms = std::move(terms)](Tape& t, NodeId self) {
                    const double g = t.nodes_[self].grad.value();
                    t.ensure_grad(x);
                    Tensor& gx = t.nodes_[x].grad;
                    for (const auto& gt : terms) gx.at(gt.row, gt.col) += g * gt.weight;
                });
}

// ---------------------------------------------------------------------------
// scalar ops
// ---------------------------------------------------------------------------

NodeId Tape::s_add(NodeId a, NodeId b) {
    check_scalar(a, "s_add");
    check_scalar(b, "s_add");
    return push(Tensor::scalar(value(a) + value(b)), needs_grad(a) || needs_grad(b), "s_add",
                [a, b](Tape& t, NodeId self) {
                    const Tensor& g = t.nodes_[self].grad;
                    t.accumulate(a, g);
                    t.accumulate(b, g);
                });
}

NodeId Tape::s_sub(NodeId a, NodeId b) {
    check_scalar(a, "s_sub");
    check_scalar(b, "s_sub");
    return push(Tensor::scalar(value(a) - value(b)), needs_grad(a) || needs_grad(b), "s_sub",
                [a, b](Tape& t, NodeId self) {
                    const double g = t.nodes_[self].grad.value();
                    t.accumulate(a, Tensor::scalar(g));
                    t.accumulate(b, Tensor::scalar(-g));
                });
}

NodeId Tape::s_mul(NodeId a, NodeId b) {
    check_scalar(a, "s_mul");
    check_scalar(b, "s_mul");
    return push(Tensor::scalar(value(a) * value(b)), needs_grad(a) || needs_grad(b), "s_mul",
                [a, b](Tape& t, NodeId self) {
                    const double g = t.nodes_[self].grad.value();
                    t.accumulate(a, Tensor::scalar(g * t.value(b)));
                    t.accumulate(b, Tensor::scalar(g * t.value(a)));
                });
}

NodeId Tape::s_scale(NodeId a, double c) {
    check_scalar(a, "s_scale");
    return push(Tensor::scalar(value(a) * c), needs_grad(a), "s_scale",
                [a, c](Tape& t, NodeId self) {
                    t.accumulate(a, Tensor::scalar(t.nodes_[self].grad.value() * c));
                });
}

NodeId Tape::s_shift(NodeId a, double c) {
    check_scalar(a, "s_shift");
    return push(Tensor::scalar(value(a) + c), needs_grad(a), "s_shift",
                [a](Tape& t, NodeId self) {
                    t.accumulate(a, Tensor::scalar(t.nodes_[self].grad.value()));
                });
}

NodeId Tape::s_exp(NodeId a) {
    check_scalar(a, "s_exp");
    return push(Tensor::scalar(std::exp(value(a))), needs_grad(a), "s_exp",
                [a](Tape& t, NodeId self) {
                    const double y = t.nodes_[self].values.value();
                    t.accumulate(a, Tensor::scalar(t.nodes_[self].grad.value() * y));
                });
}

NodeId Tape::s_square(NodeId a) {
    check_scalar(a, "s_square");
    const double av = value(a);
    return push(Tensor::scalar(av * av), needs_grad(a), "s_square",
                [a](Tape& t, NodeId self) {
                    const double g = t.nodes_[self].grad.value();
                    t.accumulate(a, Tensor::scalar(2.0 * t.value(a) * g));
                });
}

NodeId Tape::s_min(NodeId a, NodeId b) {
    check_scalar(a, "s_min");
    check_scalar(b, "s_min");
    const bool pick_a = value(a) <= value(b);
    return push(Tensor::scalar(pick_a ? value(a) : value(b)),
                needs_grad(a) || needs_grad(b), "s_min",
                [a, b, pick_a](Tape& t, NodeId self) {
                    const Tensor& g = t.nodes_[self].grad;
                    t.accumulate(pick_a ? a : b, g);
                });
}

NodeId Tape::s_clip(NodeId a, double lo, double hi) {
    check_scalar(a, "s_clip");
    const double av = value(a);
    const double cv = std::clamp(av, lo, hi);
    const bool inside = av >= lo && av <= hi;
    return push(Tensor::scalar(cv), needs_grad(a), "s_clip",
                [a, inside](Tape& t, NodeId self) {
                    if (inside) t.accumulate(a, t.nodes_[self].grad);
                });
}

NodeId Tape::s_mean(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw InputDomainError("s_mean: empty operand list");
    double acc = 0.0;
    bool rg = false;
    for (NodeId id : xs) {
        check_scalar(id, "s_mean");
        acc += value(id);
        rg = rg || needs_grad(id);
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    return push(Tensor::scalar(acc * inv), rg, "s_mean",
                [xs, inv](Tape& t, NodeId self) {
                    const double g = t.nodes_[self].grad.value() * inv;
                    for (NodeId id : xs) t.accumulate(id, Tensor::scalar(g));
                });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::backward(NodeId loss) {
    if (!record_) throw ConsistencyError("backward on a non-recording tape");
    check_scalar(loss, "backward");
    if (!std::isfinite(value(loss))) {
        // Report where the problem started, not just the final node.
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Tensor& v = nodes_[i].values;
            for (std::size_t j = 0; j < v.size(); ++j) {
                if (!std::isfinite(v[j])) {
                    const std::string& lbl = nodes_[i].label;
                    throw NumericError("non-finite loss; first bad node: " +
                                       (lbl.empty() ? "node#" + std::to_string(i) : lbl));
                }
            }
        }
        throw NumericError("non-finite loss");
    }
    ensure_grad(loss);
    nodes_[loss].grad[0] = 1.0;
    for (NodeId i = loss + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.grad_ready && n.backprop) n.backprop(*this, i);
    }
}

const Tensor& Tape::grad(NodeId id) {
    ensure_grad(id);
    return nodes_[id].grad;
}

ParameterSet Tape::param_grads() const {
    if (!bound_) throw ConsistencyError("tape has no bound parameter set");
    ParameterSet out;
    for (const std::string& name : bound_->names()) {
        NodeId leaf = 0;
        bool found = false;
        for (const auto& [n, id] : param_leaves_) {
            if (n == name) {
                leaf = id;
                found = true;
                break;
            }
        }
        if (found && nodes_[leaf].grad_ready) {
            out.add(name, nodes_[leaf].grad);
        } else {
            out.add(name, Tensor::zeros(bound_->at(name).shape()));
        }
    }
    return out;
}

}  // namespace espo::nn
