#include "malgraph/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace malgraph {

Tensor Tensor::zeros(std::vector<int> shape) {
    std::int64_t n = 1;
    for (const int d : shape) {
        if (d < 0) throw ValidationError("tensor dimension is negative");
        n *= d;
    }
    Tensor t;
    t.shape = std::move(shape);
    t.v.assign(static_cast<std::size_t>(n), 0.0);
    return t;
}

bool Tensor::all_finite() const {
    for (const double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void SparseMatrix::sort_entries() {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
}

std::vector<double> softmax_row(const double* logits, int count) {
    double hi = logits[0];
    for (int i = 1; i < count; ++i) hi = std::max(hi, logits[i]);
    std::vector<double> p(static_cast<std::size_t>(count));
    double z = 0.0;
    for (int i = 0; i < count; ++i) {
        p[i] = std::exp(logits[i] - hi);
        z += p[i];
    }
    for (int i = 0; i < count; ++i) p[i] /= z;
    return p;
}

// Each op captures its own output id (known before push) plus input ids, and
// reads tensors back through the tape at backward time, so node storage may
// reallocate freely while the tape grows.

Tape::Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    Node node;
    node.grad = Tensor::zeros(value.shape);
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Tape::Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.cols() != tb.rows()) {
        throw ValidationError("matmul: incompatible shapes");
    }
    const int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = ta.v.data() + static_cast<std::size_t>(i) * k;
        double* orow = out.v.data() + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = tb.v.data() + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    const int ia = a.id, ib = b.id;
    const int io = static_cast<int>(nodes_.size());
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, [ia, ib, io, m, k, n](Tape& t) {
        const Tensor& go = t.nodes_[io].grad;
        const Tensor& va = t.nodes_[ia].value;
        const Tensor& vb = t.nodes_[ib].value;
        if (t.nodes_[ia].requires_grad) {
            Tensor& ga = t.nodes_[ia].grad;  // dA += dC * B^T
            for (int i = 0; i < m; ++i) {
                const double* grow = go.v.data() + static_cast<std::size_t>(i) * n;
                double* garow = ga.v.data() + static_cast<std::size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) {
                    const double* brow = vb.v.data() + static_cast<std::size_t>(kk) * n;
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    garow[kk] += acc;
                }
            }
        }
        if (t.nodes_[ib].requires_grad) {
            Tensor& gb = t.nodes_[ib].grad;  // dB += A^T * dC
            for (int kk = 0; kk < k; ++kk) {
                double* gbrow = gb.v.data() + static_cast<std::size_t>(kk) * n;
                for (int i = 0; i < m; ++i) {
                    const double av = va.v[static_cast<std::size_t>(i) * k + kk];
                    if (av == 0.0) continue;
                    const double* grow = go.v.data() + static_cast<std::size_t>(i) * n;
                    for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

Tape::Var Tape::add(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (!ta.same_shape(tb)) throw ValidationError("add: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    const int ia = a.id, ib = b.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a) || requires_grad(b), [ia, ib, io](Tape& t) {
        const Tensor& go = t.nodes_[io].grad;
        for (const int idx : {ia, ib}) {
            if (!t.nodes_[idx].requires_grad) continue;
            Tensor& g = t.nodes_[idx].grad;
            for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += go.v[i];
        }
    });
}

Tape::Var Tape::add_broadcast(Var a, Var b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 1 || tb.shape[0] != ta.cols()) {
        throw ValidationError("add_broadcast: expected (m x n) + (n)");
    }
    const int m = ta.rows(), n = ta.cols();
    Tensor out = ta;
    for (int i = 0; i < m; ++i) {
        double* row = out.v.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] += tb.v[j];
    }
    const int ia = a.id, ib = b.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a) || requires_grad(b), [ia, ib, io, m, n](Tape& t) {
        const Tensor& go = t.nodes_[io].grad;
        if (t.nodes_[ia].requires_grad) {
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += go.v[i];
        }
        if (t.nodes_[ib].requires_grad) {
            Tensor& gb = t.nodes_[ib].grad;
            for (int i = 0; i < m; ++i) {
                const double* grow = go.v.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) gb.v[j] += grow[j];
            }
        }
    });
}

Tape::Var Tape::scale(Var a, double s) {
    Tensor out = val(a);
    for (double& x : out.v) x *= s;
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a), [ia, io, s](Tape& t) {
        if (!t.nodes_[ia].requires_grad) return;
        const Tensor& go = t.nodes_[io].grad;
        Tensor& ga = t.nodes_[ia].grad;
        for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += s * go.v[i];
    });
}

Tape::Var Tape::relu(Var a) {
    Tensor out = val(a);
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a), [ia, io](Tape& t) {
        if (!t.nodes_[ia].requires_grad) return;
        const Tensor& go = t.nodes_[io].grad;
        const Tensor& va = t.nodes_[ia].value;
        Tensor& ga = t.nodes_[ia].grad;
        for (std::size_t i = 0; i < ga.v.size(); ++i) {
            if (va.v[i] > 0.0) ga.v[i] += go.v[i];
        }
    });
}

Tape::Var Tape::dropout(Var a, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("dropout: p must be in [0, 1)");
    if (p == 0.0) return a;
    const Tensor& ta = val(a);
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(ta.v.size());
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        mask[i] = rng.bernoulli(p) ? 0.0 : keep_scale;
        out.v[i] *= mask[i];
    }
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a), [ia, io, mask = std::move(mask)](Tape& t) {
        if (!t.nodes_[ia].requires_grad) return;
        const Tensor& go = t.nodes_[io].grad;
        Tensor& ga = t.nodes_[ia].grad;
        for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += go.v[i] * mask[i];
    });
}

Tape::Var Tape::spmm(const SparseMatrix& m, Var h) {
    const Tensor& th = val(h);
    if (th.shape.size() != 2 || th.rows() != m.cols) throw ValidationError("spmm: shape mismatch");
    const int n = th.cols();
    Tensor out = Tensor::zeros({m.rows, n});
    for (const auto& e : m.entries) {
        const double* src = th.v.data() + static_cast<std::size_t>(e.col) * n;
        double* dst = out.v.data() + static_cast<std::size_t>(e.row) * n;
        for (int j = 0; j < n; ++j) dst[j] += e.value * src[j];
    }
    const int ih = h.id;
    const int io = static_cast<int>(nodes_.size());
    // Entries copied: the caller's matrix may not outlive the tape.
    return push(std::move(out), requires_grad(h), [ih, io, n, entries = m.entries](Tape& t) {
        if (!t.nodes_[ih].requires_grad) return;
        const Tensor& go = t.nodes_[io].grad;
        Tensor& gh = t.nodes_[ih].grad;
        for (const auto& e : entries) {
            const double* src = go.v.data() + static_cast<std::size_t>(e.row) * n;
            double* dst = gh.v.data() + static_cast<std::size_t>(e.col) * n;
            for (int j = 0; j < n; ++j) dst[j] += e.value * src[j];
        }
    });
}

Tape::Var Tape::segment_max(Var a, const std::vector<int>& segment_ids, int num_segments) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2) throw ValidationError("segment_max: expected 2-D input");
    const int rows = ta.rows(), cols = ta.cols();
    if (static_cast<int>(segment_ids.size()) != rows) {
        throw ValidationError("segment_max: segment id count does not match rows");
    }
    if (num_segments <= 0) throw ValidationError("segment_max: need at least one segment");
    for (std::size_t i = 0; i < segment_ids.size(); ++i) {
        if (segment_ids[i] < 0 || segment_ids[i] >= num_segments) {
            throw ValidationError("segment_max: segment id out of range");
        }
        if (i > 0 && segment_ids[i] < segment_ids[i - 1]) {
            throw ValidationError("segment_max: segment ids must be sorted");
        }
    }

    Tensor out = Tensor::zeros({num_segments, cols});
    std::vector<int> argmax(static_cast<std::size_t>(num_segments) * cols, -1);
    for (int i = 0; i < rows; ++i) {
        const int s = segment_ids[i];
        const double* row = ta.v.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
            int& am = argmax[static_cast<std::size_t>(s) * cols + j];
            double& best = out.v[static_cast<std::size_t>(s) * cols + j];
            // First index wins ties.
            if (am < 0 || row[j] > best) {
                best = row[j];
                am = i;
            }
        }
    }
    for (int s = 0; s < num_segments; ++s) {
        if (argmax[static_cast<std::size_t>(s) * cols] < 0) {
            throw ValidationError("segment_max: segment " + std::to_string(s) + " is empty");
        }
    }
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a),
                [ia, io, cols, num_segments, argmax = std::move(argmax)](Tape& t) {
                    if (!t.nodes_[ia].requires_grad) return;
                    const Tensor& go = t.nodes_[io].grad;
                    Tensor& ga = t.nodes_[ia].grad;
                    for (int s = 0; s < num_segments; ++s) {
                        for (int j = 0; j < cols; ++j) {
                            const int i = argmax[static_cast<std::size_t>(s) * cols + j];
                            ga.v[static_cast<std::size_t>(i) * cols + j] +=
                                go.v[static_cast<std::size_t>(s) * cols + j];
                        }
                    }
                });
}

Tape::Var Tape::segment_mean(Var a, const std::vector<int>& segment_ids, int num_segments) {
    const Tensor& ta = val(a);
    if (ta.shape.size() != 2) throw ValidationError("segment_mean: expected 2-D input");
    const int rows = ta.rows(), cols = ta.cols();
    if (static_cast<int>(segment_ids.size()) != rows) {
        throw ValidationError("segment_mean: segment id count does not match rows");
    }
    if (num_segments <= 0) throw ValidationError("segment_mean: need at least one segment");
    std::vector<int> counts(static_cast<std::size_t>(num_segments), 0);
    for (std::size_t i = 0; i < segment_ids.size(); ++i) {
        if (segment_ids[i] < 0 || segment_ids[i] >= num_segments) {
            throw ValidationError("segment_mean: segment id out of range");
        }
        if (i > 0 && segment_ids[i] < segment_ids[i - 1]) {
            throw ValidationError("segment_mean: segment ids must be sorted");
        }
        ++counts[segment_ids[i]];
    }
    for (int s = 0; s < num_segments; ++s) {
        if (counts[s] == 0) throw ValidationError("segment_mean: segment " + std::to_string(s) + " is empty");
    }

    Tensor out = Tensor::zeros({num_segments, cols});
    for (int i = 0; i < rows; ++i) {
        const int s = segment_ids[i];
        const double* row = ta.v.data() + static_cast<std::size_t>(i) * cols;
        double* orow = out.v.data() + static_cast<std::size_t>(s) * cols;
        for (int j = 0; j < cols; ++j) orow[j] += row[j] / counts[s];
    }
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(std::move(out), requires_grad(a),
                [ia, io, cols, ids = segment_ids, counts = std::move(counts)](Tape& t) {
                    if (!t.nodes_[ia].requires_grad) return;
                    const Tensor& go = t.nodes_[io].grad;
                    Tensor& ga = t.nodes_[ia].grad;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        const int s = ids[i];
                        for (int j = 0; j < cols; ++j) {
                            ga.v[i * cols + j] += go.v[static_cast<std::size_t>(s) * cols + j] / counts[s];
                        }
                    }
                });
}

Tape::Var Tape::batch_norm(Var x, Var gamma, Var beta, BnStats* stats, BnMode mode, double eps,
                           double momentum) {
    const Tensor& tx = val(x);
    if (tx.shape.size() != 2) throw ValidationError("batch_norm: expected 2-D input");
    const int rows = tx.rows(), cols = tx.cols();
    if (rows < 1) throw ValidationError("batch_norm: empty batch");
    const Tensor& tg = val(gamma);
    const Tensor& tb = val(beta);
    if (tg.shape != std::vector<int>{cols} || tb.shape != std::vector<int>{cols}) {
        throw ValidationError("batch_norm: gamma/beta shape mismatch");
    }
    if (mode == BnMode::kEval && stats == nullptr) {
        throw ValidationError("batch_norm: eval mode requires running statistics");
    }

    std::vector<double> mean(static_cast<std::size_t>(cols), 0.0);
    std::vector<double> var(static_cast<std::size_t>(cols), 0.0);
    if (mode == BnMode::kEval) {
        mean.assign(stats->running_mean.v.begin(), stats->running_mean.v.end());
        var.assign(stats->running_var.v.begin(), stats->running_var.v.end());
    } else {
        for (int i = 0; i < rows; ++i) {
            const double* row = tx.v.data() + static_cast<std::size_t>(i) * cols;
            for (int j = 0; j < cols; ++j) mean[j] += row[j];
        }
        for (int j = 0; j < cols; ++j) mean[j] /= rows;
        for (int i = 0; i < rows; ++i) {
            const double* row = tx.v.data() + static_cast<std::size_t>(i) * cols;
            for (int j = 0; j < cols; ++j) {
                const double d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        for (int j = 0; j < cols; ++j) var[j] /= rows;
        if (mode == BnMode::kTrain && stats != nullptr) {
            for (int j = 0; j < cols; ++j) {
                stats->running_mean.v[j] = (1.0 - momentum) * stats->running_mean.v[j] + momentum * mean[j];
                stats->running_var.v[j] = (1.0 - momentum) * stats->running_var.v[j] + momentum * var[j];
            }
        }
    }

    std::vector<double> inv_std(static_cast<std::size_t>(cols));
    for (int j = 0; j < cols; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);

    Tensor out = Tensor::zeros({rows, cols});
    std::vector<double> xhat(tx.v.size());
    for (int i = 0; i < rows; ++i) {
        const double* row = tx.v.data() + static_cast<std::size_t>(i) * cols;
        double* orow = out.v.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
            const double xh = (row[j] - mean[j]) * inv_std[j];
            xhat[static_cast<std::size_t>(i) * cols + j] = xh;
            orow[j] = tg.v[j] * xh + tb.v[j];
        }
    }

    const bool batch_stats = mode != BnMode::kEval;
    const int ix = x.id, ig = gamma.id, ib = beta.id;
    const int io = static_cast<int>(nodes_.size());
    const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
    return push(std::move(out), rg,
                [ix, ig, ib, io, rows, cols, batch_stats, inv_std = std::move(inv_std),
                 xhat = std::move(xhat)](Tape& t) {
                    const Tensor& go = t.nodes_[io].grad;
                    const Tensor& tg = t.nodes_[ig].value;
                    if (t.nodes_[ig].requires_grad) {
                        Tensor& gg = t.nodes_[ig].grad;
                        for (int i = 0; i < rows; ++i) {
                            for (int j = 0; j < cols; ++j) {
                                gg.v[j] += go.v[static_cast<std::size_t>(i) * cols + j] *
                                           xhat[static_cast<std::size_t>(i) * cols + j];
                            }
                        }
                    }
                    if (t.nodes_[ib].requires_grad) {
                        Tensor& gb = t.nodes_[ib].grad;
                        for (int i = 0; i < rows; ++i) {
                            for (int j = 0; j < cols; ++j) {
                                gb.v[j] += go.v[static_cast<std::size_t>(i) * cols + j];
                            }
                        }
                    }
                    if (!t.nodes_[ix].requires_grad) return;
                    Tensor& gx = t.nodes_[ix].grad;
                    if (!batch_stats) {
                        // Statistics are constants in eval mode.
                        for (int i = 0; i < rows; ++i) {
                            for (int j = 0; j < cols; ++j) {
                                gx.v[static_cast<std::size_t>(i) * cols + j] +=
                                    go.v[static_cast<std::size_t>(i) * cols + j] * tg.v[j] * inv_std[j];
                            }
                        }
                        return;
                    }
                    // Batch statistics participate in the gradient:
                    // dx = (g/N) * inv_std * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
                    for (int j = 0; j < cols; ++j) {
                        double sum_dy = 0.0, sum_dy_xhat = 0.0;
                        for (int i = 0; i < rows; ++i) {
                            const double dy = go.v[static_cast<std::size_t>(i) * cols + j];
                            sum_dy += dy;
                            sum_dy_xhat += dy * xhat[static_cast<std::size_t>(i) * cols + j];
                        }
                        const double scale = tg.v[j] * inv_std[j] / rows;
                        for (int i = 0; i < rows; ++i) {
                            const double dy = go.v[static_cast<std::size_t>(i) * cols + j];
                            const double xh = xhat[static_cast<std::size_t>(i) * cols + j];
                            gx.v[static_cast<std::size_t>(i) * cols + j] +=
                                scale * (rows * dy - sum_dy - xh * sum_dy_xhat);
                        }
                    }
                });
}

Tape::Var Tape::softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& tl = val(logits);
    if (tl.shape.size() != 2) throw ValidationError("softmax_cross_entropy: expected 2-D logits");
    const int rows = tl.rows(), cols = tl.cols();
    if (rows < 1) throw ValidationError("softmax_cross_entropy: empty batch");
    if (static_cast<int>(labels.size()) != rows) {
        throw ValidationError("softmax_cross_entropy: label count mismatch");
    }
    for (const int y : labels) {
        if (y < 0 || y >= cols) throw ValidationError("softmax_cross_entropy: label out of range");
    }

    std::vector<double> probs(tl.v.size());
    double loss = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double* row = tl.v.data() + static_cast<std::size_t>(i) * cols;
        const auto p = softmax_row(row, cols);
        std::copy(p.begin(), p.end(), probs.begin() + static_cast<std::size_t>(i) * cols);
        loss -= std::log(std::max(p[labels[i]], 1e-300));
    }
    loss /= rows;

    const int il = logits.id;
    const int io = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(loss), requires_grad(logits),
                [il, io, rows, cols, labels, probs = std::move(probs)](Tape& t) {
                    if (!t.nodes_[il].requires_grad) return;
                    const double g = t.nodes_[io].grad.v[0];
                    Tensor& gl = t.nodes_[il].grad;
                    for (int i = 0; i < rows; ++i) {
                        for (int j = 0; j < cols; ++j) {
                            const double p = probs[static_cast<std::size_t>(i) * cols + j];
                            const double onehot = labels[i] == j ? 1.0 : 0.0;
                            gl.v[static_cast<std::size_t>(i) * cols + j] += g * (p - onehot) / rows;
                        }
                    }
                });
}

Tape::Var Tape::mean_entropy(Var logits) {
    const Tensor& tl = val(logits);
    if (tl.shape.size() != 2) throw ValidationError("mean_entropy: expected 2-D logits");
    const int rows = tl.rows(), cols = tl.cols();
    if (rows < 1) throw ValidationError("mean_entropy: empty batch");

    std::vector<double> probs(tl.v.size());
    std::vector<double> entropy(static_cast<std::size_t>(rows), 0.0);
    double loss = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double* row = tl.v.data() + static_cast<std::size_t>(i) * cols;
        const auto p = softmax_row(row, cols);
        double h = 0.0;
        for (int j = 0; j < cols; ++j) {
            probs[static_cast<std::size_t>(i) * cols + j] = p[j];
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        }
        entropy[i] = h;
        loss += h;
    }
    loss /= rows;

    const int il = logits.id;
    const int io = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(loss), requires_grad(logits),
                [il, io, rows, cols, probs = std::move(probs), entropy = std::move(entropy)](Tape& t) {
                    if (!t.nodes_[il].requires_grad) return;
                    const double g = t.nodes_[io].grad.v[0];
                    Tensor& gl = t.nodes_[il].grad;
                    // dH/dz_j = -p_j (log p_j + H)
                    for (int i = 0; i < rows; ++i) {
                        for (int j = 0; j < cols; ++j) {
                            const double p = probs[static_cast<std::size_t>(i) * cols + j];
                            if (p <= 0.0) continue;
                            gl.v[static_cast<std::size_t>(i) * cols + j] +=
                                g * (-p * (std::log(p) + entropy[i])) / rows;
                        }
                    }
                });
}

Tape::Var Tape::sum(Var a) {
    const Tensor& ta = val(a);
    double total = 0.0;
    for (const double x : ta.v) total += x;
    const int ia = a.id;
    const int io = static_cast<int>(nodes_.size());
    return push(Tensor::scalar(total), requires_grad(a), [ia, io](Tape& t) {
        if (!t.nodes_[ia].requires_grad) return;
        const double g = t.nodes_[io].grad.v[0];
        Tensor& ga = t.nodes_[ia].grad;
        for (double& x : ga.v) x += g;
    });
}

void Tape::backward(Var loss) {
    if (!loss.valid() || loss.id >= static_cast<int>(nodes_.size())) {
        throw ValidationError("backward: invalid loss var");
    }
    if (!val(loss).is_scalar()) throw ValidationError("backward: loss must be a scalar");
    grad_mut(loss).v[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        if (nodes_[i].requires_grad && nodes_[i].back) nodes_[i].back(*this);
    }
}

}  // namespace malgraph
