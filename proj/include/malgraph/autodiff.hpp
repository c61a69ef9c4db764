#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "malgraph/common.hpp"

namespace malgraph {

// Dense row-major tensor of 64-bit floats. 32-bit only appears at file
// boundaries.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), v(std::move(values)) {}

    static Tensor zeros(std::vector<int> shape);
    static Tensor scalar(double value) { return Tensor({}, {value}); }

    std::int64_t size() const {
        std::int64_t n = 1;
        for (const int d : shape) n *= d;
        return n;
    }
    bool is_scalar() const { return shape.empty(); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }
    double& at2(int i, int j) { return v[static_cast<std::size_t>(i) * cols() + j]; }
    double at2(int i, int j) const { return v[static_cast<std::size_t>(i) * cols() + j]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

// Constant sparse matrix (no gradient through its values); entries sorted by
// (row, col) so products accumulate in a fixed order.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    struct Entry {
        int row;
        int col;
        double value;
    };
    std::vector<Entry> entries;

    void sort_entries();
};

enum class BnMode {
    kTrain,      // batch statistics; running stats updated
    kEval,       // running statistics
    kBatchOnly,  // batch statistics; running stats untouched (Tent)
};

// Running statistics owned by the model, referenced by batch_norm ops.
struct BnStats {
    Tensor running_mean;
    Tensor running_var;  // population variance
};

// Reverse-mode tape. Operations append records; backward replays them in
// exact reverse creation order. Single-threaded by design.
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Var leaf(Tensor value, bool requires_grad = false);

    Var matmul(Var a, Var b);
    Var add(Var a, Var b);            // same shape
    Var add_broadcast(Var a, Var b);  // a: m x n, b: n, added to every row
    Var scale(Var a, double s);
    Var relu(Var a);
    Var dropout(Var a, double p, Rng& rng);  // inverted dropout; p = 0 is identity
    Var spmm(const SparseMatrix& m, Var h);
    // ids must be sorted non-decreasing and cover 0..num_segments-1. Gradient
    // routes to the first index attaining each per-column maximum.
    Var segment_max(Var a, const std::vector<int>& segment_ids, int num_segments);
    Var segment_mean(Var a, const std::vector<int>& segment_ids, int num_segments);
    Var batch_norm(Var x, Var gamma, Var beta, BnStats* stats, BnMode mode, double eps = 1e-5,
                   double momentum = 0.1);
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);
    Var mean_entropy(Var logits);  // nats
    Var sum(Var a);

    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Tensor& grad_mut(Var v) { return nodes_[v.id].grad; }
    const Tensor& val(Var v) const { return nodes_[v.id].value; }

    std::vector<Node> nodes_;
};

// Softmax over the last axis of a 2-D tensor, numerically stabilized.
// Shared by the loss ops and the prototype classifier.
std::vector<double> softmax_row(const double* logits, int count);

}  // namespace malgraph
