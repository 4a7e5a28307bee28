#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "matrix.hpp"

namespace lsi {

class Tape;

// Lightweight handle to a tape node.
struct Value {
    Tape *tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Gradients of a scalar loss with respect to trainable leaves only; frozen
// leaves never appear here.
class GradStore {
  public:
    bool contains(Value v) const { return grads_.count(v.id) != 0; }
    const Matrix &at(Value v) const;
    size_t size() const { return grads_.size(); }

  private:
    friend class Tape;
    std::unordered_map<int, Matrix> grads_;
};

// Reverse-mode tape at matrix granularity. Nodes are recorded in evaluation
// order, so operands always precede their consumers. Single-threaded.
class Tape {
  public:
    Value leaf(Matrix value, bool trainable);
    Value constant(Matrix value) { return leaf(std::move(value), false); }

    Value matmul(Value a, Value b);
    Value matmul_nt(Value a, Value b); // a * b^T
    Value add(Value a, Value b);
    Value mul(Value a, Value b); // elementwise
    Value scale(Value a, double s);
    Value add_rowvec(Value a, Value v);
    Value mul_rowvec(Value a, Value v);
    Value gelu(Value a);
    Value softmax_rows(Value a, bool causal = false);
    Value layernorm_rows(Value a, double eps = 1e-5);

    // Identity when training is false or p == 0; otherwise applies a mask
    // keyed by (rng.seed, rng.tag, counter_base).
    Value dropout(Value a, double p, bool training, const StatelessRng &rng,
                  uint64_t counter_base);

    // Gather rows of a table: out.row(t) = table.row(ids[t]).
    Value embed_rows(Value table, const std::vector<int> &ids);
    Value slice_cols(Value a, int col_begin, int col_end);
    Value concat_cols(const std::vector<Value> &parts);

    Value sum(Value a); // 1x1
    // Mean cross-entropy over positions where mask[t] == 1. logits is
    // len x vocab, targets has len entries. Errors if the mask is all zero.
    Value cross_entropy(Value logits, const std::vector<int> &targets,
                        const std::vector<uint8_t> &mask);

    const Matrix &value(Value v) const;
    double scalar_value(Value v) const;
    size_t node_count() const { return nodes_.size(); }

    // Populates gradients for every trainable leaf (zeros if the leaf does
    // not reach the loss). loss must be a 1x1 node of this tape.
    GradStore backward(Value loss);

  private:
    enum class Op : uint8_t {
        leaf,
        matmul,
        matmul_nt,
        add,
        mul,
        scale,
        add_rowvec,
        mul_rowvec,
        gelu,
        softmax,
        softmax_causal,
        layernorm,
        dropout,
        embed_rows,
        slice_cols,
        concat_cols,
        sum,
        cross_entropy,
    };

    struct Node {
        Op op;
        bool trainable = false;
        Matrix value;
        std::vector<int> args;
        double scalar = 0.0;        // scale factor / layernorm eps
        Matrix aux;                 // dropout mask
        std::vector<int> indices;   // embed ids / slice bounds / ce targets
        std::vector<uint8_t> mask;  // ce mask
    };

    Value push(Node node);
    const Node &node(Value v) const;
    int check(Value v) const;

    std::vector<Node> nodes_;
};

} // namespace lsi
