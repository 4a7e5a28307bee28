#include "autodiff.hpp"

#include <cmath>

namespace lsi {

const Matrix &GradStore::at(Value v) const {
    auto it = grads_.find(v.id);
    if (it == grads_.end()) {
        fail(ErrorCode::invalid_argument, "no gradient recorded for this value");
    }
    return it->second;
}

int Tape::check(Value v) const {
    if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        fail(ErrorCode::invalid_argument, "value does not belong to this tape");
    }
    return v.id;
}

const Tape::Node &Tape::node(Value v) const { return nodes_[check(v)]; }

const Matrix &Tape::value(Value v) const { return node(v).value; }

double Tape::scalar_value(Value v) const {
    const Matrix &m = value(v);
    if (m.rows != 1 || m.cols != 1) {
        fail(ErrorCode::invalid_argument, "expected scalar node, got " + m.shape_str());
    }
    return m.data[0];
}

Value Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size() - 1)};
}

Value Tape::leaf(Matrix value, bool trainable) {
    Node n;
    n.op = Op::leaf;
    n.trainable = trainable;
    n.value = std::move(value);
    return push(std::move(n));
}

Value Tape::matmul(Value a, Value b) {
    Node n;
    n.op = Op::matmul;
    n.args = {check(a), check(b)};
    n.value = lsi::matmul(value(a), value(b));
    return push(std::move(n));
}

Value Tape::matmul_nt(Value a, Value b) {
    Node n;
    n.op = Op::matmul_nt;
    n.args = {check(a), check(b)};
    n.value = lsi::matmul_nt(value(a), value(b));
    return push(std::move(n));
}

Value Tape::add(Value a, Value b) {
    Node n;
    n.op = Op::add;
    n.args = {check(a), check(b)};
    n.value = lsi::add(value(a), value(b));
    return push(std::move(n));
}

Value Tape::mul(Value a, Value b) {
    Node n;
    n.op = Op::mul;
    n.args = {check(a), check(b)};
    n.value = lsi::mul(value(a), value(b));
    return push(std::move(n));
}

Value Tape::scale(Value a, double s) {
    Node n;
    n.op = Op::scale;
    n.args = {check(a)};
    n.scalar = s;
    n.value = lsi::scale(value(a), s);
    return push(std::move(n));
}

Value Tape::add_rowvec(Value a, Value v) {
    Node n;
    n.op = Op::add_rowvec;
    n.args = {check(a), check(v)};
    n.value = lsi::add_rowvec(value(a), value(v));
    return push(std::move(n));
}

Value Tape::mul_rowvec(Value a, Value v) {
    Node n;
    n.op = Op::mul_rowvec;
    n.args = {check(a), check(v)};
    n.value = lsi::mul_rowvec(value(a), value(v));
    return push(std::move(n));
}

Value Tape::gelu(Value a) {
    Node n;
    n.op = Op::gelu;
    n.args = {check(a)};
    n.value = lsi::gelu(value(a));
    return push(std::move(n));
}

Value Tape::softmax_rows(Value a, bool causal) {
    Node n;
    n.op = causal ? Op::softmax_causal : Op::softmax;
    n.args = {check(a)};
    n.value = lsi::softmax_rows(value(a), causal);
    return push(std::move(n));
}

Value Tape::layernorm_rows(Value a, double eps) {
    Node n;
    n.op = Op::layernorm;
    n.args = {check(a)};
    n.scalar = eps;
    n.value = lsi::layernorm_rows(value(a), eps);
    return push(std::move(n));
}

Value Tape::dropout(Value a, double p, bool training, const StatelessRng &rng,
                    uint64_t counter_base) {
    if (p < 0.0 || p >= 1.0) {
        fail(ErrorCode::invalid_argument, "dropout rate must be in [0, 1), got " + std::to_string(p));
    }
    if (!training || p == 0.0) return a;
    const Matrix &x = value(a);
    Node n;
    n.op = Op::dropout;
    n.args = {check(a)};
    n.aux = dropout_mask(x.rows, x.cols, p, rng, counter_base);
    n.value = lsi::mul(x, n.aux);
    return push(std::move(n));
}

Value Tape::embed_rows(Value table, const std::vector<int> &ids) {
    const Matrix &t = value(table);
    Node n;
    n.op = Op::embed_rows;
    n.args = {check(table)};
    n.indices.assign(ids.begin(), ids.end());
    n.value = Matrix(static_cast<int>(ids.size()), t.cols);
    for (size_t i = 0; i < ids.size(); i++) {
        if (ids[i] < 0 || ids[i] >= t.rows) {
            fail(ErrorCode::invalid_argument,
                 "embed_rows: id " + std::to_string(ids[i]) + " out of range [0, " +
                     std::to_string(t.rows) + ")");
        }
        std::copy(t.row(ids[i]), t.row(ids[i]) + t.cols, n.value.row(static_cast<int>(i)));
    }
    return push(std::move(n));
}

Value Tape::slice_cols(Value a, int col_begin, int col_end) {
    const Matrix &x = value(a);
    if (col_begin < 0 || col_end > x.cols || col_begin >= col_end) {
        fail(ErrorCode::invalid_argument, "slice_cols: bad range [" + std::to_string(col_begin) +
                                              ", " + std::to_string(col_end) + ") for " +
                                              x.shape_str());
    }
    Node n;
    n.op = Op::slice_cols;
    n.args = {check(a)};
    n.indices = {col_begin, col_end};
    n.value = Matrix(x.rows, col_end - col_begin);
    for (int i = 0; i < x.rows; i++) {
        std::copy(x.row(i) + col_begin, x.row(i) + col_end, n.value.row(i));
    }
    return push(std::move(n));
}

Value Tape::concat_cols(const std::vector<Value> &parts) {
    if (parts.empty()) fail(ErrorCode::invalid_argument, "concat_cols: no parts");
    int rows = value(parts[0]).rows;
    int cols = 0;
    Node n;
    n.op = Op::concat_cols;
    for (Value p : parts) {
        const Matrix &m = value(p);
        if (m.rows != rows) {
            fail(ErrorCode::invalid_argument, "concat_cols: row mismatch " + m.shape_str());
        }
        n.args.push_back(check(p));
        cols += m.cols;
    }
    n.value = Matrix(rows, cols);
    int offset = 0;
    for (Value p : parts) {
        const Matrix &m = value(p);
        for (int i = 0; i < rows; i++) {
            std::copy(m.row(i), m.row(i) + m.cols, n.value.row(i) + offset);
        }
        offset += m.cols;
    }
    return push(std::move(n));
}

Value Tape::sum(Value a) {
    Node n;
    n.op = Op::sum;
    n.args = {check(a)};
    n.value = Matrix(1, 1);
    n.value.data[0] = lsi::sum(value(a));
    return push(std::move(n));
}

Value Tape::cross_entropy(Value logits, const std::vector<int> &targets,
                          const std::vector<uint8_t> &mask) {
    const Matrix &l = value(logits);
    if (static_cast<int>(targets.size()) != l.rows || mask.size() != targets.size()) {
        fail(ErrorCode::invalid_argument, "cross_entropy: targets/mask length must equal logit rows");
    }
    int active = 0;
    for (uint8_t m : mask) active += m ? 1 : 0;
    if (active == 0) {
        fail(ErrorCode::invalid_argument, "cross_entropy: mask excludes every position");
    }
    double total = 0.0;
    for (int t = 0; t < l.rows; t++) {
        if (!mask[t]) continue;
        int target = targets[t];
        if (target < 0 || target >= l.cols) {
            fail(ErrorCode::invalid_argument, "cross_entropy: target id " + std::to_string(target) +
                                                  " out of range [0, " + std::to_string(l.cols) + ")");
        }
        const double *row = l.row(t);
        double mx = row[0];
        for (int j = 1; j < l.cols; j++) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (int j = 0; j < l.cols; j++) lse += std::exp(row[j] - mx);
        total += mx + std::log(lse) - row[target];
    }
    Node n;
    n.op = Op::cross_entropy;
    n.args = {check(logits)};
    n.indices.assign(targets.begin(), targets.end());
    n.mask = mask;
    n.scalar = static_cast<double>(active);
    n.value = Matrix(1, 1);
    n.value.data[0] = total / active;
    return push(std::move(n));
}

GradStore Tape::backward(Value loss) {
    int loss_id = check(loss);
    const Matrix &lv = nodes_[loss_id].value;
    if (lv.rows != 1 || lv.cols != 1) {
        fail(ErrorCode::invalid_argument, "backward: loss must be scalar, got " + lv.shape_str());
    }

    std::vector<Matrix> grads(nodes_.size());
    auto grad_ref = [&](int id) -> Matrix & {
        if (grads[id].empty()) {
            grads[id] = Matrix(nodes_[id].value.rows, nodes_[id].value.cols);
        }
        return grads[id];
    };
    auto accumulate = [&](int id, const Matrix &g) {
        Matrix &dst = grad_ref(id);
        for (size_t i = 0; i < dst.data.size(); i++) dst.data[i] += g.data[i];
    };

    grad_ref(loss_id).data[0] = 1.0;

    for (int id = loss_id; id >= 0; id--) {
        const Node &n = nodes_[id];
        if (grads[id].empty()) continue;
        const Matrix &g = grads[id];
        switch (n.op) {
        case Op::leaf:
            break;
        case Op::matmul:
            accumulate(n.args[0], lsi::matmul_nt(g, nodes_[n.args[1]].value));
            accumulate(n.args[1], lsi::matmul_tn(nodes_[n.args[0]].value, g));
            break;
        case Op::matmul_nt:
            accumulate(n.args[0], lsi::matmul(g, nodes_[n.args[1]].value));
            accumulate(n.args[1], lsi::matmul_tn(g, nodes_[n.args[0]].value));
            break;
        case Op::add:
            accumulate(n.args[0], g);
            accumulate(n.args[1], g);
            break;
        case Op::mul:
            accumulate(n.args[0], lsi::mul(g, nodes_[n.args[1]].value));
            accumulate(n.args[1], lsi::mul(g, nodes_[n.args[0]].value));
            break;
        case Op::scale:
            accumulate(n.args[0], lsi::scale(g, n.scalar));
            break;
        case Op::add_rowvec:
            accumulate(n.args[0], g);
            accumulate(n.args[1], lsi::colsum(g));
            break;
        case Op::mul_rowvec:
            accumulate(n.args[0], lsi::mul_rowvec(g, nodes_[n.args[1]].value));
            accumulate(n.args[1], lsi::colsum(lsi::mul(g, nodes_[n.args[0]].value)));
            break;
        case Op::gelu:
            accumulate(n.args[0], lsi::mul(g, gelu_grad(nodes_[n.args[0]].value)));
            break;
        case Op::softmax:
        case Op::softmax_causal: {
            // dx_i = y_i * (g_i - sum_j g_j y_j), rows independent; masked
            // entries have y = 0 and thus zero gradient.
            const Matrix &y = n.value;
            Matrix dx(y.rows, y.cols);
            for (int i = 0; i < y.rows; i++) {
                const double *yr = y.row(i);
                const double *gr = g.row(i);
                double dot = 0.0;
                for (int j = 0; j < y.cols; j++) dot += gr[j] * yr[j];
                double *dr = dx.row(i);
                for (int j = 0; j < y.cols; j++) dr[j] = yr[j] * (gr[j] - dot);
            }
            accumulate(n.args[0], dx);
            break;
        }
        case Op::layernorm: {
            const Matrix &x = nodes_[n.args[0]].value;
            const Matrix &y = n.value;
            Matrix dx(x.rows, x.cols);
            int c = x.cols;
            for (int i = 0; i < x.rows; i++) {
                const double *xr = x.row(i);
                const double *yr = y.row(i);
                const double *gr = g.row(i);
                double mean = 0.0;
                for (int j = 0; j < c; j++) mean += xr[j];
                mean /= c;
                double var = 0.0;
                for (int j = 0; j < c; j++) {
                    double d = xr[j] - mean;
                    var += d * d;
                }
                var /= c;
                double inv = 1.0 / std::sqrt(var + n.scalar);
                double g_mean = 0.0, gy_mean = 0.0;
                for (int j = 0; j < c; j++) {
                    g_mean += gr[j];
                    gy_mean += gr[j] * yr[j];
                }
                g_mean /= c;
                gy_mean /= c;
                double *dr = dx.row(i);
                for (int j = 0; j < c; j++) {
                    dr[j] = inv * (gr[j] - g_mean - yr[j] * gy_mean);
                }
            }
            accumulate(n.args[0], dx);
            break;
        }
        case Op::dropout:
            accumulate(n.args[0], lsi::mul(g, n.aux));
            break;
        case Op::embed_rows: {
            Matrix &dt = grad_ref(n.args[0]);
            for (size_t t = 0; t < n.indices.size(); t++) {
                const double *gr = g.row(static_cast<int>(t));
                double *tr = dt.row(n.indices[t]);
                for (int j = 0; j < dt.cols; j++) tr[j] += gr[j];
            }
            break;
        }
        case Op::slice_cols: {
            Matrix &da = grad_ref(n.args[0]);
            int c0 = n.indices[0];
            for (int i = 0; i < g.rows; i++) {
                const double *gr = g.row(i);
                double *ar = da.row(i) + c0;
                for (int j = 0; j < g.cols; j++) ar[j] += gr[j];
            }
            break;
        }
        case Op::concat_cols: {
            int offset = 0;
            for (int arg : n.args) {
                Matrix &da = grad_ref(arg);
                for (int i = 0; i < da.rows; i++) {
                    const double *gr = g.row(i) + offset;
                    double *ar = da.row(i);
                    for (int j = 0; j < da.cols; j++) ar[j] += gr[j];
                }
                offset += da.cols;
            }
            break;
        }
        case Op::sum: {
            double s = g.data[0];
            Matrix &da = grad_ref(n.args[0]);
            for (double &v : da.data) v += s;
            break;
        }
        case Op::cross_entropy: {
            const Matrix &l = nodes_[n.args[0]].value;
            double scale_g = g.data[0] / n.scalar;
            Matrix dl(l.rows, l.cols);
            for (int t = 0; t < l.rows; t++) {
                if (!n.mask[t]) continue;
                const double *row = l.row(t);
                double mx = row[0];
                for (int j = 1; j < l.cols; j++) mx = std::max(mx, row[j]);
                double total = 0.0;
                double *dr = dl.row(t);
                for (int j = 0; j < l.cols; j++) {
                    dr[j] = std::exp(row[j] - mx);
                    total += dr[j];
                }
                for (int j = 0; j < l.cols; j++) dr[j] = dr[j] / total * scale_g;
                dr[n.indices[t]] -= scale_g;
            }
            accumulate(n.args[0], dl);
            break;
        }
        }
    }

    GradStore store;
    for (size_t id = 0; id < nodes_.size(); id++) {
        const Node &n = nodes_[id];
        if (n.op == Op::leaf && n.trainable) {
            if (grads[id].empty()) {
                store.grads_.emplace(static_cast<int>(id), Matrix(n.value.rows, n.value.cols));
            } else {
                store.grads_.emplace(static_cast<int>(id), std::move(grads[id]));
            }
        }
    }
    return store;
}

} // namespace lsi
