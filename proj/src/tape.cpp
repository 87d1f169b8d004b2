#include "toll/tape.hpp"

#include <algorithm>
#include <cmath>

#include "toll/kernels.hpp"
#include "toll/param_store.hpp"
#include "toll/rng.hpp"

namespace toll {

Val Tape::push(Node n, const char* what) {
    n.value.check_finite(what);
    if (inference_) {
        n.needs_grad = false;
        n.inputs.clear();
        n.aux_i.clear();
    }
    nodes_.push_back(std::move(n));
    return static_cast<Val>(nodes_.size() - 1);
}

bool Tape::any_needs_grad(const std::vector<Val>& ins) const {
    for (Val v : ins) {
        if (nodes_[static_cast<size_t>(v)].needs_grad) return true;
    }
    return false;
}

Val Tape::constant(Tensor t) {
    Node n;
    n.value = std::move(t);
    n.op = Op::kConst;
    return push(std::move(n), "constant");
}

Val Tape::param(const ParamStore& store, const std::string& name) {
    auto it = param_cache_.find(name);
    if (it != param_cache_.end()) return it->second;
    Node n;
    n.value = store.value(name);
    n.op = Op::kParam;
    n.needs_grad = !inference_;
    n.param_name = name;
    const Val id = push(std::move(n), "param");
    param_cache_[name] = id;
    return id;
}

Val Tape::add(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw shape_error("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Node n;
    n.op = Op::kAdd;
    n.inputs = {a, b};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += tb.data[i];
    return push(std::move(n), "add");
}

Val Tape::sub(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw shape_error("sub: shape mismatch");
    Node n;
    n.op = Op::kSub;
    n.inputs = {a, b};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] -= tb.data[i];
    return push(std::move(n), "sub");
}

Val Tape::mul(Val a, Val b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (!ta.same_shape(tb)) throw shape_error("mul: shape mismatch");
    Node n;
    n.op = Op::kMul;
    n.inputs = {a, b};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = ta;
    for (size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= tb.data[i];
    return push(std::move(n), "mul");
}

Val Tape::scale(Val a, double c) {
    Node n;
    n.op = Op::kScale;
    n.inputs = {a};
    n.aux_d = c;
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = value(a);
    for (double& v : n.value.data) v *= c;
    return push(std::move(n), "scale");
}

Val Tape::matmul(Val a, Val b) {
    Node n;
    n.op = Op::kMatmul;
    n.inputs = {a, b};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = kernels::matmul(value(a), value(b));
    return push(std::move(n), "matmul");
}

Val Tape::matmul_nt(Val a, Val b) {
    Node n;
    n.op = Op::kMatmulNT;
    n.inputs = {a, b};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = kernels::matmul(value(a), value(b), false, true);
    return push(std::move(n), "matmul_nt");
}

Val Tape::add_bias(Val m, Val bias) {
    const Tensor& tm = value(m);
    const Tensor& tb = value(bias);
    if (tb.rows() != 1 || tb.cols() != tm.cols()) throw shape_error("add_bias: bias must be 1 x cols");
    Node n;
    n.op = Op::kAddBias;
    n.inputs = {m, bias};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = tm;
    const int64_t c = tm.cols();
    for (int64_t r = 0; r < tm.rows(); ++r) {
        for (int64_t j = 0; j < c; ++j) n.value.data[static_cast<size_t>(r * c + j)] += tb.data[static_cast<size_t>(j)];
    }
    return push(std::move(n), "add_bias");
}

Val Tape::relu(Val a) {
    Node n;
    n.op = Op::kRelu;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = value(a);
    for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
    return push(std::move(n), "relu");
}

Val Tape::sigmoid(Val a) {
    Node n;
    n.op = Op::kSigmoid;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = value(a);
    for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(n), "sigmoid");
}

Val Tape::tanh_(Val a) {
    Node n;
    n.op = Op::kTanh;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = value(a);
    for (double& v : n.value.data) v = std::tanh(v);
    return push(std::move(n), "tanh");
}

Val Tape::square(Val a) {
    Node n;
    n.op = Op::kSquare;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = value(a);
    for (double& v : n.value.data) v *= v;
    return push(std::move(n), "square");
}

Val Tape::concat_cols(const std::vector<Val>& parts) {
    if (parts.empty()) throw shape_error("concat_cols: no inputs");
    const int64_t rows = value(parts[0]).rows();
    int64_t cols = 0;
    for (Val p : parts) {
        if (value(p).rows() != rows) throw shape_error("concat_cols: row mismatch");
        cols += value(p).cols();
    }
    Node n;
    n.op = Op::kConcatCols;
    n.inputs = parts;
    n.needs_grad = any_needs_grad(parts);
    n.value = Tensor::zeros({rows, cols});
    int64_t off = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        const int64_t c = t.cols();
        for (int64_t r = 0; r < rows; ++r) {
            std::copy_n(t.data.data() + r * c, c, n.value.data.data() + r * cols + off);
        }
        n.aux_i.push_back(static_cast<int>(off));
        off += c;
    }
    return push(std::move(n), "concat_cols");
}

Val Tape::concat_rows(const std::vector<Val>& parts) {
    if (parts.empty()) throw shape_error("concat_rows: no inputs");
    const int64_t cols = value(parts[0]).cols();
    int64_t rows = 0;
    for (Val p : parts) {
        if (value(p).cols() != cols) throw shape_error("concat_rows: column mismatch");
        rows += value(p).rows();
    }
    Node n;
    n.op = Op::kConcatRows;
    n.inputs = parts;
    n.needs_grad = any_needs_grad(parts);
    n.value = Tensor::zeros({rows, cols});
    int64_t off = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        std::copy_n(t.data.data(), t.data.size(), n.value.data.data() + off * cols);
        n.aux_i.push_back(static_cast<int>(off));
        off += t.rows();
    }
    return push(std::move(n), "concat_rows");
}

Val Tape::gather_rows(Val a, std::vector<int> idx) {
    const Tensor& t = value(a);
    for (int i : idx) {
        if (i < 0 || i >= t.rows()) throw shape_error("gather_rows: index out of range");
    }
    Node n;
    n.op = Op::kGatherRows;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    const int64_t c = t.cols();
    n.value = Tensor::zeros({static_cast<int64_t>(idx.size()), c});
    for (size_t r = 0; r < idx.size(); ++r) {
        std::copy_n(t.data.data() + static_cast<int64_t>(idx[r]) * c, c, n.value.data.data() + static_cast<int64_t>(r) * c);
    }
    n.aux_i = std::move(idx);
    return push(std::move(n), "gather_rows");
}

Val Tape::scatter_add_rows(Val src, std::vector<int> idx, int64_t out_rows) {
    const Tensor& t = value(src);
    if (static_cast<int64_t>(idx.size()) != t.rows()) throw shape_error("scatter_add_rows: index count mismatch");
    for (int i : idx) {
        if (i < 0 || i >= out_rows) throw shape_error("scatter_add_rows: index out of range");
    }
    Node n;
    n.op = Op::kScatterAddRows;
    n.inputs = {src};
    n.needs_grad = any_needs_grad(n.inputs);
    const int64_t c = t.cols();
    n.value = Tensor::zeros({out_rows, c});
    for (size_t r = 0; r < idx.size(); ++r) {
        const double* s = t.data.data() + static_cast<int64_t>(r) * c;
        double* d = n.value.data.data() + static_cast<int64_t>(idx[r]) * c;
        for (int64_t j = 0; j < c; ++j) d[j] += s[j];
    }
    n.aux_i = std::move(idx);
    return push(std::move(n), "scatter_add_rows");
}

Val Tape::segment_max_rows(Val a, std::vector<int> seg_lens) {
    const Tensor& t = value(a);
    int64_t total = 0;
    for (int l : seg_lens) {
        if (l < 1) throw shape_error("segment_max_rows: empty segment");
        total += l;
    }
    if (total != t.rows()) throw shape_error("segment_max_rows: segment lengths do not cover rows");
    Node n;
    n.op = Op::kSegMaxRows;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    const int64_t c = t.cols();
    const int64_t segs = static_cast<int64_t>(seg_lens.size());
    n.value = Tensor::zeros({segs, c});
    std::vector<int> argmax(static_cast<size_t>(segs * c));
    int64_t row0 = 0;
    for (int64_t s = 0; s < segs; ++s) {
        const int len = seg_lens[static_cast<size_t>(s)];
        for (int64_t j = 0; j < c; ++j) {
            double best = t.at(row0, j);
            int best_r = static_cast<int>(row0);
            for (int64_t r = row0 + 1; r < row0 + len; ++r) {
                if (t.at(r, j) > best) {
                    best = t.at(r, j);
                    best_r = static_cast<int>(r);
                }
            }
            n.value.at(s, j) = best;
            argmax[static_cast<size_t>(s * c + j)] = best_r;
        }
        row0 += len;
    }
    n.aux_i = std::move(argmax);
    return push(std::move(n), "segment_max_rows");
}

Val Tape::segment_repeat_rows(Val a, std::vector<int> seg_lens) {
    const Tensor& t = value(a);
    if (static_cast<int64_t>(seg_lens.size()) != t.rows()) throw shape_error("segment_repeat_rows: one length per row");
    int64_t total = 0;
    for (int l : seg_lens) {
        if (l < 0) throw shape_error("segment_repeat_rows: negative length");
        total += l;
    }
    Node n;
    n.op = Op::kSegRepeatRows;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    const int64_t c = t.cols();
    n.value = Tensor::zeros({total, c});
    int64_t out_r = 0;
    for (int64_t s = 0; s < t.rows(); ++s) {
        for (int r = 0; r < seg_lens[static_cast<size_t>(s)]; ++r) {
            std::copy_n(t.data.data() + s * c, c, n.value.data.data() + out_r * c);
            ++out_r;
        }
    }
    n.aux_i = std::move(seg_lens);
    return push(std::move(n), "segment_repeat_rows");
}

Val Tape::l2_normalize_rows(Val a) {
    const Tensor& t = value(a);
    Node n;
    n.op = Op::kL2NormRows;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = t;
    const int64_t c = t.cols();
    for (int64_t r = 0; r < t.rows(); ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += t.at(r, j) * t.at(r, j);
        const double norm = std::max(std::sqrt(s), 1e-12);
        for (int64_t j = 0; j < c; ++j) n.value.at(r, j) = t.at(r, j) / norm;
    }
    return push(std::move(n), "l2_normalize_rows");
}

Val Tape::log_softmax_rows(Val a) {
    const Tensor& t = value(a);
    Node n;
    n.op = Op::kLogSoftmaxRows;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    n.value = t;
    const int64_t c = t.cols();
    for (int64_t r = 0; r < t.rows(); ++r) {
        double mx = t.at(r, 0);
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, t.at(r, j));
        double lse = 0.0;
        for (int64_t j = 0; j < c; ++j) lse += std::exp(t.at(r, j) - mx);
        lse = mx + std::log(lse);
        for (int64_t j = 0; j < c; ++j) n.value.at(r, j) = t.at(r, j) - lse;
    }
    return push(std::move(n), "log_softmax_rows");
}

Val Tape::sum_all(Val a) {
    Node n;
    n.op = Op::kSumAll;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    double s = 0.0;
    for (double v : value(a).data) s += v;
    n.value = Tensor::scalar(s);
    return push(std::move(n), "sum_all");
}

Val Tape::mean_all(Val a) {
    Node n;
    n.op = Op::kMeanAll;
    n.inputs = {a};
    n.needs_grad = any_needs_grad(n.inputs);
    double s = 0.0;
    for (double v : value(a).data) s += v;
    n.value = Tensor::scalar(s / static_cast<double>(value(a).data.size()));
    return push(std::move(n), "mean_all");
}

double Tape::scalar_value(Val v) const {
    const Tensor& t = value(v);
    if (t.size() != 1) throw shape_error("scalar_value: tensor is not scalar");
    return t.data[0];
}

void Tape::accum(std::vector<Tensor>& grads, std::vector<char>& has_grad, const Node& src, Val id,
                 const Tensor& g) {
    (void)src;
    auto& slot = grads[static_cast<size_t>(id)];
    if (!has_grad[static_cast<size_t>(id)]) {
        slot = g;
        has_grad[static_cast<size_t>(id)] = 1;
        return;
    }
    for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
}

void Tape::backward_node(size_t i, std::vector<Tensor>& grads, std::vector<char>& has_grad) {
    const Node& n = nodes_[i];
    const Tensor& g = grads[i];
    auto in = [&](size_t k) -> const Node& { return nodes_[static_cast<size_t>(n.inputs[k])]; };
    auto want = [&](size_t k) { return in(k).needs_grad; };
    auto give = [&](size_t k, const Tensor& t) { accum(grads, has_grad, in(k), n.inputs[k], t); };

    switch (n.op) {
        case Op::kConst:
        case Op::kParam:
            return;
        case Op::kAdd:
            if (want(0)) give(0, g);
            if (want(1)) give(1, g);
            return;
        case Op::kSub: {
            if (want(0)) give(0, g);
            if (want(1)) {
                Tensor t = g;
                for (double& v : t.data) v = -v;
                give(1, t);
            }
            return;
        }
        case Op::kMul: {
            if (want(0)) {
                Tensor t = g;
                const Tensor& other = in(1).value;
                for (size_t j = 0; j < t.data.size(); ++j) t.data[j] *= other.data[j];
                give(0, t);
            }
            if (want(1)) {
                Tensor t = g;
                const Tensor& other = in(0).value;
                for (size_t j = 0; j < t.data.size(); ++j) t.data[j] *= other.data[j];
                give(1, t);
            }
            return;
        }
        case Op::kScale: {
            if (want(0)) {
                Tensor t = g;
                for (double& v : t.data) v *= n.aux_d;
                give(0, t);
            }
            return;
        }
        case Op::kMatmul: {
            if (want(0)) give(0, kernels::matmul(g, in(1).value, false, true));
            if (want(1)) give(1, kernels::matmul(in(0).value, g, true, false));
            return;
        }
        case Op::kMatmulNT: {
            if (want(0)) give(0, kernels::matmul(g, in(1).value, false, false));
            if (want(1)) give(1, kernels::matmul(g, in(0).value, true, false));
            return;
        }
        case Op::kAddBias: {
            if (want(0)) give(0, g);
            if (want(1)) {
                const int64_t c = g.cols();
                Tensor t = Tensor::zeros({1, c});
                for (int64_t r = 0; r < g.rows(); ++r) {
                    for (int64_t j = 0; j < c; ++j) t.data[static_cast<size_t>(j)] += g.at(r, j);
                }
                give(1, t);
            }
            return;
        }
        case Op::kRelu: {
            if (want(0)) {
                Tensor t = g;
                const Tensor& x = in(0).value;
                for (size_t j = 0; j < t.data.size(); ++j) {
                    if (x.data[j] <= 0.0) t.data[j] = 0.0;
                }
                give(0, t);
            }
            return;
        }
        case Op::kSigmoid: {
            if (want(0)) {
                Tensor t = g;
                for (size_t j = 0; j < t.data.size(); ++j) {
                    const double s = n.value.data[j];
                    t.data[j] *= s * (1.0 - s);
                }
                give(0, t);
            }
            return;
        }
        case Op::kTanh: {
            if (want(0)) {
                Tensor t = g;
                for (size_t j = 0; j < t.data.size(); ++j) {
                    const double th = n.value.data[j];
                    t.data[j] *= 1.0 - th * th;
                }
                give(0, t);
            }
            return;
        }
        case Op::kSquare: {
            if (want(0)) {
                Tensor t = g;
                const Tensor& x = in(0).value;
                for (size_t j = 0; j < t.data.size(); ++j) t.data[j] *= 2.0 * x.data[j];
                give(0, t);
            }
            return;
        }
        case Op::kConcatCols: {
            for (size_t k = 0; k < n.inputs.size(); ++k) {
                if (!want(k)) continue;
                const Tensor& part = in(k).value;
                const int64_t off = n.aux_i[k];
                const int64_t c = part.cols();
                Tensor t = Tensor::zeros(part.shape);
                for (int64_t r = 0; r < part.rows(); ++r) {
                    std::copy_n(g.data.data() + r * g.cols() + off, c, t.data.data() + r * c);
                }
                give(k, t);
            }
            return;
        }
        case Op::kConcatRows: {
            for (size_t k = 0; k < n.inputs.size(); ++k) {
                if (!want(k)) continue;
                const Tensor& part = in(k).value;
                const int64_t off = n.aux_i[k];
                Tensor t = Tensor::zeros(part.shape);
                std::copy_n(g.data.data() + off * g.cols(), t.data.size(), t.data.data());
                give(k, t);
            }
            return;
        }
        case Op::kGatherRows: {
            if (want(0)) {
                const Tensor& src = in(0).value;
                Tensor t = Tensor::zeros(src.shape);
                const int64_t c = src.cols();
                for (size_t r = 0; r < n.aux_i.size(); ++r) {
                    double* d = t.data.data() + static_cast<int64_t>(n.aux_i[r]) * c;
                    const double* s = g.data.data() + static_cast<int64_t>(r) * c;
                    for (int64_t j = 0; j < c; ++j) d[j] += s[j];
                }
                give(0, t);
            }
            return;
        }
        case Op::kScatterAddRows: {
            if (want(0)) {
                const Tensor& src = in(0).value;
                Tensor t = Tensor::zeros(src.shape);
                const int64_t c = src.cols();
                for (size_t r = 0; r < n.aux_i.size(); ++r) {
                    std::copy_n(g.data.data() + static_cast<int64_t>(n.aux_i[r]) * c, c,
                                t.data.data() + static_cast<int64_t>(r) * c);
                }
                give(0, t);
            }
            return;
        }
        case Op::kSegMaxRows: {
            if (want(0)) {
                const Tensor& src = in(0).value;
                Tensor t = Tensor::zeros(src.shape);
                const int64_t c = src.cols();
                for (int64_t s = 0; s < n.value.rows(); ++s) {
                    for (int64_t j = 0; j < c; ++j) {
                        t.at(n.aux_i[static_cast<size_t>(s * c + j)], j) += g.at(s, j);
                    }
                }
                give(0, t);
            }
            return;
        }
        case Op::kSegRepeatRows: {
            if (want(0)) {
                const Tensor& src = in(0).value;
                Tensor t = Tensor::zeros(src.shape);
                const int64_t c = src.cols();
                int64_t out_r = 0;
                for (int64_t s = 0; s < src.rows(); ++s) {
                    for (int r = 0; r < n.aux_i[static_cast<size_t>(s)]; ++r) {
                        for (int64_t j = 0; j < c; ++j) t.at(s, j) += g.at(out_r, j);
                        ++out_r;
                    }
                }
                give(0, t);
            }
            return;
        }
        case Op::kL2NormRows: {
            if (want(0)) {
                const Tensor& x = in(0).value;
                const Tensor& y = n.value;
                Tensor t = Tensor::zeros(x.shape);
                const int64_t c = x.cols();
                for (int64_t r = 0; r < x.rows(); ++r) {
                    double s = 0.0;
                    for (int64_t j = 0; j < c; ++j) s += x.at(r, j) * x.at(r, j);
                    const double norm = std::max(std::sqrt(s), 1e-12);
                    double dot = 0.0;
                    for (int64_t j = 0; j < c; ++j) dot += y.at(r, j) * g.at(r, j);
                    for (int64_t j = 0; j < c; ++j) t.at(r, j) = (g.at(r, j) - y.at(r, j) * dot) / norm;
                }
                give(0, t);
            }
            return;
        }
        case Op::kLogSoftmaxRows: {
            if (want(0)) {
                Tensor t = g;
                const int64_t c = g.cols();
                for (int64_t r = 0; r < g.rows(); ++r) {
                    double gsum = 0.0;
                    for (int64_t j = 0; j < c; ++j) gsum += g.at(r, j);
                    for (int64_t j = 0; j < c; ++j) t.at(r, j) -= std::exp(n.value.at(r, j)) * gsum;
                }
                give(0, t);
            }
            return;
        }
        case Op::kSumAll: {
            if (want(0)) give(0, Tensor::full(in(0).value.shape, g.data[0]));
            return;
        }
        case Op::kMeanAll: {
            if (want(0)) {
                give(0, Tensor::full(in(0).value.shape, g.data[0] / static_cast<double>(in(0).value.data.size())));
            }
            return;
        }
    }
}

GradMap Tape::backward(Val loss) {
    if (inference_) throw error("backward on an inference tape");
    const Tensor& lt = value(loss);
    if (lt.size() != 1) throw shape_error("backward: loss must be scalar");

    std::vector<Tensor> grads(nodes_.size());
    std::vector<char> has_grad(nodes_.size(), 0);
    grads[static_cast<size_t>(loss)] = Tensor::scalar(1.0);
    has_grad[static_cast<size_t>(loss)] = 1;

    for (size_t i = static_cast<size_t>(loss) + 1; i-- > 0;) {
        if (!has_grad[i] || !nodes_[i].needs_grad) continue;
        backward_node(i, grads, has_grad);
    }

    GradMap out;
    for (const auto& [name, id] : param_cache_) {
        const size_t i = static_cast<size_t>(id);
        if (has_grad[i]) {
            grads[i].check_finite("gradient of " + name);
            out[name] = std::move(grads[i]);
        } else {
            out[name] = Tensor::zeros(nodes_[i].value.shape);
        }
    }
    return out;
}

double finite_diff_check(const std::function<double(ParamStore&)>& loss_fn, ParamStore& params,
                         const GradMap& analytic, double h, int coords_per_tensor, uint64_t seed) {
    if (h <= 0.0) throw error("finite_diff_check: h must be positive");
    double worst = 0.0;
    Rng rng(seed);
    for (auto& e : params.entries()) {
        auto it = analytic.find(e.name);
        if (it == analytic.end()) continue;
        const Tensor& g = it->second;
        const int64_t n = e.value.size();
        std::vector<int64_t> coords;
        if (coords_per_tensor <= 0 || coords_per_tensor >= n) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int c = 0; c < coords_per_tensor; ++c) {
                coords.push_back(static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(n))));
            }
        }
        for (int64_t c : coords) {
            double& slot = e.value.data[static_cast<size_t>(c)];
            const double orig = slot;
            slot = orig + h;
            const double fp = loss_fn(params);
            slot = orig - h;
            const double fm = loss_fn(params);
            slot = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double ana = g.data[static_cast<size_t>(c)];
            const double denom = std::max({std::fabs(ana), std::fabs(numeric), 1e-8});
            worst = std::max(worst, std::fabs(ana - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace toll
