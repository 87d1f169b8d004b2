#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "toll/tensor.hpp"

namespace toll {

class ParamStore;

using Val = int32_t;
using GradMap = std::map<std::string, Tensor>;

// Reverse-mode trace over primitive tensor ops. Ops append nodes in forward
// order; backward() walks them in exact reverse order, accumulating gradients
// additively at fan-out. Every op output is checked finite. An inference tape
// records values only and cannot run backward.
class Tape {
public:
    explicit Tape(bool inference = false) : inference_(inference) {}

    bool inference() const { return inference_; }

    Val constant(Tensor t);
    Val scalar(double v) { return constant(Tensor::scalar(v)); }
    // Registers a leaf backed by `store[name]`; repeated calls with the same
    // name return the same node so shared weights accumulate fan-out grads.
    Val param(const ParamStore& store, const std::string& name);

    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val scale(Val a, double c);
    Val matmul(Val a, Val b);
    Val matmul_nt(Val a, Val b);  // a * b^T
    Val add_bias(Val m, Val bias);
    Val relu(Val a);
    Val sigmoid(Val a);
    Val tanh_(Val a);
    Val square(Val a);
    Val concat_cols(const std::vector<Val>& parts);
    Val concat_rows(const std::vector<Val>& parts);
    Val gather_rows(Val a, std::vector<int> idx);
    Val scatter_add_rows(Val src, std::vector<int> idx, int64_t out_rows);
    Val segment_max_rows(Val a, std::vector<int> seg_lens);
    Val segment_repeat_rows(Val a, std::vector<int> seg_lens);
    Val l2_normalize_rows(Val a);
    Val log_softmax_rows(Val a);
    Val sum_all(Val a);
    Val mean_all(Val a);

    const Tensor& value(Val v) const { return nodes_[static_cast<size_t>(v)].value; }
    double scalar_value(Val v) const;
    size_t num_nodes() const { return nodes_.size(); }

    // Gradients of a scalar loss for every registered parameter; parameters
    // off the loss path get zeros. Throws on non-scalar loss or NaN grads.
    GradMap backward(Val loss);

private:
    enum class Op : uint8_t {
        kConst,
        kParam,
        kAdd,
        kSub,
        kMul,
        kScale,
        kMatmul,
        kMatmulNT,
        kAddBias,
        kRelu,
        kSigmoid,
        kTanh,
        kSquare,
        kConcatCols,
        kConcatRows,
        kGatherRows,
        kScatterAddRows,
        kSegMaxRows,
        kSegRepeatRows,
        kL2NormRows,
        kLogSoftmaxRows,
        kSumAll,
        kMeanAll,
    };

    struct Node {
        Tensor value;
        Op op = Op::kConst;
        bool needs_grad = false;
        std::vector<Val> inputs;
        std::vector<int> aux_i;   // indices / segment lengths / argmax
        double aux_d = 0.0;       // scale factor
        std::string param_name;   // kParam only
    };

    Val push(Node n, const char* what);
    bool any_needs_grad(const std::vector<Val>& ins) const;
    void backward_node(size_t i, std::vector<Tensor>& grads, std::vector<char>& has_grad);
    static void accum(std::vector<Tensor>& grads, std::vector<char>& has_grad, const Node& src, Val id,
                      const Tensor& g);

    std::vector<Node> nodes_;
    std::map<std::string, Val> param_cache_;
    bool inference_;
};

// Worst relative error between analytic gradients and central finite
// differences of `loss_fn`, sampling up to `coords_per_tensor` coordinates
// per parameter (0 = all). Denominator max(|analytic|, |numeric|, 1e-8).
double finite_diff_check(const std::function<double(ParamStore&)>& loss_fn, ParamStore& params,
                         const GradMap& analytic, double h, int coords_per_tensor = 0,
                         uint64_t seed = 0);

}  // namespace toll
