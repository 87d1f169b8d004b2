#include "toll/nn.hpp"

#include <cmath>

namespace toll::nn {

static Tensor gaussian(std::vector<int64_t> shape, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = stddev * rng.normal();
    return t;
}

void make_linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out, Rng& rng) {
    store.create(prefix + ".w", gaussian({in, out}, std::sqrt(2.0 / static_cast<double>(in)), rng));
    store.create(prefix + ".b", Tensor::zeros({1, out}));
}

void make_mlp2(ParamStore& store, const std::string& prefix, int64_t in, int64_t hidden, int64_t out,
               Rng& rng) {
    make_linear(store, prefix + ".l1", in, hidden, rng);
    make_linear(store, prefix + ".l2", hidden, out, rng);
}

Val linear(Tape& t, Val x, const ParamStore& store, const std::string& prefix) {
    return t.add_bias(t.matmul(x, t.param(store, prefix + ".w")), t.param(store, prefix + ".b"));
}

Val mlp2(Tape& t, Val x, const ParamStore& store, const std::string& prefix) {
    return linear(t, t.relu(linear(t, x, store, prefix + ".l1")), store, prefix + ".l2");
}

void make_gru(ParamStore& store, const std::string& prefix, int64_t d_in, int64_t d, Rng& rng) {
    const double sx = std::sqrt(2.0 / static_cast<double>(d_in + d));
    const double sh = std::sqrt(2.0 / static_cast<double>(d + d));
    for (const char* gate : {"z", "r", "h"}) {
        store.create(prefix + ".w" + gate, gaussian({d_in, d}, sx, rng));
        store.create(prefix + ".u" + gate, gaussian({d, d}, sh, rng));
        store.create(prefix + ".b" + gate, Tensor::zeros({1, d}));
    }
}

Val gru_cell(Tape& t, Val h_prev, Val x, const ParamStore& store, const std::string& prefix) {
    auto gate_pre = [&](const char* g, Val h_in) {
        Val s = t.add(t.matmul(x, t.param(store, prefix + ".w" + g)),
                      t.matmul(h_in, t.param(store, prefix + ".u" + g)));
        return t.add_bias(s, t.param(store, prefix + ".b" + g));
    };
    const Val z = t.sigmoid(gate_pre("z", h_prev));
    const Val r = t.sigmoid(gate_pre("r", h_prev));
    const Val cand = t.tanh_(gate_pre("h", t.mul(r, h_prev)));
    const Val ones = t.constant(Tensor::full(t.value(z).shape, 1.0));
    return t.add(t.mul(z, h_prev), t.mul(t.sub(ones, z), cand));
}

}  // namespace toll::nn
