#pragma once

#include <string>

#include "toll/param_store.hpp"
#include "toll/rng.hpp"
#include "toll/tape.hpp"

namespace toll::nn {

// Creates `prefix.w` (in x out) and `prefix.b` (1 x out). He-normal weights.
void make_linear(ParamStore& store, const std::string& prefix, int64_t in, int64_t out, Rng& rng);

// Creates a two-layer MLP: prefix.l1 / prefix.l2 (hidden ReLU, linear out).
void make_mlp2(ParamStore& store, const std::string& prefix, int64_t in, int64_t hidden, int64_t out,
               Rng& rng);

Val linear(Tape& t, Val x, const ParamStore& store, const std::string& prefix);
Val mlp2(Tape& t, Val x, const ParamStore& store, const std::string& prefix);

// Standard GRU cell. Creates prefix.{wz,uz,bz,wr,ur,br,wh,uh,bh}; Xavier
// weights. z = 1 keeps the previous state.
void make_gru(ParamStore& store, const std::string& prefix, int64_t d_in, int64_t d, Rng& rng);
Val gru_cell(Tape& t, Val h_prev, Val x, const ParamStore& store, const std::string& prefix);

}  // namespace toll::nn
