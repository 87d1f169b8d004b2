#include "toll/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "toll/kernels.hpp"
#include "toll/nn.hpp"

namespace toll::diffusion {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear-beta") return ScheduleKind::kLinearBeta;
    if (s == "cosine") return ScheduleKind::kCosine;
    throw config_error("unknown diffusion schedule: " + s);
}

void NaflConfig::validate() const {
    if (k < 2) throw config_error("nafl: K must be >= 2");
    if (beta < 0.0 || beta > 1.0) throw config_error("nafl: beta must be in [0,1]");
    if (w_min > w_max) throw config_error("nafl: w_min must be <= w_max");
}

void DiffusionConfig::validate() const {
    if (steps < 1) throw config_error("diffusion: steps must be >= 1");
    if (hidden < 1) throw config_error("diffusion: hidden width must be >= 1");
}

DiffusionSchedule build_schedule(int steps, ScheduleKind kind) {
    if (steps < 1) throw error("build_schedule: steps must be >= 1");
    DiffusionSchedule s;
    s.steps = steps;
    s.alpha.resize(static_cast<size_t>(steps));
    s.alpha_bar.resize(static_cast<size_t>(steps));
    if (kind == ScheduleKind::kLinearBeta) {
        // Reference betas are stated for 1000 steps; rescale per-step rates
        // so the endpoint noise level is preserved for any step count.
        const double scale = 1000.0 / static_cast<double>(steps);
        for (int t = 1; t <= steps; ++t) {
            const double frac = steps > 1 ? static_cast<double>(t - 1) / (steps - 1) : 0.0;
            const double beta = std::min((1e-4 + (0.02 - 1e-4) * frac) * scale, 0.999);
            s.alpha[static_cast<size_t>(t - 1)] = 1.0 - beta;
        }
    } else {
        const double off = 0.008;
        auto f = [&](double u) {
            const double x = (u / steps + off) / (1.0 + off) * (3.14159265358979323846 / 2.0);
            const double c = std::cos(x);
            return c * c;
        };
        double prev = 1.0;
        for (int t = 1; t <= steps; ++t) {
            const double abar = f(static_cast<double>(t)) / f(0.0);
            double beta = 1.0 - abar / prev;
            beta = std::clamp(beta, 1e-8, 0.999);
            s.alpha[static_cast<size_t>(t - 1)] = 1.0 - beta;
            prev = abar;
        }
    }
    double running = 1.0;
    for (int t = 0; t < steps; ++t) {
        running *= s.alpha[static_cast<size_t>(t)];
        s.alpha_bar[static_cast<size_t>(t)] = running;
    }
    return s;
}

void make_params(ParamStore& store, int cond_dim, const DiffusionConfig& cfg, Rng& rng) {
    cfg.validate();
    const int64_t in = 3 + DiffusionConfig::kTimeDim + cond_dim;
    nn::make_linear(store, "dif.l1", in, cfg.hidden, rng);
    nn::make_linear(store, "dif.l2", cfg.hidden, cfg.hidden, rng);
    nn::make_linear(store, "dif.l3", cfg.hidden, 3, rng);
}

std::array<double, DiffusionConfig::kTimeDim> time_embedding(int t) {
    std::array<double, DiffusionConfig::kTimeDim> e{};
    for (int k = 0; k < DiffusionConfig::kTimeDim / 2; ++k) {
        const double omega = std::pow(10000.0, -static_cast<double>(k) / (DiffusionConfig::kTimeDim / 2));
        e[static_cast<size_t>(2 * k)] = std::sin(t * omega);
        e[static_cast<size_t>(2 * k + 1)] = std::cos(t * omega);
    }
    return e;
}

std::vector<scene::Vec3> forward_noise(const std::vector<scene::Vec3>& x0, int t,
                                       const std::vector<scene::Vec3>& eps,
                                       const DiffusionSchedule& schedule) {
    if (t < 1 || t > schedule.steps) throw error("forward_noise: step out of range");
    if (x0.size() != eps.size()) throw shape_error("forward_noise: shape mismatch");
    const double abar = schedule.alpha_bar[static_cast<size_t>(t - 1)];
    const double a = std::sqrt(abar);
    const double b = std::sqrt(1.0 - abar);
    std::vector<scene::Vec3> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
        for (int c = 0; c < 3; ++c) out[i][c] = a * x0[i][c] + b * eps[i][c];
    }
    return out;
}

namespace {

// Jacobi eigenvalues of a symmetric 3x3 matrix, ascending.
std::array<double, 3> sym3_eigenvalues(double m[3][3]) {
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = std::fabs(m[0][1]) + std::fabs(m[0][2]) + std::fabs(m[1][2]);
        if (off < 1e-30) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::fabs(m[p][q]) < 1e-300) continue;
                const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double tt = sign / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tt * tt + 1.0);
                const double sn = tt * c;
                for (int r = 0; r < 3; ++r) {
                    const double mrp = m[r][p];
                    const double mrq = m[r][q];
                    m[r][p] = c * mrp - sn * mrq;
                    m[r][q] = sn * mrp + c * mrq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double mpr = m[p][r];
                    const double mqr = m[q][r];
                    m[p][r] = c * mpr - sn * mqr;
                    m[q][r] = sn * mpr + c * mqr;
                }
            }
        }
    }
    std::array<double, 3> ev{m[0][0], m[1][1], m[2][2]};
    std::sort(ev.begin(), ev.end());
    return ev;
}

Tensor points_tensor(const std::vector<scene::Vec3>& pts) {
    Tensor t = Tensor::zeros({static_cast<int64_t>(pts.size()), 3});
    for (size_t i = 0; i < pts.size(); ++i) {
        for (int c = 0; c < 3; ++c) t.at(static_cast<int64_t>(i), c) = pts[i][c];
    }
    return t;
}

}  // namespace

LocalGeometry local_covariance_eigs(const std::vector<scene::Vec3>& points, int k) {
    if (static_cast<int>(points.size()) <= k) throw error("local_covariance_eigs: need more points than K");
    const Tensor pts = points_tensor(points);
    const auto nn_res = kernels::knn(pts, k);
    LocalGeometry geom;
    geom.eigenvalues.resize(points.size());
    geom.mean_knn_dist = nn_res.mean_dist;
    for (size_t i = 0; i < points.size(); ++i) {
        const int* idx = nn_res.indices.data() + i * static_cast<size_t>(k);
        scene::Vec3 mean{};
        for (int j = 0; j < k; ++j) {
            for (int c = 0; c < 3; ++c) mean[c] += points[static_cast<size_t>(idx[j])][c];
        }
        for (int c = 0; c < 3; ++c) mean[c] /= k;
        double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
        for (int j = 0; j < k; ++j) {
            const auto& p = points[static_cast<size_t>(idx[j])];
            const double d[3] = {p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]};
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) m[a][b] += d[a] * d[b];
            }
        }
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) m[a][b] /= (k - 1);
        }
        auto ev = sym3_eigenvalues(m);
        for (auto& v : ev) {
            if (v < -1e-12) throw numeric_error("local_covariance_eigs: eigenvalue below tolerance");
            v = std::max(v, 0.0);
        }
        geom.eigenvalues[i] = ev;
    }
    return geom;
}

std::vector<double> nafl_weights(const std::vector<scene::Vec3>& points, const NaflConfig& cfg) {
    cfg.validate();
    const auto geom = local_covariance_eigs(points, cfg.k);
    std::vector<double> w(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& ev = geom.eigenvalues[i];
        const double sphericity = ev[0] / (ev[2] + cfg.eps);
        const double s_struct = 1.0 - sphericity;
        const double s_dense = std::exp(-cfg.alpha * geom.mean_knn_dist[i]);
        w[i] = cfg.w_min + (cfg.w_max - cfg.w_min) * (cfg.beta * s_struct + (1.0 - cfg.beta) * s_dense);
    }
    return w;
}

Val predict_noise(Tape& t, const Tensor& noisy, const std::vector<int>& seg_lens,
                  const std::vector<int>& taus, Val cond, const ParamStore& ps,
                  const DiffusionConfig& cfg) {
    if (noisy.cols() != 3) throw shape_error("predict_noise: points must be n x 3");
    if (seg_lens.size() != taus.size() ||
        static_cast<int64_t>(seg_lens.size()) != t.value(cond).rows()) {
        throw shape_error("predict_noise: one segment and one tau per condition row");
    }
    Tensor emb = Tensor::zeros({static_cast<int64_t>(taus.size()), DiffusionConfig::kTimeDim});
    for (size_t i = 0; i < taus.size(); ++i) {
        const auto e = time_embedding(taus[i]);
        for (int j = 0; j < DiffusionConfig::kTimeDim; ++j) emb.at(static_cast<int64_t>(i), j) = e[static_cast<size_t>(j)];
    }
    Val x = t.concat_cols({t.constant(noisy), t.segment_repeat_rows(t.constant(std::move(emb)), seg_lens),
                           t.segment_repeat_rows(cond, seg_lens)});
    x = t.relu(nn::linear(t, x, ps, "dif.l1"));
    x = t.relu(nn::linear(t, x, ps, "dif.l2"));
    return nn::linear(t, x, ps, "dif.l3");
}

Val gen_loss(Tape& t, const scene::SubgraphSample& sample, Val cond, const DiffusionSchedule& schedule,
             const NaflConfig& nafl, const DiffusionConfig& cfg, const ParamStore& ps, uint64_t seed) {
    const size_t n_nodes = sample.nodes.size();
    if (n_nodes == 0) throw error("gen_loss: empty sample");
    if (t.value(cond).rows() != static_cast<int64_t>(n_nodes)) throw shape_error("gen_loss: condition rows != nodes");

    Rng rng(seed);
    std::vector<int> seg_lens, taus;
    int64_t total = 0;
    for (const auto& n : sample.nodes) {
        seg_lens.push_back(static_cast<int>(n.points.size()));
        total += static_cast<int64_t>(n.points.size());
    }

    // NAFL weights come from the clean absolute-frame cloud and stay
    // constant; no gradient flows through them.
    std::vector<double> weights;
    if (nafl.per_node) {
        for (const auto& n : sample.nodes) {
            const auto w = nafl_weights(n.points, nafl);
            weights.insert(weights.end(), w.begin(), w.end());
        }
    } else {
        weights = nafl_weights(scene::merged_cloud(sample), nafl);
    }

    Tensor noisy = Tensor::zeros({total, 3});
    Tensor eps = Tensor::zeros({total, 3});
    int64_t row = 0;
    for (const auto& n : sample.nodes) {
        const int tau = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(schedule.steps)));
        taus.push_back(tau);
        const double abar = schedule.alpha_bar[static_cast<size_t>(tau - 1)];
        const double a = std::sqrt(abar);
        const double b = std::sqrt(1.0 - abar);
        for (const auto& p : n.points) {
            for (int c = 0; c < 3; ++c) {
                const double e = rng.normal();
                eps.at(row, c) = e;
                noisy.at(row, c) = a * p[c] + b * e;
            }
            ++row;
        }
    }

    Val eps_hat = predict_noise(t, noisy, seg_lens, taus, cond, ps, cfg);
    Tensor w3 = Tensor::zeros({total, 3});
    row = 0;
    size_t pt = 0;
    for (const auto& n : sample.nodes) {
        const double scale = 1.0 / (static_cast<double>(n.points.size()) * static_cast<double>(n_nodes));
        for (size_t k = 0; k < n.points.size(); ++k) {
            for (int c = 0; c < 3; ++c) w3.at(row, c) = weights[pt] * scale;
            ++row;
            ++pt;
        }
    }
    Val diff = t.sub(eps_hat, t.constant(std::move(eps)));
    return t.sum_all(t.mul(t.square(diff), t.constant(std::move(w3))));
}

std::vector<std::vector<scene::Vec3>> reverse_sample(const std::vector<int>& points_per_node,
                                                     const Tensor& cond, const DiffusionSchedule& schedule,
                                                     const DiffusionConfig& cfg, const ParamStore& ps,
                                                     uint64_t seed) {
    const size_t n_nodes = points_per_node.size();
    if (cond.rows() != static_cast<int64_t>(n_nodes)) throw shape_error("reverse_sample: condition rows != nodes");
    Rng rng(seed);
    int64_t total = 0;
    for (int n : points_per_node) {
        if (n < 1) throw error("reverse_sample: node needs at least one point");
        total += n;
    }
    Tensor x = Tensor::zeros({total, 3});
    for (double& v : x.data) v = rng.normal();

    for (int step = schedule.steps; step >= 1; --step) {
        Tape t(true);
        const Val c = t.constant(cond);
        std::vector<int> taus(n_nodes, step);
        const Val eps_hat = predict_noise(t, x, points_per_node, taus, c, ps, cfg);
        const Tensor& eh = t.value(eps_hat);
        const double alpha = schedule.alpha[static_cast<size_t>(step - 1)];
        const double abar = schedule.alpha_bar[static_cast<size_t>(step - 1)];
        const double abar_prev = step > 1 ? schedule.alpha_bar[static_cast<size_t>(step - 2)] : 1.0;
        const double coef = (1.0 - alpha) / std::sqrt(1.0 - abar);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double sigma = step > 1 ? std::sqrt((1.0 - abar_prev) / (1.0 - abar) * (1.0 - alpha)) : 0.0;
        for (size_t i = 0; i < x.data.size(); ++i) {
            double v = inv_sqrt_alpha * (x.data[i] - coef * eh.data[i]);
            if (step > 1) v += sigma * rng.normal();
            x.data[i] = v;
        }
    }

    std::vector<std::vector<scene::Vec3>> out(n_nodes);
    int64_t row = 0;
    for (size_t i = 0; i < n_nodes; ++i) {
        out[i].resize(static_cast<size_t>(points_per_node[i]));
        for (auto& p : out[i]) {
            for (int c = 0; c < 3; ++c) p[static_cast<size_t>(c)] = x.at(row, c);
            ++row;
        }
    }
    return out;
}

}  // namespace toll::diffusion
