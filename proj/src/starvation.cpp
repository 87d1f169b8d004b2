#include "toll/starvation.hpp"

#include <algorithm>
#include <cmath>

#include "toll/kernels.hpp"
#include "toll/rng.hpp"

namespace toll::starve {

namespace {

constexpr int kDim = 6;
constexpr double kSigmaLo = 0.5;  // singular-value band of the topo map
constexpr double kSigmaHi = 0.8;

Tensor random_orthogonal(int m, Rng& rng) {
    // Gram-Schmidt on a Gaussian matrix.
    Tensor q = Tensor::zeros({m, m});
    for (int c = 0; c < m; ++c) {
        std::vector<double> v(static_cast<size_t>(m));
        for (auto& x : v) x = rng.normal();
        for (int p = 0; p < c; ++p) {
            double dot = 0.0;
            for (int r = 0; r < m; ++r) dot += v[static_cast<size_t>(r)] * q.at(r, p);
            for (int r = 0; r < m; ++r) v[static_cast<size_t>(r)] -= dot * q.at(r, p);
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (int r = 0; r < m; ++r) q.at(r, c) = v[static_cast<size_t>(r)] / norm;
    }
    return q;
}

std::vector<double> unit_vector(int m, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(m));
    double n = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        n += x * x;
    }
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
}

double power_iteration_max_eig(const Tensor& m_sym) {
    const int n = static_cast<int>(m_sym.rows());
    std::vector<double> v(static_cast<size_t>(n), 1.0 / std::sqrt(static_cast<double>(n)));
    double eig = 0.0;
    for (int it = 0; it < 256; ++it) {
        std::vector<double> w(static_cast<size_t>(n), 0.0);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) w[static_cast<size_t>(r)] += m_sym.at(r, c) * v[static_cast<size_t>(c)];
        }
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (int r = 0; r < n; ++r) v[static_cast<size_t>(r)] = w[static_cast<size_t>(r)] / norm;
        eig = norm;
    }
    return eig;
}

}  // namespace

LinearPathwayModel build_model(Regime regime, double lambda_prior, double lambda_topo, uint64_t seed) {
    if (lambda_prior <= 0.0 || lambda_topo < 0.0) throw error("build_model: gains must be positive");
    Rng rng(seed);
    LinearPathwayModel m;
    m.regime = regime;
    m.lambda_prior = lambda_prior;
    m.lambda_topo = lambda_topo;

    // Topo map with a controlled singular-value band so the slowest mode is
    // bounded away from zero.
    Tensor q1 = random_orthogonal(kDim, rng);
    Tensor q2 = random_orthogonal(kDim, rng);
    Tensor diag = Tensor::zeros({kDim, kDim});
    for (int i = 0; i < kDim; ++i) diag.at(i, i) = rng.uniform(kSigmaLo, kSigmaHi);
    m.a_topo = kernels::matmul(kernels::matmul(q1, diag), q2, false, true);

    if (regime == Regime::kMulti) {
        m.a_prior = Tensor::zeros({kDim, kDim});
        for (int i = 0; i < kDim; ++i) m.a_prior.at(i, i) = 1.0;
        const auto s = unit_vector(kDim, rng);
        m.target = Tensor::zeros({kDim, 1});
        for (int i = 0; i < kDim; ++i) m.target.at(i, 0) = s[static_cast<size_t>(i)];
        m.ceiling = 0.0;
    } else {
        const auto u = unit_vector(kDim, rng);
        auto w = unit_vector(kDim, rng);
        double dot = 0.0;
        for (int i = 0; i < kDim; ++i) dot += u[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
        double wn = 0.0;
        for (int i = 0; i < kDim; ++i) {
            w[static_cast<size_t>(i)] -= dot * u[static_cast<size_t>(i)];
            wn += w[static_cast<size_t>(i)] * w[static_cast<size_t>(i)];
        }
        wn = std::sqrt(wn);
        m.a_prior = Tensor::zeros({kDim, 1});
        m.target = Tensor::zeros({kDim, 1});
        for (int i = 0; i < kDim; ++i) {
            m.a_prior.at(i, 0) = u[static_cast<size_t>(i)];
            m.target.at(i, 0) = 0.6 * u[static_cast<size_t>(i)] + 0.8 * w[static_cast<size_t>(i)] / wn;
        }
        m.ceiling = 0.8;
    }
    return m;
}

double stability_dt_bound(const LinearPathwayModel& model) {
    // Residual dynamics: de/dt = -(lp Ap Ap^T + lt At At^T) e.
    Tensor sys = kernels::matmul(model.a_prior, model.a_prior, false, true);
    for (double& v : sys.data) v *= model.lambda_prior;
    Tensor topo = kernels::matmul(model.a_topo, model.a_topo, false, true);
    for (size_t i = 0; i < sys.data.size(); ++i) sys.data[i] += model.lambda_topo * topo.data[i];
    const double max_eig = power_iteration_max_eig(sys);
    return 1.0 / (2.0 * std::max(max_eig, 1e-12));
}

FlowTrajectory simulate_flow(const LinearPathwayModel& model, double dt, double t_end) {
    if (dt <= 0.0 || t_end <= 0.0) throw error("simulate_flow: dt and t_end must be positive");
    const double bound = stability_dt_bound(model);
    if (dt >= bound) {
        throw error("simulate_flow: dt " + std::to_string(dt) + " violates stability bound " +
                    std::to_string(bound));
    }
    const int m = model.dim();
    const int pn = static_cast<int>(model.a_prior.cols());
    const int pe = static_cast<int>(model.a_topo.cols());
    std::vector<double> tn(static_cast<size_t>(pn), 0.0), te(static_cast<size_t>(pe), 0.0);
    std::vector<double> e(static_cast<size_t>(m));

    const int64_t steps = static_cast<int64_t>(std::ceil(t_end / dt));
    FlowTrajectory traj;
    traj.time.reserve(static_cast<size_t>(steps) + 1);
    traj.residual_norm.reserve(static_cast<size_t>(steps) + 1);
    traj.cum_edge_update.reserve(static_cast<size_t>(steps) + 1);

    auto residual = [&]() {
        double n2 = 0.0;
        for (int r = 0; r < m; ++r) {
            double pred = 0.0;
            for (int c = 0; c < pn; ++c) pred += model.a_prior.at(r, c) * tn[static_cast<size_t>(c)];
            for (int c = 0; c < pe; ++c) pred += model.a_topo.at(r, c) * te[static_cast<size_t>(c)];
            e[static_cast<size_t>(r)] = model.target.at(r, 0) - pred;
            n2 += e[static_cast<size_t>(r)] * e[static_cast<size_t>(r)];
        }
        return std::sqrt(n2);
    };

    double cum = 0.0;
    double resid = residual();
    traj.time.push_back(0.0);
    traj.residual_norm.push_back(resid);
    traj.cum_edge_update.push_back(0.0);

    for (int64_t s = 0; s < steps; ++s) {
        // dtheta/dt = gain * A^T e for each pathway.
        double rate_norm2 = 0.0;
        std::vector<double> dte(static_cast<size_t>(pe));
        for (int c = 0; c < pe; ++c) {
            double g = 0.0;
            for (int r = 0; r < m; ++r) g += model.a_topo.at(r, c) * e[static_cast<size_t>(r)];
            dte[static_cast<size_t>(c)] = model.lambda_topo * g;
            rate_norm2 += dte[static_cast<size_t>(c)] * dte[static_cast<size_t>(c)];
        }
        for (int c = 0; c < pn; ++c) {
            double g = 0.0;
            for (int r = 0; r < m; ++r) g += model.a_prior.at(r, c) * e[static_cast<size_t>(r)];
            tn[static_cast<size_t>(c)] += dt * model.lambda_prior * g;
        }
        for (int c = 0; c < pe; ++c) te[static_cast<size_t>(c)] += dt * dte[static_cast<size_t>(c)];
        cum += dt * std::sqrt(rate_norm2);
        resid = residual();
        traj.time.push_back(static_cast<double>(s + 1) * dt);
        traj.residual_norm.push_back(resid);
        traj.cum_edge_update.push_back(cum);
    }
    traj.final_residual = resid;
    traj.final_cum_update = cum;

    // Residual of the prior-optimal projection: target minus the prior
    // pathway's least-squares fit of (target - A_topo theta_edge).
    {
        // For A_prior with orthonormal columns the projector is Ap Ap^T.
        std::vector<double> res(static_cast<size_t>(m));
        for (int r = 0; r < m; ++r) {
            double topo_part = 0.0;
            for (int c = 0; c < pe; ++c) topo_part += model.a_topo.at(r, c) * te[static_cast<size_t>(c)];
            res[static_cast<size_t>(r)] = model.target.at(r, 0) - topo_part;
        }
        double n2 = 0.0;
        for (int r = 0; r < m; ++r) {
            double proj = 0.0;
            for (int c = 0; c < pn; ++c) {
                double coef = 0.0;
                for (int rr = 0; rr < m; ++rr) coef += model.a_prior.at(rr, c) * res[static_cast<size_t>(rr)];
                proj += model.a_prior.at(r, c) * coef;
            }
            const double v = res[static_cast<size_t>(r)] - proj;
            n2 += v * v;
        }
        traj.prior_only_residual = std::sqrt(n2);
    }
    return traj;
}

ScalingResult starvation_scaling(const std::vector<double>& lambda_priors, double lambda_topo,
                                 int trials, Regime regime, uint64_t seed) {
    if (lambda_priors.size() < 3) throw error("starvation_scaling: need at least 3 gains");
    const double lo = *std::min_element(lambda_priors.begin(), lambda_priors.end());
    const double hi = *std::max_element(lambda_priors.begin(), lambda_priors.end());
    if (hi / lo < 100.0) throw error("starvation_scaling: gains must span at least 2 decades");
    if (trials < 1) throw error("starvation_scaling: trials must be >= 1");

    ScalingResult out;
    out.lambda_priors = lambda_priors;
    for (double lp : lambda_priors) {
        double cum_mean = 0.0;
        double res_mean = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
            const auto model = build_model(regime, lp, lambda_topo, seed + static_cast<uint64_t>(trial));
            // Well inside the stability bound so the integrator bias stays
            // under a percent.
            const double dt = 0.2 * stability_dt_bound(model);
            // Horizon: long enough for the slowest mode (the topo band floor
            // when the prior cannot finish alone, the prior gain otherwise).
            const double slow = regime == Regime::kSingle
                                    ? lambda_topo * kSigmaLo * kSigmaLo
                                    : std::min(lp, lp + lambda_topo * kSigmaLo * kSigmaLo);
            const double t_end = 40.0 / std::max(slow, 1e-9);
            const auto traj = simulate_flow(model, dt, t_end);
            cum_mean += traj.final_cum_update;
            res_mean += traj.final_residual;
        }
        out.cum_updates.push_back(cum_mean / trials);
        out.final_residuals.push_back(res_mean / trials);
    }

    // Least-squares slope in log-log space.
    const size_t n = lambda_priors.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (out.cum_updates[i] <= 0.0) throw error("starvation_scaling: degenerate fit (zero update)");
        const double x = std::log(lambda_priors[i]);
        const double y = std::log(out.cum_updates[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw error("starvation_scaling: degenerate fit (zero variance)");
    out.slope = (n * sxy - sx * sy) / denom;
    return out;
}

}  // namespace toll::starve
