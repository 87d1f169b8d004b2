// Acceptance suite: one check per shipped claim, one pass/fail line each.
// Run via ctest or directly; exits with the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "toll/starvation.hpp"
#include "toll/trainer.hpp"

using namespace toll;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------- chains
scene::SceneNode chain_node(int id, double x, uint64_t seed) {
    Rng rng(seed);
    scene::SceneNode n;
    n.id = id;
    for (int i = 0; i < 24; ++i) {
        n.points.push_back({x + 0.2 * rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal()});
    }
    n.descriptor = scene::compute_descriptor(n.points);
    return n;
}

scene::SubgraphSample make_chain(int len, uint64_t seed) {
    scene::SubgraphSample s;
    for (int i = 0; i <= len; ++i) s.nodes.push_back(chain_node(i, 1.5 * i, seed + static_cast<uint64_t>(i)));
    for (int i = 0; i < len; ++i) {
        scene::Edge e;
        e.src = i;
        e.dst = i + 1;
        e.geom = scene::relative_geometry(s.nodes[static_cast<size_t>(i)].descriptor,
                                          s.nodes[static_cast<size_t>(i + 1)].descriptor);
        s.edges.push_back(e);
    }
    s.anchor = 0;
    return s;
}

// 1. ERF law -------------------------------------------------------------
Outcome criterion_erf() {
    Outcome out;
    const auto chain = make_chain(8, 11);
    for (int T = 0; T <= 4; ++T) {
        actgr::ActgrConfig cfg;
        cfg.T = T;
        cfg.l_base = 2;
        cfg.d = 64;
        cfg.enc_width = 48;
        std::vector<std::vector<int>> responders(9);
        const int seeds = 20;
        for (uint64_t seed = 0; seed < seeds; ++seed) {
            ParamStore ps;
            Rng rng(3000 + seed);
            actgr::make_params(ps, cfg, rng);
            auto run = [&](double delta) {
                Tape t;
                auto desc = chain.nodes[0].descriptor;
                desc.centroid[1] += delta;
                const auto lat = actgr::forward(t, chain, {{0, desc}}, ps, cfg);
                return t.value(lat.H);
            };
            const Tensor base = run(0.0);
            const Tensor moved = run(0.7);
            for (int k = 0; k <= 8; ++k) {
                double diff = 0.0;
                for (int64_t c = 0; c < base.cols(); ++c) {
                    diff = std::max(diff, std::fabs(base.at(k, c) - moved.at(k, c)));
                }
                if (!actgr::erf_reachable(k, cfg)) {
                    if (diff != 0.0) {
                        out.pass = false;
                        out.detail += " leak at T=" + std::to_string(T) + " K=" + std::to_string(k);
                    }
                } else if (diff > 1e-9) {
                    responders[static_cast<size_t>(k)].push_back(static_cast<int>(seed));
                }
            }
        }
        for (int k = 0; k <= 8; ++k) {
            if (!actgr::erf_reachable(k, cfg)) continue;
            const int got = static_cast<int>(responders[static_cast<size_t>(k)].size());
            if (got < 19) {
                out.pass = false;
                out.detail += " weak response T=" + std::to_string(T) + " K=" + std::to_string(k) + " (" +
                              std::to_string(got) + "/20)";
            }
        }
    }
    if (out.pass) out.detail = "zero bit-exact when unreachable; responses > 1e-9 when reachable (20 seeds)";
    return out;
}

// 2. Gradient starvation ---------------------------------------------------
Outcome criterion_starvation() {
    Outcome out;
    const std::vector<double> gains{1.0, 10.0, 100.0, 1000.0};
    const auto multi = starve::starvation_scaling(gains, 0.1, 3, starve::Regime::kMulti, 21);
    const auto single = starve::starvation_scaling(gains, 0.1, 3, starve::Regime::kSingle, 21);
    std::ostringstream d;
    d << "slope=" << multi.slope;
    if (multi.slope < -1.15 || multi.slope > -0.85) {
        out.pass = false;
        d << " OUTSIDE [-1.15,-0.85]";
    }
    for (size_t i = 0; i < gains.size(); ++i) {
        if (single.final_residuals[i] >= 0.1 * 0.8) {
            out.pass = false;
            d << " single residual " << single.final_residuals[i] << " at gain " << gains[i];
        }
    }
    const double ratio = single.cum_updates[2] / multi.cum_updates[2];
    d << " single/multi@100=" << ratio;
    if (ratio <= 10.0) {
        out.pass = false;
        d << " (needs > 10)";
    }
    out.detail = d.str();
    return out;
}

// 3. Sinkhorn ---------------------------------------------------------------
Outcome criterion_sinkhorn() {
    Outcome out;
    const Tensor uniform_in = Tensor::full({6, 4}, 1.3);
    const Tensor qu = sma::sinkhorn(uniform_in, 0.05, 10);
    for (double v : qu.data) {
        if (std::fabs(v - 0.25) > 1e-12) {
            out.pass = false;
            out.detail += " uniform input not uniform";
            break;
        }
    }
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(400 + seed);
        Tensor scores = Tensor::zeros({8, 16});
        for (double& v : scores.data) v = rng.normal();
        std::vector<double> dev;
        const Tensor q = sma::sinkhorn(scores, 0.05, 10, &dev);
        for (int64_t r = 0; r < q.rows(); ++r) {
            double s = 0.0;
            for (int64_t c = 0; c < q.cols(); ++c) s += q.at(r, c);
            if (s != 1.0) {
                out.pass = false;
                out.detail += " row sum != 1";
            }
        }
        for (size_t i = 1; i < dev.size(); ++i) {
            if (dev[i] > dev[i - 1] + 1e-12) {
                out.pass = false;
                out.detail += " column deviation increased";
            }
        }
    }
    if (out.pass) out.detail = "exact row sums; column marginals nonincreasing on 10 random 8x16";
    return out;
}

// 4. Diffusion forward statistics -------------------------------------------
Outcome criterion_forward_stats() {
    Outcome out;
    const auto schedule = diffusion::build_schedule(100, diffusion::ScheduleKind::kLinearBeta);
    Rng data_rng(7);
    std::vector<scene::Vec3> x0(4);
    for (auto& p : x0) {
        for (int c = 0; c < 3; ++c) p[static_cast<size_t>(c)] = data_rng.normal();
    }
    Rng rng(8);
    std::ostringstream d;
    for (int t : {25, 50, 100}) {
        const double abar = schedule.alpha_bar[static_cast<size_t>(t - 1)];
        const int draws = 100000;
        const int64_t n = static_cast<int64_t>(x0.size()) * 3 * draws;
        double sum = 0.0, sumsq = 0.0;
        for (int k = 0; k < draws; ++k) {
            std::vector<scene::Vec3> eps(x0.size());
            for (auto& e : eps) {
                for (int c = 0; c < 3; ++c) e[static_cast<size_t>(c)] = rng.normal();
            }
            const auto xt = diffusion::forward_noise(x0, t, eps, schedule);
            for (size_t i = 0; i < x0.size(); ++i) {
                for (int c = 0; c < 3; ++c) {
                    const double centered =
                        xt[i][static_cast<size_t>(c)] - std::sqrt(abar) * x0[i][static_cast<size_t>(c)];
                    sum += centered;
                    sumsq += centered * centered;
                }
            }
        }
        const double mean = sum / static_cast<double>(n);
        const double var = sumsq / static_cast<double>(n) - mean * mean;
        const double want = 1.0 - abar;
        const double mean_bound = 4.0 * std::sqrt(want / static_cast<double>(n));
        const double var_bound = 4.0 * want * std::sqrt(2.0 / static_cast<double>(n - 1));
        if (std::fabs(mean) > mean_bound || std::fabs(var - want) > var_bound) {
            out.pass = false;
            d << " t=" << t << " out of 4-sigma";
        }
    }
    out.detail = out.pass ? "mean/variance within 4 sigma at t in {25,50,100}, 1e5 draws" : d.str();
    return out;
}

// 5. NAFL --------------------------------------------------------------------
Outcome criterion_nafl() {
    Outcome out;
    diffusion::NaflConfig cfg;  // defaults: K=16, alpha=20, beta=0.8, [0.1, 1.2]
    std::ostringstream d;

    std::vector<scene::Vec3> plane;
    for (int i = 0; i < 14; ++i) {
        for (int j = 0; j < 14; ++j) plane.push_back({i * 0.005, j * 0.005, 0.0});
    }
    Rng rng(17);
    std::vector<scene::Vec3> ball(1200);
    for (auto& p : ball) {
        for (int c = 0; c < 3; ++c) p[static_cast<size_t>(c)] = rng.normal();
    }
    auto median = [](std::vector<double> w) {
        std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
        return w[w.size() / 2];
    };
    const auto wp = diffusion::nafl_weights(plane, cfg);
    const auto wb = diffusion::nafl_weights(ball, cfg);
    for (const auto* w : {&wp, &wb}) {
        for (double v : *w) {
            if (v < 0.1 - 1e-12 || v > 1.2 + 1e-12) {
                out.pass = false;
                d << " weight outside [0.1, 1.2]";
            }
        }
    }
    const double mp = median(wp);
    const double mb = median(wb);
    d << "plane median=" << mp << " ball median=" << mb;
    if (!(mp > 1.0)) {
        out.pass = false;
        d << " (plane median must exceed 1.0)";
    }
    if (!(mb < 0.5)) {
        out.pass = false;
        d << " | ball median fails the stated < 0.5 bound: the sphericity of a "
             "16-neighbor sample covariance has median ~0.35 for isotropic data "
             "(verified against an independent eigensolver), which floors the "
             "weight near 0.65 at beta=0.8 for any ball density";
    }
    out.detail = d.str();
    return out;
}

// 6. Gradient integrity -------------------------------------------------------
Outcome criterion_gradients() {
    Outcome out;
    std::ostringstream d;

    // Per-op finite-difference checks on small random shapes.
    {
        Rng data_rng(71);
        auto rnd = [&](int64_t r, int64_t c) {
            Tensor t = Tensor::zeros({r, c});
            for (double& v : t.data) v = data_rng.normal();
            return t;
        };
        ParamStore ps;
        ps.create("a", rnd(5, 4));
        ps.create("b", rnd(5, 4));
        ps.create("m", rnd(4, 6));
        ps.create("s", rnd(1, 6));
        Rng grng(72);
        nn::make_gru(ps, "gru", 4, 4, grng);
        const Tensor c46 = rnd(4, 6);
        const Tensor c54 = rnd(5, 4);

        std::vector<std::pair<const char*, std::function<Val(Tape&, ParamStore&)>>> ops;
        ops.emplace_back("arith", [&](Tape& t, ParamStore& p) {
            const Val a = t.param(p, "a");
            const Val b = t.param(p, "b");
            return t.mean_all(t.scale(t.mul(t.add(a, b), t.sub(a, b)), 0.3));
        });
        ops.emplace_back("matmul+bias", [&](Tape& t, ParamStore& p) {
            return t.mean_all(t.square(t.add_bias(t.matmul(t.param(p, "a"), t.param(p, "m")), t.param(p, "s"))));
        });
        ops.emplace_back("matmul_nt", [&](Tape& t, ParamStore& p) {
            return t.mean_all(t.square(t.matmul_nt(t.param(p, "a"), t.param(p, "b"))));
        });
        ops.emplace_back("activations", [&](Tape& t, ParamStore& p) {
            const Val a = t.param(p, "a");
            return t.mean_all(t.add(t.sigmoid(a), t.mul(t.tanh_(a), t.relu(a))));
        });
        ops.emplace_back("concat+gather+scatter", [&](Tape& t, ParamStore& p) {
            const Val cat = t.concat_cols({t.param(p, "a"), t.param(p, "b")});
            const Val g = t.gather_rows(cat, {4, 0, 2, 2});
            return t.mean_all(t.square(t.scatter_add_rows(g, {1, 0, 1, 2}, 3)));
        });
        ops.emplace_back("segments", [&](Tape& t, ParamStore& p) {
            const Val mx = t.segment_max_rows(t.param(p, "a"), {3, 2});
            const Val rep = t.segment_repeat_rows(t.param(p, "m"), {2, 1, 2, 1});
            return t.add(t.mean_all(t.square(mx)), t.mean_all(t.square(rep)));
        });
        ops.emplace_back("normalize+logsoftmax", [&](Tape& t, ParamStore& p) {
            const Val nz = t.l2_normalize_rows(t.param(p, "m"));
            return t.mean_all(t.mul(t.log_softmax_rows(t.param(p, "m")), t.constant(c46)));
        });
        ops.emplace_back("gru", [&](Tape& t, ParamStore& p) {
            return t.mean_all(t.square(nn::gru_cell(t, t.param(p, "a"), t.param(p, "b"), p, "gru")));
        });

        for (auto& [name, build] : ops) {
            Tape t;
            const auto grads = t.backward(build(t, ps));
            const double err = finite_diff_check(
                [&](ParamStore& p) {
                    Tape ft;
                    return ft.scalar_value(build(ft, p));
                },
                ps, grads, 1e-5);
            if (err >= 1e-4) {
                out.pass = false;
                d << " op " << name << " err=" << err;
            }
        }
    }

    // Composed total_loss on a 3-node desk instance. Prototype tensors are
    // excluded: their assignment-side path is stop-gradient by design, which
    // a total-derivative finite difference cannot see. The 0.002 rescale
    // keeps cancellation noise below the checker's 1e-8 denominator floor.
    {
        RunConfig cfg;
        cfg.scenes = 4;
        cfg.objects = 3;
        cfg.k_min = 3;
        cfg.max_samples = 1;
        cfg.points_per_object = 64;
        cfg.tau_pts = 16;
        const train::Dataset ds = train::generate_dataset(cfg);
        const auto& sample = ds.samples[0];
        train::TrainState state = train::init_state(cfg);
        // partially filled queues are part of the contract
        {
            Tape t(true);
            const auto lat = actgr::forward(t, sample, {}, state.teacher, cfg.actgr, false);
            state.bank.push(sma::Level::kObject, t.value(lat.H));
            state.bank.push(sma::Level::kEdge, t.value(lat.E));
            Tensor trip = Tensor::zeros({4, 3 * static_cast<int64_t>(cfg.actgr.d)});
            state.bank.push(sma::Level::kTriplet, trip);
        }
        const auto schedule = diffusion::build_schedule(cfg.diff.steps, cfg.diff.kind);
        const auto views = sma::build_views(sample, cfg.sma.views, 9);

        auto build = [&](Tape& t, ParamStore& p) -> Val {
            const auto conds = actgr::condition_set(sample, cfg.anchor_mode, 3);
            const auto lat = actgr::forward(t, sample, conds, p, cfg.actgr);
            const Val gen = diffusion::gen_loss(t, sample, lat.H, schedule, cfg.nafl, cfg.diff, p, 4);
            std::map<std::string, sma::ViewFeatures> vmap;
            Tape ti(true);
            for (size_t i = 0; i < cfg.sma.views.size(); ++i) {
                const auto& vs = cfg.sma.views[i];
                Tape& use = vs.role == sma::ViewRole::kTeacher ? ti : t;
                const ParamStore& params = vs.role == sma::ViewRole::kTeacher ? state.teacher : p;
                const auto vlat = actgr::forward(use, views[i], {}, params, cfg.actgr, false);
                sma::ViewFeatures f;
                f.is_teacher = vs.role == sma::ViewRole::kTeacher;
                if (f.is_teacher) {
                    f.ht = use.value(vlat.H);
                    f.et = use.value(vlat.E);
                } else {
                    f.h = vlat.H;
                    f.e = vlat.E;
                }
                for (const auto& e : views[i].edges) {
                    f.edge_ids.emplace_back(e.src, e.dst);
                    f.node_span_of_edge.emplace_back(views[i].node_index(e.src), views[i].node_index(e.dst));
                }
                vmap[vs.id] = f;
            }
            const Val distill = sma::distill_loss(t, vmap, state.bank, p, cfg.sma);
            return t.scale(sma::total_loss(t, gen, distill, cfg.sma.lambda), 0.002);
        };

        Tape t;
        auto grads = t.backward(build(t, state.student));

        // Central differences with Richardson extrapolation (h and h/2)
        // cancel the h^2 truncation that deep tanh/softmax compositions
        // produce on small-gradient coordinates; a wrong analytic gradient
        // still shows up as a constant offset.
        auto loss_at = [&](ParamStore& p) {
            Tape ft;
            return ft.scalar_value(build(ft, p));
        };
        const double h = 1e-4;
        double worst = 0.0;
        Rng coord_rng(99);
        for (auto& e : state.student.entries()) {
            if (e.name.rfind("proto.", 0) == 0) continue;  // assignment side is stop-gradient by design
            const Tensor& g = grads.at(e.name);
            for (int pick = 0; pick < 6; ++pick) {
                const int64_t c =
                    static_cast<int64_t>(coord_rng.uniform_int(static_cast<uint64_t>(e.value.size())));
                double& slot = e.value.data[static_cast<size_t>(c)];
                const double orig = slot;
                auto central = [&](double step) {
                    slot = orig + step;
                    const double fp = loss_at(state.student);
                    slot = orig - step;
                    const double fm = loss_at(state.student);
                    slot = orig;
                    return (fp - fm) / (2.0 * step);
                };
                const double n1 = central(h);
                const double n2 = central(h / 2.0);
                const double numeric = (4.0 * n2 - n1) / 3.0;
                const double ana = g.data[static_cast<size_t>(c)];
                const double denom = std::max({std::fabs(ana), std::fabs(numeric), 1e-8});
                worst = std::max(worst, std::fabs(ana - numeric) / denom);
            }
        }
        d << " composed total_loss err=" << worst;
        if (worst >= 1e-4) out.pass = false;
    }
    out.detail = (out.pass ? "all ops and composed total_loss under 1e-4;" : "FAILURES:") + d.str();
    return out;
}

// 7. Graph-prep laws ----------------------------------------------------------
Outcome criterion_graph_prep() {
    Outcome out;
    std::ostringstream d;
    for (int n = 2; n <= 12 && out.pass; ++n) {
        std::vector<int> ids(static_cast<size_t>(n));
        std::iota(ids.begin(), ids.end(), 0);
        for (int r = 0; r <= 10 && out.pass; ++r) {
            const double rho = r / 10.0;
            for (uint64_t seed = 0; seed < 50; ++seed) {
                const auto edges = scene::generate_edges(ids, rho, 900 + seed);
                const int64_t expect = std::max<int64_t>(
                    n - 1,
                    static_cast<int64_t>((1.0 - rho) * static_cast<double>(n * (n - 1))));
                std::set<std::pair<int, int>> uniq(edges.begin(), edges.end());
                std::map<int, std::vector<int>> adj;
                for (const auto& [a, b] : edges) {
                    adj[a].push_back(b);
                    adj[b].push_back(a);
                }
                std::set<int> seen{0};
                std::queue<int> q;
                q.push(0);
                while (!q.empty()) {
                    const int u = q.front();
                    q.pop();
                    for (int v : adj[u]) {
                        if (seen.insert(v).second) q.push(v);
                    }
                }
                if (static_cast<int64_t>(edges.size()) != expect || uniq.size() != edges.size() ||
                    seen.size() != ids.size()) {
                    out.pass = false;
                    d << " law violated at |V|=" << n << " rho=" << rho << " seed=" << seed;
                    break;
                }
            }
        }
    }

    // Ward vs brute-force oracle, 100 trials on <= 8 nodes.
    for (uint64_t trial = 0; trial < 100 && out.pass; ++trial) {
        Rng rng(7000 + trial);
        const int n = 2 + static_cast<int>(rng.uniform_int(7));
        const int k_min = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<scene::SceneNode> nodes;
        for (int i = 0; i < n; ++i) {
            scene::SceneNode node;
            node.id = i;
            scene::Vec3 c{5.0 * rng.normal(), 5.0 * rng.normal(), 5.0 * rng.normal()};
            for (int p = 0; p < 6; ++p) {
                node.points.push_back({c[0] + 0.1 * rng.normal(), c[1] + 0.1 * rng.normal(),
                                       c[2] + 0.1 * rng.normal()});
            }
            node.descriptor = scene::compute_descriptor(node.points);
            nodes.push_back(std::move(node));
        }
        // oracle: exhaustive agglomeration from member lists
        std::vector<std::vector<int>> clusters;
        for (int i = 0; i < n; ++i) clusters.push_back({i});
        auto all_big = [&]() {
            for (const auto& c : clusters) {
                if (static_cast<int>(c.size()) < k_min) return false;
            }
            return true;
        };
        while (!all_big() && clusters.size() > 1) {
            double best = 0.0;
            size_t bi = 0, bj = 0;
            bool first = true;
            for (size_t i = 0; i < clusters.size(); ++i) {
                for (size_t j = i + 1; j < clusters.size(); ++j) {
                    scene::Vec3 mi{}, mj{};
                    for (int a : clusters[i]) {
                        for (int ax = 0; ax < 3; ++ax) mi[ax] += nodes[static_cast<size_t>(a)].descriptor.centroid[ax];
                    }
                    for (int a : clusters[j]) {
                        for (int ax = 0; ax < 3; ++ax) mj[ax] += nodes[static_cast<size_t>(a)].descriptor.centroid[ax];
                    }
                    double d2 = 0.0;
                    for (int ax = 0; ax < 3; ++ax) {
                        const double diff = mi[ax] / clusters[i].size() - mj[ax] / clusters[j].size();
                        d2 += diff * diff;
                    }
                    const double na = static_cast<double>(clusters[i].size());
                    const double nb = static_cast<double>(clusters[j].size());
                    const double dist = std::sqrt(na * nb / (na + nb)) * std::sqrt(d2);
                    if (first || dist < best) {
                        best = dist;
                        bi = i;
                        bj = j;
                        first = false;
                    }
                }
            }
            clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
            clusters.erase(clusters.begin() + static_cast<long>(bj));
        }
        std::set<std::set<int>> want;
        for (const auto& c : clusters) want.insert(std::set<int>(c.begin(), c.end()));
        std::set<std::set<int>> got;
        for (const auto& c : scene::partition_subgraphs(nodes, k_min)) got.insert(std::set<int>(c.begin(), c.end()));
        if (want != got) {
            out.pass = false;
            d << " ward mismatch at trial " << trial;
        }
    }
    out.detail = out.pass ? "edge-count law, connectivity and Ward oracle all hold" : d.str();
    return out;
}

// 8. Metric oracles -----------------------------------------------------------
Outcome criterion_metrics() {
    Outcome out;
    std::ostringstream d;

    auto acc_oracle = [](const std::vector<int>& y, const std::vector<int>& c) {
        std::map<int, int> ymap, cmap;
        for (int v : y) ymap.emplace(v, 0);
        for (int v : c) cmap.emplace(v, 0);
        int idx = 0;
        for (auto& [k, v] : ymap) v = idx++;
        idx = 0;
        for (auto& [k, v] : cmap) v = idx++;
        const int k = std::max<int>(static_cast<int>(ymap.size()), static_cast<int>(cmap.size()));
        std::vector<int> perm(static_cast<size_t>(k));
        std::iota(perm.begin(), perm.end(), 0);
        int best = 0;
        do {
            int agree = 0;
            for (size_t i = 0; i < y.size(); ++i) {
                if (perm[static_cast<size_t>(cmap[c[i]])] == ymap[y[i]]) ++agree;
            }
            best = std::max(best, agree);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return static_cast<double>(best) / static_cast<double>(y.size());
    };
    auto nmi_oracle = [](const std::vector<int>& y, const std::vector<int>& c) {
        const double n = static_cast<double>(y.size());
        std::map<int, int64_t> py, pc;
        std::map<std::pair<int, int>, int64_t> pj;
        for (size_t i = 0; i < y.size(); ++i) {
            py[y[i]] += 1;
            pc[c[i]] += 1;
            pj[{y[i], c[i]}] += 1;
        }
        double hy = 0.0, hc = 0.0, mi = 0.0;
        for (const auto& [k, cnt] : py) hy -= cnt / n * std::log(cnt / n);
        for (const auto& [k, cnt] : pc) hc -= cnt / n * std::log(cnt / n);
        for (const auto& [k, cnt] : pj) {
            mi += cnt / n * std::log((cnt / n) / ((py[k.first] / n) * (pc[k.second] / n)));
        }
        if (hy == 0.0 && hc == 0.0) return 1.0;
        return 2.0 * mi / (hy + hc);
    };
    auto ari_oracle = [](const std::vector<int>& y, const std::vector<int>& c) {
        double a = 0, b = 0, cc = 0, dd = 0;
        for (size_t i = 0; i < y.size(); ++i) {
            for (size_t j = i + 1; j < y.size(); ++j) {
                const bool sy = y[i] == y[j];
                const bool sc = c[i] == c[j];
                if (sy && sc) a += 1;
                else if (sy) b += 1;
                else if (sc) cc += 1;
                else dd += 1;
            }
        }
        const double total = a + b + cc + dd;
        const double expected = (a + b) * (a + cc) / total;
        const double maxi = 0.5 * ((a + b) + (a + cc));
        if (maxi == expected) return 1.0;
        return (a - expected) / (maxi - expected);
    };

    for (uint64_t trial = 0; trial < 200; ++trial) {
        Rng rng(8000 + trial);
        const int n = 5 + static_cast<int>(rng.uniform_int(40));
        const int ky = 1 + static_cast<int>(rng.uniform_int(5));
        const int kc = 1 + static_cast<int>(rng.uniform_int(5));
        std::vector<int> y(static_cast<size_t>(n)), c(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            y[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(ky)));
            c[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(kc)));
        }
        if (std::fabs(metrics::cluster_acc(y, c) - acc_oracle(y, c)) > 1e-12 ||
            std::fabs(metrics::nmi(y, c) - nmi_oracle(y, c)) > 1e-10 ||
            std::fabs(metrics::ari(y, c) - ari_oracle(y, c)) > 1e-10) {
            out.pass = false;
            d << " oracle mismatch at trial " << trial;
            break;
        }
    }

    // Hand cases as stated: ACC 3/4, NMI 0.0, ARI -1/3.
    const std::vector<int> y{0, 0, 1, 1};
    const double acc = metrics::cluster_acc(y, {0, 1, 1, 1});
    const double nmi_v = metrics::nmi(y, {0, 1, 0, 1});
    const double ari_v = metrics::ari(y, {0, 1, 0, 1});
    if (acc != 0.75) {
        out.pass = false;
        d << " acc hand case got " << acc;
    }
    if (std::fabs(nmi_v) > 1e-12) {
        out.pass = false;
        d << " nmi hand case got " << nmi_v;
    }
    if (std::fabs(ari_v - (-1.0 / 3.0)) > 1e-12) {
        out.pass = false;
        d << " | ari hand case: stated -1/3, computed " << ari_v
          << "; the exhaustive pair-count oracle (and scikit-learn) give -1/2 for "
             "Y=[0,0,1,1], C=[0,1,0,1], so the stated -1/3 is unattainable";
    }
    out.detail = out.pass ? "oracle agreement on 200 instances and all hand cases" : d.str();
    return out;
}

// 9. Desk-scale learning signal ------------------------------------------------
Outcome criterion_learning_signal() {
    Outcome out;
    std::ostringstream d;
    int trained_wins = 0;
    int anchor_wins = 0;
    const int seeds = 5;
    for (uint64_t seed = 0; seed < seeds; ++seed) {
        RunConfig cfg;  // desk defaults: d=64, 6 categories
        cfg.seed = seed;
        cfg.max_samples = 200;
        cfg.epochs = 30;
        cfg.eval_every = 30;
        cfg.recover_samples = 0;
        const train::Dataset ds = train::generate_dataset(cfg);

        train::TrainState rnd_state = train::init_state(cfg);
        const train::EvalOutput ev_rand = train::evaluate(cfg, ds, rnd_state.student, 555 + seed);

        train::TrainState single_state = train::init_state(cfg);
        train::run_pretrain(cfg, ds, single_state);
        const train::EvalOutput ev_single = train::evaluate(cfg, ds, single_state.student, 555 + seed);

        RunConfig gcfg = cfg;
        gcfg.anchor_mode = {actgr::AnchorVariant::kGlobal, 0};
        train::TrainState global_state = train::init_state(gcfg);
        train::run_pretrain(gcfg, ds, global_state);
        const train::EvalOutput ev_global = train::evaluate(gcfg, ds, global_state.student, 555 + seed);

        if (ev_single.nmi_obj > ev_rand.nmi_obj) ++trained_wins;
        if (ev_single.nmi_edge >= ev_global.nmi_edge) ++anchor_wins;
        d << " s" << seed << "[obj " << ev_rand.nmi_obj << "->" << ev_single.nmi_obj << "; edge g="
          << ev_global.nmi_edge << " s=" << ev_single.nmi_edge << "]";

        // No-collapse smoke check on the first seed: teacher object features
        // spread over at least 10 prototypes after training.
        if (seed == 0) {
            std::set<int> used;
            const Tensor& protos = single_state.student.value("proto.object");
            for (const auto& sample : ds.samples) {
                Tape t(true);
                const auto lat = actgr::forward(t, sample, {}, single_state.teacher, cfg.actgr);
                Tensor h = t.value(lat.H);
                for (int64_t r = 0; r < h.rows(); ++r) {
                    double norm = 0.0;
                    for (int64_t c = 0; c < h.cols(); ++c) norm += h.at(r, c) * h.at(r, c);
                    norm = std::max(std::sqrt(norm), 1e-12);
                    int best = 0;
                    double best_s = -1e300;
                    for (int64_t p = 0; p < protos.rows(); ++p) {
                        double s = 0.0;
                        for (int64_t c = 0; c < h.cols(); ++c) s += h.at(r, c) / norm * protos.at(p, c);
                        if (s > best_s) {
                            best_s = s;
                            best = static_cast<int>(p);
                        }
                    }
                    used.insert(best);
                }
            }
            d << " protos_used=" << used.size();
            if (used.size() < 10) {
                out.pass = false;
                d << " (collapse: < 10 prototypes)";
            }
        }
    }
    d << " | trained>rand " << trained_wins << "/5, single>=global " << anchor_wins << "/5";
    if (trained_wins < 4 || anchor_wins < 4) out.pass = false;
    out.detail = d.str();
    return out;
}

// 10. Layout recovery ------------------------------------------------------------
Outcome criterion_layout_recovery() {
    Outcome out;
    RunConfig cfg;
    cfg.seed = 2;
    cfg.scenes = 6;
    cfg.objects = 3;
    cfg.k_min = 3;
    cfg.max_samples = 1;
    cfg.points_per_object = 64;
    cfg.tau_pts = 16;
    cfg.sma.lambda = 0.0;        // generation-only overfit
    cfg.sma.gen_point_mask = 0.0;  // identity edge-guided view
    cfg.batch = 1;
    cfg.epochs = 2000;           // 2000 optimizer steps on the single sample
    cfg.eval_every = 4000;       // no mid-run evals
    cfg.opt.total_epochs = 2000;
    cfg.opt.warmup_epochs = 5;
    cfg.recover_samples = 0;

    const train::Dataset ds = train::generate_dataset(cfg);
    const auto& sample = ds.samples[0];
    train::TrainState state = train::init_state(cfg);
    train::run_pretrain(cfg, ds, state);

    const auto rec = train::run_recover(cfg, sample, state.student, 77);
    const auto merged = scene::merged_cloud(sample);
    const double scene_extent = scene::compute_descriptor(merged).max_length;
    const double bound = 0.25 * scene_extent;
    std::ostringstream d;
    d << "mean centroid err=" << rec.err.mean_centroid_dist << " vs bound " << bound << " (0.25 x "
      << scene_extent << ")";
    if (!(rec.err.mean_centroid_dist < bound)) out.pass = false;
    out.detail = d.str();
    return out;
}

// 11. Determinism & resume ---------------------------------------------------------
Outcome criterion_determinism() {
    Outcome out;
    std::ostringstream d;
    namespace fs = std::filesystem;
    RunConfig cfg;
    cfg.seed = 3;
    cfg.scenes = 10;
    cfg.max_samples = 12;
    cfg.epochs = 4;
    cfg.eval_every = 2;
    cfg.batch = 4;
    cfg.points_per_object = 48;
    cfg.tau_pts = 16;
    cfg.actgr.d = 24;
    cfg.actgr.enc_width = 16;
    cfg.diff.steps = 20;
    cfg.diff.hidden = 24;
    cfg.nafl.k = 8;
    cfg.sma.queue_len = 48;
    cfg.sma.protos_obj = 12;
    cfg.sma.protos_edge = 8;
    cfg.sma.protos_trip = 10;
    cfg.recover_samples = 1;

    const train::Dataset ds = train::generate_dataset(cfg);

    RunConfig a = cfg;
    a.out_dir = "acc11_a";
    train::TrainState sa = train::init_state(a);
    train::run_pretrain_to_dir(a, ds, sa);
    RunConfig b = cfg;
    b.out_dir = "acc11_b";
    train::TrainState sb = train::init_state(b);
    train::run_pretrain_to_dir(b, ds, sb);
    if (read_bytes("acc11_a/metrics.csv") != read_bytes("acc11_b/metrics.csv")) {
        out.pass = false;
        d << " identical seeds gave different CSVs;";
    }

    // Split-run resume: 2 epochs + resume matches the single 4-epoch run.
    RunConfig half = cfg;
    half.out_dir = "acc11_c";
    half.epochs = 2;
    train::TrainState sc = train::init_state(half);
    train::run_pretrain_to_dir(half, ds, sc);
    train::TrainState resumed = train::load_checkpoint("acc11_c/checkpoint.toll", cfg);
    RunConfig rest = cfg;
    rest.out_dir = "acc11_c";
    train::run_pretrain_to_dir(rest, ds, resumed, true);
    if (read_bytes("acc11_a/metrics.csv") != read_bytes("acc11_c/metrics.csv")) {
        out.pass = false;
        d << " split-run resume diverged from the single run;";
    }
    for (const char* dir : {"acc11_a", "acc11_b", "acc11_c"}) fs::remove_all(dir);
    out.detail = out.pass ? "byte-identical CSVs for equal seeds and for split-run resume" : d.str();
    return out;
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Entry> criteria = {
        {"1 ERF law", criterion_erf},
        {"2 gradient starvation", criterion_starvation},
        {"3 sinkhorn", criterion_sinkhorn},
        {"4 diffusion forward statistics", criterion_forward_stats},
        {"5 noise-aware focal weights", criterion_nafl},
        {"6 gradient integrity", criterion_gradients},
        {"7 graph preparation laws", criterion_graph_prep},
        {"8 clustering metric oracles", criterion_metrics},
        {"9 desk-scale learning signal", criterion_learning_signal},
        {"10 layout recovery overfit", criterion_layout_recovery},
        {"11 determinism and resume", criterion_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const double t0 = now_s();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double dt = now_s() - t0;
        std::printf("[%s] criterion %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.name, dt,
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
