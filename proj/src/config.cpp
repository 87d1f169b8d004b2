#include "toll/config.hpp"

#include <fstream>
#include <sstream>

namespace toll {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("config key " + key + ": expected integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("config key " + key + ": expected number, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw config_error("config key " + key + ": expected unsigned integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error("config key " + key + ": expected true/false, got '" + v + "'");
}

}  // namespace

std::string views_to_string(const std::vector<sma::ViewSpec>& views) {
    std::string out;
    for (size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        if (i) out += ";";
        out += v.id + ":" + (v.role == sma::ViewRole::kStudent ? "student" : "teacher") + ":" +
               (v.source == sma::ViewSource::kOrigin ? "origin" : "augmented") + ":" +
               fmt_f64(v.point_mask_ratio) + ":" + fmt_f64(v.edge_mask_ratio);
    }
    return out;
}

std::vector<sma::ViewSpec> views_from_string(const std::string& s) {
    std::vector<sma::ViewSpec> out;
    for (const auto& item : split(s, ';')) {
        if (trim(item).empty()) continue;
        const auto f = split(trim(item), ':');
        if (f.size() != 5) throw config_error("sma.views: expected id:role:source:pm:em, got '" + item + "'");
        sma::ViewSpec v;
        v.id = f[0];
        if (f[1] == "student") {
            v.role = sma::ViewRole::kStudent;
        } else if (f[1] == "teacher") {
            v.role = sma::ViewRole::kTeacher;
        } else {
            throw config_error("sma.views: role must be student|teacher in '" + item + "'");
        }
        if (f[2] == "origin") {
            v.source = sma::ViewSource::kOrigin;
        } else if (f[2] == "augmented") {
            v.source = sma::ViewSource::kAugmented;
        } else {
            throw config_error("sma.views: source must be origin|augmented in '" + item + "'");
        }
        v.point_mask_ratio = to_double("sma.views", f[3]);
        v.edge_mask_ratio = to_double("sma.views", f[4]);
        out.push_back(std::move(v));
    }
    if (out.empty()) throw config_error("sma.views: empty view table");
    return out;
}

std::string pairs_to_string(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (i) out += ";";
        out += pairs[i].first + ">" + pairs[i].second;
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> pairs_from_string(const std::string& s) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& item : split(s, ';')) {
        if (trim(item).empty()) continue;
        const auto f = split(trim(item), '>');
        if (f.size() != 2) throw config_error("sma.pairs: expected Teacher>Student, got '" + item + "'");
        out.emplace_back(trim(f[0]), trim(f[1]));
    }
    if (out.empty()) throw config_error("sma.pairs: empty pair list");
    return out;
}

RunConfig::RunConfig() { opt.total_epochs = epochs; }

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig c;
    if (name == "desk") return c;
    if (name == "reference") {
        c.epochs = 150;
        c.batch = 32;
        c.tau_pts = 512;
        c.points_per_object = 1024;
        c.actgr.d = 512;
        c.actgr.enc_width = 128;
        c.diff.hidden = 256;
        c.sma.queue_len = 3840;
        c.sma.protos_obj = 1000;
        c.sma.protos_edge = 200;
        c.sma.protos_trip = 500;
        c.opt.total_epochs = c.epochs;
        return c;
    }
    throw config_error("unknown preset: " + name);
}

void RunConfig::apply_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        apply_kv(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

void RunConfig::apply_kv(const std::string& key, const std::string& value) {
    if (key == "run.seed") {
        seed = to_u64(key, value);
    } else if (key == "run.epochs") {
        epochs = to_int(key, value);
        opt.total_epochs = epochs;
    } else if (key == "run.batch") {
        batch = to_int(key, value);
    } else if (key == "run.eval_every") {
        eval_every = to_int(key, value);
    } else if (key == "run.out_dir") {
        out_dir = value;
    } else if (key == "data.dir") {
        data_dir = value;
    } else if (key == "data.scenes") {
        scenes = to_int(key, value);
    } else if (key == "data.objects") {
        objects = to_int(key, value);
    } else if (key == "data.points_per_object") {
        points_per_object = to_int(key, value);
    } else if (key == "data.noise_clusters") {
        noise_clusters = to_int(key, value);
    } else if (key == "data.tau_pts") {
        tau_pts = to_int(key, value);
    } else if (key == "data.k_min") {
        k_min = to_int(key, value);
    } else if (key == "data.rho_min") {
        rho_min = to_double(key, value);
    } else if (key == "data.rho_max") {
        rho_max = to_double(key, value);
    } else if (key == "data.workspace") {
        workspace = to_double(key, value);
    } else if (key == "data.categories") {
        categories = to_int(key, value);
    } else if (key == "data.max_samples") {
        max_samples = to_int(key, value);
    } else if (key == "actgr.t") {
        actgr.T = to_int(key, value);
    } else if (key == "actgr.l_base") {
        actgr.l_base = to_int(key, value);
    } else if (key == "actgr.d") {
        actgr.d = to_int(key, value);
    } else if (key == "actgr.enc_width") {
        actgr.enc_width = to_int(key, value);
    } else if (key == "actgr.anchor_mode") {
        if (value == "single") {
            anchor_mode = {actgr::AnchorVariant::kSingle, 1};
        } else if (value == "global") {
            anchor_mode = {actgr::AnchorVariant::kGlobal, 0};
        } else if (value.rfind("multi:", 0) == 0) {
            anchor_mode = {actgr::AnchorVariant::kMulti, to_int(key, value.substr(6))};
        } else {
            throw config_error("actgr.anchor_mode: expected single|multi:<k>|global, got '" + value + "'");
        }
    } else if (key == "diff.steps") {
        diff.steps = to_int(key, value);
    } else if (key == "diff.schedule") {
        diff.kind = diffusion::schedule_kind_from_string(value);
    } else if (key == "diff.hidden") {
        diff.hidden = to_int(key, value);
    } else if (key == "nafl.k") {
        nafl.k = to_int(key, value);
    } else if (key == "nafl.alpha") {
        nafl.alpha = to_double(key, value);
    } else if (key == "nafl.beta") {
        nafl.beta = to_double(key, value);
    } else if (key == "nafl.w_min") {
        nafl.w_min = to_double(key, value);
    } else if (key == "nafl.w_max") {
        nafl.w_max = to_double(key, value);
    } else if (key == "nafl.eps") {
        nafl.eps = to_double(key, value);
    } else if (key == "nafl.per_node") {
        nafl.per_node = to_bool(key, value);
    } else if (key == "sma.views") {
        sma.views = views_from_string(value);
    } else if (key == "sma.pairs") {
        sma.pairs = pairs_from_string(value);
    } else if (key == "sma.queue_len") {
        sma.queue_len = to_int(key, value);
    } else if (key == "sma.protos.obj") {
        sma.protos_obj = to_int(key, value);
    } else if (key == "sma.protos.edge") {
        sma.protos_edge = to_int(key, value);
    } else if (key == "sma.protos.trip") {
        sma.protos_trip = to_int(key, value);
    } else if (key == "sma.tau") {
        sma.tau = to_double(key, value);
    } else if (key == "sma.sinkhorn_eps") {
        sma.sinkhorn_eps = to_double(key, value);
    } else if (key == "sma.sinkhorn_iters") {
        sma.sinkhorn_iters = to_int(key, value);
    } else if (key == "sma.lambda") {
        sma.lambda = to_double(key, value);
    } else if (key == "sma.ema_alpha") {
        sma.ema_alpha = to_double(key, value);
    } else if (key == "sma.gen_point_mask") {
        sma.gen_point_mask = to_double(key, value);
    } else if (key == "sma.distill_mode") {
        sma.distill_mode = value;
    } else if (key == "opt.lr") {
        opt.base_lr = to_double(key, value);
    } else if (key == "opt.weight_decay") {
        opt.weight_decay = to_double(key, value);
    } else if (key == "opt.beta1") {
        opt.beta1 = to_double(key, value);
    } else if (key == "opt.beta2") {
        opt.beta2 = to_double(key, value);
    } else if (key == "opt.eps") {
        opt.epsilon = to_double(key, value);
    } else if (key == "opt.warmup_epochs") {
        opt.warmup_epochs = to_int(key, value);
    } else if (key == "opt.clip") {
        opt.clip_norm = to_double(key, value);
    } else if (key == "eval.kmeans_iters") {
        eval_kmeans_iters = to_int(key, value);
    } else if (key == "eval.recover_samples") {
        recover_samples = to_int(key, value);
    } else {
        throw config_error("unknown config key: " + key);
    }
}

void RunConfig::validate() const {
    if (epochs < 0 || batch < 1 || eval_every < 1) throw config_error("run: bad epochs/batch/eval_every");
    if (scenes < 1 || objects < 1 || points_per_object < 1 || noise_clusters < 0) {
        throw config_error("data: counts must be positive");
    }
    if (tau_pts < 1 || k_min < 1) throw config_error("data: tau_pts and k_min must be >= 1");
    if (rho_min < 0.0 || rho_max > 1.0 || rho_min > rho_max) throw config_error("data: need 0 <= rho_min <= rho_max <= 1");
    if (max_samples < 0 || recover_samples < 0 || eval_kmeans_iters < 1) throw config_error("bad eval settings");
    actgr.validate();
    if (anchor_mode.variant == actgr::AnchorVariant::kMulti && anchor_mode.k < 1) {
        throw config_error("actgr.anchor_mode: multi needs k >= 1");
    }
    diff.validate();
    nafl.validate();
    sma.validate();
    opt.validate();
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "run.seed",          "run.epochs",        "run.batch",         "run.eval_every",
        "run.out_dir",       "data.dir",          "data.scenes",       "data.objects",
        "data.points_per_object", "data.noise_clusters", "data.tau_pts", "data.k_min",
        "data.rho_min",      "data.rho_max",      "data.workspace",    "data.categories",
        "data.max_samples",  "actgr.t",           "actgr.l_base",      "actgr.d",
        "actgr.enc_width",   "actgr.anchor_mode", "diff.steps",        "diff.schedule",
        "diff.hidden",       "nafl.k",            "nafl.alpha",        "nafl.beta",
        "nafl.w_min",        "nafl.w_max",        "nafl.eps",          "nafl.per_node",
        "sma.views",         "sma.pairs",         "sma.queue_len",     "sma.protos.obj",
        "sma.protos.edge",   "sma.protos.trip",   "sma.tau",           "sma.sinkhorn_eps",
        "sma.sinkhorn_iters", "sma.lambda",       "sma.ema_alpha",     "sma.gen_point_mask",
        "sma.distill_mode",  "opt.lr",            "opt.weight_decay",  "opt.beta1",
        "opt.beta2",         "opt.eps",           "opt.warmup_epochs", "opt.clip",
        "eval.kmeans_iters", "eval.recover_samples",
    };
    return keys;
}

std::string RunConfig::anchor_mode_string() const {
    switch (anchor_mode.variant) {
        case actgr::AnchorVariant::kSingle: return "single";
        case actgr::AnchorVariant::kGlobal: return "global";
        case actgr::AnchorVariant::kMulti: return "multi:" + std::to_string(anchor_mode.k);
    }
    return "?";
}

}  // namespace toll
