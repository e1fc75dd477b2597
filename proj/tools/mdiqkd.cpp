#include "mdiq/config.hpp"
#include "mdiq/dataset.hpp"
#include "mdiq/model.hpp"
#include "mdiq/netsim.hpp"
#include "mdiq/optimize.hpp"
#include "mdiq/predictor.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace {

using namespace mdiq;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

struct CommandContext {
    std::string name;
    RunConfig cfg;
    std::uint64_t seed = 1;
    std::string out_path;

    std::string provenance() const {
        return "provenance command=" + name + " seed=" + std::to_string(seed) +
               " config_hash=" + config_hash_hex(cfg);
    }
};

CommandContext make_context(const std::string& name,
                            const std::string& config_path,
                            const std::vector<std::uint64_t>& seed_flag,
                            const std::string& out_path) {
    CommandContext ctx;
    ctx.name = name;
    if (!config_path.empty()) ctx.cfg = RunConfig::from_file(config_path);
    ctx.seed = seed_flag.empty() ? ctx.cfg.get_u64("seed", 1) : seed_flag.back();
    ctx.out_path = out_path;
    std::cout << "command=" << name << " seed=" << ctx.seed
              << " config_hash=" << config_hash_hex(ctx.cfg) << "\n";
    return ctx;
}

std::ofstream open_out(const CommandContext& ctx) {
    if (ctx.out_path.empty()) throw ConfigError("--out is required");
    std::ofstream f(ctx.out_path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open '" + ctx.out_path +
                                 "' for writing");
    f << "# " << ctx.provenance() << "\n";
    return f;
}

void require_input_file(const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError("config key '" + key + "' is required");
    if (!std::filesystem::exists(path))
        throw ConfigError("file named by '" + key + "' not found: " + path);
}

const std::set<std::string> kConditionKeys = {"dc", "eta_d", "f_ec", "N",
                                              "alpha", "n_sigma"};
const std::set<std::string> kOptimizerKeys = {
    "pso_swarm",     "pso_iterations", "pso_inertia",
    "pso_cognitive", "pso_social",     "pso_velocity_clamp",
    "lsa_step",      "lsa_tolerance",  "lsa_max_evals"};

std::set<std::string> keys_with(std::initializer_list<const char*> extra) {
    std::set<std::string> s = kConditionKeys;
    s.insert(kOptimizerKeys.begin(), kOptimizerKeys.end());
    s.insert("seed");
    for (const char* k : extra) s.insert(k);
    return s;
}

CharlieConditions charlie_from(const RunConfig& cfg) {
    CharlieConditions c;
    c.dc = cfg.get_double("dc", 6.02e-8);
    c.eta_d = cfg.get_double("eta_d", 0.7);
    c.f_ec = cfg.get_double("f_ec", 1.16);
    c.N = cfg.get_double("N", 1e12);
    return c;
}

PsoConfig pso_from(const RunConfig& cfg, std::uint64_t seed) {
    PsoConfig p;
    p.swarm_size = cfg.get_size("pso_swarm", p.swarm_size);
    p.iterations = cfg.get_size("pso_iterations", p.iterations);
    p.inertia = cfg.get_double("pso_inertia", p.inertia);
    p.cognitive = cfg.get_double("pso_cognitive", p.cognitive);
    p.social = cfg.get_double("pso_social", p.social);
    p.velocity_clamp = cfg.get_double("pso_velocity_clamp", p.velocity_clamp);
    p.seed = seed;
    return p;
}

LsaConfig lsa_from(const RunConfig& cfg) {
    LsaConfig l;
    l.step = cfg.get_double("lsa_step", l.step);
    l.tolerance = cfg.get_double("lsa_tolerance", l.tolerance);
    l.max_evals = cfg.get_u64("lsa_max_evals", l.max_evals);
    return l;
}

std::vector<std::size_t> hidden_from(const RunConfig& cfg) {
    const std::string spec = cfg.get_string("hidden", "20,20");
    std::vector<std::size_t> out;
    std::istringstream is(spec);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        try {
            const long v = std::stol(tok);
            if (v <= 0) throw std::invalid_argument("nonpositive");
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("bad hidden layer spec: " + spec);
        }
    }
    if (out.empty()) throw ConfigError("hidden layer spec is empty");
    return out;
}

// ---------------------------------------------------------------- simulate

void cmd_simulate(const CommandContext& ctx) {
    ctx.cfg.require_known(keys_with({"mode", "L_min", "L_max", "L_step",
                                     "scan_total", "scan_points", "scan_margin",
                                     "e_d"}));
    const CharlieConditions charlie = charlie_from(ctx.cfg);
    const double alpha = ctx.cfg.get_double("alpha", 0.2);
    const double n_sigma = ctx.cfg.get_double("n_sigma", 0.0);
    const double e_d = ctx.cfg.get_double("e_d", 0.015);
    const std::string mode = ctx.cfg.get_string("mode", "grid");

    std::vector<std::pair<double, double>> nodes;
    if (mode == "grid") {
        const double lmin = ctx.cfg.get_double("L_min", 5.0);
        const double lmax = ctx.cfg.get_double("L_max", 45.0);
        const double lstep = ctx.cfg.get_double("L_step", 10.0);
        if (!(lstep > 0.0) || !(lmax >= lmin))
            throw ConfigError("invalid grid: need L_step > 0 and L_max >= L_min");
        for (double la = lmin; la <= lmax + 1e-9; la += lstep)
            for (double lb = lmin; lb <= lmax + 1e-9; lb += lstep)
                nodes.emplace_back(la, lb);
    } else if (mode == "scan") {
        // L_a + L_b held at scan_total; L_a swept from scan_margin to
        // scan_total - scan_margin in scan_points even steps
        const double total = ctx.cfg.get_double("scan_total", 70.0);
        const std::size_t points = ctx.cfg.get_size("scan_points", 5);
        const double margin = ctx.cfg.get_double("scan_margin", 5.0);
        if (points < 2 || !(total > 2.0 * margin) || !(margin >= 0.0))
            throw ConfigError(
                "invalid scan: need scan_points >= 2 and scan_total > 2*scan_margin");
        for (std::size_t i = 0; i < points; ++i) {
            const double la = margin + (total - 2.0 * margin) * double(i) /
                                           double(points - 1);
            nodes.emplace_back(la, total - la);
        }
    } else {
        throw ConfigError("mode must be 'grid' or 'scan'");
    }

    std::ofstream out = open_out(ctx);
    out << "L_a,L_b,rate_asym,rate_sym\n";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto [la, lb] = nodes[i];
        const UserConditions users{la, lb, alpha};
        const MisalignmentState mis{e_d, 0.0};
        OptimizeStrategy strategy =
            OptimizeStrategy::pso_with(pso_from(ctx.cfg, mix(ctx.seed, i)));
        strategy.lsa = lsa_from(ctx.cfg);
        const OptResult asym = optimize_pair(charlie, users, mis,
                                             SearchMode::Asymmetric, strategy,
                                             n_sigma);
        const OptResult sym = optimize_pair(charlie, users, mis,
                                            SearchMode::Symmetric, strategy,
                                            n_sigma);
        out << fmt(la) << ',' << fmt(lb) << ',' << fmt(asym.rate) << ','
            << fmt(sym.rate) << "\n";
    }
    if (!out) throw std::runtime_error("write failed");
    std::cout << "wrote " << nodes.size() << " rows to " << ctx.out_path << "\n";
}

// -------------------------------------------------------------- gen-dataset

void cmd_gen_dataset(const CommandContext& ctx) {
    ctx.cfg.require_known(keys_with({"kind", "L_min", "L_max", "L_step",
                                     "ed_min", "ed_max", "ed_step", "n",
                                     "phi_min", "phi_max", "L_a", "L_b"}));
    const std::string kind = ctx.cfg.get_string("kind", "param");
    const CharlieConditions charlie = charlie_from(ctx.cfg);
    const double alpha = ctx.cfg.get_double("alpha", 0.2);
    const double n_sigma = ctx.cfg.get_double("n_sigma", 0.0);

    if (kind == "param") {
        GenParamConfig gc;
        const double lmin = ctx.cfg.get_double("L_min", 4.0);
        const double lmax = ctx.cfg.get_double("L_max", 40.0);
        const double lstep = ctx.cfg.get_double("L_step", 4.0);
        const double edmin = ctx.cfg.get_double("ed_min", 0.005);
        const double edmax = ctx.cfg.get_double("ed_max", 0.025);
        const double edstep = ctx.cfg.get_double("ed_step", 0.005);
        if (!(lstep > 0.0) || !(edstep > 0.0))
            throw ConfigError("L_step and ed_step must be positive");
        for (double l = lmin; l <= lmax + 1e-9; l += lstep) {
            gc.grid.L_a_values.push_back(l);
            gc.grid.L_b_values.push_back(l);
        }
        for (double e = edmin; e <= edmax + 1e-12; e += edstep)
            gc.grid.e_d_values.push_back(e);
        gc.charlie = charlie;
        gc.alpha = alpha;
        gc.n_sigma = n_sigma;
        gc.seed = ctx.seed;
        gc.pso = pso_from(ctx.cfg, ctx.seed);
        gc.lsa = lsa_from(ctx.cfg);
        const ParamDataset ds = gen_param_dataset(gc);
        save_dataset(ds, ctx.out_path, ctx.provenance());
        std::cout << "wrote " << ds.rows.size() << " rows to " << ctx.out_path
                  << "\n";
    } else if (kind == "calib") {
        GenCalibConfig gc;
        gc.n = ctx.cfg.get_size("n", 1000);
        gc.phi_lo = ctx.cfg.get_double("phi_min", 0.0);
        gc.phi_hi = ctx.cfg.get_double("phi_max", 0.5);
        gc.ed_lo = ctx.cfg.get_double("ed_min", 0.002);
        gc.ed_hi = ctx.cfg.get_double("ed_max", 0.02);
        gc.charlie = charlie;
        gc.users = {ctx.cfg.get_double("L_a", 10.0),
                    ctx.cfg.get_double("L_b", 20.0), alpha};
        gc.n_sigma = n_sigma;
        gc.seed = ctx.seed;
        gc.pso = pso_from(ctx.cfg, mix(ctx.seed, 0xBA5EULL));
        gc.lsa = lsa_from(ctx.cfg);
        const CalibDataset ds = gen_calib_dataset(gc);
        save_dataset(ds, ctx.out_path, ctx.provenance());
        std::cout << "wrote " << ds.rows.size() << " rows to " << ctx.out_path
                  << "\n";
    } else {
        throw ConfigError("kind must be 'param' or 'calib'");
    }
}

// -------------------------------------------------------------------- train

void cmd_train(const CommandContext& ctx) {
    ctx.cfg.require_known({"seed", "kind", "dataset", "hidden", "learning_rate",
                           "epochs", "batch_size", "validation_fraction",
                           "momentum", "patience", "mirror_augment"});
    const std::string kind = ctx.cfg.get_string("kind", "predictor");
    const std::string dataset_path = ctx.cfg.get_string("dataset", "");
    require_input_file("dataset", dataset_path);
    if (ctx.out_path.empty()) throw ConfigError("--out is required");

    TrainConfig tc;
    tc.learning_rate = ctx.cfg.get_double("learning_rate", tc.learning_rate);
    tc.epochs = ctx.cfg.get_size("epochs", tc.epochs);
    tc.batch_size = ctx.cfg.get_size("batch_size", tc.batch_size);
    tc.validation_fraction =
        ctx.cfg.get_double("validation_fraction", tc.validation_fraction);
    tc.momentum = ctx.cfg.get_double("momentum", tc.momentum);
    tc.patience = ctx.cfg.get_size("patience", tc.patience);
    tc.seed = ctx.seed;

    if (kind == "predictor") {
        const ParamDataset ds = load_param_dataset(dataset_path);
        PredictorTrainOptions opts;
        opts.train = tc;
        opts.hidden = hidden_from(ctx.cfg);
        opts.mirror_augment = ctx.cfg.get_bool("mirror_augment", true);
        const ParamPredictor pred = train_param_predictor(ds, opts);
        save_predictor(pred, ctx.out_path);
        std::cout << "trained 8 predictor networks on " << ds.rows.size()
                  << " rows -> " << ctx.out_path << "\n";
    } else if (kind == "estimator") {
        const CalibDataset ds = load_calib_dataset(dataset_path);
        EstimatorTrainOptions opts;
        opts.train = tc;
        opts.hidden = hidden_from(ctx.cfg);
        const CalibEstimator est = train_calib_estimator(ds, opts);
        save_estimator(est, ctx.out_path);
        std::cout << "trained estimator on " << ds.rows.size() << " rows -> "
                  << ctx.out_path << "\n";
    } else {
        throw ConfigError("kind must be 'predictor' or 'estimator'");
    }
}

// ------------------------------------------------------------------ predict

std::vector<std::array<double, 3>> read_conditions_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<std::array<double, 3>> out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            if (line != "L_a,L_b,e_d")
                throw ParseError("conditions file needs header L_a,L_b,e_d",
                                 lineno, 1);
            have_header = true;
            continue;
        }
        std::istringstream is(line);
        std::array<double, 3> row{};
        char comma;
        if (!(is >> row[0] >> comma >> row[1] >> comma >> row[2]))
            throw ParseError("bad conditions row", lineno, 1);
        out.push_back(row);
    }
    if (!have_header) throw ParseError("missing header row", lineno + 1, 1);
    return out;
}

void cmd_predict(const CommandContext& ctx) {
    ctx.cfg.require_known(keys_with({"model", "L_a", "L_b", "e_d", "conditions"}));
    const std::string model_path = ctx.cfg.get_string("model", "");
    require_input_file("model", model_path);
    const ParamPredictor pred = load_predictor(model_path);
    const CharlieConditions charlie = charlie_from(ctx.cfg);
    const double alpha = ctx.cfg.get_double("alpha", 0.2);
    const double n_sigma = ctx.cfg.get_double("n_sigma", 0.0);

    std::vector<std::array<double, 3>> conditions;
    if (ctx.cfg.has("conditions")) {
        const std::string path = ctx.cfg.get_string("conditions", "");
        require_input_file("conditions", path);
        conditions = read_conditions_csv(path);
    } else {
        if (!ctx.cfg.has("L_a") || !ctx.cfg.has("L_b") || !ctx.cfg.has("e_d"))
            throw ConfigError(
                "predict needs either 'conditions' or inline L_a, L_b, e_d");
        conditions.push_back({ctx.cfg.get_double("L_a", 0),
                              ctx.cfg.get_double("L_b", 0),
                              ctx.cfg.get_double("e_d", 0)});
    }

    std::ofstream out = open_out(ctx);
    out << "L_a,L_b,e_d";
    for (const auto& name : param_field_names()) out << ',' << name;
    out << ",rate,out_of_envelope\n";
    std::size_t warned = 0;
    for (const auto& [la, lb, ed] : conditions) {
        const PredictOutcome po = predict_params(pred, la, lb, ed);
        if (po.out_of_envelope) ++warned;
        const double rate = key_rate(po.params, charlie, {la, lb, alpha},
                                     {ed, 0.0}, n_sigma);
        out << fmt(la) << ',' << fmt(lb) << ',' << fmt(ed);
        for (double v : po.params.to_array()) out << ',' << fmt(v);
        out << ',' << fmt(rate) << ',' << (po.out_of_envelope ? 1 : 0) << "\n";
    }
    if (!out) throw std::runtime_error("write failed");
    if (warned > 0)
        std::cerr << "warning: " << warned
                  << " condition(s) outside the training envelope\n";
    std::cout << "wrote " << conditions.size() << " predictions to "
              << ctx.out_path << "\n";
}

// ---------------------------------------------------------------- calibrate

void cmd_calibrate(const CommandContext& ctx) {
    ctx.cfg.require_known({"seed", "model", "obs"});
    const std::string model_path = ctx.cfg.get_string("model", "");
    require_input_file("model", model_path);
    const std::string obs_path = ctx.cfg.get_string("obs", "");
    require_input_file("obs", obs_path);

    const CalibEstimator est = load_estimator(model_path);
    const CalibDataset obs = load_calib_dataset(obs_path);

    std::ofstream out = open_out(ctx);
    out << "e11_X,E_mu_Z,rate,delta_phi_net,e_d_net,delta_phi,e_d\n";
    double phi_err = 0, ed_err = 0;
    std::size_t n_ok = 0;
    for (const auto& row : obs.rows) {
        if (!(row.rate > 0.0)) continue;
        const MisalignmentEstimate e =
            estimate_misalignment(est, row.e11_X, row.E_mu_Z, row.rate);
        out << fmt(row.e11_X) << ',' << fmt(row.E_mu_Z) << ',' << fmt(row.rate)
            << ',' << fmt(e.delta_phi) << ',' << fmt(e.e_d) << ','
            << fmt(row.delta_phi) << ',' << fmt(row.e_d) << "\n";
        phi_err += std::abs(e.delta_phi - row.delta_phi);
        ed_err += std::abs(e.e_d - row.e_d);
        ++n_ok;
    }
    if (!out) throw std::runtime_error("write failed");
    if (n_ok > 0)
        std::cout << "estimated " << n_ok << " rows; mean |dphi err| = "
                  << phi_err / double(n_ok)
                  << ", mean |e_d err| = " << ed_err / double(n_ok) << "\n";
}

// -------------------------------------------------------------------- bench

void cmd_bench(const CommandContext& ctx) {
    ctx.cfg.require_known(keys_with({"predictor", "n_samples", "L_min", "L_max",
                                     "ed_min", "ed_max", "timing_out"}));
    const std::string model_path = ctx.cfg.get_string("predictor", "");
    require_input_file("predictor", model_path);
    const ParamPredictor pred = load_predictor(model_path);
    const CharlieConditions charlie = charlie_from(ctx.cfg);
    const double alpha = ctx.cfg.get_double("alpha", 0.2);
    const double n_sigma = ctx.cfg.get_double("n_sigma", 0.0);
    const std::size_t n = ctx.cfg.get_size("n_samples", 100);
    const double lmin = ctx.cfg.get_double("L_min", 5.0);
    const double lmax = ctx.cfg.get_double("L_max", 39.0);
    const double edmin = ctx.cfg.get_double("ed_min", 0.006);
    const double edmax = ctx.cfg.get_double("ed_max", 0.024);
    const LsaConfig lsa = lsa_from(ctx.cfg);

    std::mt19937_64 rng(ctx.seed);
    auto uniform = [&](double lo, double hi) {
        return lo + std::uniform_real_distribution<double>(0.0, 1.0)(rng) *
                        (hi - lo);
    };

    std::ofstream out = open_out(ctx);
    out << "L_a,L_b,e_d,rate_lsa,rate_pred,rate_ratio\n";
    std::ofstream timing;
    const std::string timing_path = ctx.cfg.get_string("timing_out", "");
    if (!timing_path.empty()) {
        timing.open(timing_path, std::ios::binary);
        if (!timing)
            throw std::runtime_error("cannot open '" + timing_path + "'");
        timing << "# " << ctx.provenance() << "\n";
        timing << "t_lsa_s,t_pred_s,time_ratio\n";
    }

    double sum_time_ratio = 0, sum_rate_ratio = 0, sum_t_lsa = 0, sum_t_pred = 0;
    std::size_t above_08 = 0;
    using clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < n; ++i) {
        const double la = uniform(lmin, lmax);
        const double lb = uniform(lmin, lmax);
        const double ed = uniform(edmin, edmax);
        const UserConditions users{la, lb, alpha};
        const MisalignmentState mis{ed, 0.0};
        auto obj = [&](const ProtocolParams& p) {
            return key_rate(p, charlie, users, mis, n_sigma);
        };

        const auto t0 = clock::now();
        const OptResult lr = lsa_optimize(obj, default_initial(lsa.bounds), lsa);
        const double t_lsa = std::chrono::duration<double>(clock::now() - t0).count();

        // repeat predictions until the clock resolves them
        const auto t1 = clock::now();
        std::size_t reps = 0;
        double t_pred_total = 0;
        PredictOutcome po;
        do {
            po = predict_params(pred, la, lb, ed);
            ++reps;
            t_pred_total = std::chrono::duration<double>(clock::now() - t1).count();
        } while (t_pred_total < 1e-3);
        const double t_pred = t_pred_total / double(reps);

        const double rate_pred = obj(po.params);
        const double rate_ratio = lr.rate > 0.0 ? rate_pred / lr.rate
                                 : rate_pred > 0.0 ? 1.0 : 0.0;
        out << fmt(la) << ',' << fmt(lb) << ',' << fmt(ed) << ','
            << fmt(lr.rate) << ',' << fmt(rate_pred) << ',' << fmt(rate_ratio)
            << "\n";
        if (timing.is_open())
            timing << fmt(t_lsa) << ',' << fmt(t_pred) << ','
                   << fmt(t_lsa / t_pred) << "\n";

        sum_time_ratio += t_lsa / t_pred;
        sum_rate_ratio += rate_ratio;
        sum_t_lsa += t_lsa;
        sum_t_pred += t_pred;
        if (rate_ratio >= 0.8) ++above_08;
    }
    if (!out) throw std::runtime_error("write failed");

    std::cout << "samples=" << n << "\n"
              << "mean_t_lsa_s=" << sum_t_lsa / double(n) << "\n"
              << "mean_t_pred_s=" << sum_t_pred / double(n) << "\n"
              << "mean_time_ratio=" << sum_time_ratio / double(n) << "\n"
              << "mean_rate_ratio=" << sum_rate_ratio / double(n) << "\n"
              << "frac_rate_ratio_ge_0.8=" << double(above_08) / double(n)
              << "\n";
}

// ------------------------------------------------------------------- netsim

void cmd_netsim(const CommandContext& ctx) {
    ctx.cfg.require_known(keys_with(
        {"users", "ticks", "recal_period", "sigma_phi", "sigma_ed",
         "drift_phi_lo", "drift_phi_hi", "drift_ed_lo", "drift_ed_hi", "L_min",
         "L_max", "user_ed_min", "user_ed_max", "tick_seconds", "strategy",
         "predictor_model", "estimator_model", "per_eval_cost_s",
         "predictor_cost_s"}));

    ScenarioConfig sc;
    sc.n_users = ctx.cfg.get_size("users", sc.n_users);
    sc.ticks = ctx.cfg.get_size("ticks", sc.ticks);
    sc.recal_period = ctx.cfg.get_size("recal_period", sc.recal_period);
    sc.drift.sigma_phi = ctx.cfg.get_double("sigma_phi", 0.01);
    sc.drift.sigma_ed = ctx.cfg.get_double("sigma_ed", 2e-4);
    sc.drift.phi_lo = ctx.cfg.get_double("drift_phi_lo", sc.drift.phi_lo);
    sc.drift.phi_hi = ctx.cfg.get_double("drift_phi_hi", sc.drift.phi_hi);
    sc.drift.ed_lo = ctx.cfg.get_double("drift_ed_lo", sc.drift.ed_lo);
    sc.drift.ed_hi = ctx.cfg.get_double("drift_ed_hi", sc.drift.ed_hi);
    sc.L_min = ctx.cfg.get_double("L_min", sc.L_min);
    sc.L_max = ctx.cfg.get_double("L_max", sc.L_max);
    sc.user_ed_min = ctx.cfg.get_double("user_ed_min", sc.user_ed_min);
    sc.user_ed_max = ctx.cfg.get_double("user_ed_max", sc.user_ed_max);
    sc.tick_seconds = ctx.cfg.get_double("tick_seconds", sc.tick_seconds);
    sc.seed = ctx.seed;

    NetsimEnv env;
    env.charlie = charlie_from(ctx.cfg);
    env.alpha = ctx.cfg.get_double("alpha", 0.2);
    env.n_sigma = ctx.cfg.get_double("n_sigma", 0.0);

    ProvisionStrategy strategy;
    const std::string skind = ctx.cfg.get_string("strategy", "lsa");
    ParamPredictor pred;
    if (skind == "predictor") {
        const std::string path = ctx.cfg.get_string("predictor_model", "");
        require_input_file("predictor_model", path);
        pred = load_predictor(path);
        strategy.kind = ProvisionStrategy::Kind::Predictor;
        strategy.predictor = &pred;
    } else if (skind == "lsa") {
        strategy.kind = ProvisionStrategy::Kind::Lsa;
    } else if (skind == "pso") {
        strategy.kind = ProvisionStrategy::Kind::Pso;
        strategy.pso = pso_from(ctx.cfg, mix(ctx.seed, 0x9E75ULL));
    } else {
        throw ConfigError("strategy must be predictor, lsa or pso");
    }
    strategy.lsa = lsa_from(ctx.cfg);
    strategy.per_eval_cost_s =
        ctx.cfg.get_double("per_eval_cost_s", strategy.per_eval_cost_s);
    strategy.predictor_cost_s =
        ctx.cfg.get_double("predictor_cost_s", strategy.predictor_cost_s);

    CalibEstimator est;
    const CalibEstimator* est_ptr = nullptr;
    if (sc.recal_period > 0) {
        const std::string path = ctx.cfg.get_string("estimator_model", "");
        require_input_file("estimator_model", path);
        est = load_estimator(path);
        est_ptr = &est;
    }

    const ScenarioMetrics m = run_scenario(sc, strategy, est_ptr, env);

    std::ofstream out = open_out(ctx);
    out << "# pair_count=" << m.pair_count
        << " total_sim_latency_s=" << fmt(m.total_sim_latency_s)
        << " time_avg_rate=" << fmt(m.time_avg_rate) << "\n";
    out << "tick,mean_rate,recalibrated,mean_abs_phi_residual,mean_abs_ed_residual\n";
    for (const auto& tm : m.per_tick)
        out << tm.tick << ',' << fmt(tm.mean_rate) << ',' << tm.recalibrated
            << ',' << fmt(tm.mean_abs_phi_residual) << ','
            << fmt(tm.mean_abs_ed_residual) << "\n";
    if (!out) throw std::runtime_error("write failed");

    std::cout << "pairs=" << m.pair_count
              << " time_avg_rate=" << m.time_avg_rate
              << " total_sim_latency_s=" << m.total_sim_latency_s
              << " total_wall_latency_s=" << m.total_wall_latency_s << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MDI-QKD key-rate simulation, parameter optimization, "
                 "prediction and calibration toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::vector<std::uint64_t> seed_flag;

    std::function<void(const CommandContext&)> run;
    std::string command_name;

    auto add_command = [&](const std::string& name, const std::string& desc,
                           void (*fn)(const CommandContext&)) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "flat key=value config file");
        sub->add_option("--seed", seed_flag, "RNG seed (overrides config)");
        sub->add_option("--out", out_path, "output file path");
        sub->callback([&, name, fn] {
            command_name = name;
            run = fn;
        });
    };

    add_command("simulate", "optimized key rate over an (L_a, L_b) grid or scan",
                cmd_simulate);
    add_command("gen-dataset", "generate a parameter or calibration dataset",
                cmd_gen_dataset);
    add_command("train", "train the parameter predictor or the estimator",
                cmd_train);
    add_command("predict", "predict protocol parameters for user conditions",
                cmd_predict);
    add_command("calibrate", "estimate misalignment from observed statistics",
                cmd_calibrate);
    add_command("bench", "compare LSA optimization against the predictor",
                cmd_bench);
    add_command("netsim", "star-network provisioning and drift simulation",
                cmd_netsim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const mdiq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }

    try {
        run(make_context(command_name, config_path, seed_flag, out_path));
    } catch (const mdiq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
