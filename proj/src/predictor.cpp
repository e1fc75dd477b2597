#include "mdiq/predictor.hpp"

#include "mdiq/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace mdiq {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

} // namespace

ParamPredictor train_param_predictor(const ParamDataset& data,
                                     const PredictorTrainOptions& opts) {
    if (data.rows.empty())
        throw std::invalid_argument("parameter dataset is empty");

    std::vector<std::vector<double>> inputs;
    std::vector<std::array<double, 16>> vopts;
    inputs.reserve(data.rows.size() * 2);
    for (const auto& row : data.rows) {
        inputs.push_back({row.L_a, row.L_b, row.e_d});
        vopts.push_back(row.v_opt.to_array());
        if (opts.mirror_augment) {
            inputs.push_back({row.L_b, row.L_a, row.e_d});
            vopts.push_back(row.v_opt.swapped().to_array());
        }
    }

    const Normalizer in_norm = Normalizer::fit(inputs);
    std::vector<std::vector<double>> norm_inputs = inputs;
    in_norm.apply(norm_inputs, Direction::Normalize);

    ParamPredictor pred;
    for (std::size_t k = 0; k < 8; ++k) {
        std::vector<std::vector<double>> targets;
        targets.reserve(vopts.size());
        for (const auto& v : vopts) targets.push_back({v[k]});
        const Normalizer out_norm = Normalizer::fit(targets);
        std::vector<std::vector<double>> norm_targets = targets;
        out_norm.apply(norm_targets, Direction::Normalize);

        std::vector<std::size_t> sizes{3};
        sizes.insert(sizes.end(), opts.hidden.begin(), opts.hidden.end());
        sizes.push_back(1);
        MlpModel m = MlpModel::make(sizes, mix(opts.train.seed, k));
        m.input_norm = in_norm;
        m.output_norm = out_norm;

        TrainConfig cfg = opts.train;
        cfg.seed = mix(opts.train.seed, 100 + k);
        train(m, TrainingSet{norm_inputs, norm_targets}, cfg);
        pred.models[k] = std::move(m);
    }
    return pred;
}

PredictOutcome predict_params(const ParamPredictor& pred, double L_a,
                              double L_b, double e_d) {
    const std::vector<double> fwd_in{L_a, L_b, e_d};
    const std::vector<double> rev_in{L_b, L_a, e_d};

    bool outside = false;
    const Normalizer& in_norm = pred.models[0].input_norm;
    for (std::size_t i = 0; i < 3; ++i) {
        const double t = in_norm.apply_one(i, fwd_in[i], Direction::Normalize);
        if (t < -1e-9 || t > 1.0 + 1e-9) outside = true;
    }

    std::array<double, 16> v;
    for (std::size_t k = 0; k < 8; ++k) {
        v[k] = evaluate(pred.models[k], fwd_in)[0];
        v[k + 8] = evaluate(pred.models[k], rev_in)[0];
    }

    PredictOutcome out;
    out.params = repair_feasible(ProtocolParams::from_array(v), pred.bounds);
    out.out_of_envelope = outside;
    return out;
}

void save_predictor(const ParamPredictor& pred, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << "mdiq-predictor v1\n";
    f << "models 8\n";
    for (const auto& m : pred.models) save_model(m, f);
    f << "end\n";
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

void expect_tok(std::istream& is, const std::string& literal) {
    std::string tok;
    if (!(is >> tok) || tok != literal) throw ModelLoadError(literal);
}

} // namespace

ParamPredictor load_predictor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    expect_tok(f, "mdiq-predictor");
    expect_tok(f, "v1");
    expect_tok(f, "models");
    std::size_t count = 0;
    if (!(f >> count) || count != 8) throw ModelLoadError("model count");
    ParamPredictor pred;
    for (std::size_t k = 0; k < 8; ++k) {
        pred.models[k] = load_model(f);
        if (pred.models[k].input_size() != 3 || pred.models[k].output_size() != 1)
            throw ModelLoadError("predictor model shape");
    }
    expect_tok(f, "end");
    return pred;
}

CalibEstimator train_calib_estimator(const CalibDataset& data,
                                     const EstimatorTrainOptions& opts) {
    std::vector<std::vector<double>> inputs, targets;
    for (const auto& row : data.rows) {
        if (!(row.rate > 0.0)) continue; // no key, no usable statistics
        inputs.push_back({row.e11_X, row.E_mu_Z, row.rate});
        targets.push_back({row.delta_phi, row.e_d});
    }
    if (inputs.empty())
        throw std::invalid_argument(
            "calibration dataset has no rows with positive rate");

    const Normalizer in_norm =
        Normalizer::fit(inputs, {false, false, true}); // log10 on the rate
    const Normalizer out_norm = Normalizer::fit(targets);
    std::vector<std::vector<double>> ni = inputs, nt = targets;
    in_norm.apply(ni, Direction::Normalize);
    out_norm.apply(nt, Direction::Normalize);

    std::vector<std::size_t> sizes{3};
    sizes.insert(sizes.end(), opts.hidden.begin(), opts.hidden.end());
    sizes.push_back(2);

    CalibEstimator est;
    est.model = MlpModel::make(sizes, mix(opts.train.seed, 0xE57ULL));
    est.model.input_norm = in_norm;
    est.model.output_norm = out_norm;
    train(est.model, TrainingSet{ni, nt}, opts.train);

    est.phi_lo = est.phi_hi = targets[0][0];
    est.ed_lo = est.ed_hi = targets[0][1];
    for (const auto& t : targets) {
        est.phi_lo = std::min(est.phi_lo, t[0]);
        est.phi_hi = std::max(est.phi_hi, t[0]);
        est.ed_lo = std::min(est.ed_lo, t[1]);
        est.ed_hi = std::max(est.ed_hi, t[1]);
    }
    return est;
}

MisalignmentEstimate estimate_misalignment(const CalibEstimator& est,
                                           double e11_X, double E_mu_Z,
                                           double rate) {
    if (!(rate > 0.0))
        throw EstimationInfeasible(
            "calibration needs a positive key rate (pair produced no key)");
    const std::vector<double> y = evaluate(est.model, {e11_X, E_mu_Z, rate});
    MisalignmentEstimate out;
    out.delta_phi = std::clamp(y[0], est.phi_lo, est.phi_hi);
    out.e_d = std::clamp(y[1], est.ed_lo, est.ed_hi);
    return out;
}

void save_estimator(const CalibEstimator& est, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    char buf[200];
    std::snprintf(buf, sizeof buf, "phi_range %.17g %.17g\ned_range %.17g %.17g\n",
                  est.phi_lo, est.phi_hi, est.ed_lo, est.ed_hi);
    f << "mdiq-estimator v1\n" << buf;
    save_model(est.model, f);
    f << "end\n";
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

CalibEstimator load_estimator(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    expect_tok(f, "mdiq-estimator");
    expect_tok(f, "v1");
    CalibEstimator est;
    expect_tok(f, "phi_range");
    if (!(f >> est.phi_lo >> est.phi_hi)) throw ModelLoadError("phi_range");
    expect_tok(f, "ed_range");
    if (!(f >> est.ed_lo >> est.ed_hi)) throw ModelLoadError("ed_range");
    est.model = load_model(f);
    if (est.model.input_size() != 3 || est.model.output_size() != 2)
        throw ModelLoadError("estimator model shape");
    expect_tok(f, "end");
    return est;
}

} // namespace mdiq
