#include "mdiq/predictor.hpp"

#include "mdiq/model.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace mdiq;

namespace {

// smooth synthetic optima; the mechanics under test do not need real ones
ParamDataset synthetic_param_dataset() {
    ParamDataset ds;
    for (double la = 5; la <= 30; la += 5)
        for (double lb = 5; lb <= 30; lb += 5)
            for (double ed : {0.01, 0.02}) {
                ParamDatasetRow row;
                row.L_a = la;
                row.L_b = lb;
                row.e_d = ed;
                std::array<double, 16> v;
                auto fields = [&](double x, double y) {
                    return std::array<double, 8>{
                        0.35 + 0.004 * x - 0.002 * y + ed,
                        0.05 + 0.001 * x,
                        0.25 + 0.003 * x - 0.001 * y,
                        0.04 + 0.0005 * y,
                        0.45 - 0.003 * x + 2.0 * ed,
                        0.10 + 0.001 * y,
                        0.20 - 0.001 * x,
                        0.08 + 0.0005 * x};
                };
                const auto a = fields(la, lb);
                const auto b = fields(lb, la);
                for (int i = 0; i < 8; ++i) {
                    v[i] = a[i];
                    v[i + 8] = b[i];
                }
                row.v_opt = ProtocolParams::from_array(v);
                row.rate = 1e-4;
                ds.rows.push_back(row);
            }
    return ds;
}

const ParamPredictor& quick_predictor() {
    static const ParamPredictor pred = [] {
        PredictorTrainOptions opts;
        opts.hidden = {8};
        opts.train.epochs = 400;
        opts.train.patience = 100;
        opts.train.seed = 17;
        return train_param_predictor(synthetic_param_dataset(), opts);
    }();
    return pred;
}

std::string temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "mdiq_test";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

} // namespace

TEST_CASE("equal distances predict mirror-equal users") {
    const PredictOutcome po = predict_params(quick_predictor(), 15.0, 15.0, 0.012);
    const auto v = po.params.to_array();
    for (int i = 0; i < 8; ++i) CHECK(v[i] == v[i + 8]); // bit-identical
    CHECK_FALSE(po.out_of_envelope);
}

TEST_CASE("swapping distances mirrors the prediction") {
    const PredictOutcome ab = predict_params(quick_predictor(), 10.0, 25.0, 0.015);
    const PredictOutcome ba = predict_params(quick_predictor(), 25.0, 10.0, 0.015);
    CHECK(ab.params.swapped().to_array() == ba.params.to_array());
}

TEST_CASE("conditions outside the training envelope are flagged") {
    CHECK(predict_params(quick_predictor(), 80.0, 10.0, 0.012).out_of_envelope);
    CHECK(predict_params(quick_predictor(), 10.0, 12.0, 0.3).out_of_envelope);
    CHECK_FALSE(predict_params(quick_predictor(), 12.0, 17.0, 0.013).out_of_envelope);
}

TEST_CASE("every prediction satisfies the parameter invariants") {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> uL(5.0, 30.0), ue(0.01, 0.02);
    const ParamBounds b = ParamBounds::defaults();
    for (int t = 0; t < 60; ++t) {
        const PredictOutcome po =
            predict_params(quick_predictor(), uL(rng), uL(rng), ue(rng));
        CHECK(search_feasible(po.params, b));
    }
}

TEST_CASE("predictor file round trip preserves predictions exactly") {
    const std::string path = temp_file("predictor.txt");
    save_predictor(quick_predictor(), path);
    const ParamPredictor back = load_predictor(path);
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> uL(5.0, 30.0);
    for (int t = 0; t < 20; ++t) {
        const double la = uL(rng), lb = uL(rng);
        CHECK(predict_params(back, la, lb, 0.015).params.to_array() ==
              predict_params(quick_predictor(), la, lb, 0.015).params.to_array());
    }

    // truncation fails cleanly
    {
        std::ifstream f(path, std::ios::binary);
        std::string text(std::istreambuf_iterator<char>(f), {});
        std::ofstream g(path, std::ios::binary);
        g << text.substr(0, text.size() / 3);
    }
    CHECK_THROWS(load_predictor(path));
}

TEST_CASE("estimator inverts the observables it was trained on") {
    const CalibEstimator& est = mdiq::testing::shared_estimator();
    const CalibDataset& ds = mdiq::testing::shared_calib_dataset();

    // closed loop at an interior truth
    const ObservedStats s =
        observed_summary(ds.params, ds.charlie, ds.users, {0.01, 0.25});
    const MisalignmentEstimate e =
        estimate_misalignment(est, s.e11_X, s.E_mu_Z, s.rate);
    CHECK(std::abs(e.delta_phi - 0.25) <= 0.01);
    CHECK(std::abs(e.e_d - 0.01) <= 5e-4);
}

TEST_CASE("estimator refuses a zero rate and clamps to its ranges") {
    const CalibEstimator& est = mdiq::testing::shared_estimator();
    CHECK_THROWS_AS(estimate_misalignment(est, 0.02, 0.003, 0.0),
                    EstimationInfeasible);
    // far-out observables still land inside the training ranges
    const MisalignmentEstimate lo = estimate_misalignment(est, 1e-6, 1e-6, 0.5);
    const MisalignmentEstimate hi = estimate_misalignment(est, 0.45, 0.45, 1e-9);
    for (const auto& e : {lo, hi}) {
        CHECK(e.delta_phi >= est.phi_lo);
        CHECK(e.delta_phi <= est.phi_hi);
        CHECK(e.e_d >= est.ed_lo);
        CHECK(e.e_d <= est.ed_hi);
    }
}

TEST_CASE("estimator file round trip preserves estimates exactly") {
    const CalibEstimator& est = mdiq::testing::shared_estimator();
    const std::string path = temp_file("estimator.txt");
    save_estimator(est, path);
    const CalibEstimator back = load_estimator(path);
    CHECK(back.phi_lo == est.phi_lo);
    CHECK(back.ed_hi == est.ed_hi);
    const CalibDataset& ds = mdiq::testing::shared_calib_dataset();
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& r = ds.rows[i * 7];
        if (!(r.rate > 0)) continue;
        const auto a = estimate_misalignment(est, r.e11_X, r.E_mu_Z, r.rate);
        const auto b = estimate_misalignment(back, r.e11_X, r.E_mu_Z, r.rate);
        CHECK(a.delta_phi == b.delta_phi);
        CHECK(a.e_d == b.e_d);
    }
}

TEST_CASE("estimator drift response is monotone on a probe grid") {
    // regression sanity, not an invariant of trained networks: report only
    const CalibEstimator& est = mdiq::testing::shared_estimator();
    const CalibDataset& ds = mdiq::testing::shared_calib_dataset();
    const ObservedStats mid =
        observed_summary(ds.params, ds.charlie, ds.users, {0.01, 0.25});
    double prev = -1;
    bool monotone = true;
    for (double e11 = mid.e11_X * 0.8; e11 <= mid.e11_X * 1.2; e11 += mid.e11_X * 0.05) {
        const MisalignmentEstimate e =
            estimate_misalignment(est, e11, mid.E_mu_Z, mid.rate);
        if (e.delta_phi < prev - 1e-9) monotone = false;
        prev = e.delta_phi;
    }
    WARN_MESSAGE(monotone, "estimator drift response is not monotone on the probe grid");
}

TEST_CASE("training rejects an empty or keyless dataset") {
    CalibDataset empty;
    CHECK_THROWS_AS(train_calib_estimator(empty, {}), std::invalid_argument);
    CalibDataset keyless;
    keyless.rows.push_back({0.1, 0.01, 0.02, 0.01, 0.0}); // rate 0
    CHECK_THROWS_AS(train_calib_estimator(keyless, {}), std::invalid_argument);
}
