#pragma once

#include "mdiq/mlp.hpp"
#include "mdiq/optimize.hpp"

#include <array>
#include <iosfwd>

// The two network applications: the eight-network parameter predictor
// (one network per Alice-side element; Bob's side comes from the same
// networks with L_a and L_b switched) and the misalignment estimator that
// inverts (e11_X, E_mu_Z, rate) into (delta_phi, e_d).

namespace mdiq {

struct ParamPredictor {
    std::array<MlpModel, 8> models; // Alice-side targets in array order
    ParamBounds bounds = ParamBounds::defaults(); // prediction repair box
};

struct PredictorTrainOptions {
    TrainConfig train;
    std::vector<std::size_t> hidden = {20, 20};
    // also train on the mirrored rows (L_b, L_a, e_d) -> Bob fields, which
    // the swap symmetry of the objective makes equivalent training data
    bool mirror_augment = true;
};

ParamPredictor train_param_predictor(const ParamDataset& data,
                                     const PredictorTrainOptions& opts = {});

struct PredictOutcome {
    ProtocolParams params;
    bool out_of_envelope = false; // input left the training envelope
};

PredictOutcome predict_params(const ParamPredictor& pred, double L_a,
                              double L_b, double e_d);

void save_predictor(const ParamPredictor& pred, const std::string& path);
ParamPredictor load_predictor(const std::string& path);

struct CalibEstimator {
    MlpModel model; // (e11_X, E_mu_Z, log10 rate) -> (delta_phi, e_d)
    double phi_lo = 0, phi_hi = 0.5;    // output clamp = training ranges
    double ed_lo = 0.002, ed_hi = 0.02;
};

struct EstimatorTrainOptions {
    TrainConfig train;
    std::vector<std::size_t> hidden = {20, 20};
};

CalibEstimator train_calib_estimator(const CalibDataset& data,
                                     const EstimatorTrainOptions& opts = {});

struct MisalignmentEstimate {
    double delta_phi = 0;
    double e_d = 0;
};

// Throws EstimationInfeasible when rate <= 0 (no key, nothing to invert).
MisalignmentEstimate estimate_misalignment(const CalibEstimator& est,
                                           double e11_X, double E_mu_Z,
                                           double rate);

void save_estimator(const CalibEstimator& est, const std::string& path);
CalibEstimator load_estimator(const std::string& path);

} // namespace mdiq
