#pragma once

#include "mdiq/dataset.hpp"
#include "mdiq/predictor.hpp"

// Shared fixtures for the unit suite. The estimator is trained once and
// reused by every test that needs one.

namespace mdiq::testing {

inline ProtocolParams fixed_params() {
    ProtocolParams p;
    p.mu_Za = p.mu_Zb = 0.4;
    p.nu_Za = p.nu_Zb = 0.05;
    p.mu_Xa = p.mu_Xb = 0.3;
    p.nu_Xa = p.nu_Xb = 0.05;
    p.P_Za_mu = p.P_Zb_mu = 0.35;
    p.P_Za_nu = p.P_Zb_nu = 0.1;
    p.P_Xa_mu = p.P_Xb_mu = 0.25;
    p.P_Xa_nu = p.P_Xb_nu = 0.1;
    return p;
}

inline const CalibDataset& shared_calib_dataset() {
    static const CalibDataset ds = [] {
        GenCalibConfig gc;
        gc.n = 800;
        gc.seed = 314;
        gc.params = fixed_params(); // skip the baseline optimization
        return gen_calib_dataset(gc);
    }();
    return ds;
}

inline const CalibEstimator& shared_estimator() {
    static const CalibEstimator est = [] {
        EstimatorTrainOptions opts;
        opts.hidden = {16, 16};
        opts.train.seed = 9;
        opts.train.epochs = 3000;
        opts.train.patience = 300;
        opts.train.learning_rate = 0.08;
        return train_calib_estimator(shared_calib_dataset(), opts);
    }();
    return est;
}

} // namespace mdiq::testing
