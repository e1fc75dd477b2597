#include "mdiq/mlp.hpp"

#include "mdiq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace mdiq {

std::string to_string(Activation a) {
    return a == Activation::Sigmoid ? "sigmoid" : "tanh";
}

Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    throw ModelLoadError("hidden activation '" + s + "'");
}

MlpModel MlpModel::make(const std::vector<std::size_t>& sizes,
                        std::uint64_t seed, Activation hidden) {
    if (sizes.size() < 2)
        throw std::invalid_argument("network needs at least input and output layers");
    for (std::size_t s : sizes)
        if (s == 0) throw std::invalid_argument("layer sizes must be positive");

    MlpModel m;
    m.layer_sizes = sizes;
    m.hidden_activation = hidden;
    m.input_norm = Normalizer::identity(sizes.front());
    m.output_norm = Normalizer::identity(sizes.back());

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t rows = sizes[l + 1], cols = sizes[l];
        const double limit = std::sqrt(6.0 / double(rows + cols));
        std::vector<double> w(rows * cols);
        for (double& v : w) v = (2.0 * u01(rng) - 1.0) * limit;
        m.weights.push_back(std::move(w));
        m.thresholds.emplace_back(rows, 0.0);
    }
    return m;
}

namespace {

void check_shapes(const MlpModel& m) {
    const std::size_t n_layers = m.layer_sizes.size();
    if (m.weights.size() != n_layers - 1 || m.thresholds.size() != n_layers - 1)
        throw std::invalid_argument("model weight/threshold layer count mismatch");
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        if (m.weights[l].size() != m.layer_sizes[l + 1] * m.layer_sizes[l] ||
            m.thresholds[l].size() != m.layer_sizes[l + 1])
            throw std::invalid_argument("model layer shape mismatch");
    }
}

void activate(Activation a, const double* z, double* out, std::size_t n) {
    const auto& k = kernels::active();
    if (a == Activation::Sigmoid) {
        k.sigmoid_v(z, out, n);
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(z[i]);
    }
}

// derivative from the activation value
inline double activation_prime(Activation a, double s) {
    return a == Activation::Sigmoid ? s * (1.0 - s) : 1.0 - s * s;
}

// Per-sample forward caching every layer's activation (post-f) with the
// raw input in slot 0.
void forward_cached(const MlpModel& m, const std::vector<double>& x,
                    std::vector<std::vector<double>>& acts) {
    const auto& k = kernels::active();
    const std::size_t n_layers = m.layer_sizes.size();
    acts.resize(n_layers);
    acts[0] = x;
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const std::size_t rows = m.layer_sizes[l + 1];
        const std::size_t cols = m.layer_sizes[l];
        auto& out = acts[l + 1];
        out.resize(rows);
        kernels::matvec(k, m.weights[l].data(), rows, cols, acts[l].data(),
                        out.data());
        for (std::size_t i = 0; i < rows; ++i) out[i] -= m.thresholds[l][i];
        if (l + 2 < n_layers) // output layer stays linear
            activate(m.hidden_activation, out.data(), out.data(), rows);
    }
}

} // namespace

std::vector<double> forward(const MlpModel& m, const std::vector<double>& x) {
    check_shapes(m);
    if (x.size() != m.input_size())
        throw std::invalid_argument("input size mismatch");
    std::vector<std::vector<double>> acts;
    forward_cached(m, x, acts);
    return acts.back();
}

std::vector<double> evaluate(const MlpModel& m, const std::vector<double>& x) {
    if (x.size() != m.input_size())
        throw std::invalid_argument("input size mismatch");
    std::vector<double> xn(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        xn[i] = m.input_norm.apply_one(i, x[i], Direction::Normalize);
    std::vector<double> y = forward(m, xn);
    for (std::size_t i = 0; i < y.size(); ++i)
        y[i] = m.output_norm.apply_one(i, y[i], Direction::Denormalize);
    return y;
}

namespace {

void check_training_set(const MlpModel& m, const TrainingSet& data) {
    if (data.inputs.empty())
        throw std::invalid_argument("training set is empty");
    if (data.inputs.size() != data.targets.size())
        throw std::invalid_argument("inputs/targets count mismatch");
    for (std::size_t i = 0; i < data.inputs.size(); ++i)
        if (data.inputs[i].size() != m.input_size() ||
            data.targets[i].size() != m.output_size())
            throw std::invalid_argument("sample size mismatch at index " +
                                        std::to_string(i));
}

struct BackpropWorkspace {
    std::vector<std::vector<double>> acts;
    std::vector<double> delta, delta_prev;
};

// Accumulates one sample's gradient contribution, scaled by `scale`
// (= 2 / (batch * out_dim) for the MSE mean).
void accumulate_sample(const MlpModel& m, const std::vector<double>& x,
                       const std::vector<double>& t, double scale,
                       Gradients& g, BackpropWorkspace& ws) {
    const auto& k = kernels::active();
    forward_cached(m, x, ws.acts);
    const std::size_t n_layers = m.layer_sizes.size();

    ws.delta.resize(m.output_size());
    for (std::size_t i = 0; i < ws.delta.size(); ++i)
        ws.delta[i] = scale * (ws.acts.back()[i] - t[i]);

    for (std::size_t l = n_layers - 1; l-- > 0;) {
        const std::size_t rows = m.layer_sizes[l + 1];
        const std::size_t cols = m.layer_sizes[l];
        kernels::ger(k, g.weights[l].data(), rows, cols, 1.0, ws.delta.data(),
                     ws.acts[l].data());
        k.axpy(-1.0, ws.delta.data(), g.thresholds[l].data(), rows);
        if (l == 0) break;
        ws.delta_prev.assign(cols, 0.0);
        kernels::matvec_t_acc(k, m.weights[l].data(), rows, cols,
                              ws.delta.data(), ws.delta_prev.data());
        for (std::size_t i = 0; i < cols; ++i)
            ws.delta_prev[i] *=
                activation_prime(m.hidden_activation, ws.acts[l][i]);
        std::swap(ws.delta, ws.delta_prev);
    }
}

Gradients zero_gradients(const MlpModel& m) {
    Gradients g;
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        g.weights.emplace_back(m.weights[l].size(), 0.0);
        g.thresholds.emplace_back(m.thresholds[l].size(), 0.0);
    }
    return g;
}

} // namespace

double mse_loss(const MlpModel& m, const TrainingSet& data,
                const std::vector<std::size_t>* subset) {
    check_shapes(m);
    check_training_set(m, data);
    const std::size_t n = subset ? subset->size() : data.size();
    if (n == 0) throw std::invalid_argument("empty loss subset");
    double acc = 0.0;
    std::vector<std::vector<double>> acts;
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = subset ? (*subset)[s] : s;
        forward_cached(m, data.inputs[idx], acts);
        const auto& y = acts.back();
        const auto& t = data.targets[idx];
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - t[i];
            acc += d * d;
        }
    }
    return acc / (double(n) * double(m.output_size()));
}

Gradients backprop_gradients(const MlpModel& m, const TrainingSet& data,
                             const std::vector<std::size_t>* subset) {
    check_shapes(m);
    check_training_set(m, data);
    const std::size_t n = subset ? subset->size() : data.size();
    if (n == 0) throw std::invalid_argument("empty gradient subset");
    Gradients g = zero_gradients(m);
    BackpropWorkspace ws;
    const double scale = 2.0 / (double(n) * double(m.output_size()));
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t idx = subset ? (*subset)[s] : s;
        accumulate_sample(m, data.inputs[idx], data.targets[idx], scale, g, ws);
    }
    return g;
}

TrainResult train(MlpModel& m, const TrainingSet& data, const TrainConfig& cfg) {
    check_shapes(m);
    check_training_set(m, data);
    if (!(cfg.learning_rate > 0.0)) throw std::domain_error("learning_rate must be > 0");
    if (cfg.epochs < 1) throw std::domain_error("epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::domain_error("batch_size must be >= 1");
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction <= 0.5))
        throw std::domain_error("validation_fraction must be in [0, 0.5]");

    auto [train_idx, val_idx] =
        split_indices(data.size(), cfg.validation_fraction,
                      cfg.seed ^ 0x5A17D4B2F00DULL);
    if (train_idx.empty()) {
        train_idx = std::move(val_idx); // tiny dataset: train on everything
        val_idx.clear();
    }

    Gradients vel = zero_gradients(m);
    Gradients grad = zero_gradients(m);
    BackpropWorkspace ws;
    std::mt19937_64 rng(cfg.seed);

    TrainResult res;
    double best_val = std::numeric_limits<double>::infinity();
    Gradients best_w; // best-by-validation weight snapshot
    std::size_t stale = 0;

    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);

        double epoch_sq = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size, ++batch_index) {
            const std::size_t count =
                std::min(cfg.batch_size, order.size() - start);
            for (auto& gl : grad.weights) std::fill(gl.begin(), gl.end(), 0.0);
            for (auto& gl : grad.thresholds) std::fill(gl.begin(), gl.end(), 0.0);
            const double scale = 2.0 / (double(count) * double(m.output_size()));
            double batch_sq = 0.0;
            for (std::size_t s = 0; s < count; ++s) {
                const std::size_t idx = order[start + s];
                accumulate_sample(m, data.inputs[idx], data.targets[idx], scale,
                                  grad, ws);
                const auto& y = ws.acts.back();
                const auto& t = data.targets[idx];
                for (std::size_t i = 0; i < y.size(); ++i) {
                    const double d = y[i] - t[i];
                    batch_sq += d * d;
                }
            }
            if (!std::isfinite(batch_sq))
                throw TrainingDiverged(epoch, batch_index);
            epoch_sq += batch_sq;

            const auto& k = kernels::active();
            for (std::size_t l = 0; l < m.weights.size(); ++l) {
                for (double& v : vel.weights[l]) v *= cfg.momentum;
                k.axpy(-cfg.learning_rate, grad.weights[l].data(),
                       vel.weights[l].data(), vel.weights[l].size());
                k.axpy(1.0, vel.weights[l].data(), m.weights[l].data(),
                       m.weights[l].size());
                for (double& v : vel.thresholds[l]) v *= cfg.momentum;
                k.axpy(-cfg.learning_rate, grad.thresholds[l].data(),
                       vel.thresholds[l].data(), vel.thresholds[l].size());
                k.axpy(1.0, vel.thresholds[l].data(), m.thresholds[l].data(),
                       m.thresholds[l].size());
            }
        }
        res.loss_history.push_back(
            epoch_sq / (double(order.size()) * double(m.output_size())));
        ++res.epochs_run;

        if (!val_idx.empty()) {
            const double val = mse_loss(m, data, &val_idx);
            if (val < best_val) {
                best_val = val;
                best_w.weights = m.weights;
                best_w.thresholds = m.thresholds;
                stale = 0;
            } else if (++stale > cfg.patience && cfg.patience > 0) {
                break;
            }
        }
    }

    if (!val_idx.empty() && !best_w.weights.empty()) {
        m.weights = best_w.weights;
        m.thresholds = best_w.thresholds;
        res.best_validation_loss = best_val;
    }
    return res;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_normalizer(std::ostream& os, const std::string& tag,
                      const Normalizer& n) {
    os << tag << ' ' << n.cols.size() << "\n";
    for (const auto& c : n.cols)
        os << fmt(c.shift) << ' ' << fmt(c.scale) << ' ' << (c.log10 ? 1 : 0)
           << "\n";
}

std::string read_token(std::istream& is, const std::string& field) {
    std::string tok;
    if (!(is >> tok)) throw ModelLoadError(field);
    return tok;
}

double read_double(std::istream& is, const std::string& field) {
    double v;
    if (!(is >> v)) throw ModelLoadError(field);
    return v;
}

std::size_t read_size(std::istream& is, const std::string& field) {
    long long v;
    if (!(is >> v) || v < 0) throw ModelLoadError(field);
    return static_cast<std::size_t>(v);
}

void expect(std::istream& is, const std::string& literal) {
    if (read_token(is, literal) != literal) throw ModelLoadError(literal);
}

Normalizer read_normalizer(std::istream& is, const std::string& tag) {
    expect(is, tag);
    const std::size_t n = read_size(is, tag + " column count");
    Normalizer norm;
    norm.cols.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        norm.cols[i].shift = read_double(is, tag + " shift");
        norm.cols[i].scale = read_double(is, tag + " scale");
        norm.cols[i].log10 = read_size(is, tag + " log flag") != 0;
        if (!(norm.cols[i].scale > 0)) throw ModelLoadError(tag + " scale");
    }
    return norm;
}

} // namespace

void save_model(const MlpModel& m, std::ostream& os) {
    check_shapes(m);
    os << "mdiq-mlp v1\n";
    os << "layers " << m.layer_sizes.size();
    for (std::size_t s : m.layer_sizes) os << ' ' << s;
    os << "\n";
    os << "hidden " << to_string(m.hidden_activation) << "\n";
    write_normalizer(os, "input_norm", m.input_norm);
    write_normalizer(os, "output_norm", m.output_norm);
    for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
        const std::size_t rows = m.layer_sizes[l + 1];
        const std::size_t cols = m.layer_sizes[l];
        os << "layer " << l << ' ' << rows << ' ' << cols << "\n";
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (c) os << ' ';
                os << fmt(m.weights[l][r * cols + c]);
            }
            os << "\n";
        }
        os << "theta";
        for (std::size_t r = 0; r < rows; ++r)
            os << ' ' << fmt(m.thresholds[l][r]);
        os << "\n";
    }
    os << "end\n";
}

void save_model(const MlpModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    save_model(m, f);
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

MlpModel load_model(std::istream& is) {
    expect(is, "mdiq-mlp");
    const std::string version = read_token(is, "format version");
    if (version != "v1") throw ModelLoadError("format version '" + version + "'");

    MlpModel m;
    expect(is, "layers");
    const std::size_t n_layers = read_size(is, "layer count");
    if (n_layers < 2) throw ModelLoadError("layer count");
    m.layer_sizes.resize(n_layers);
    for (auto& s : m.layer_sizes) {
        s = read_size(is, "layer size");
        if (s == 0) throw ModelLoadError("layer size");
    }
    expect(is, "hidden");
    m.hidden_activation =
        activation_from_string(read_token(is, "hidden activation"));
    m.input_norm = read_normalizer(is, "input_norm");
    m.output_norm = read_normalizer(is, "output_norm");
    if (m.input_norm.cols.size() != m.layer_sizes.front())
        throw ModelLoadError("input_norm width");
    if (m.output_norm.cols.size() != m.layer_sizes.back())
        throw ModelLoadError("output_norm width");

    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        expect(is, "layer");
        if (read_size(is, "layer index") != l) throw ModelLoadError("layer index");
        const std::size_t rows = read_size(is, "layer rows");
        const std::size_t cols = read_size(is, "layer cols");
        if (rows != m.layer_sizes[l + 1] || cols != m.layer_sizes[l])
            throw ModelLoadError("layer shape");
        std::vector<double> w(rows * cols);
        for (auto& v : w) {
            v = read_double(is, "weight");
            if (!std::isfinite(v)) throw ModelLoadError("weight (non-finite)");
        }
        m.weights.push_back(std::move(w));
        expect(is, "theta");
        std::vector<double> th(rows);
        for (auto& v : th) {
            v = read_double(is, "theta");
            if (!std::isfinite(v)) throw ModelLoadError("theta (non-finite)");
        }
        m.thresholds.push_back(std::move(th));
    }
    expect(is, "end");
    return m;
}

MlpModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return load_model(f);
}

} // namespace mdiq
