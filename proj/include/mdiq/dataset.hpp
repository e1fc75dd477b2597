#pragma once

#include "mdiq/optimize.hpp"
#include "mdiq/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// The two training corpora and their persistence: (user conditions ->
// optimized parameters) rows produced by anchored PSO plus warm-started
// LSA over a condition lattice, and (drift truth -> observed statistics)
// rows for the calibration estimator. Files are comma-separated text with
// a fixed header; '#' lines before the header carry provenance and the
// generating conditions so rows can be re-validated on load.

namespace mdiq {

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : std::runtime_error(what + " (line " + std::to_string(line) +
                             ", column " + std::to_string(column) + ")"),
          line(line), column(column) {}
    std::size_t line, column;
};

enum class Provenance { PsoAnchor, LsaWarmstart };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct ParamDatasetRow {
    double L_a = 0, L_b = 0, e_d = 0;
    ProtocolParams v_opt;
    double rate = 0;
    Provenance provenance = Provenance::LsaWarmstart;
};

struct ParamDataset {
    std::vector<ParamDatasetRow> rows;
    // generating conditions, kept for row re-validation
    CharlieConditions charlie;
    double alpha = 0.2;
    double n_sigma = 0;
    bool has_conditions = false;
};

struct CalibDatasetRow {
    double delta_phi = 0, e_d = 0; // truth
    double e11_X = 0, E_mu_Z = 0, rate = 0;
};

struct CalibDataset {
    std::vector<CalibDatasetRow> rows;
    CharlieConditions charlie;
    UserConditions users;
    ProtocolParams params; // fixed protocol parameters behind the statistics
    double n_sigma = 0;
    bool has_conditions = false;
};

// Condition lattice: cartesian product of the three axes. Axis values must
// be strictly increasing.
struct ConditionGrid {
    std::vector<double> L_a_values, L_b_values, e_d_values;
    std::size_t size() const {
        return L_a_values.size() * L_b_values.size() * e_d_values.size();
    }
};

struct GridNode {
    std::size_t i = 0, j = 0, k = 0; // indices into L_a, L_b, e_d axes
    bool operator==(const GridNode&) const = default;
};

// Corners plus the L_a = L_b diagonal of every e_d slice.
std::vector<GridNode> default_anchors(const ConditionGrid& grid);

struct GenParamConfig {
    ConditionGrid grid;
    std::vector<GridNode> anchors; // empty -> default_anchors(grid)
    CharlieConditions charlie;
    double alpha = 0.2;
    double n_sigma = 0;
    std::uint64_t seed = 1;
    PsoConfig pso; // anchor search; per-node seed derived from `seed`
    LsaConfig lsa; // warm-started solves and anchor polish
};

// PSO at every anchor, then breadth-first propagation over the lattice
// with LSA warm-started from the already-solved neighbor. Deterministic
// given the seed. Throws std::invalid_argument when a lattice component
// contains no anchor.
ParamDataset gen_param_dataset(const GenParamConfig& config);

struct GenCalibConfig {
    std::size_t n = 1000;
    double phi_lo = 0.0, phi_hi = 0.5;   // radians
    double ed_lo = 0.002, ed_hi = 0.02;
    CharlieConditions charlie;
    UserConditions users{10.0, 20.0, 0.2};
    double n_sigma = 0;
    std::uint64_t seed = 1;
    // protocol parameters; when unset they are optimized at the drift-free
    // baseline (delta_phi = 0, e_d = ed_lo) first
    std::optional<ProtocolParams> params;
    PsoConfig pso;
    LsaConfig lsa;
};

CalibDataset gen_calib_dataset(const GenCalibConfig& config);

// provenance_line, when non-empty, is written verbatim as the first '#'
// comment (the CLI puts its command/seed/config-hash line there).
void save_dataset(const ParamDataset& d, const std::string& path,
                  const std::string& provenance_line = "");
void save_dataset(const CalibDataset& d, const std::string& path,
                  const std::string& provenance_line = "");

// validate_rows re-checks each row's consistency invariant (rate and
// observables recomputable from the stored conditions) when the file
// carries generating-condition metadata.
ParamDataset load_param_dataset(const std::string& path,
                                bool validate_rows = true);
CalibDataset load_calib_dataset(const std::string& path,
                                bool validate_rows = true);

// Per-column affine transform with an optional log10 pre-transform.
struct ColumnTransform {
    double shift = 0;
    double scale = 1;
    bool log10 = false;
};

enum class Direction { Normalize, Denormalize };

struct Normalizer {
    std::vector<ColumnTransform> cols;

    double apply_one(std::size_t col, double v, Direction dir) const;
    void apply(std::vector<std::vector<double>>& rows, Direction dir) const;

    // Maps each column's observed range onto [0, 1]; constant columns map
    // to zero (scale 1, shift = value). log_cols marks columns transformed
    // by log10 first (all values must be positive).
    static Normalizer fit(const std::vector<std::vector<double>>& rows,
                          const std::vector<bool>& log_cols = {});
    static Normalizer identity(std::size_t n_cols);
};

// Seeded disjoint and exhaustive index split; second element holds the
// test indices (round(n * test_fraction) of them).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

} // namespace mdiq
