#include "mdiq/dataset.hpp"

#include "mdiq/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace mdiq {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& tok, std::size_t line, std::size_t col) {
    double v = 0;
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw ParseError("not a number: '" + tok + "'", line, col);
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// "key=value key=value ..." metadata comments
std::map<std::string, double> parse_kv_comment(const std::string& body,
                                               std::size_t line) {
    std::map<std::string, double> kv;
    std::istringstream is(body);
    std::string tok;
    std::size_t col = 0;
    while (is >> tok) {
        ++col;
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ParseError("metadata token without '='", line, col);
        kv[tok.substr(0, eq)] = parse_double(tok.substr(eq + 1), line, col);
    }
    return kv;
}

double kv_get(const std::map<std::string, double>& kv, const std::string& key,
              std::size_t line) {
    const auto it = kv.find(key);
    if (it == kv.end())
        throw ParseError("missing metadata key '" + key + "'", line, 0);
    return it->second;
}

const std::string kParamHeaderPrefix = "L_a,L_b,e_d,";
const std::string kCalibHeader = "delta_phi,e_d,e11_X,E_mu_Z,rate";

std::string param_header() {
    std::string h = kParamHeaderPrefix;
    for (const auto& name : param_field_names()) h += name + ",";
    return h + "rate,provenance";
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return lo + u * (hi - lo);
}

} // namespace

std::string to_string(Provenance p) {
    return p == Provenance::PsoAnchor ? "pso-anchor" : "lsa-warmstart";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "pso-anchor") return Provenance::PsoAnchor;
    if (s == "lsa-warmstart") return Provenance::LsaWarmstart;
    throw std::invalid_argument("unknown provenance '" + s + "'");
}

std::vector<GridNode> default_anchors(const ConditionGrid& grid) {
    const std::size_t ni = grid.L_a_values.size();
    const std::size_t nj = grid.L_b_values.size();
    const std::size_t nk = grid.e_d_values.size();
    std::vector<GridNode> anchors;
    for (std::size_t k = 0; k < nk; ++k) {
        auto add = [&](std::size_t i, std::size_t j) {
            GridNode n{i, j, k};
            if (std::find(anchors.begin(), anchors.end(), n) == anchors.end())
                anchors.push_back(n);
        };
        add(0, 0);
        add(0, nj - 1);
        add(ni - 1, 0);
        add(ni - 1, nj - 1);
        for (std::size_t d = 0; d < std::min(ni, nj); ++d) add(d, d);
    }
    return anchors;
}

ParamDataset gen_param_dataset(const GenParamConfig& config) {
    const ConditionGrid& grid = config.grid;
    const std::size_t ni = grid.L_a_values.size();
    const std::size_t nj = grid.L_b_values.size();
    const std::size_t nk = grid.e_d_values.size();
    if (ni == 0 || nj == 0 || nk == 0)
        throw std::invalid_argument("condition grid is empty");
    for (const auto* axis : {&grid.L_a_values, &grid.L_b_values, &grid.e_d_values})
        for (std::size_t t = 1; t < axis->size(); ++t)
            if (!((*axis)[t] > (*axis)[t - 1]))
                throw std::invalid_argument("grid axes must be strictly increasing");

    std::vector<GridNode> anchors =
        config.anchors.empty() ? default_anchors(grid) : config.anchors;
    for (const GridNode& a : anchors)
        if (a.i >= ni || a.j >= nj || a.k >= nk)
            throw std::invalid_argument("anchor outside grid");
    std::sort(anchors.begin(), anchors.end(), [](const GridNode& a, const GridNode& b) {
        return std::tie(a.i, a.j, a.k) < std::tie(b.i, b.j, b.k);
    });

    auto flat = [&](std::size_t i, std::size_t j, std::size_t k) {
        return (i * nj + j) * nk + k;
    };
    const std::size_t total = ni * nj * nk;
    std::vector<char> solved(total, 0);
    std::vector<ProtocolParams> solution(total);
    std::vector<double> rate(total, 0.0);
    std::vector<Provenance> prov(total, Provenance::LsaWarmstart);

    auto objective_at = [&](std::size_t i, std::size_t j, std::size_t k) {
        const UserConditions users{grid.L_a_values[i], grid.L_b_values[j],
                                   config.alpha};
        const MisalignmentState mis{grid.e_d_values[k], 0.0};
        const CharlieConditions charlie = config.charlie;
        const double n_sigma = config.n_sigma;
        return [=](const ProtocolParams& p) {
            return key_rate(p, charlie, users, mis, n_sigma);
        };
    };

    auto pso_solve = [&](std::size_t id, const ParamObjective& obj) {
        PsoConfig pso = config.pso;
        pso.seed = mix_seed(config.seed, id);
        OptResult r = pso_optimize(obj, pso);
        return lsa_optimize(obj, r.params, config.lsa);
    };

    std::deque<std::size_t> queue;
    for (const GridNode& a : anchors) {
        const std::size_t id = flat(a.i, a.j, a.k);
        if (solved[id]) continue;
        auto obj = objective_at(a.i, a.j, a.k);
        OptResult r = pso_solve(id, obj);
        solved[id] = 1;
        solution[id] = r.params;
        rate[id] = r.rate;
        prov[id] = Provenance::PsoAnchor;
        queue.push_back(id);
    }

    while (!queue.empty()) {
        const std::size_t id = queue.front();
        queue.pop_front();
        const std::size_t k = id % nk;
        const std::size_t j = (id / nk) % nj;
        const std::size_t i = id / (nk * nj);
        const long di[6] = {-1, 1, 0, 0, 0, 0};
        const long dj[6] = {0, 0, -1, 1, 0, 0};
        const long dk[6] = {0, 0, 0, 0, -1, 1};
        for (int t = 0; t < 6; ++t) {
            const long pi = long(i) + di[t], pj = long(j) + dj[t], pk = long(k) + dk[t];
            if (pi < 0 || pj < 0 || pk < 0 || pi >= long(ni) || pj >= long(nj) ||
                pk >= long(nk))
                continue;
            const std::size_t nid = flat(pi, pj, pk);
            if (solved[nid]) continue;
            auto obj = objective_at(pi, pj, pk);
            const ProtocolParams warm =
                repair_feasible(solution[id], config.lsa.bounds);
            OptResult r = lsa_optimize(obj, warm, config.lsa);
            solved[nid] = 1;
            if (!(r.rate > 0.0)) {
                // warm start stranded on the zero plateau; solve like an anchor
                r = pso_solve(nid, obj);
                prov[nid] = Provenance::PsoAnchor;
            }
            solution[nid] = r.params;
            rate[nid] = r.rate;
            queue.push_back(nid);
        }
    }

    for (std::size_t id = 0; id < total; ++id)
        if (!solved[id])
            throw std::invalid_argument(
                "lattice component with no anchor (grid node unreachable)");

    ParamDataset out;
    out.charlie = config.charlie;
    out.alpha = config.alpha;
    out.n_sigma = config.n_sigma;
    out.has_conditions = true;
    out.rows.reserve(total);
    for (std::size_t i = 0; i < ni; ++i)
        for (std::size_t j = 0; j < nj; ++j)
            for (std::size_t k = 0; k < nk; ++k) {
                const std::size_t id = flat(i, j, k);
                ParamDatasetRow row;
                row.L_a = grid.L_a_values[i];
                row.L_b = grid.L_b_values[j];
                row.e_d = grid.e_d_values[k];
                row.v_opt = solution[id];
                row.rate = rate[id];
                row.provenance = prov[id];
                out.rows.push_back(row);
            }
    return out;
}

CalibDataset gen_calib_dataset(const GenCalibConfig& config) {
    if (!(config.phi_lo >= 0.0 && config.phi_lo <= config.phi_hi &&
          config.phi_hi <= 3.14159265358979323846))
        throw std::domain_error("phi range must satisfy 0 <= lo <= hi <= pi");
    if (!(config.ed_lo >= 0.0 && config.ed_lo <= config.ed_hi &&
          config.ed_hi <= 0.5))
        throw std::domain_error("e_d range must satisfy 0 <= lo <= hi <= 0.5");

    CalibDataset out;
    out.charlie = config.charlie;
    out.users = config.users;
    out.n_sigma = config.n_sigma;
    out.has_conditions = true;

    if (config.params) {
        out.params = *config.params;
    } else {
        // parameters the pair would deploy before drift sets in
        const MisalignmentState baseline{config.ed_lo, 0.0};
        auto obj = [&](const ProtocolParams& p) {
            return key_rate(p, config.charlie, config.users, baseline,
                            config.n_sigma);
        };
        PsoConfig pso = config.pso;
        pso.seed = mix_seed(config.seed, 0xCA11B8A7ULL);
        OptResult r = pso_optimize(obj, pso);
        r = lsa_optimize(obj, r.params, config.lsa);
        out.params = r.params;
    }

    std::mt19937_64 rng(config.seed);
    out.rows.reserve(config.n);
    for (std::size_t t = 0; t < config.n; ++t) {
        CalibDatasetRow row;
        row.delta_phi = uniform_in(rng, config.phi_lo, config.phi_hi);
        row.e_d = uniform_in(rng, config.ed_lo, config.ed_hi);
        const ObservedStats s =
            observed_summary(out.params, config.charlie, config.users,
                             MisalignmentState{row.e_d, row.delta_phi},
                             config.n_sigma);
        row.e11_X = s.e11_X;
        row.E_mu_Z = s.E_mu_Z;
        row.rate = s.rate;
        out.rows.push_back(row);
    }
    return out;
}

namespace {

void open_for_write(std::ofstream& f, const std::string& path) {
    f.open(path, std::ios::binary); // LF line endings on every platform
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
}

void write_conditions_comment(std::ofstream& f, const CharlieConditions& c,
                              double n_sigma) {
    f << "# conditions dc=" << fmt(c.dc) << " eta_d=" << fmt(c.eta_d)
      << " f_ec=" << fmt(c.f_ec) << " N=" << fmt(c.N)
      << " n_sigma=" << fmt(n_sigma) << "\n";
}

} // namespace

void save_dataset(const ParamDataset& d, const std::string& path,
                  const std::string& provenance_line) {
    std::ofstream f;
    open_for_write(f, path);
    if (!provenance_line.empty()) f << "# " << provenance_line << "\n";
    if (d.has_conditions) {
        write_conditions_comment(f, d.charlie, d.n_sigma);
        f << "# users alpha=" << fmt(d.alpha) << "\n";
    }
    f << param_header() << "\n";
    for (const auto& row : d.rows) {
        f << fmt(row.L_a) << ',' << fmt(row.L_b) << ',' << fmt(row.e_d);
        for (double v : row.v_opt.to_array()) f << ',' << fmt(v);
        f << ',' << fmt(row.rate) << ',' << to_string(row.provenance) << "\n";
    }
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

void save_dataset(const CalibDataset& d, const std::string& path,
                  const std::string& provenance_line) {
    std::ofstream f;
    open_for_write(f, path);
    if (!provenance_line.empty()) f << "# " << provenance_line << "\n";
    if (d.has_conditions) {
        write_conditions_comment(f, d.charlie, d.n_sigma);
        f << "# users L_a=" << fmt(d.users.L_a) << " L_b=" << fmt(d.users.L_b)
          << " alpha=" << fmt(d.users.alpha) << "\n";
        f << "# params";
        for (double v : d.params.to_array()) f << ' ' << fmt(v);
        f << "\n";
    }
    f << kCalibHeader << "\n";
    for (const auto& row : d.rows) {
        f << fmt(row.delta_phi) << ',' << fmt(row.e_d) << ',' << fmt(row.e11_X)
          << ',' << fmt(row.E_mu_Z) << ',' << fmt(row.rate) << "\n";
    }
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

namespace {

struct RawFile {
    std::vector<std::string> comments; // '#' lines, stripped of "# "
    std::vector<std::size_t> comment_lines;
    std::string header;
    std::size_t header_line = 0;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

RawFile read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    RawFile out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::size_t start = line.size() > 1 && line[1] == ' ' ? 2 : 1;
            out.comments.push_back(line.substr(start));
            out.comment_lines.push_back(lineno);
            continue;
        }
        if (!have_header) {
            out.header = line;
            out.header_line = lineno;
            have_header = true;
            continue;
        }
        out.rows.emplace_back(lineno, split_csv(line));
    }
    if (!have_header) throw ParseError("missing header row", lineno + 1, 1);
    return out;
}

} // namespace

ParamDataset load_param_dataset(const std::string& path, bool validate_rows) {
    RawFile raw = read_csv(path);
    if (raw.header != param_header())
        throw ParseError("unexpected header for a parameter dataset",
                         raw.header_line, 1);

    ParamDataset out;
    for (std::size_t ci = 0; ci < raw.comments.size(); ++ci) {
        const std::string& c = raw.comments[ci];
        const std::size_t ln = raw.comment_lines[ci];
        if (c.rfind("conditions ", 0) == 0) {
            const auto kv = parse_kv_comment(c.substr(11), ln);
            out.charlie.dc = kv_get(kv, "dc", ln);
            out.charlie.eta_d = kv_get(kv, "eta_d", ln);
            out.charlie.f_ec = kv_get(kv, "f_ec", ln);
            out.charlie.N = kv_get(kv, "N", ln);
            out.n_sigma = kv_get(kv, "n_sigma", ln);
            out.has_conditions = true;
        } else if (c.rfind("users ", 0) == 0) {
            const auto kv = parse_kv_comment(c.substr(6), ln);
            out.alpha = kv_get(kv, "alpha", ln);
        }
    }

    for (const auto& [lineno, fields] : raw.rows) {
        if (fields.size() != 21)
            throw ParseError("expected 21 fields, got " +
                                 std::to_string(fields.size()),
                             lineno, fields.size());
        ParamDatasetRow row;
        row.L_a = parse_double(fields[0], lineno, 1);
        row.L_b = parse_double(fields[1], lineno, 2);
        row.e_d = parse_double(fields[2], lineno, 3);
        std::array<double, 16> v;
        for (std::size_t i = 0; i < 16; ++i)
            v[i] = parse_double(fields[3 + i], lineno, 4 + i);
        row.v_opt = ProtocolParams::from_array(v);
        row.rate = parse_double(fields[19], lineno, 20);
        try {
            row.provenance = provenance_from_string(fields[20]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), lineno, 21);
        }
        if (validate_rows && out.has_conditions) {
            const double r = key_rate(row.v_opt, out.charlie,
                                      {row.L_a, row.L_b, out.alpha},
                                      {row.e_d, 0.0}, out.n_sigma);
            if (std::abs(r - row.rate) > 1e-12)
                throw ParseError("row fails rate consistency check", lineno, 20);
        }
        out.rows.push_back(row);
    }
    return out;
}

CalibDataset load_calib_dataset(const std::string& path, bool validate_rows) {
    RawFile raw = read_csv(path);
    if (raw.header != kCalibHeader)
        throw ParseError("unexpected header for a calibration dataset",
                         raw.header_line, 1);

    CalibDataset out;
    bool have_users = false, have_params = false;
    for (std::size_t ci = 0; ci < raw.comments.size(); ++ci) {
        const std::string& c = raw.comments[ci];
        const std::size_t ln = raw.comment_lines[ci];
        if (c.rfind("conditions ", 0) == 0) {
            const auto kv = parse_kv_comment(c.substr(11), ln);
            out.charlie.dc = kv_get(kv, "dc", ln);
            out.charlie.eta_d = kv_get(kv, "eta_d", ln);
            out.charlie.f_ec = kv_get(kv, "f_ec", ln);
            out.charlie.N = kv_get(kv, "N", ln);
            out.n_sigma = kv_get(kv, "n_sigma", ln);
        } else if (c.rfind("users ", 0) == 0) {
            const auto kv = parse_kv_comment(c.substr(6), ln);
            out.users.L_a = kv_get(kv, "L_a", ln);
            out.users.L_b = kv_get(kv, "L_b", ln);
            out.users.alpha = kv_get(kv, "alpha", ln);
            have_users = true;
        } else if (c.rfind("params ", 0) == 0) {
            std::istringstream is(c.substr(7));
            std::array<double, 16> v;
            std::string tok;
            for (std::size_t i = 0; i < 16; ++i) {
                if (!(is >> tok))
                    throw ParseError("params metadata needs 16 values", ln, i + 1);
                v[i] = parse_double(tok, ln, i + 1);
            }
            out.params = ProtocolParams::from_array(v);
            have_params = true;
        }
    }
    out.has_conditions = have_users && have_params;

    for (const auto& [lineno, fields] : raw.rows) {
        if (fields.size() != 5)
            throw ParseError("expected 5 fields, got " +
                                 std::to_string(fields.size()),
                             lineno, fields.size());
        CalibDatasetRow row;
        row.delta_phi = parse_double(fields[0], lineno, 1);
        row.e_d = parse_double(fields[1], lineno, 2);
        row.e11_X = parse_double(fields[2], lineno, 3);
        row.E_mu_Z = parse_double(fields[3], lineno, 4);
        row.rate = parse_double(fields[4], lineno, 5);
        if (validate_rows && out.has_conditions) {
            const ObservedStats s = observed_summary(
                out.params, out.charlie, out.users,
                MisalignmentState{row.e_d, row.delta_phi}, out.n_sigma);
            if (std::abs(s.e11_X - row.e11_X) > 1e-12 ||
                std::abs(s.E_mu_Z - row.E_mu_Z) > 1e-12 ||
                std::abs(s.rate - row.rate) > 1e-12)
                throw ParseError("row fails observable consistency check",
                                 lineno, 3);
        }
        out.rows.push_back(row);
    }
    return out;
}

double Normalizer::apply_one(std::size_t col, double v, Direction dir) const {
    const ColumnTransform& c = cols.at(col);
    if (dir == Direction::Normalize) {
        double x = v;
        if (c.log10) {
            if (!(v > 0.0))
                throw std::domain_error("log column requires positive values");
            x = std::log10(v);
        }
        return (x - c.shift) / c.scale;
    }
    double x = v * c.scale + c.shift;
    return c.log10 ? std::pow(10.0, x) : x;
}

void Normalizer::apply(std::vector<std::vector<double>>& rows,
                       Direction dir) const {
    for (auto& row : rows) {
        if (row.size() != cols.size())
            throw std::invalid_argument("row width does not match normalizer");
        for (std::size_t c = 0; c < row.size(); ++c)
            row[c] = apply_one(c, row[c], dir);
    }
}

Normalizer Normalizer::fit(const std::vector<std::vector<double>>& rows,
                           const std::vector<bool>& log_cols) {
    if (rows.empty()) throw std::invalid_argument("cannot fit on empty data");
    const std::size_t n_cols = rows[0].size();
    Normalizer n;
    n.cols.resize(n_cols);
    for (std::size_t c = 0; c < n_cols; ++c) {
        n.cols[c].log10 = c < log_cols.size() && log_cols[c];
        double lo = 0, hi = 0, sum = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double v = rows[r].at(c);
            if (n.cols[c].log10) {
                if (!(v > 0.0))
                    throw std::domain_error("log column requires positive values");
                v = std::log10(v);
            }
            if (r == 0) lo = hi = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        if (hi > lo) {
            n.cols[c].shift = lo;
            n.cols[c].scale = hi - lo;
        } else {
            n.cols[c].shift = sum / double(rows.size());
            n.cols[c].scale = 1.0;
        }
    }
    return n;
}

Normalizer Normalizer::identity(std::size_t n_cols) {
    Normalizer n;
    n.cols.resize(n_cols);
    return n;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
        throw std::domain_error("test_fraction must be in [0, 1]");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng() % i]);
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(test_fraction * double(n)));
    std::vector<std::size_t> test(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> train(idx.begin() + n_test, idx.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    return {train, test};
}

} // namespace mdiq
