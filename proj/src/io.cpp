#include "radiomap/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace radiomap::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    return in;
}

// Round-trip precision for the duration of one write; restores the caller's setting.
class FullPrecision {
public:
    explicit FullPrecision(std::ostream& out) : out_(out), saved_(out.precision(17)) {}
    ~FullPrecision() { out_.precision(saved_); }
    FullPrecision(const FullPrecision&) = delete;
    FullPrecision& operator=(const FullPrecision&) = delete;

private:
    std::ostream& out_;
    std::streamsize saved_;
};

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

// Next non-blank, non-comment line; false at EOF.
bool next_line(std::istream& in, std::string& line, long& lineno) {
    while (std::getline(in, line)) {
        ++lineno;
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        return true;
    }
    return false;
}

Dims parse_header(std::istream& in, long& lineno) {
    std::string line;
    if (!next_line(in, line, lineno)) throw ParseError("missing 'I J K' header", lineno);
    std::istringstream ss(line);
    long long I = 0, J = 0, K = 0;
    std::string extra;
    if (!(ss >> I >> J >> K) || (ss >> extra)) throw ParseError("header must be 'I J K'", lineno);
    if (I <= 0 || J <= 0 || K <= 0) throw ParseError("dimensions must be positive", lineno);
    return Dims{I, J, K};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
    if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
    }
}

void check_schema(const json& j, const char* what) {
    if (j.contains("schema") && j.at("schema").get<int>() != kSchemaVersion)
        throw ValidationError(std::string(what) + ": unsupported schema version");
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void get_pair(const json& j, const char* key, std::pair<double, double>& out) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw ValidationError(std::string(key) + ": expected [lo, hi]");
    out = {v[0], v[1]};
}

IndexSet index_set(const json& j, const char* key) {
    if (!j.contains(key)) throw ValidationError(std::string("plan: missing '") + key + "'");
    auto v = j.at(key).get<std::vector<Index>>();
    std::sort(v.begin(), v.end());
    if (std::adjacent_find(v.begin(), v.end()) != v.end())
        throw ValidationError(std::string("plan: duplicate index in '") + key + "'");
    return v;
}

const std::map<std::string, SlfModel> kSlfModels{
    {"pathloss", SlfModel::PathLoss}, {"flat", SlfModel::Flat}, {"random-ll1", SlfModel::RandomLl1}};
const std::map<std::string, InitMode> kInitModes{
    {"random", InitMode::Random}, {"given", InitMode::Given}, {"truth-perturbed", InitMode::TruthPerturbed}, {"spa", InitMode::Spa}};

template <class E>
E lookup(const std::map<std::string, E>& table, const std::string& name, const char* what) {
    const auto it = table.find(name);
    if (it == table.end()) throw ValidationError(std::string(what) + ": unknown value '" + name + "'");
    return it->second;
}

template <class E>
std::string reverse_lookup(const std::map<std::string, E>& table, E value) {
    for (const auto& [k, v] : table)
        if (v == value) return k;
    return {};
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor3 read_tensor(std::istream& in) {
    long lineno = 0;
    const Dims d = parse_header(in, lineno);
    Tensor3 t(d);
    std::string line;
    for (Index k = 0; k < d.K; ++k)
        for (Index i = 0; i < d.I; ++i) {
            if (!next_line(in, line, lineno)) throw ParseError("unexpected end of tensor data", lineno);
            std::istringstream ss(line);
            for (Index j = 0; j < d.J; ++j) {
                double v = 0.0;
                if (!(ss >> v)) throw ParseError("expected " + std::to_string(d.J) + " values", lineno);
                if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
                t(i, j, k) = v;
            }
            std::string extra;
            if (ss >> extra) throw ParseError("too many values on row", lineno);
        }
    if (next_line(in, line, lineno)) throw ParseError("trailing data after tensor", lineno);
    return t;
}

Tensor3 read_tensor(const fs::path& path) {
    auto in = open_in(path);
    return read_tensor(in);
}

void write_tensor(std::ostream& out, const Tensor3& t) {
    FullPrecision guard(out);
    const Dims d = t.dims();
    out << d.I << ' ' << d.J << ' ' << d.K << '\n';
    for (Index k = 0; k < d.K; ++k)
        for (Index i = 0; i < d.I; ++i) {
            for (Index j = 0; j < d.J; ++j) out << (j ? " " : "") << t(i, j, k);
            out << '\n';
        }
}

void write_tensor(const fs::path& path, const Tensor3& t) {
    auto out = open_out(path);
    write_tensor(out, t);
}

Matrix read_matrix_csv(std::istream& in, bool header) {
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    bool skipped = !header;
    while (next_line(in, line, lineno)) {
        if (!skipped) {
            skipped = true;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ParseError("bad CSV value '" + cell + "'", lineno);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged CSV row", lineno);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

Matrix read_matrix_csv(const fs::path& path, bool header) {
    auto in = open_in(path);
    return read_matrix_csv(in, header);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
    FullPrecision guard(out);
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << '\n';
    }
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
    auto out = open_out(path);
    write_matrix_csv(out, m);
}

std::string read_text(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
}

// ---------------------------------------------------------------------------

ScenarioConfig parse_scenario_config(const std::string& json_text) {
    const json j = parse_json(json_text, "scenario");
    check_keys(j,
               {"schema", "I", "J", "K", "R", "sigma", "xc", "gen_resolution", "shadow_mode", "eta_range", "psd",
                "min_clearance", "seed", "slf_model", "ll1_rank"},
               "scenario");
    check_schema(j, "scenario");
    ScenarioConfig c;
    get_if(j, "I", c.I);
    get_if(j, "J", c.J);
    get_if(j, "K", c.K);
    get_if(j, "R", c.R);
    get_if(j, "sigma", c.shadow.sigma);
    get_if(j, "xc", c.shadow.xc);
    get_if(j, "gen_resolution", c.shadow.gen_resolution);
    if (j.contains("shadow_mode")) {
        const auto m = j.at("shadow_mode").get<std::string>();
        if (m == "coarse") c.shadow.mode = ShadowMode::Coarse;
        else if (m == "exact") c.shadow.mode = ShadowMode::Exact;
        else throw ValidationError("scenario: shadow_mode must be 'coarse' or 'exact'");
    }
    get_pair(j, "eta_range", c.eta_range);
    if (j.contains("psd")) {
        const json& p = j.at("psd");
        check_keys(p, {"components", "activation_probability", "amplitude", "width"}, "scenario.psd");
        get_if(p, "components", c.psd.components);
        get_if(p, "activation_probability", c.psd.activation_probability);
        get_pair(p, "amplitude", c.psd.amplitude);
        get_pair(p, "width", c.psd.width);
    }
    get_if(j, "min_clearance", c.min_clearance);
    get_if(j, "seed", c.seed);
    if (j.contains("slf_model")) c.slf_model = lookup(kSlfModels, j.at("slf_model").get<std::string>(), "slf_model");
    get_if(j, "ll1_rank", c.ll1_rank);
    c.validate();
    return c;
}

std::string dump_scenario_config(const ScenarioConfig& c) {
    json j{{"schema", kSchemaVersion},
           {"I", c.I},
           {"J", c.J},
           {"K", c.K},
           {"R", c.R},
           {"sigma", c.shadow.sigma},
           {"xc", c.shadow.xc},
           {"gen_resolution", c.shadow.gen_resolution},
           {"shadow_mode", c.shadow.mode == ShadowMode::Exact ? "exact" : "coarse"},
           {"eta_range", {c.eta_range.first, c.eta_range.second}},
           {"psd",
            {{"components", c.psd.components},
             {"activation_probability", c.psd.activation_probability},
             {"amplitude", {c.psd.amplitude.first, c.psd.amplitude.second}},
             {"width", {c.psd.width.first, c.psd.width.second}}}},
           {"min_clearance", c.min_clearance},
           {"seed", c.seed},
           {"slf_model", reverse_lookup(kSlfModels, c.slf_model)},
           {"ll1_rank", c.ll1_rank}};
    return j.dump(2) + "\n";
}

SlabPlan parse_slab_plan(const std::string& json_text) {
    const json j = parse_json(json_text, "slab plan");
    check_keys(j, {"schema", "s1", "s2", "s3", "s4"}, "slab plan");
    check_schema(j, "slab plan");
    return SlabPlan{index_set(j, "s1"), index_set(j, "s2"), index_set(j, "s3"), index_set(j, "s4")};
}

std::string dump_slab_plan(const SlabPlan& p) {
    json j{{"schema", kSchemaVersion}, {"s1", p.s1}, {"s2", p.s2}, {"s3", p.s3}, {"s4", p.s4}};
    return j.dump() + "\n";
}

FiberGroupPlan parse_group_plan(const std::string& json_text) {
    const json j = parse_json(json_text, "group plan");
    check_keys(j, {"schema", "groups"}, "group plan");
    check_schema(j, "group plan");
    FiberGroupPlan plan;
    for (const json& g : j.at("groups")) {
        check_keys(g, {"I", "J", "K"}, "group plan group");
        plan.groups.push_back(FiberGroup{index_set(g, "I"), index_set(g, "J"), index_set(g, "K")});
    }
    return plan;
}

std::string dump_group_plan(const FiberGroupPlan& plan) {
    json groups = json::array();
    for (const auto& g : plan.groups) groups.push_back({{"I", g.I}, {"J", g.J}, {"K", g.K}});
    return json{{"schema", kSchemaVersion}, {"groups", groups}}.dump() + "\n";
}

bool is_group_plan(const std::string& json_text) {
    const json j = parse_json(json_text, "plan");
    return j.is_object() && j.contains("groups");
}

SolverConfig parse_solver_config(const std::string& json_text) {
    const json j = parse_json(json_text, "solver config");
    check_keys(j, {"schema", "L", "R", "lambda", "max_iters", "rel_tol", "restarts", "init", "perturb_scale", "seed"},
               "solver config");
    check_schema(j, "solver config");
    SolverConfig c;
    get_if(j, "L", c.L);
    get_if(j, "R", c.R);
    if (j.contains("lambda")) {
        const json& l = j.at("lambda");
        if (l.is_number()) {
            c.lambda.a = c.lambda.b = c.lambda.c = l.get<double>();
        } else {
            check_keys(l, {"a", "b", "c"}, "solver config.lambda");
            get_if(l, "a", c.lambda.a);
            get_if(l, "b", c.lambda.b);
            get_if(l, "c", c.lambda.c);
        }
    }
    get_if(j, "max_iters", c.max_iters);
    get_if(j, "rel_tol", c.rel_tol);
    get_if(j, "restarts", c.restarts);
    if (j.contains("init")) c.init = lookup(kInitModes, j.at("init").get<std::string>(), "init");
    get_if(j, "perturb_scale", c.perturb_scale);
    get_if(j, "seed", c.seed);
    if (c.init == InitMode::Random || c.init == InitMode::Spa) c.validate();
    return c;
}

std::string dump_solver_config(const SolverConfig& c) {
    json j{{"schema", kSchemaVersion},
           {"L", c.L},
           {"R", c.R},
           {"lambda", {{"a", c.lambda.a}, {"b", c.lambda.b}, {"c", c.lambda.c}}},
           {"max_iters", c.max_iters},
           {"rel_tol", c.rel_tol},
           {"restarts", c.restarts},
           {"init", reverse_lookup(kInitModes, c.init)},
           {"perturb_scale", c.perturb_scale},
           {"seed", c.seed}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

Observations ingest_observations(std::istream& in) {
    long lineno = 0;
    const Dims d = parse_header(in, lineno);
    std::map<std::tuple<Index, Index, Index>, std::tuple<double, int, double>> cells;  // sum, count, weight
    std::string line;
    while (next_line(in, line, lineno)) {
        std::istringstream ss(line);
        long long i = 0, j = 0, k = 0;
        double value = 0.0, weight = 1.0;
        if (!(ss >> i >> j >> k >> value)) throw ParseError("expected 'i j k value [weight]'", lineno);
        if (!(ss >> weight)) {
            if (!ss.eof()) throw ParseError("bad weight", lineno);
            weight = 1.0;
        }
        std::string extra;
        if (ss.clear(), ss >> extra) throw ParseError("too many fields", lineno);
        if (i < 0 || j < 0 || k < 0 || i >= d.I || j >= d.J || k >= d.K) throw ParseError("index out of range", lineno);
        if (!std::isfinite(value) || !std::isfinite(weight) || weight < 0.0)
            throw ParseError("value must be finite and weight nonnegative", lineno);
        auto& [sum, count, w] = cells[{i, j, k}];
        sum += value;
        count += 1;
        w = weight;
    }
    Tensor3 y(d), weights(d);
    for (const auto& [key, cell] : cells) {
        const auto [i, j, k] = key;
        const auto [sum, count, w] = cell;
        y(i, j, k) = sum / count;
        weights(i, j, k) = w;
    }
    return Observations{std::move(y), FiberMask::from_weights(std::move(weights)), d};
}

Observations ingest_observations(const fs::path& path) {
    auto in = open_in(path);
    return ingest_observations(in);
}

void export_observations(std::ostream& out, const Tensor3& y, const FiberMask& w) {
    FullPrecision guard(out);
    if (!(y.dims() == w.weights.dims())) throw DimensionError("export_observations: mask dims mismatch");
    const Dims d = y.dims();
    out << d.I << ' ' << d.J << ' ' << d.K << '\n';
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.J; ++j)
            for (Index i = 0; i < d.I; ++i)
                if (w.weights(i, j, k) > 0.0)
                    out << i << ' ' << j << ' ' << k << ' ' << y(i, j, k) << ' ' << w.weights(i, j, k) << '\n';
}

void export_observations(const fs::path& path, const Tensor3& y, const FiberMask& w) {
    auto out = open_out(path);
    export_observations(out, y, w);
}

void export_mask(const fs::path& path, const FiberMask& w) {
    auto out = open_out(path);
    const Dims d = w.weights.dims();
    for (Index k = 0; k < d.K; ++k)
        for (Index j = 0; j < d.J; ++j)
            for (Index i = 0; i < d.I; ++i)
                if (w.weights(i, j, k) > 0.0) out << i << ' ' << j << ' ' << k << ' ' << w.weights(i, j, k) << '\n';
}

void write_pgm(const fs::path& path, const Matrix& m) {
    if (m.size() == 0) throw DimensionError("write_pgm: empty matrix");
    if (!m.allFinite()) throw ValidationError("write_pgm: non-finite values");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    const double lo = m.minCoeff(), hi = m.maxCoeff();
    const double span = hi > lo ? hi - lo : 1.0;
    out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) {
            const auto px = static_cast<unsigned char>(std::lround(255.0 * (m(r, c) - lo) / span));
            out.put(static_cast<char>(px));
        }
}

// ---------------------------------------------------------------------------

void write_bundle(const fs::path& dir, const std::vector<Matrix>& slfs, const Matrix& psd, const Tensor3& map) {
    fs::create_directories(dir);
    write_matrix_csv(dir / "C.csv", psd);
    for (std::size_t r = 0; r < slfs.size(); ++r)
        write_matrix_csv(dir / ("S_" + std::to_string(r + 1) + ".csv"), slfs[r]);
    write_tensor(dir / "X.tns", map);
}

void write_ground_truth(const fs::path& dir, const GroundTruth& truth) {
    write_bundle(dir, truth.slfs, truth.psd, truth.map);
}

Bundle read_bundle(const fs::path& dir) {
    Bundle b;
    b.psd = read_matrix_csv(dir / "C.csv");
    for (Index r = 0; r < b.psd.cols(); ++r) {
        const fs::path p = dir / ("S_" + std::to_string(r + 1) + ".csv");
        b.slfs.push_back(read_matrix_csv(p));
    }
    if (fs::exists(dir / "X.tns")) b.map = read_tensor(dir / "X.tns");
    else b.map = reconstruct_map(b.slfs, b.psd);
    return b;
}

void write_solve_result(const fs::path& dir, const SolveResult& result, const SolverConfig& config) {
    fs::create_directories(dir);
    write_matrix_csv(dir / "A.csv", result.factors.stacked_A());
    write_matrix_csv(dir / "B.csv", result.factors.stacked_B());
    write_matrix_csv(dir / "C.csv", result.factors.C);
    {
        auto out = open_out(dir / "loss.csv");
        out << "iteration,loss\n";
        for (std::size_t t = 0; t < result.loss_trace.size(); ++t) out << t << ',' << result.loss_trace[t] << '\n';
    }
    json restarts = json::array();
    for (double l : result.restart_losses) restarts.push_back(std::isfinite(l) ? json(l) : json(nullptr));
    json j{{"termination", to_string(result.termination)},
           {"iterations", result.iterations},
           {"final_loss", result.final_loss()},
           {"restart_index", result.restart_index},
           {"restart_losses", restarts},
           {"warnings", result.warnings},
           {"L", config.L},
           {"R", config.R}};
    write_text(dir / "result.json", j.dump(2) + "\n");
}

}  // namespace radiomap::io
