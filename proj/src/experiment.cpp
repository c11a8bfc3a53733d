#include "radiomap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "radiomap/io.hpp"
#include "radiomap/solver_masked.hpp"
#include "radiomap/solver_slab.hpp"

namespace radiomap {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Prepared {
    std::optional<GroundTruth> truth;
    SolveResult result;
    SpectrumSamples samples;
};

Prepared solve_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
    Prepared p;
    SolverConfig solver = cfg.solver;
    solver.seed = seed;

    Tensor3 y;
    if (cfg.sampling == SamplingMode::ExternalObs) {
        auto obs = io::ingest_observations(cfg.observations);
        p.result = bcd_solve_masked(obs.y, obs.w, solver);
        p.samples = full_spectrum_samples(obs.y, obs.w);
        return p;
    }

    ScenarioConfig scenario = cfg.scenario;
    scenario.seed = seed;
    Rng truth_rng = make_rng(seed, 0);
    p.truth = assemble_ground_truth(scenario, truth_rng);
    Rng noise_rng = make_rng(seed, 1);
    y = add_noise(p.truth->map, cfg.snr_db, noise_rng);
    const Dims dims = y.dims();

    switch (cfg.sampling) {
        case SamplingMode::Slab: {
            const SlabPlan plan = cfg.slab_plan ? *cfg.slab_plan : equispaced_slab_plan(dims, cfg.M, cfg.N);
            const SlabData data = make_slab_data(y, plan);
            p.result = bcd_solve(data, solver);
            p.samples = full_spectrum_samples(data.x1, data.x2, plan, dims);
            break;
        }
        case SamplingMode::Groups: {
            const FiberMask w = plan_to_mask(*cfg.group_plan, dims);
            p.result = bcd_solve_masked(y, w, solver);
            p.samples = full_spectrum_samples(y, w);
            break;
        }
        case SamplingMode::RandomFiber: {
            const Index q = cfg.q ? *cfg.q : static_cast<Index>(std::lround(cfg.rho * static_cast<double>(dims.I)));
            Rng mask_rng = make_rng(seed, 2);
            const FiberMask w = random_fiber_mask(dims, q, mask_rng);
            p.result = bcd_solve_masked(y, w, solver);
            p.samples = full_spectrum_samples(y, w);
            break;
        }
        case SamplingMode::ExternalObs:
            break;
    }
    return p;
}

json quantiles_json(const Quantiles& q) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return json{{"q1", num(q.q1)}, {"median", num(q.median)}, {"q3", num(q.q3)}};
}

}  // namespace

const char* to_string(SamplingMode m) {
    switch (m) {
        case SamplingMode::Slab: return "slab";
        case SamplingMode::Groups: return "groups";
        case SamplingMode::RandomFiber: return "random-fiber";
        case SamplingMode::ExternalObs: return "external-obs";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw ValidationError("experiment: trials must be >= 1");
    if (sampling != SamplingMode::ExternalObs) scenario.validate();
    if (solver.R != scenario.R && sampling != SamplingMode::ExternalObs)
        throw ValidationError("experiment: solver R must equal the scenario's emitter count");
    switch (sampling) {
        case SamplingMode::Slab:
            if (slab_plan) slab_plan->validate(Dims{scenario.I, scenario.J, scenario.K});
            else if (M < 1 || N < 1 || M > scenario.I || N > scenario.J)
                throw ValidationError("experiment: slab M/N out of range");
            break;
        case SamplingMode::Groups:
            if (!group_plan) throw ValidationError("experiment: groups sampling needs a group plan");
            group_plan->validate(Dims{scenario.I, scenario.J, scenario.K});
            break;
        case SamplingMode::RandomFiber:
            if (q ? (*q < 1 || *q > scenario.I) : !(rho > 0.0 && rho <= 1.0))
                throw ValidationError("experiment: random-fiber q must lie in [1, I]");
            break;
        case SamplingMode::ExternalObs:
            if (!std::filesystem::exists(observations))
                throw ValidationError("experiment: observation file not found: " + observations.string());
            break;
    }
    if (!(snr_db > -1e300)) throw ValidationError("experiment: snr_db must be a number or +inf");
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("experiment: ") + e.what());
    }
    static const std::vector<std::string> allowed{
        "schema", "scenario", "sampling", "M", "N", "plan", "rho", "q", "observations", "snr_db", "solver",
        "refine", "tps_smoothing", "metrics", "trials", "master_seed", "output_dir"};
    if (!j.is_object()) throw ValidationError("experiment: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ValidationError("experiment: unknown key '" + key + "'");
    }
    if (j.contains("schema") && j.at("schema").get<int>() != io::kSchemaVersion)
        throw ValidationError("experiment: unsupported schema version");

    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    // Nested documents may be inline objects or file references.
    auto nested = [&](const char* key) {
        const json& v = j.at(key);
        return v.is_string() ? io::read_text(resolve(v.get<std::string>())) : v.dump();
    };

    ExperimentConfig c;
    if (j.contains("scenario")) c.scenario = io::parse_scenario_config(nested("scenario"));
    if (j.contains("sampling")) {
        const auto s = j.at("sampling").get<std::string>();
        if (s == "slab") c.sampling = SamplingMode::Slab;
        else if (s == "groups") c.sampling = SamplingMode::Groups;
        else if (s == "random-fiber") c.sampling = SamplingMode::RandomFiber;
        else if (s == "external-obs") c.sampling = SamplingMode::ExternalObs;
        else throw ValidationError("experiment: unknown sampling mode '" + s + "'");
    }
    if (j.contains("M")) c.M = j.at("M").get<Index>();
    if (j.contains("N")) c.N = j.at("N").get<Index>();
    if (j.contains("plan")) {
        const std::string text = nested("plan");
        if (io::is_group_plan(text)) c.group_plan = io::parse_group_plan(text);
        else c.slab_plan = io::parse_slab_plan(text);
    }
    if (j.contains("rho")) c.rho = j.at("rho").get<double>();
    if (j.contains("q")) c.q = j.at("q").get<Index>();
    if (j.contains("observations")) c.observations = resolve(j.at("observations").get<std::string>());
    if (j.contains("snr_db")) {
        const json& v = j.at("snr_db");
        if (v.is_null() || (v.is_string() && v.get<std::string>() == "inf")) c.snr_db = kNoiseless;
        else c.snr_db = v.get<double>();
    }
    c.solver.R = c.scenario.R;
    if (j.contains("solver")) c.solver = io::parse_solver_config(nested("solver"));
    if (j.contains("refine")) c.post.refine = j.at("refine").get<bool>();
    if (j.contains("tps_smoothing")) c.post.tps_smoothing = j.at("tps_smoothing").get<double>();
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<bool>();
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (c.sampling == SamplingMode::ExternalObs) c.metrics = false;
    c.validate();
    return c;
}

Quantiles quantiles(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
                 values.end());
    if (values.empty()) return {kNaN, kNaN, kNaN};
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

TrialRecord run_trial(const ExperimentConfig& config, int index) {
    TrialRecord rec;
    rec.trial = index;
    rec.seed = config.master_seed + static_cast<std::uint64_t>(index);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        Prepared p = solve_trial(config, rec.seed);
        rec.final_loss = p.result.final_loss();
        rec.iterations = p.result.iterations;
        if (p.result.termination == Termination::Diverged) throw NumericalError("solver diverged");
        rec.nae_c = rec.nae_s = rec.nae_x = kNaN;
        if (config.metrics && p.truth) {
            PostprocessConfig post = config.post;
            post.reference_psd = p.truth->psd;
            const DisaggregationResult est = disaggregate_full(p.result, p.samples, post);
            const Metrics m = evaluate(*p.truth, est);
            rec.nae_c = m.nae_c;
            rec.nae_s = m.nae_s;
            rec.nae_x = m.nae_x;
        }
    } catch (const std::exception& e) {
        rec.aborted = true;
        rec.error = e.what();
        rec.nae_c = rec.nae_s = rec.nae_x = kNaN;
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs) {
    config.validate();
    ExperimentSummary summary;
    summary.trials.resize(static_cast<std::size_t>(config.trials));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int t = next++; t < config.trials; t = next++) summary.trials[static_cast<std::size_t>(t)] = run_trial(config, t);
    };
    const int n_threads = std::clamp(jobs, 1, config.trials);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<double> c, s, x;
    for (const auto& r : summary.trials) {
        if (r.aborted) {
            ++summary.aborted;
            continue;
        }
        c.push_back(r.nae_c);
        s.push_back(r.nae_s);
        x.push_back(r.nae_x);
    }
    summary.nae_c = quantiles(c);
    summary.nae_s = quantiles(s);
    summary.nae_x = quantiles(x);

    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        io::write_text(config.output_dir / "trials.csv", trials_csv(summary.trials));
        io::write_text(config.output_dir / "summary.json", summary_json(summary));
    }
    return summary;
}

std::string trials_csv(const std::vector<TrialRecord>& trials) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "trial,seed,nae_c,nae_s,nae_x,final_loss,iterations,wall_time\n";
    for (const auto& r : trials)
        out << r.trial << ',' << r.seed << ',' << r.nae_c << ',' << r.nae_s << ',' << r.nae_x << ',' << r.final_loss
            << ',' << r.iterations << ',' << std::setprecision(6) << r.wall_time << std::setprecision(17) << '\n';
    return out.str();
}

std::string summary_json(const ExperimentSummary& summary) {
    json errors = json::array();
    for (const auto& r : summary.trials)
        if (r.aborted) errors.push_back({{"trial", r.trial}, {"error", r.error}});
    json j{{"trials", summary.trials.size()},
           {"aborted", summary.aborted},
           {"nae_c", quantiles_json(summary.nae_c)},
           {"nae_s", quantiles_json(summary.nae_s)},
           {"nae_x", quantiles_json(summary.nae_x)},
           {"errors", errors}};
    return j.dump(2) + "\n";
}

}  // namespace radiomap
