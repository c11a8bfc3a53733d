#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "radiomap/experiment.hpp"
#include "radiomap/io.hpp"
#include "radiomap/posteval.hpp"
#include "radiomap/sampling.hpp"
#include "radiomap/scenario.hpp"
#include "radiomap/solver_masked.hpp"
#include "radiomap/solver_slab.hpp"

namespace fs = std::filesystem;
using namespace radiomap;

namespace {

constexpr int kUsageError = 2;

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("RADIOMAP_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ValidationError(std::string("RADIOMAP_SEED is not an unsigned integer: ") + s);
    }
}

SolverConfig load_solver(const std::string& path, const std::string& init_dir) {
    SolverConfig c = path.empty() ? SolverConfig{} : io::parse_solver_config(io::read_text(path));
    if (!init_dir.empty()) {
        const fs::path d(init_dir);
        c.init_factors = Ll1Factors::from_stacked(io::read_matrix_csv(d / "A.csv"), io::read_matrix_csv(d / "B.csv"),
                                                  io::read_matrix_csv(d / "C.csv"), c.L);
        if (c.init == InitMode::Random) c.init = InitMode::Given;
    }
    c.validate();
    return c;
}

void print_report(const CheckReport& r) {
    std::printf("%s\n", r.name.c_str());
    std::printf("  %-48s %14s %14s  %s\n", "condition", "value", "threshold", "pass");
    for (const auto& c : r.clauses)
        std::printf("  %-48s %14.6g %14.6g  %s\n", c.condition.c_str(), c.value, c.threshold, c.pass ? "yes" : "no");
    if (r.witness) {
        std::printf("  ordering:");
        for (Index g : *r.witness) std::printf(" %ld", static_cast<long>(g));
        std::printf("\n");
    }
    std::printf("  result: %s\n  note: %s\n", r.satisfied ? "SATISFIED" : "NOT SATISFIED", r.disclaimer.c_str());
}

void finish_solve(const SolveResult& result, const SolverConfig& config, const SpectrumSamples& samples,
                  const fs::path& out, bool refine, double tps_smoothing) {
    io::write_solve_result(out, result, config);
    PostprocessConfig post;
    post.refine = refine;
    post.tps_smoothing = tps_smoothing;
    const DisaggregationResult est = disaggregate_full(result, samples, post);
    io::write_bundle(out / "est", est.slfs_hat, est.psd_hat, est.map_hat);
    std::printf("termination=%s iterations=%d final_loss=%.10g refined=%s\n", to_string(result.termination),
                result.iterations, result.final_loss(), est.refined ? "yes" : "no");
    for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& n : est.notes) std::fprintf(stderr, "note: %s\n", n.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Radio map disaggregation via LL1 tensor factorization"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a ground-truth scenario");
    std::string sim_config, sim_out;
    double sim_snr = kNoiseless;
    std::optional<std::uint64_t> sim_seed;
    sim->add_option("--config", sim_config, "Scenario JSON (defaults if omitted)");
    sim->add_option("--out", sim_out, "Output directory")->required();
    sim->add_option("--snr", sim_snr, "Also write a noisy Y.tns at this SNR (dB)");
    sim->add_option("--seed", sim_seed, "Override the scenario seed");

    // sample
    auto* smp = app.add_subcommand("sample", "Extract observations from a tensor");
    std::string smp_tensor, smp_plan, smp_out;
    std::optional<Index> smp_q;
    std::uint64_t smp_seed = 1;
    smp->add_option("--tensor", smp_tensor, "Tensor file")->required();
    smp->add_option("--out", smp_out, "Output directory")->required();
    auto* smp_plan_opt = smp->add_option("--plan", smp_plan, "Slab or group plan JSON");
    auto* smp_q_opt = smp->add_option("--random-fiber", smp_q, "Observe q random entries of every fiber X(:,j,k)");
    smp_plan_opt->excludes(smp_q_opt);
    smp->add_option("--seed", smp_seed, "Seed for random-fiber masks");

    // solve-slab
    auto* ss = app.add_subcommand("solve-slab", "Coupled LL1 solve from two slab subtensors");
    std::string ss_x1, ss_x2, ss_plan, ss_config, ss_out, ss_init;
    std::optional<Index> ss_K;
    bool ss_no_refine = false;
    double ss_tps = 1e-3;
    ss->add_option("--x1", ss_x1, "X(s1,:,s3) tensor file")->required();
    ss->add_option("--x2", ss_x2, "X(:,s2,s4) tensor file")->required();
    ss->add_option("--plan", ss_plan, "Slab plan JSON")->required();
    ss->add_option("--config", ss_config, "Solver config JSON");
    ss->add_option("--out", ss_out, "Output directory")->required();
    ss->add_option("--init", ss_init, "Directory with A.csv, B.csv, C.csv initial factors");
    ss->add_option("--K", ss_K, "Number of bands (default: largest planned band + 1)");
    ss->add_flag("--no-refine", ss_no_refine, "Skip SLF refinement");
    ss->add_option("--tps-smoothing", ss_tps, "Thin-plate spline smoothing");

    // solve-mask
    auto* sm = app.add_subcommand("solve-mask", "Masked LL1 solve from sparse observations");
    std::string sm_obs, sm_config, sm_out, sm_init;
    bool sm_no_refine = false;
    double sm_tps = 1e-3;
    sm->add_option("--obs", sm_obs, "Observation file (i j k value [weight])")->required();
    sm->add_option("--config", sm_config, "Solver config JSON");
    sm->add_option("--out", sm_out, "Output directory")->required();
    sm->add_option("--init", sm_init, "Directory with A.csv, B.csv, C.csv initial factors");
    sm->add_flag("--no-refine", sm_no_refine, "Skip SLF refinement");
    sm->add_option("--tps-smoothing", sm_tps, "Thin-plate spline smoothing");

    // eval
    auto* ev = app.add_subcommand("eval", "NAE metrics of an estimate against ground truth");
    std::string ev_truth, ev_est;
    bool ev_header = false;
    ev->add_option("--truth", ev_truth, "Ground-truth directory")->required();
    ev->add_option("--est", ev_est, "Estimate directory")->required();
    ev->add_flag("--header", ev_header, "Print a CSV header line");

    // check
    auto* ck = app.add_subcommand("check", "Identifiability check for a sampling plan");
    std::string ck_plan;
    std::vector<Index> ck_dims;
    Index ck_L = 1, ck_R = 1;
    std::optional<Index> ck_q;
    double ck_eps = 1.0;
    bool ck_anchor = false;
    ck->add_option("--plan", ck_plan, "Slab or group plan JSON");
    ck->add_option("--dims", ck_dims, "I J K")->required()->expected(3);
    ck->add_option("--L", ck_L, "Block rank")->required();
    ck->add_option("--R", ck_R, "Number of emitters")->required();
    ck->add_option("--q", ck_q, "Random-fiber samples per fiber");
    ck->add_option("--eps", ck_eps, "Random-fiber failure parameter");
    ck->add_flag("--anchor", ck_anchor, "Use the anchor-group condition for group plans");

    // mc
    auto* mc = app.add_subcommand("mc", "Monte-Carlo experiment");
    std::string mc_config, mc_out;
    int mc_jobs = 1;
    std::optional<int> mc_trials;
    mc->add_option("--config", mc_config, "Experiment JSON")->required();
    mc->add_option("--out", mc_out, "Output directory (overrides the config)");
    mc->add_option("--jobs", mc_jobs, "Concurrent trials")->check(CLI::PositiveNumber);
    mc->add_option("--trials", mc_trials, "Override the trial count");

    // render
    auto* rd = app.add_subcommand("render", "Grayscale PGM heatmap of a CSV matrix");
    std::string rd_matrix, rd_out;
    rd->add_option("--matrix", rd_matrix, "Matrix CSV")->required();
    rd->add_option("--out", rd_out, "Output PGM")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*sim) {
            ScenarioConfig cfg = sim_config.empty() ? ScenarioConfig{} : io::parse_scenario_config(io::read_text(sim_config));
            if (auto s = env_seed()) cfg.seed = *s;
            if (sim_seed) cfg.seed = *sim_seed;
            Rng rng = make_rng(cfg.seed, 0);
            const GroundTruth truth = assemble_ground_truth(cfg, rng);
            io::write_ground_truth(sim_out, truth);
            io::write_text(fs::path(sim_out) / "scenario.json", io::dump_scenario_config(cfg));
            if (std::isfinite(sim_snr)) {
                Rng noise = make_rng(cfg.seed, 1);
                io::write_tensor(fs::path(sim_out) / "Y.tns", add_noise(truth.map, sim_snr, noise));
            }
            return 0;
        }
        if (*smp) {
            const Tensor3 x = io::read_tensor(smp_tensor);
            const fs::path out(smp_out);
            if (smp_q) {
                Rng rng = make_rng(smp_seed, 2);
                const FiberMask w = random_fiber_mask(x.dims(), *smp_q, rng);
                io::export_observations(out / "obs.txt", x, w);
                io::export_mask(out / "mask.txt", w);
                return 0;
            }
            if (smp_plan.empty()) throw ValidationError("sample: --plan or --random-fiber is required");
            const std::string text = io::read_text(smp_plan);
            if (io::is_group_plan(text)) {
                const FiberGroupPlan plan = io::parse_group_plan(text);
                const FiberMask w = plan_to_mask(plan, x.dims());
                io::export_observations(out / "obs.txt", x, w);
                io::export_mask(out / "mask.txt", w);
            } else {
                const SlabPlan plan = io::parse_slab_plan(text);
                plan.validate(x.dims());
                const auto [x1, x2] = slab_subtensors(x, plan);
                io::write_tensor(out / "x1.tns", x1);
                io::write_tensor(out / "x2.tns", x2);
            }
            return 0;
        }
        if (*ss) {
            const SolverConfig cfg = load_solver(ss_config, ss_init);
            const SlabPlan plan = io::parse_slab_plan(io::read_text(ss_plan));
            const Tensor3 x1 = io::read_tensor(ss_x1), x2 = io::read_tensor(ss_x2);
            Index K = 0;
            if (!plan.s3.empty()) K = std::max(K, plan.s3.back() + 1);
            if (!plan.s4.empty()) K = std::max(K, plan.s4.back() + 1);
            if (ss_K) K = *ss_K;
            SlabData data{x1, x2, plan, Dims{x2.dims().I, x1.dims().J, K}};
            data.validate();
            const SolveResult result = bcd_solve(data, cfg);
            finish_solve(result, cfg, full_spectrum_samples(x1, x2, plan, data.dims), ss_out, !ss_no_refine, ss_tps);
            return 0;
        }
        if (*sm) {
            const SolverConfig cfg = load_solver(sm_config, sm_init);
            const io::Observations obs = io::ingest_observations(sm_obs);
            const SolveResult result = bcd_solve_masked(obs.y, obs.w, cfg);
            finish_solve(result, cfg, full_spectrum_samples(obs.y, obs.w), sm_out, !sm_no_refine, sm_tps);
            return 0;
        }
        if (*ev) {
            const io::Bundle truth = io::read_bundle(ev_truth);
            // A solve output directory keeps its bundle under est/.
            fs::path est_dir = ev_est;
            if (!fs::exists(est_dir / "C.csv") || fs::exists(est_dir / "est" / "C.csv")) est_dir /= "est";
            const io::Bundle est = io::read_bundle(est_dir);
            if (truth.psd.cols() != est.psd.cols()) throw DimensionError("eval: emitter count differs");
            const auto perm = match_permutation(truth.psd, est.psd);
            std::vector<Matrix> s;
            for (Index p : perm) s.push_back(est.slfs[static_cast<std::size_t>(p)]);
            if (ev_header) std::printf("nae_c,nae_s,nae_x\n");
            std::printf("%.10g,%.10g,%.10g\n", nae_psd(truth.psd, permute_columns(est.psd, perm)),
                        nae_slf(truth.slfs, s), nae_map(truth.map, est.map));
            return 0;
        }
        if (*ck) {
            const Dims dims{ck_dims[0], ck_dims[1], ck_dims[2]};
            CheckReport report;
            if (ck_q) {
                report = check_random_fiber(dims, ck_L, ck_R, *ck_q, ck_eps);
            } else if (ck_plan.empty()) {
                report = check_ll1_uniqueness(dims, ck_L, ck_R);
            } else {
                const std::string text = io::read_text(ck_plan);
                if (io::is_group_plan(text)) {
                    const FiberGroupPlan plan = io::parse_group_plan(text);
                    report = ck_anchor ? check_anchor_identifiability(plan, dims, ck_L, ck_R)
                                       : check_group_identifiability(plan, dims, ck_L, ck_R);
                } else {
                    report = check_slab_identifiability(io::parse_slab_plan(text), dims, ck_L, ck_R);
                }
            }
            print_report(report);
            return report.satisfied ? 0 : 1;
        }
        if (*mc) {
            ExperimentConfig cfg =
                parse_experiment_config(io::read_text(mc_config), fs::path(mc_config).parent_path());
            if (auto s = env_seed()) cfg.master_seed = *s;
            if (!mc_out.empty()) cfg.output_dir = mc_out;
            if (mc_trials) cfg.trials = *mc_trials;
            const ExperimentSummary summary = run_experiment(cfg, mc_jobs);
            std::printf("trials=%zu aborted=%d median_nae_c=%.6g median_nae_s=%.6g median_nae_x=%.6g\n",
                        summary.trials.size(), summary.aborted, summary.nae_c.median, summary.nae_s.median,
                        summary.nae_x.median);
            return 0;
        }
        if (*rd) {
            io::write_pgm(rd_out, io::read_matrix_csv(rd_matrix));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsageError;
    }
    return kUsageError;
}
