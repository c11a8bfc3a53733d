#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "radiomap/posteval.hpp"
#include "radiomap/sampling.hpp"
#include "radiomap/scenario.hpp"
#include "radiomap/solver.hpp"

namespace radiomap {

enum class SamplingMode { Slab, Groups, RandomFiber, ExternalObs };

const char* to_string(SamplingMode m);

struct ExperimentConfig {
    ScenarioConfig scenario;
    SamplingMode sampling = SamplingMode::Slab;
    Index M = 15;                            // equispaced slab plan when slab_plan is unset
    Index N = 6;
    std::optional<SlabPlan> slab_plan;
    std::optional<FiberGroupPlan> group_plan;
    double rho = 0.1;                        // random-fiber: q = round(rho * I) per (j, k)
    std::optional<Index> q;                  // overrides rho
    std::filesystem::path observations;      // external-obs
    double snr_db = kNoiseless;
    SolverConfig solver;
    PostprocessConfig post;
    bool metrics = true;
    int trials = 1;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir;

    void validate() const;
};

/// Parses an experiment JSON document. Relative file references resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir = {});

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    double nae_c = 0.0;
    double nae_s = 0.0;
    double nae_x = 0.0;
    double final_loss = 0.0;
    int iterations = 0;
    double wall_time = 0.0;  // seconds
    bool aborted = false;
    std::string error;
};

struct Quantiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

/// Linear-interpolation quartiles over the finite values; NaN when none.
Quantiles quantiles(std::vector<double> values);

struct ExperimentSummary {
    std::vector<TrialRecord> trials;
    int aborted = 0;
    Quantiles nae_c, nae_s, nae_x;
};

/// One trial, fully determined by (config, master_seed + index).
TrialRecord run_trial(const ExperimentConfig& config, int index);

/// Runs every trial on up to `jobs` threads. Writes trials.csv and
/// summary.json into config.output_dir when it is set.
ExperimentSummary run_experiment(const ExperimentConfig& config, int jobs = 1);

std::string trials_csv(const std::vector<TrialRecord>& trials);
std::string summary_json(const ExperimentSummary& summary);

}  // namespace radiomap
