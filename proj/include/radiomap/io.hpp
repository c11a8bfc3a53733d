#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "radiomap/posteval.hpp"
#include "radiomap/sampling.hpp"
#include "radiomap/scenario.hpp"
#include "radiomap/solver.hpp"
#include "radiomap/tensor.hpp"

namespace radiomap::io {

namespace fs = std::filesystem;

// Tensor text format: a line "I J K", then K blocks of I lines with J values each.
Tensor3 read_tensor(std::istream& in);
Tensor3 read_tensor(const fs::path& path);
void write_tensor(std::ostream& out, const Tensor3& t);
void write_tensor(const fs::path& path, const Tensor3& t);

// Row-major CSV without header unless requested.
Matrix read_matrix_csv(std::istream& in, bool header = false);
Matrix read_matrix_csv(const fs::path& path, bool header = false);
void write_matrix_csv(std::ostream& out, const Matrix& m);
void write_matrix_csv(const fs::path& path, const Matrix& m);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// JSON documents. Every object carries "schema": 1; unknown keys are rejected.
inline constexpr int kSchemaVersion = 1;

ScenarioConfig parse_scenario_config(const std::string& json_text);
std::string dump_scenario_config(const ScenarioConfig& config);

SlabPlan parse_slab_plan(const std::string& json_text);
std::string dump_slab_plan(const SlabPlan& plan);

FiberGroupPlan parse_group_plan(const std::string& json_text);
std::string dump_group_plan(const FiberGroupPlan& plan);

SolverConfig parse_solver_config(const std::string& json_text);
std::string dump_solver_config(const SolverConfig& config);

/// Dispatches on the presence of "groups" vs "s1".
bool is_group_plan(const std::string& json_text);

// Observation files: a line "I J K", then one "i j k value [weight]" per line.
// Indices are zero-based. Duplicate cells are averaged; the last weight wins.
struct Observations {
    Tensor3 y;
    FiberMask w;
    Dims dims;
};

Observations ingest_observations(std::istream& in);
Observations ingest_observations(const fs::path& path);
void export_observations(std::ostream& out, const Tensor3& y, const FiberMask& w);
void export_observations(const fs::path& path, const Tensor3& y, const FiberMask& w);

/// Sparse "i j k weight" lines for every nonzero weight.
void export_mask(const fs::path& path, const FiberMask& w);

/// 8-bit binary PGM, min-max scaled; row i of the matrix is image row i.
void write_pgm(const fs::path& path, const Matrix& m);

// Directory bundles: C.csv (K x R), S_1.csv ... S_R.csv, X.tns.
struct Bundle {
    std::vector<Matrix> slfs;
    Matrix psd;
    Tensor3 map;
};

void write_bundle(const fs::path& dir, const std::vector<Matrix>& slfs, const Matrix& psd, const Tensor3& map);
void write_ground_truth(const fs::path& dir, const GroundTruth& truth);
/// X.tns is optional; when missing the map is rebuilt from S and C.
Bundle read_bundle(const fs::path& dir);

/// A.csv, B.csv, C.csv, loss.csv and result.json for a solver run.
void write_solve_result(const fs::path& dir, const SolveResult& result, const SolverConfig& config);

}  // namespace radiomap::io
