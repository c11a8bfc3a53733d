#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "radiomap/experiment.hpp"
#include "radiomap/io.hpp"
#include "test_util.hpp"

using namespace radiomap;
using namespace radiomap::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("radiomap_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig micro_experiment() {
    ExperimentConfig c;
    c.scenario.I = 16;
    c.scenario.J = 16;
    c.scenario.K = 8;
    c.scenario.R = 2;
    c.scenario.slf_model = SlfModel::RandomLl1;
    c.scenario.ll1_rank = 2;
    c.M = 6;
    c.N = 6;
    c.solver.L = 2;
    c.solver.R = 2;
    c.solver.lambda = {0, 0, 0};
    c.solver.max_iters = 300;
    c.solver.rel_tol = 1e-10;
    c.solver.restarts = 3;
    c.post.refine = false;
    c.trials = 1;
    c.master_seed = 11;
    return c;
}

}  // namespace

TEST(TensorText, RoundTripIsLossless) {
    Rng rng = make_rng(1);
    Tensor3 t = random_tensor({3, 4, 2}, rng);
    std::stringstream ss;
    io::write_tensor(ss, t);
    Tensor3 back = io::read_tensor(ss);
    EXPECT_EQ(back.dims(), t.dims());
    EXPECT_EQ(max_abs_diff(back, t), 0.0);
}

TEST(TensorText, LayoutIsFrontalSlabs) {
    std::stringstream ss("2 3 2\n1 2 3\n4 5 6\n7 8 9\n10 11 12\n");
    Tensor3 t = io::read_tensor(ss);
    EXPECT_EQ(t(0, 2, 0), 3.0);
    EXPECT_EQ(t(1, 0, 0), 4.0);
    EXPECT_EQ(t(1, 1, 1), 11.0);
}

TEST(TensorText, MalformedInputReportsLine) {
    std::stringstream shortrow("2 2 1\n1 2\n3\n");
    try {
        io::read_tensor(shortrow);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    std::stringstream trailing("1 1 1\n5\n6\n");
    EXPECT_THROW(io::read_tensor(trailing), ParseError);
    std::stringstream header("2 2\n");
    EXPECT_THROW(io::read_tensor(header), ParseError);
}

TEST(MatrixCsv, RoundTrip) {
    Rng rng = make_rng(2);
    Matrix m = gaussian(4, 3, rng);
    std::stringstream ss;
    io::write_matrix_csv(ss, m);
    EXPECT_EQ(io::read_matrix_csv(ss), m);
    std::stringstream with_header("a,b\n1,2\n3,4\n");
    EXPECT_EQ(io::read_matrix_csv(with_header, true), (Matrix{{1, 2}, {3, 4}}));
    std::stringstream ragged("1,2\n3\n");
    EXPECT_THROW(io::read_matrix_csv(ragged), ParseError);
}

TEST(JsonConfig, ScenarioRoundTrip) {
    ScenarioConfig c;
    c.I = 33;
    c.K = 20;
    c.R = 3;
    c.shadow.sigma = 6.0;
    c.shadow.mode = ShadowMode::Exact;
    c.eta_range = {2.2, 2.8};
    c.seed = 99;
    c.slf_model = SlfModel::RandomLl1;
    ScenarioConfig back = io::parse_scenario_config(io::dump_scenario_config(c));
    EXPECT_EQ(back.I, 33);
    EXPECT_EQ(back.K, 20);
    EXPECT_EQ(back.R, 3);
    EXPECT_EQ(back.shadow.sigma, 6.0);
    EXPECT_EQ(back.shadow.mode, ShadowMode::Exact);
    EXPECT_EQ(back.eta_range, c.eta_range);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.slf_model, SlfModel::RandomLl1);
}

TEST(JsonConfig, UnknownKeysRejected) {
    EXPECT_THROW(io::parse_scenario_config(R"({"schema":1,"I":10,"sigmaa":3})"), ValidationError);
    EXPECT_THROW(io::parse_solver_config(R"({"L":2,"lamda":0.1})"), ValidationError);
    EXPECT_THROW(io::parse_scenario_config(R"({"schema":2})"), ValidationError);
}

TEST(JsonConfig, SolverRoundTripAndLambdaForms) {
    SolverConfig c = io::parse_solver_config(R"({"schema":1,"L":3,"R":4,"lambda":0.5,"init":"spa","restarts":2})");
    EXPECT_EQ(c.L, 3);
    EXPECT_EQ(c.R, 4);
    EXPECT_EQ(c.lambda.b, 0.5);
    EXPECT_EQ(c.init, InitMode::Spa);
    c = io::parse_solver_config(R"({"lambda":{"a":1,"b":2,"c":3}})");
    EXPECT_EQ(c.lambda.c, 3.0);
    SolverConfig back = io::parse_solver_config(io::dump_solver_config(c));
    EXPECT_EQ(back.lambda.a, 1.0);
    EXPECT_EQ(back.max_iters, c.max_iters);
    EXPECT_EQ(back.rel_tol, c.rel_tol);
}

TEST(JsonConfig, PlansRoundTrip) {
    SlabPlan p{{0, 4}, {1, 2}, {0, 1, 2}, {2, 3}};
    std::string text = io::dump_slab_plan(p);
    EXPECT_FALSE(io::is_group_plan(text));
    SlabPlan back = io::parse_slab_plan(text);
    EXPECT_EQ(back.s1, p.s1);
    EXPECT_EQ(back.s4, p.s4);
    FiberGroupPlan g{{FiberGroup{{0, 1}, {2}, {3, 4}}, FiberGroup{{5}, {6, 7}, {0}}}};
    text = io::dump_group_plan(g);
    EXPECT_TRUE(io::is_group_plan(text));
    FiberGroupPlan gb = io::parse_group_plan(text);
    ASSERT_EQ(gb.groups.size(), 2u);
    EXPECT_EQ(gb.groups[1].J, (IndexSet{6, 7}));
    EXPECT_THROW(io::parse_slab_plan(R"({"s1":[0],"s2":[0],"s3":[0]})"), ValidationError);
}

TEST(Observations, ThreeLines) {
    std::stringstream ss("4 4 2\n0 0 0 1.5\n1 2 1 2.0 0.5\n3 3 1 -1\n");
    io::Observations o = io::ingest_observations(ss);
    EXPECT_EQ(o.w.observed_count, 3);
    EXPECT_EQ(o.y(1, 2, 1), 2.0);
    EXPECT_EQ(o.w.weights(1, 2, 1), 0.5);
    EXPECT_EQ(o.w.weights(3, 3, 1), 1.0);
}

TEST(Observations, DuplicatesAveraged) {
    std::stringstream ss("2 2 1\n1 1 0 4.0\n1 1 0 6.0 2.0\n");
    io::Observations o = io::ingest_observations(ss);
    EXPECT_EQ(o.y(1, 1, 0), 5.0);
    EXPECT_EQ(o.w.weights(1, 1, 0), 2.0);
    EXPECT_EQ(o.w.observed_count, 1);
}

TEST(Observations, MalformedLinesRejected) {
    std::stringstream bad("2 2 1\n0 0 0 1\n0 0 x 1\n");
    try {
        io::ingest_observations(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    std::stringstream range("2 2 1\n2 0 0 1\n");
    EXPECT_THROW(io::ingest_observations(range), ParseError);
}

TEST(Observations, ExportIngestRoundTrip) {
    Rng rng = make_rng(3);
    Dims d{5, 4, 3};
    Tensor3 y = random_tensor(d, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor3 wt(d);
    for (double& v : wt.data()) v = u(rng) < 0.4 ? 0.0 : u(rng) + 0.25;
    FiberMask w = FiberMask::from_weights(wt);
    std::stringstream ss;
    io::export_observations(ss, y, w);
    io::Observations o = io::ingest_observations(ss);
    EXPECT_EQ(o.dims, d);
    EXPECT_EQ(o.w.observed_count, w.observed_count);
    for (Index t = 0; t < d.numel(); ++t) {
        EXPECT_EQ(o.w.weights.data()[t], w.weights.data()[t]);
        if (w.weights.data()[t] > 0) EXPECT_EQ(o.y.data()[t], y.data()[t]);
    }
}

TEST(Bundles, GroundTruthRoundTrip) {
    ScenarioConfig c;
    c.I = 9;
    c.J = 7;
    c.K = 5;
    c.R = 2;
    GroundTruth gt = assemble_ground_truth(c);
    fs::path dir = scratch_dir("bundle");
    io::write_ground_truth(dir, gt);
    EXPECT_TRUE(fs::exists(dir / "C.csv"));
    EXPECT_TRUE(fs::exists(dir / "S_2.csv"));
    io::Bundle b = io::read_bundle(dir);
    EXPECT_EQ(b.psd, gt.psd);
    EXPECT_EQ(b.slfs[1], gt.slfs[1]);
    EXPECT_EQ(max_abs_diff(b.map, gt.map), 0.0);
    fs::remove(dir / "X.tns");
    io::Bundle rebuilt = io::read_bundle(dir);
    EXPECT_LT(max_abs_diff(rebuilt.map, gt.map), 1e-12 * gt.map.mode3().maxCoeff());
}

TEST(Bundles, PgmHeader) {
    fs::path dir = scratch_dir("pgm");
    io::write_pgm(dir / "m.pgm", Matrix{{0, 1, 2}, {3, 4, 5}});
    std::ifstream in(dir / "m.pgm", std::ios::binary);
    std::string magic;
    int w, h, maxv;
    in >> magic >> w >> h >> maxv;
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(w, 3);
    EXPECT_EQ(h, 2);
    EXPECT_EQ(maxv, 255);
    in.get();
    std::string pixels(6, '\0');
    in.read(pixels.data(), 6);
    EXPECT_EQ(static_cast<unsigned char>(pixels[0]), 0);
    EXPECT_EQ(static_cast<unsigned char>(pixels[5]), 255);
}

TEST(Experiment, QuantilesIgnoreNaN) {
    Quantiles q = quantiles({4.0, 1.0, std::nan(""), 3.0, 2.0});
    EXPECT_DOUBLE_EQ(q.median, 2.5);
    EXPECT_DOUBLE_EQ(q.q1, 1.75);
    EXPECT_DOUBLE_EQ(q.q3, 3.25);
    EXPECT_TRUE(std::isnan(quantiles({std::nan("")}).median));
}

TEST(Experiment, SingleTrialSummaryEqualsTrial) {
    ExperimentConfig c = micro_experiment();
    ExperimentSummary s = run_experiment(c);
    ASSERT_EQ(s.trials.size(), 1u);
    EXPECT_EQ(s.aborted, 0);
    EXPECT_EQ(s.nae_c.median, s.trials[0].nae_c);
    EXPECT_EQ(s.nae_x.median, s.trials[0].nae_x);
    EXPECT_LT(s.trials[0].nae_c, 1e-3);
    EXPECT_EQ(s.trials[0].seed, 11u);
}

TEST(Experiment, RerunIsBitIdentical) {
    ExperimentConfig c = micro_experiment();
    c.trials = 3;
    c.snr_db = 20.0;
    c.solver.max_iters = 30;
    c.solver.restarts = 1;
    fs::path a = scratch_dir("mc_a"), b = scratch_dir("mc_b");
    c.output_dir = a;
    run_experiment(c, 2);
    c.output_dir = b;
    run_experiment(c, 1);
    auto strip_wall = [](const std::string& csv) {
        // wall_time is the only nondeterministic column; drop it before comparing
        std::stringstream in(csv), out;
        std::string line;
        std::getline(in, line);
        std::vector<std::string> head;
        std::stringstream hs(line);
        std::string cell;
        std::size_t wall = 0, idx = 0;
        while (std::getline(hs, cell, ',')) {
            if (cell == "wall_time") wall = idx;
            ++idx;
        }
        in.seekg(0);
        while (std::getline(in, line)) {
            std::stringstream ls(line);
            std::size_t col = 0;
            while (std::getline(ls, cell, ','))
                if (col++ != wall) out << cell << ',';
            out << '\n';
        }
        return out.str();
    };
    EXPECT_EQ(strip_wall(io::read_text(a / "trials.csv")), strip_wall(io::read_text(b / "trials.csv")));
    EXPECT_TRUE(fs::exists(a / "summary.json"));
}

TEST(Experiment, AbortedTrialsAreCountedNotMedianed) {
    ExperimentConfig c = micro_experiment();
    c.sampling = SamplingMode::ExternalObs;
    c.observations = "/nonexistent/obs.txt";
    EXPECT_THROW(c.validate(), ValidationError);

    fs::path dir = scratch_dir("abort");
    io::write_text(dir / "obs.txt", "4 4 2\n0 0 0 1.0\n0 0 nine 2.0\n");
    c.observations = dir / "obs.txt";
    c.trials = 2;
    ExperimentSummary s = run_experiment(c);
    EXPECT_EQ(s.aborted, 2);
    EXPECT_TRUE(s.trials[0].aborted);
    EXPECT_NE(s.trials[0].error.find("line 3"), std::string::npos) << s.trials[0].error;
    EXPECT_TRUE(std::isnan(s.nae_c.median));
    EXPECT_NE(summary_json(s).find("\"aborted\": 2"), std::string::npos) << summary_json(s);
}

TEST(Experiment, ParsesConfigDocument) {
    fs::path dir = scratch_dir("cfg");
    io::write_text(dir / "solver.json", R"({"schema":1,"L":3,"R":2,"init":"spa"})");
    ExperimentConfig c = parse_experiment_config(R"({
        "schema": 1,
        "scenario": {"I": 41, "J": 41, "K": 16, "R": 2},
        "sampling": "slab", "M": 10, "N": 5,
        "snr_db": 20, "solver": "solver.json",
        "trials": 4, "master_seed": 7, "output_dir": "out"
    })",
                                                  dir);
    EXPECT_EQ(c.scenario.I, 41);
    EXPECT_EQ(c.sampling, SamplingMode::Slab);
    EXPECT_EQ(c.M, 10);
    EXPECT_EQ(c.snr_db, 20.0);
    EXPECT_EQ(c.solver.L, 3);
    EXPECT_EQ(c.solver.init, InitMode::Spa);
    EXPECT_EQ(c.trials, 4);
    EXPECT_EQ(c.output_dir, dir / "out");
    EXPECT_EQ(parse_experiment_config(R"({"snr_db":"inf"})").snr_db, kNoiseless);
    EXPECT_THROW(parse_experiment_config(R"({"trails": 3})"), ValidationError);
}

TEST(Experiment, RandomFiberAndGroupModesRun) {
    ExperimentConfig c = micro_experiment();
    c.sampling = SamplingMode::RandomFiber;
    c.q = 8;
    c.solver.max_iters = 20;
    c.solver.restarts = 1;
    TrialRecord r = run_trial(c, 0);
    EXPECT_FALSE(r.aborted) << r.error;
    c.sampling = SamplingMode::Groups;
    IndexSet all = full_range(16), half = full_range(8);
    c.group_plan = FiberGroupPlan{{FiberGroup{all, half, full_range(8)}, FiberGroup{half, all, {0, 1, 2}}}};
    r = run_trial(c, 0);
    EXPECT_FALSE(r.aborted) << r.error;
}
