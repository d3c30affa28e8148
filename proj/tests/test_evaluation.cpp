#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "powerlin/bench.hpp"
#include "powerlin/evaluation.hpp"
#include "support.hpp"

using namespace powerlin;
using testing_support::load_case;
using testing_support::two_bus;

namespace fs = std::filesystem;

namespace {

BaselineSolution flat_reference(Network const& net) {
    BaselineSolution b;
    b.v_mag.assign(net.bus_count(), 1.0);
    b.v_ang.assign(net.bus_count(), 0.0);
    b.pg.assign(net.generator_count(), 0.0);
    b.branch_flow.assign(net.branch_count(), 0.0);
    return b;
}

/// Two-bus lossless network with a slack unit and a second unit at the load bus (MW costs).
Network dispatch_toy(double load_mw, double slack_pmax_mw = 300.0) {
    auto net = to_physical(two_bus(0.0, -10.0, load_mw));
    net.generators[0].p_max = slack_pmax_mw;
    net.generators[0].cost.coefficients = {0.0, 10.0, 0.02};
    net.buses[1].kind = BusKind::PV;
    Generator g;
    g.bus = 2;
    g.v_set = 1.0;
    g.p_min = 0.0;
    g.p_max = 100.0;
    g.cost.coefficients = {0.0, 8.0, 0.04};
    net.generators.push_back(g);
    return to_per_unit(net);
}

fs::path scratch_dir() {
    auto const dir = fs::temp_directory_path() / ("powerlin_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

int run_cli(std::string const& args, fs::path const& stdout_path, fs::path const& stderr_path) {
    std::string const cmd = std::string(POWERLIN_CLI_PATH) + " " + args + " >" + stdout_path.string() + " 2>" +
                            stderr_path.string();
    int const status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bench::RunConfig fixture_config(std::vector<int> methods, int repetitions = 0) {
    bench::RunConfig config;
    config.case_paths = {testing_support::data_dir() / "case14.m"};
    config.baseline_paths = {testing_support::data_dir() / "case14_baseline.json"};
    config.methods = std::move(methods);
    config.repetitions = repetitions;
    return config;
}

MetricsReport synthetic_cell(int method, std::string case_name, double accuracy, double other) {
    MetricsReport c;
    c.method = method;
    c.case_name = std::move(case_name);
    c.approx_error = accuracy;
    c.eps_f = other;
    c.out_ratio = other;
    c.wall_time_s = other;
    return c;
}

}  // namespace

// ---- metrics ----

TEST(ApproxError, SingleLine) {
    std::vector<double> const predicted{1.1}, reference{1.0};
    double const expected = (0.1 - 1e-7) / (1.0 + 1e-7);
    EXPECT_NEAR(approx_error(predicted, reference), expected, 1e-15);
    EXPECT_NEAR(approx_error(predicted, reference), 0.099999, 1e-6);
    EXPECT_NEAR(approx_error(predicted, reference, ErrorReduction::MeanSquare), expected * expected, 1e-15);
}

TEST(ApproxError, ZeroWhenOffsetByGuard) {
    std::vector<double> const reference{0.3, -1.2, 0.0, 2.5};
    std::vector<double> predicted;
    for (double p : reference) predicted.push_back(p + kRelativeGuard);
    EXPECT_NEAR(approx_error(predicted, reference), 0.0, 1e-9);
}

TEST(ApproxError, OrderInvariantAndLengthChecked) {
    std::vector<double> p{1.1, 0.4, -0.3}, r{1.0, 0.5, -0.2};
    double const e = approx_error(p, r);
    std::swap(p[0], p[2]);
    std::swap(r[0], r[2]);
    EXPECT_NEAR(approx_error(p, r), e, 1e-15);
    std::vector<double> const shorter{1.0};
    EXPECT_THROW(approx_error(p, shorter), InconsistentModel);
}

TEST(ApproxError, Case14Method1) {
    auto const net = load_case("case14");
    auto const base = testing_support::load_reference("case14", net);
    double const ms = approx_error(build_method1(net), base, ErrorReduction::MeanSquare);
    double const rms = approx_error(build_method1(net), base, ErrorReduction::Rms);
    EXPECT_NEAR(ms, 0.0647, 0.0647 * 0.01);
    EXPECT_NEAR(rms * rms, ms, 1e-15);
}

TEST(Optimality, ExactMatchIsZero) {
    auto const net = load_case("case14");
    auto const base = testing_support::load_reference("case14", net);
    ac::SteadyState state;
    state.dispatch = base.pg;
    state.v_mag = base.v_mag;
    auto b = base;
    b.objective = dispatch_cost(net, base.pg) - kRelativeGuard;
    auto const e = optimality_errors(state, net, b);
    EXPECT_NEAR(e.eps_f, 0.0, 1e-12);
    EXPECT_EQ(e.eps_v, 0.0);
}

TEST(Optimality, SingleGeneratorDispatchError) {
    std::vector<double> const value{1.0}, reference{0.5};
    EXPECT_NEAR(rms_relative(value, reference, kRelativeGuard), (1.0 - 0.5 - 1e-7) / (0.5 + 1e-7), 1e-15);
    EXPECT_NEAR(rms_relative(value, reference, kRelativeGuard), 1.0, 1e-6);
}

TEST(Optimality, RmsScaling) {
    std::vector<double> const reference{1.0, 2.0, 4.0};
    std::vector<double> const once{1.1, 1.8, 4.4}, twice{1.2, 1.6, 4.8};
    EXPECT_NEAR(rms_relative(twice, reference, 0.0), 2.0 * rms_relative(once, reference, 0.0), 1e-14);
    std::vector<double> const perm_value{4.4, 1.1, 1.8}, perm_ref{4.0, 1.0, 2.0};
    EXPECT_NEAR(rms_relative(perm_value, perm_ref, 0.0), rms_relative(once, reference, 0.0), 1e-15);
}

TEST(Feasibility, WithinBounds) {
    auto const net = load_case("case14");
    std::vector<double> const v(net.bus_count(), 1.0);
    auto const r = feasibility_check(v, net, flat_reference(net));
    EXPECT_EQ(r.n_out, 0);
    EXPECT_EQ(r.n_above, 0);
    EXPECT_EQ(r.n_below, 0);
    EXPECT_EQ(r.eps_v_out, 0.0);
}

TEST(Feasibility, ConstructedViolation) {
    auto net = two_bus(5.0, -15.0);
    net.buses[1].v_max = 1.06;
    auto base = flat_reference(net);
    base.v_mag = {1.0, 1.05};
    std::vector<double> const v{1.0, 1.07};
    auto const r = feasibility_check(v, net, base);
    EXPECT_EQ(r.n_above, 1);
    EXPECT_EQ(r.n_below, 0);
    EXPECT_EQ(r.n_out, 1);
    EXPECT_DOUBLE_EQ(r.out_ratio, 0.5);
    EXPECT_NEAR(r.eps_v_out, 0.02 / 1.05, 1e-15);
    EXPECT_NEAR(r.eps_v_out, 0.019048, 1e-6);
}

TEST(Feasibility, StrictBoundsAndWideningClearsViolations) {
    auto net = load_case("case57");
    std::vector<double> v;
    for (std::size_t i = 0; i < net.bus_count(); ++i) v.push_back(i % 3 == 0 ? 1.2 : i % 3 == 1 ? 0.8 : net.buses[i].v_max);
    auto const base = flat_reference(net);
    auto const r = feasibility_check(v, net, base);
    EXPECT_EQ(r.n_out, r.n_above + r.n_below);
    EXPECT_EQ(r.n_above, 19);
    EXPECT_EQ(r.n_below, 19);
    for (auto& b : net.buses) {
        b.v_min = 0.0;
        b.v_max = std::numeric_limits<double>::infinity();
    }
    auto const wide = feasibility_check(v, net, base);
    EXPECT_EQ(wide.n_out, 0);
    EXPECT_EQ(wide.eps_v_out, 0.0);
}

TEST(Timing, ZeroRepetitions) {
    auto const net = load_case("case14");
    EXPECT_EQ(time_method(1, net, 0), 0.0);
    EXPECT_GT(time_method(1, net, 2), 0.0);
}

// ---- scoring ----

TEST(Scoring, WorkedExample) {
    std::vector<double> const values{0.1, 0.01, 1.0};
    auto const s = score_axis(values);
    EXPECT_NEAR(s[0], 50.5, 1e-12);
    EXPECT_NEAR(s[1], 100.0, 1e-12);
    EXPECT_NEAR(s[2], 1.0, 1e-12);
}

TEST(Scoring, DegenerateSpread) {
    std::vector<double> const values{0.3, 0.3, 0.3};
    for (double s : score_axis(values)) EXPECT_EQ(s, 100.0);
}

TEST(Scoring, LogBaseCancels) {
    std::vector<double> const values{0.37, 2.1, 0.004, 13.0};
    auto const s = score_axis(values);
    std::vector<double> l10;
    for (double v : values) l10.push_back(std::log10(1.0 / v));
    double const lo = *std::min_element(l10.begin(), l10.end()), hi = *std::max_element(l10.begin(), l10.end());
    for (std::size_t i = 0; i < values.size(); ++i) EXPECT_NEAR(s[i], 1.0 + 99.0 * (l10[i] - lo) / (hi - lo), 1e-9);
}

TEST(Scoring, CommonScaleInvariance) {
    std::vector<double> const values{0.37, 2.1, 0.004, 13.0};
    std::vector<double> scaled;
    for (double v : values) scaled.push_back(7.3 * v);
    auto const a = score_axis(values), b = score_axis(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Scoring, EndpointsAndRange) {
    std::vector<double> const values{0.2, 5.0, 0.9, 1.1, 0.05};
    auto const s = score_axis(values);
    EXPECT_NEAR(*std::min_element(s.begin(), s.end()), 1.0, 1e-12);
    EXPECT_NEAR(*std::max_element(s.begin(), s.end()), 100.0, 1e-12);
}

TEST(Scoring, NonPositiveRejected) {
    std::vector<double> const zero{0.1, 0.0}, negative{-1.0};
    EXPECT_THROW(score_axis(zero), NonPositiveAggregate);
    EXPECT_THROW(score_axis(negative), NonPositiveAggregate);
}

TEST(Radar, AreaAndVertices) {
    EXPECT_DOUBLE_EQ(radar_area({100, 100, 100, 100}), 20000.0);
    EXPECT_DOUBLE_EQ(radar_area({1, 2, 3, 4}), 0.5 * (2 + 6 + 12 + 4));
    auto const v = radar_vertices({10, 20, 30, 40});
    EXPECT_NEAR(v[0][0], 0.0, 1e-12);
    EXPECT_NEAR(v[0][1], 10.0, 1e-12);
    EXPECT_NEAR(v[1][0], 20.0, 1e-12);
    EXPECT_NEAR(v[2][1], -30.0, 1e-12);
    EXPECT_NEAR(v[3][0], -40.0, 1e-12);
}

// ---- bench ----

TEST(Bench, ScoreCellsWorkedExample) {
    std::vector<MetricsReport> const cells{synthetic_cell(1, "a", 0.1, 0.5), synthetic_cell(2, "a", 0.01, 0.5),
                                           synthetic_cell(3, "a", 1.0, 0.5)};
    auto const scores = bench::score_cells(cells);
    ASSERT_EQ(scores.size(), 3u);
    EXPECT_NEAR(scores[0].scores[0], 50.5, 1e-9);
    EXPECT_NEAR(scores[1].scores[0], 100.0, 1e-9);
    EXPECT_NEAR(scores[2].scores[0], 1.0, 1e-9);
    for (auto const& s : scores)
        for (std::size_t a = 1; a < 4; ++a) EXPECT_EQ(s.scores[a], 100.0);
    auto const json = nlohmann::json::parse(bench::render_scores(scores));
    EXPECT_NEAR(json.at("methods").at(0).at("scores").at("accuracy").get<double>(), 50.5, 1e-9);
}

TEST(Bench, IdenticalAggregatesGiveIdenticalPolygons) {
    std::vector<MetricsReport> const cells{synthetic_cell(1, "a", 0.2, 0.3), synthetic_cell(2, "a", 0.2, 0.3),
                                           synthetic_cell(3, "a", 0.7, 0.1)};
    auto const scores = bench::score_cells(cells);
    EXPECT_EQ(scores[0].scores, scores[1].scores);
    EXPECT_EQ(scores[0].vertices, scores[1].vertices);
    EXPECT_EQ(scores[0].area, scores[1].area);
}

TEST(Bench, IncompleteMatrix) {
    auto failed = synthetic_cell(2, "a", 0.1, 0.1);
    failed.failed = true;
    EXPECT_THROW(bench::score_cells({synthetic_cell(1, "a", 0.1, 0.1), failed}), IncompleteMatrix);
    EXPECT_THROW(bench::score_cells({synthetic_cell(1, "a", 0.1, 0.1), synthetic_cell(1, "b", 0.1, 0.1),
                                     synthetic_cell(2, "a", 0.1, 0.1)}),
                 IncompleteMatrix);
    EXPECT_THROW(bench::cells_from_report(R"({"cells": []})"), IncompleteMatrix);
}

TEST(Bench, EmptyMethodSelection) {
    auto const report = bench::run(fixture_config({}));
    EXPECT_TRUE(report.cells.empty());
    EXPECT_FALSE(report.any_failed());
    EXPECT_EQ(report.fixtures.size(), 1u);
}

TEST(Bench, MissingBaseline) {
    auto config = fixture_config({1});
    config.baseline_paths = {"/nonexistent/case14_baseline.json"};
    try {
        bench::run(config);
        FAIL() << "expected an IO error";
    } catch (Error const& e) {
        EXPECT_EQ(std::string(e.what()), "baseline not found: /nonexistent/case14_baseline.json");
    }
}

TEST(Bench, ConfigurationErrors) {
    auto config = fixture_config({8});
    EXPECT_THROW(bench::run(config), Error);
    config = fixture_config({1});
    config.baseline_paths.clear();
    EXPECT_THROW(bench::run(config), Error);
    config = fixture_config({1}, -1);
    EXPECT_THROW(bench::run(config), Error);
}

TEST(Bench, FormatsCarryIdenticalNumbers) {
    auto const report = bench::run(fixture_config({1, 5, 6}, 1));
    ASSERT_FALSE(report.any_failed());
    auto const from_csv = bench::cells_from_csv(bench::render_csv(report));
    auto const from_json = bench::cells_from_report(bench::render_report(report));
    ASSERT_EQ(from_csv.size(), 3u);
    ASSERT_EQ(from_json.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        auto const &a = from_csv[i], &b = from_json[i], &c = report.cells[i];
        EXPECT_EQ(a.method, b.method);
        EXPECT_EQ(a.case_name, b.case_name);
        for (auto [x, y, z] : {std::tuple{a.approx_error, b.approx_error, c.approx_error},
                               {a.eps_f, b.eps_f, c.eps_f},
                               {a.eps_pg, b.eps_pg, c.eps_pg},
                               {a.eps_v, b.eps_v, c.eps_v},
                               {a.out_ratio, b.out_ratio, c.out_ratio},
                               {a.eps_v_out, b.eps_v_out, c.eps_v_out},
                               {a.wall_time_s, b.wall_time_s, c.wall_time_s},
                               {a.objective, b.objective, c.objective}}) {
            EXPECT_EQ(x, y);
            EXPECT_EQ(x, z);
        }
        EXPECT_EQ(a.n_above, b.n_above);
        EXPECT_EQ(a.n_below, b.n_below);
    }
}

TEST(Bench, ReportsAreDeterministicApartFromTiming) {
    auto const a = bench::run(fixture_config({1, 2, 3, 4, 5, 6, 7}));
    auto const b = bench::run(fixture_config({1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(bench::render_report(a), bench::render_report(b));
    EXPECT_EQ(bench::render_csv(a), bench::render_csv(b));
}

TEST(Bench, LossMethodsInheritMethod1Accuracy) {
    auto const report = bench::run(fixture_config({1, 6, 7}));
    ASSERT_EQ(report.cells.size(), 3u);
    EXPECT_EQ(report.cells[1].approx_error, report.cells[0].approx_error);
    EXPECT_EQ(report.cells[2].approx_error, report.cells[0].approx_error);
}

TEST(Bench, FixtureChecksums) {
    auto const report = bench::run(fixture_config({}));
    auto const text = testing_support::case_text("case14");
    EXPECT_EQ(report.fixtures[0].at("checksum").get<std::string>(), bench::checksum(text));
    EXPECT_EQ(bench::checksum(""), "cbf29ce484222325");
}

TEST(Bench, AlphaMap) {
    auto const alpha = bench::parse_alpha(R"({"default": 1.1, "branches": {"2": 0.9}})", 3);
    EXPECT_EQ(alpha, (std::vector<double>{1.1, 0.9, 1.1}));
    EXPECT_THROW(bench::parse_alpha(R"({"branches": {"4": 1.0}})", 3), Error);
}

TEST(Bench, ValidateFixture) {
    auto const result = bench::validate_case(testing_support::case_text("case14"));
    ASSERT_TRUE(result.ok);
    EXPECT_LE(result.iterations, 6);
    EXPECT_EQ(result.messages.back(), "OK, NR converged in " + std::to_string(result.iterations) + " iterations");
}

TEST(Bench, ValidateCorruptedFile) {
    auto text = testing_support::case_text("case14");
    text.replace(text.find("94.2"), 4, "94.2x");
    auto const result = bench::validate_case(text);
    EXPECT_FALSE(result.ok);
    ASSERT_EQ(result.messages.size(), 1u);
    EXPECT_NE(result.messages[0].find("line 18"), std::string::npos) << result.messages[0];
}

TEST(Bench, ValidateTwoIslands) {
    auto net = to_physical(two_bus(0.0, -4.0, 10.0));
    Bus b3 = net.buses[1], b4 = net.buses[1];
    b3.id = 3;
    b4.id = 4;
    net.buses.push_back(b3);
    net.buses.push_back(b4);
    Branch br = net.branches[0];
    br.from_bus = 3;
    br.to_bus = 4;
    net.branches.push_back(br);
    auto const result = bench::validate_case(matpower::serialize_case(to_per_unit(net)));
    EXPECT_FALSE(result.ok);
    bool found = false;
    for (auto const& m : result.messages) found |= m.find("connectivity violation") != std::string::npos;
    EXPECT_TRUE(found);
}

// ---- oracle ----

TEST(Oracle, SingleGeneratorBalances) {
    auto const net = two_bus(0.0, -10.0, 40.0);
    auto const r = bench::brute_force_opf_oracle(net, 1e-3);
    EXPECT_EQ(r.points, 1u);
    ASSERT_EQ(r.dispatch.size(), 1u);
    EXPECT_NEAR(r.dispatch[0], 0.4, 1e-9);
    EXPECT_NEAR(r.objective, 10.0 * 40.0 + 0.01 * 40.0 * 40.0, 1e-6);
}

TEST(Oracle, EqualMarginalCost) {
    // 0.04 p1 + 10 = 0.08 p2 + 8 with p1 + p2 = 100 MW gives p2 = 50 MW
    auto const net = dispatch_toy(100.0);
    double const step = 1e-3;
    auto const r = bench::brute_force_opf_oracle(net, step);
    EXPECT_LE(std::abs(r.dispatch[1] - 0.5), step);
    EXPECT_NEAR(r.dispatch[0] + r.dispatch[1], 1.0, 1e-8);
    auto const base = r.as_baseline(net);
    EXPECT_EQ(base.pg, r.dispatch);
    EXPECT_EQ(base.v_mag.size(), 2u);
}

TEST(Oracle, RefinementConsistency) {
    auto const net = dispatch_toy(87.3);
    auto const coarse = bench::brute_force_opf_oracle(net, 2e-2);
    auto const fine = bench::brute_force_opf_oracle(net, 1e-2);
    EXPECT_LE(fine.objective, coarse.objective + 1e-9);
    EXPECT_LE(coarse.objective - fine.objective, coarse.cell_variation + 1e-9);
}

TEST(Oracle, Errors) {
    EXPECT_THROW(bench::brute_force_opf_oracle(dispatch_toy(250.0, 100.0), 1e-2), NoFeasiblePoint);
    EXPECT_THROW(bench::brute_force_opf_oracle(dispatch_toy(50.0), 0.0), InconsistentModel);
    EXPECT_THROW(bench::brute_force_opf_oracle(load_case("case14"), 1e-2), InconsistentModel);
}

// ---- command line ----

class Cli : public ::testing::Test {
  protected:
    void SetUp() override { dir_ = scratch_dir(); }
    void TearDown() override { fs::remove_all(dir_); }

    std::string read(char const* name) const { return testing_support::slurp(dir_ / name); }
    int cli(std::string const& args) { return run_cli(args, dir_ / "out.txt", dir_ / "err.txt"); }

    fs::path dir_;
    std::string const data_ = testing_support::data_dir().string();
};

TEST_F(Cli, RunScoreRoundTrip) {
    auto const report = (dir_ / "report.json").string();
    ASSERT_EQ(cli("run --cases " + data_ + "/case14.m --baselines " + data_ +
                  "/case14_baseline.json --methods 1,2,6 --repeat 1 --format report --out " + report),
              0)
        << read("err.txt");
    auto const doc = nlohmann::json::parse(testing_support::slurp(report));
    EXPECT_EQ(doc.at("cells").size(), 3u);
    EXPECT_EQ(doc.at("version").get<std::string>(), bench::kVersion);
    ASSERT_EQ(cli("score --in " + report + " --svg " + (dir_ / "radar.svg").string()), 0) << read("err.txt");
    auto const scores = nlohmann::json::parse(read("out.txt"));
    EXPECT_EQ(scores.at("methods").size(), 3u);
    EXPECT_NE(read("radar.svg").find("<svg"), std::string::npos);
}

TEST_F(Cli, EmptySelectionAndMissingBaseline) {
    EXPECT_EQ(cli("run --cases " + data_ + "/case14.m --baselines " + data_ + "/case14_baseline.json"), 0);
    EXPECT_EQ(cli("run --cases " + data_ + "/case14.m --baselines /nonexistent.json --methods 1"), 1);
    EXPECT_NE(read("err.txt").find("baseline not found: /nonexistent.json"), std::string::npos);
}

TEST_F(Cli, ValidateAndOracle) {
    EXPECT_EQ(cli("validate " + data_ + "/case14.m"), 0);
    EXPECT_EQ(read("out.txt").rfind("OK, NR converged in ", 0), 0u) << read("out.txt");
    auto const toy = dir_ / "toy.m";
    std::ofstream(toy) << matpower::serialize_case(dispatch_toy(100.0));
    ASSERT_EQ(cli("oracle " + toy.string() + " --step 1e-2"), 0) << read("err.txt");
    EXPECT_NE(read("out.txt").find("gen 2 bus 2 pg_mw 50"), std::string::npos) << read("out.txt");
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(cli(""), 1);
    EXPECT_EQ(cli("run --cases a.m --baselines a.json --format xml"), 1);
    EXPECT_EQ(cli("score --in /nonexistent.json"), 1);
}
