// powerlin: benchmark linearized power flow models in an active-power OPF.
//
//   powerlin run --cases a.m b.m --baselines a.json b.json --methods 1,2,3 --format report --out r.json
//   powerlin score --in r.json --out scores.json --svg radar.svg
//   powerlin validate case.m
//   powerlin oracle tiny.m --step 1e-3
//
// Exit codes: 0 success, 1 configuration or IO error, 2 failed cells or validation violations.
// POWERLIN_SEED is reserved; nothing in the tool is stochastic.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "powerlin/bench.hpp"

namespace {

int write_output(std::string const& path, std::string const& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return 0;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "cannot write " << path << "\n";
        return 1;
    }
    out << content;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace powerlin;
    CLI::App app{"Linearized power flow benchmark"};
    app.require_subcommand(1);

    bench::RunConfig config;
    std::vector<std::string> cases, baselines;
    std::string format = "text", out_path, pf_vset = "case", loss_split = "half", alpha, reduction = "mean-square";
    auto* run = app.add_subcommand("run", "Run methods on cases and report metrics");
    run->add_option("--cases", cases, "MATPOWER case files")->required();
    run->add_option("--baselines", baselines, "Reference solutions, one per case (JSON)")->required();
    run->add_option("--methods", config.methods, "Methods to run (1-7)")->delimiter(',');
    run->add_option("--iters", config.iterations, "Loss-loop iterations for methods 6 and 7");
    run->add_option("--repeat", config.repetitions, "Timing repetitions (0 disables timing)");
    run->add_option("--format", format, "text, csv or report")->check(CLI::IsMember({"text", "csv", "report"}));
    run->add_option("--out", out_path, "Output file (stdout when omitted)");
    run->add_option("--pf-vset", pf_vset, "Validation voltage setpoints: case or baseline")
        ->check(CLI::IsMember({"case", "baseline"}));
    run->add_option("--loss-split", loss_split, "Loss allocation: half, from or to")
        ->check(CLI::IsMember({"half", "from", "to"}));
    run->add_option("--alpha", alpha, "Per-branch loss scaling map (JSON)");
    run->add_option("--error-reduction", reduction, "Approximation error: mean-square or rms")
        ->check(CLI::IsMember({"mean-square", "rms"}));

    std::string score_in, score_out, svg_out;
    auto* score = app.add_subcommand("score", "Score methods from a JSON report");
    score->add_option("--in", score_in, "Report written by 'run --format report'")->required();
    score->add_option("--out", score_out, "Output file (stdout when omitted)");
    score->add_option("--svg", svg_out, "Also write a radar chart");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Parse, check and solve a case at its stored dispatch");
    validate->add_option("case", validate_path, "Case file")->required();

    std::string oracle_path;
    double step = 1e-3;
    auto* oracle = app.add_subcommand("oracle", "Grid-search OPF for tiny cases");
    oracle->add_option("case", oracle_path, "Case file")->required();
    oracle->add_option("--step", step, "Grid step in per-unit");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int const code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run) {
            for (auto const& c : cases) config.case_paths.emplace_back(c);
            for (auto const& b : baselines) config.baseline_paths.emplace_back(b);
            config.format = format == "csv" ? bench::OutputFormat::Csv
                            : format == "report" ? bench::OutputFormat::Report
                                                 : bench::OutputFormat::Text;
            config.setpoints = pf_vset == "baseline" ? bench::SetpointSource::Baseline : bench::SetpointSource::Case;
            config.loss_split = *parse_loss_split(loss_split);
            if (!alpha.empty()) config.alpha_path = alpha;
            config.error_reduction = reduction == "rms" ? ErrorReduction::Rms : ErrorReduction::MeanSquare;
            auto const report = bench::run(config);
            if (write_output(out_path, bench::render(report, config.format)) != 0) return 1;
            if (report.any_failed()) {
                for (auto const& c : report.cells)
                    if (c.failed)
                        std::cerr << "FAILED method " << c.method << " on " << c.case_name << ": " << c.error << "\n";
                return 2;
            }
            return 0;
        }
        if (*score) {
            auto const cells = bench::cells_from_report(bench::read_text(score_in, "report"));
            auto const scores = bench::score_cells(cells);
            if (write_output(score_out, bench::render_scores(scores)) != 0) return 1;
            if (!svg_out.empty() && write_output(svg_out, bench::render_radar_svg(scores)) != 0) return 1;
            return 0;
        }
        if (*validate) {
            auto const result = bench::validate_case(bench::read_text(validate_path, "case"));
            for (auto const& m : result.messages) std::cout << m << "\n";
            return result.ok ? 0 : 2;
        }
        if (*oracle) {
            auto const net = matpower::read_network(bench::read_text(oracle_path, "case"));
            auto const result = bench::brute_force_opf_oracle(net, step);
            std::cout << "objective " << bench::number(result.objective) << "\n";
            std::cout << "cell_variation " << bench::number(result.cell_variation) << "\n";
            std::cout << "points " << result.points << " feasible " << result.feasible_points << "\n";
            for (std::size_t k = 0; k < result.dispatch.size(); ++k)
                std::cout << "gen " << k + 1 << " bus " << net.generators[k].bus << " pg_mw "
                          << bench::number(result.dispatch[k] * net.base_mva) << "\n";
            return 0;
        }
    } catch (IncompleteMatrix const& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (NoFeasiblePoint const& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (std::exception const& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
