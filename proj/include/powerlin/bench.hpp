#pragma once

// Benchmark harness: runs every (method, case) cell through
//   linear OPF (or loss loop) -> AC power flow with the dispatch fixed -> metrics,
// renders the results as text tables, CSV or a JSON report, and scores methods from a report.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powerlin/ac_engine.hpp"
#include "powerlin/baseline.hpp"
#include "powerlin/errors.hpp"
#include "powerlin/evaluation.hpp"
#include "powerlin/matpower.hpp"
#include "powerlin/network.hpp"
#include "powerlin/opf.hpp"

namespace powerlin::bench {

inline constexpr char const* kVersion = "1.0.0";

enum class OutputFormat { Text, Csv, Report };
enum class SetpointSource { Case, Baseline };

struct RunConfig {
    std::vector<std::filesystem::path> case_paths;
    std::vector<std::filesystem::path> baseline_paths;
    std::vector<int> methods;
    int iterations = 4;
    int repetitions = 100;
    OutputFormat format = OutputFormat::Text;
    SetpointSource setpoints = SetpointSource::Case;
    LossSplit loss_split = LossSplit::Half;
    std::optional<std::filesystem::path> alpha_path;
    ErrorReduction error_reduction = ErrorReduction::MeanSquare;
    double pf_tolerance = 1e-8;
};

struct Fixture {
    std::string name;
    std::filesystem::path path;
    std::filesystem::path baseline_path;
    std::string checksum;
    std::string baseline_checksum;
    Network network;
    BaselineSolution baseline;
    std::vector<double> alpha;  // per branch, empty means 1
};

struct MethodScore {
    int method = 0;
    AxisValues aggregates{};
    AxisValues scores{};
    double area = 0.0;
    std::array<std::array<double, 2>, 4> vertices{};
};

struct BenchmarkReport {
    nlohmann::json config;
    std::vector<nlohmann::json> fixtures;
    std::vector<MetricsReport> cells;
    std::vector<MethodScore> scores;

    bool any_failed() const {
        return std::any_of(cells.begin(), cells.end(), [](auto const& c) { return c.failed; });
    }
};

inline std::string read_text(std::filesystem::path const& path, char const* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(std::string(what) + " not found: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

/// 64-bit FNV-1a, hex encoded.
inline std::string checksum(std::string const& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Per-branch scaling factors from a JSON object: {"default": 1.0, "branches": {"3": 1.05}},
/// with 1-based branch positions.
inline std::vector<double> parse_alpha(std::string const& text, std::size_t branch_count) {
    auto const doc = nlohmann::json::parse(text);
    std::vector<double> alpha(branch_count, doc.value("default", 1.0));
    if (doc.contains("branches")) {
        for (auto const& [key, value] : doc.at("branches").items()) {
            std::size_t const k = std::stoul(key);
            if (k < 1 || k > branch_count) throw Error("alpha entry for unknown branch " + key);
            alpha[k - 1] = value.get<double>();
        }
    }
    return alpha;
}

inline Fixture load_fixture(std::filesystem::path const& case_path, std::filesystem::path const& baseline_path,
                            std::optional<std::filesystem::path> const& alpha_path = {}) {
    Fixture fx;
    fx.path = case_path;
    fx.baseline_path = baseline_path;
    auto const text = read_text(case_path, "case");
    fx.checksum = checksum(text);
    fx.network = matpower::read_network(text);
    fx.name = fx.network.name.empty() ? case_path.stem().string() : fx.network.name;
    require_valid(fx.network);
    auto const base_text = read_text(baseline_path, "baseline");
    fx.baseline_checksum = checksum(base_text);
    fx.baseline = parse_baseline(base_text, fx.network);
    if (alpha_path) fx.alpha = parse_alpha(read_text(*alpha_path, "alpha map"), fx.network.branch_count());
    return fx;
}

inline LossIterationOptions loop_options(RunConfig const& config, Fixture const& fx) {
    LossIterationOptions options;
    options.iterations = config.iterations;
    options.split = config.loss_split;
    options.alpha = fx.alpha;
    return options;
}

/// Voltage setpoints for the validation power flow.
inline std::vector<double> validation_setpoints(Fixture const& fx, SetpointSource source) {
    if (source == SetpointSource::Case) return ac::case_setpoints(fx.network);
    BusIndex const index(fx.network);
    std::vector<double> out;
    for (auto const& gen : fx.network.generators) out.push_back(fx.baseline.v_mag[index.at(gen.bus)]);
    return out;
}

/// One (method, case) cell. Failures are captured in the returned record.
inline MetricsReport run_cell(int method, Fixture const& fx, RunConfig const& config,
                              std::optional<double> method1_error = {}) {
    MetricsReport cell;
    cell.method = method;
    cell.case_name = fx.name;
    try {
        auto const options = loop_options(config, fx);
        if (method >= 1 && method <= 5) {
            cell.approx_error = approx_error(build_method(method, fx.network), fx.baseline, config.error_reduction);
        } else {
            cell.approx_error = method1_error ? *method1_error
                                              : approx_error(build_method1(fx.network), fx.baseline, config.error_reduction);
        }
        auto const sol = run_any_method(method, fx.network, options);
        cell.status = qp::to_string(sol.status);
        if (!sol.optimal()) {
            cell.failed = true;
            cell.error = "OPF status " + cell.status;
            return cell;
        }
        auto const setpoints = validation_setpoints(fx, config.setpoints);
        ac::PowerFlowOptions pf;
        pf.tolerance = config.pf_tolerance;
        auto const state = validate_dispatch(fx.network, sol.pg, setpoints, pf);
        auto const opt = optimality_errors(state, fx.network, fx.baseline);
        cell.objective = opt.objective;
        cell.eps_f = opt.eps_f;
        cell.eps_pg = opt.eps_pg;
        cell.eps_v = opt.eps_v;
        auto const feas = feasibility_check(state, fx.network, fx.baseline);
        cell.n_out = feas.n_out;
        cell.n_above = feas.n_above;
        cell.n_below = feas.n_below;
        cell.out_ratio = feas.out_ratio;
        cell.eps_v_out = feas.eps_v_out;
        cell.wall_time_s = time_method(method, fx.network, config.repetitions, options);
    } catch (std::exception const& e) {
        cell.failed = true;
        if (cell.status == "Optimal") cell.status = "Error";
        cell.error = e.what();
    }
    return cell;
}

/// Per-method axis aggregates over all cases. Methods 6 and 7 already carry Method 1's
/// accuracy value. Zero sums are floored at the relative guard so that they can be scored.
inline std::vector<MethodScore> score_cells(std::vector<MetricsReport> const& cells) {
    std::map<int, AxisValues> sums;
    std::set<std::string> cases;
    std::map<int, std::set<std::string>> seen;
    for (auto const& c : cells) {
        cases.insert(c.case_name);
        if (c.failed) throw IncompleteMatrix("cell (method " + std::to_string(c.method) + ", " + c.case_name + ") failed");
        seen[c.method].insert(c.case_name);
        auto& s = sums[c.method];
        s[0] += c.approx_error;
        s[1] += c.eps_f + c.eps_pg + c.eps_v;
        s[2] += c.out_ratio + c.eps_v_out;
        s[3] += c.wall_time_s;
    }
    for (auto const& [m, cs] : seen)
        if (cs != cases) throw IncompleteMatrix("method " + std::to_string(m) + " is missing cases");
    std::vector<MethodScore> out;
    std::vector<AxisValues> aggregates;
    for (auto& [m, s] : sums) {
        for (double& v : s) v = std::max(v, kRelativeGuard);
        out.push_back({m, s, {}, 0.0, {}});
        aggregates.push_back(s);
    }
    auto const scored = score_methods(aggregates);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].scores = scored[i];
        out[i].area = radar_area(scored[i]);
        out[i].vertices = radar_vertices(scored[i]);
    }
    return out;
}

inline nlohmann::json config_echo(RunConfig const& config) {
    nlohmann::json j;
    std::vector<std::string> cases, baselines;
    for (auto const& p : config.case_paths) cases.push_back(p.string());
    for (auto const& p : config.baseline_paths) baselines.push_back(p.string());
    j["cases"] = cases;
    j["baselines"] = baselines;
    j["methods"] = config.methods;
    j["iterations"] = config.iterations;
    j["repetitions"] = config.repetitions;
    j["pf_vset"] = config.setpoints == SetpointSource::Case ? "case" : "baseline";
    j["loss_split"] = config.loss_split == LossSplit::Half ? "half" : config.loss_split == LossSplit::From ? "from" : "to";
    j["alpha"] = config.alpha_path ? config.alpha_path->string() : std::string{};
    j["error_reduction"] = config.error_reduction == ErrorReduction::Rms ? "rms" : "mean-square";
    j["pf_tolerance"] = config.pf_tolerance;
    return j;
}

/// Loads every fixture (IO and parse errors propagate) and runs the full matrix.
inline BenchmarkReport run(RunConfig const& config) {
    if (config.case_paths.size() != config.baseline_paths.size())
        throw Error("every case needs a baseline (" + std::to_string(config.case_paths.size()) + " cases, " +
                    std::to_string(config.baseline_paths.size()) + " baselines)");
    for (int m : config.methods)
        if (m < 1 || m > 7) throw Error("unknown method " + std::to_string(m));
    if (config.repetitions < 0) throw Error("repetitions must be non-negative");
    if (config.iterations < 1) throw Error("iteration count must be at least 1");

    BenchmarkReport report;
    report.config = config_echo(config);
    std::vector<Fixture> fixtures;
    for (std::size_t i = 0; i < config.case_paths.size(); ++i) {
        fixtures.push_back(load_fixture(config.case_paths[i], config.baseline_paths[i], config.alpha_path));
        auto const& fx = fixtures.back();
        report.fixtures.push_back({{"case", fx.name},
                                   {"path", fx.path.string()},
                                   {"checksum", fx.checksum},
                                   {"baseline", fx.baseline_path.string()},
                                   {"baseline_checksum", fx.baseline_checksum}});
    }
    if (config.methods.empty()) return report;

    for (auto const& fx : fixtures) {
        std::optional<double> m1_error;
        try {
            m1_error = approx_error(build_method1(fx.network), fx.baseline, config.error_reduction);
        } catch (std::exception const&) {
        }
        for (int m : config.methods) report.cells.push_back(run_cell(m, fx, config, m1_error));
    }
    if (!report.any_failed()) {
        try {
            report.scores = score_cells(report.cells);
        } catch (Error const&) {
        }
    }
    return report;
}

// ---- output ----

inline std::string number(double v) {
    if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    auto const res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline nlohmann::json cell_json(MetricsReport const& c) {
    return {{"method", c.method},           {"case", c.case_name},       {"status", c.status},
            {"failed", c.failed},           {"error", c.error},          {"approx_error", c.approx_error},
            {"eps_f", c.eps_f},             {"eps_pg", c.eps_pg},        {"eps_v", c.eps_v},
            {"n_out", c.n_out},             {"n_above", c.n_above},      {"n_below", c.n_below},
            {"out_ratio", c.out_ratio},     {"eps_v_out", c.eps_v_out},  {"wall_time_s", c.wall_time_s},
            {"objective", c.objective}};
}

inline MetricsReport cell_from_json(nlohmann::json const& j) {
    MetricsReport c;
    c.method = j.at("method").get<int>();
    c.case_name = j.at("case").get<std::string>();
    c.status = j.value("status", std::string("Optimal"));
    c.failed = j.value("failed", false);
    c.error = j.value("error", std::string{});
    c.approx_error = j.at("approx_error").get<double>();
    c.eps_f = j.at("eps_f").get<double>();
    c.eps_pg = j.at("eps_pg").get<double>();
    c.eps_v = j.at("eps_v").get<double>();
    c.n_out = j.at("n_out").get<int>();
    c.n_above = j.at("n_above").get<int>();
    c.n_below = j.at("n_below").get<int>();
    c.out_ratio = j.at("out_ratio").get<double>();
    c.eps_v_out = j.at("eps_v_out").get<double>();
    c.wall_time_s = j.at("wall_time_s").get<double>();
    c.objective = j.value("objective", 0.0);
    return c;
}

inline nlohmann::json scores_json(std::vector<MethodScore> const& scores) {
    auto out = nlohmann::json::array();
    for (auto const& s : scores) {
        nlohmann::json j;
        j["method"] = s.method;
        for (std::size_t a = 0; a < 4; ++a) {
            j["aggregates"][to_string(kScoreAxes[a])] = s.aggregates[a];
            j["scores"][to_string(kScoreAxes[a])] = s.scores[a];
        }
        j["area"] = s.area;
        j["vertices"] = s.vertices;
        out.push_back(j);
    }
    return out;
}

inline std::string render_report(BenchmarkReport const& r) {
    nlohmann::json j;
    j["tool"] = "powerlin";
    j["version"] = kVersion;
    j["config"] = r.config;
    j["fixtures"] = r.fixtures;
    auto cells = nlohmann::json::array();
    for (auto const& c : r.cells) cells.push_back(cell_json(c));
    j["cells"] = cells;
    j["scores"] = scores_json(r.scores);
    return j.dump(2) + "\n";
}

inline constexpr char const* kCsvHeader =
    "method,case,status,approx_error,eps_f,eps_pg,eps_v,n_out,n_above,n_below,out_ratio,eps_v_out,"
    "wall_time_s,objective";

inline std::string render_csv(BenchmarkReport const& r) {
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (auto const& c : r.cells) {
        out << c.method << ',' << c.case_name << ',' << (c.failed ? "FAILED" : c.status) << ','
            << number(c.approx_error) << ',' << number(c.eps_f) << ',' << number(c.eps_pg) << ','
            << number(c.eps_v) << ',' << c.n_out << ',' << c.n_above << ',' << c.n_below << ','
            << number(c.out_ratio) << ',' << number(c.eps_v_out) << ',' << number(c.wall_time_s) << ','
            << number(c.objective) << "\n";
    }
    return out.str();
}

inline std::string render_text(BenchmarkReport const& r) {
    std::vector<std::string> cases;
    std::vector<int> methods;
    std::map<std::pair<int, std::string>, MetricsReport const*> at;
    for (auto const& c : r.cells) {
        if (std::find(cases.begin(), cases.end(), c.case_name) == cases.end()) cases.push_back(c.case_name);
        if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
        at[{c.method, c.case_name}] = &c;
    }
    std::ostringstream out;
    auto fmt = [](double v, int precision = 4) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", precision, v);
        return std::string(buf);
    };
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.insert(0, w - s.size(), ' ');
        return s;
    };
    auto table = [&](std::string const& title, std::vector<std::string> const& columns,
                     auto const& values) {
        out << title << "\n" << pad("method", 8);
        for (auto const& cs : cases)
            for (auto const& col : columns) out << pad(cs + ":" + col, 18);
        out << "\n";
        for (int m : methods) {
            out << pad(std::to_string(m), 8);
            for (auto const& cs : cases) {
                auto const it = at.find({m, cs});
                auto const vals = it == at.end() ? std::vector<std::string>(columns.size(), "-") : values(*it->second);
                for (auto const& v : vals) out << pad(v, 18);
            }
            out << "\n";
        }
        out << "\n";
    };
    auto failed = [](MetricsReport const&, std::size_t n) { return std::vector<std::string>(n, "FAILED"); };

    table("Approximation error", {"eps"}, [&](MetricsReport const& c) {
        return std::vector<std::string>{fmt(c.approx_error)};
    });
    table("Optimality", {"eps_f", "eps_Pg", "eps_V"}, [&](MetricsReport const& c) {
        if (c.failed) return failed(c, 3);
        return std::vector<std::string>{fmt(c.eps_f), fmt(c.eps_pg), fmt(c.eps_v)};
    });
    table("Feasibility", {"out", "above", "below", "eps_Vout"}, [&](MetricsReport const& c) {
        if (c.failed) return failed(c, 4);
        return std::vector<std::string>{fmt(c.out_ratio), std::to_string(c.n_above), std::to_string(c.n_below),
                                        fmt(c.eps_v_out)};
    });
    table("Execution time [s]", {"time"}, [&](MetricsReport const& c) {
        if (c.failed) return failed(c, 1);
        return std::vector<std::string>{fmt(c.wall_time_s, 4)};
    });
    for (auto const& c : r.cells)
        if (c.failed) out << "FAILED method " << c.method << " on " << c.case_name << ": " << c.error << "\n";
    if (!r.scores.empty()) {
        out << "Scores (1-100)\n" << pad("method", 8);
        for (auto a : kScoreAxes) out << pad(to_string(a), 13);
        out << pad("area", 13) << "\n";
        for (auto const& s : r.scores) {
            out << pad(std::to_string(s.method), 8);
            for (double v : s.scores) out << pad(fmt(v, 2), 13);
            out << pad(fmt(s.area, 1), 13) << "\n";
        }
    }
    return out.str();
}

inline std::string render(BenchmarkReport const& r, OutputFormat format) {
    switch (format) {
        case OutputFormat::Csv: return render_csv(r);
        case OutputFormat::Report: return render_report(r);
        default: return render_text(r);
    }
}

inline std::vector<MetricsReport> cells_from_report(std::string const& text) {
    auto const doc = nlohmann::json::parse(text);
    std::vector<MetricsReport> cells;
    for (auto const& c : doc.at("cells")) cells.push_back(cell_from_json(c));
    if (cells.empty()) throw IncompleteMatrix("report contains no cells");
    return cells;
}

inline std::vector<MetricsReport> cells_from_csv(std::string const& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line != kCsvHeader) throw Error("unexpected CSV header");
    std::vector<MetricsReport> cells;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ',')) f.push_back(item);
        if (f.size() != 14) throw Error("malformed CSV row: " + line);
        auto num = [](std::string const& s) {
            double v = 0.0;
            std::from_chars(s.data(), s.data() + s.size(), v);
            return v;
        };
        MetricsReport c;
        c.method = std::stoi(f[0]);
        c.case_name = f[1];
        c.failed = f[2] == "FAILED";
        c.status = f[2];
        c.approx_error = num(f[3]);
        c.eps_f = num(f[4]);
        c.eps_pg = num(f[5]);
        c.eps_v = num(f[6]);
        c.n_out = std::stoi(f[7]);
        c.n_above = std::stoi(f[8]);
        c.n_below = std::stoi(f[9]);
        c.out_ratio = num(f[10]);
        c.eps_v_out = num(f[11]);
        c.wall_time_s = num(f[12]);
        c.objective = num(f[13]);
        cells.push_back(c);
    }
    return cells;
}

inline std::string render_scores(std::vector<MethodScore> const& scores) {
    nlohmann::json j;
    j["axes"] = {"accuracy", "optimality", "feasibility", "speed"};
    j["methods"] = scores_json(scores);
    return j.dump(2) + "\n";
}

inline std::string render_radar_svg(std::vector<MethodScore> const& scores) {
    static constexpr char const* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    double const c = 160.0, k = 1.3;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"460\" height=\"340\" viewBox=\"0 0 460 340\">\n";
    svg << "<g fill=\"none\" stroke=\"#bbb\">\n";
    for (int ring = 20; ring <= 100; ring += 20) {
        svg << "<polygon points=\"";
        for (auto const& v : radar_vertices({double(ring), double(ring), double(ring), double(ring)}))
            svg << c + k * v[0] << ',' << c - k * v[1] << ' ';
        svg << "\"/>\n";
    }
    svg << "</g>\n";
    auto const spokes = radar_vertices({100, 100, 100, 100});
    for (std::size_t a = 0; a < 4; ++a) {
        double const x = c + k * spokes[a][0] * 1.08, y = c - k * spokes[a][1] * 1.08;
        svg << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"11\" text-anchor=\"middle\">"
            << to_string(kScoreAxes[a]) << "</text>\n";
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto const* color = palette[i % 8];
        svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.12\" stroke=\"" << color << "\" points=\"";
        for (auto const& v : scores[i].vertices) svg << c + k * v[0] << ',' << c - k * v[1] << ' ';
        svg << "\"/>\n";
        svg << "<text x=\"340\" y=\"" << 30 + 18 * i << "\" font-size=\"12\" fill=\"" << color << "\">Method "
            << scores[i].method << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// ---- validation and oracle ----

struct ValidationResult {
    bool ok = false;
    std::vector<std::string> messages;
    int iterations = 0;
};

inline ValidationResult validate_case(std::string const& text) {
    ValidationResult out;
    Network net;
    try {
        net = matpower::read_network(text);
    } catch (Error const& e) {
        out.messages.push_back(std::string("parse error: ") + e.what());
        return out;
    }
    auto const violations = validate_network(net);
    for (auto const& v : violations) out.messages.push_back(v.to_string());
    if (!violations.empty()) return out;
    try {
        std::vector<double> dispatch;
        for (auto const& g : net.generators) dispatch.push_back(g.p_gen);
        auto const state = ac::solve_power_flow(net, dispatch, ac::case_setpoints(net));
        out.iterations = state.iterations;
        out.ok = true;
        out.messages.push_back("OK, NR converged in " + std::to_string(state.iterations) + " iterations");
    } catch (Error const& e) {
        out.messages.push_back(std::string("power flow: ") + e.what());
    }
    return out;
}

struct OracleResult {
    std::vector<double> dispatch;  // per generator, per-unit, slack included
    double objective = 0.0;
    /// Largest objective change between the optimum and its neighbouring grid points.
    double cell_variation = 0.0;
    std::size_t points = 0;
    std::size_t feasible_points = 0;
    ac::SteadyState state;

    BaselineSolution as_baseline(Network const& net) const {
        BaselineSolution b;
        b.case_name = net.name;
        b.objective = objective;
        b.v_mag = state.v_mag;
        b.v_ang = state.v_ang;
        b.pg = state.dispatch;
        b.branch_flow = state.branch_flow_from;
        return b;
    }
};

/// Exhaustive grid over the non-slack generator boxes; each point is priced after an AC power
/// flow in which the slack generator covers the balance. Points whose slack output leaves its box
/// or whose power flow fails are skipped.
inline OracleResult brute_force_opf_oracle(Network const& net, double grid_step) {
    if (!(grid_step > 0.0)) throw InconsistentModel("grid step must be positive");
    if (net.bus_count() > 3) throw InconsistentModel("oracle is limited to networks with at most 3 buses");
    std::size_t const slack = slack_position(net);
    BusIndex const index(net);
    std::optional<std::size_t> slack_gen;
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        if (index.at(net.generators[k].bus) == slack) {
            if (slack_gen) throw InconsistentModel("oracle needs exactly one generator at the slack bus");
            slack_gen = k;
        } else {
            free.push_back(k);
        }
    }
    if (!slack_gen) throw InconsistentModel("oracle needs a generator at the slack bus");
    if (free.size() > 2) throw InconsistentModel("oracle supports at most two dispatchable generators");

    std::vector<std::vector<double>> axes;
    for (auto k : free) {
        auto const& g = net.generators[k];
        std::vector<double> pts;
        auto const steps = static_cast<long>(std::floor((g.p_max - g.p_min) / grid_step + 1e-9));
        for (long s = 0; s <= steps; ++s) pts.push_back(g.p_min + static_cast<double>(s) * grid_step);
        if (pts.back() < g.p_max - 1e-12) pts.push_back(g.p_max);
        axes.push_back(std::move(pts));
    }
    std::size_t const n0 = axes.size() > 0 ? axes[0].size() : 1;
    std::size_t const n1 = axes.size() > 1 ? axes[1].size() : 1;
    std::vector<double> cost(n0 * n1, std::numeric_limits<double>::quiet_NaN());
    std::vector<ac::SteadyState> states(n0 * n1);

    auto const setpoints = ac::case_setpoints(net);
    OracleResult out;
    std::optional<std::size_t> best;
    auto const& sg = net.generators[*slack_gen];
    for (std::size_t a = 0; a < n0; ++a) {
        for (std::size_t b = 0; b < n1; ++b) {
            std::vector<double> dispatch(net.generator_count(), 0.0);
            if (axes.size() > 0) dispatch[free[0]] = axes[0][a];
            if (axes.size() > 1) dispatch[free[1]] = axes[1][b];
            ++out.points;
            try {
                auto state = ac::solve_power_flow(net, dispatch, setpoints);
                double const ps = state.dispatch[*slack_gen];
                if (ps < sg.p_min - 1e-12 || ps > sg.p_max + 1e-12) continue;
                std::size_t const id = a * n1 + b;
                cost[id] = dispatch_cost(net, state.dispatch);
                ++out.feasible_points;
                if (!best || cost[id] < cost[*best]) best = id;
                states[id] = std::move(state);
            } catch (Error const&) {
            }
        }
    }
    if (!best) throw NoFeasiblePoint("no grid point satisfies the generator limits");
    std::size_t const a = *best / n1, b = *best % n1;
    out.objective = cost[*best];
    out.state = states[*best];
    out.dispatch = out.state.dispatch;
    for (int da = -1; da <= 1; ++da)
        for (int db = -1; db <= 1; ++db) {
            long const na = static_cast<long>(a) + da, nb = static_cast<long>(b) + db;
            if (na < 0 || nb < 0 || na >= static_cast<long>(n0) || nb >= static_cast<long>(n1)) continue;
            double const v = cost[static_cast<std::size_t>(na) * n1 + static_cast<std::size_t>(nb)];
            if (!std::isnan(v)) out.cell_variation = std::max(out.cell_variation, std::abs(v - out.objective));
        }
    return out;
}

}  // namespace powerlin::bench
