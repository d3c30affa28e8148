#pragma once

// Reader and writer for the MATPOWER case-file format (version 2).
//
// Only the assignment subset used by case files is understood: `function mpc = name`,
// scalar/string fields and numeric matrices written as `mpc.field = [ ... ];`.
// Other `mpc.*` assignments (cell arrays such as bus_name) are kept as raw text.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "powerlin/errors.hpp"
#include "powerlin/network.hpp"

namespace powerlin::matpower {

struct NumericMatrix {
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> source_lines;  // 1-based line of each row

    std::size_t row_count() const { return rows.size(); }
    std::size_t column_count() const { return rows.empty() ? 0 : rows.front().size(); }
};

struct CaseFileAst {
    std::string name;
    std::string version;
    double base_mva = 0.0;
    std::map<std::string, NumericMatrix> matrices;
    std::vector<std::string> opaque_blocks;

    NumericMatrix const& matrix(std::string const& key) const {
        auto it = matrices.find(key);
        if (it == matrices.end()) throw MissingMatrix(key);
        return it->second;
    }
};

namespace detail {

class Scanner {
  public:
    explicit Scanner(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }
    std::size_t pos() const { return pos_; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return pos_ - line_start_ + 1; }
    std::string_view slice(std::size_t from, std::size_t to) const {
        return text_.substr(from, to - from);
    }

    char get() {
        char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            line_start_ = pos_;
        }
        return c;
    }

    [[noreturn]] void fail(std::string const& message) const {
        throw SyntaxError(line_, column(), message);
    }

    void skip_comment() {
        while (!done() && peek() != '\n') get();
    }

    /// Skips blanks and comments, optionally stopping at newlines.
    void skip_space(bool cross_newlines) {
        while (!done()) {
            char c = peek();
            if (c == '%') {
                skip_comment();
            } else if (c == '.' && peek(1) == '.' && peek(2) == '.') {
                skip_comment();  // continuation: rest of line ignored
                if (!done()) get();
            } else if (c == ' ' || c == '\t' || c == '\r' || (cross_newlines && c == '\n')) {
                get();
            } else {
                break;
            }
        }
    }

    std::string identifier() {
        std::size_t start = pos_;
        while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) get();
        if (start == pos_) fail("expected identifier");
        return std::string(slice(start, pos_));
    }

    double number() {
        std::size_t start = pos_;
        bool negative = false;
        if (peek() == '+' || peek() == '-') {
            negative = peek() == '-';
            get();
        }
        std::size_t body = pos_;
        if (text_.compare(pos_, 3, "Inf") == 0) {
            for (int i = 0; i < 3; ++i) get();
            return negative ? -HUGE_VAL : HUGE_VAL;
        }
        if (text_.compare(pos_, 3, "NaN") == 0) {
            for (int i = 0; i < 3; ++i) get();
            return std::nan("");
        }
        while (!done()) {
            char c = peek();
            bool exponent_sign = (c == '+' || c == '-') && pos_ > body &&
                                 (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E');
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' ||
                exponent_sign)
                get();
            else
                break;
        }
        double value = 0.0;
        auto [end, ec] = std::from_chars(text_.data() + body, text_.data() + pos_, value);
        if (ec != std::errc() || end != text_.data() + pos_ || body == pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return negative ? -value : value;
    }

  private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t line_start_ = 0;
};

inline NumericMatrix parse_matrix(Scanner& s) {
    NumericMatrix m;
    std::vector<double> row;
    std::size_t row_line = s.line();
    auto finish_row = [&] {
        if (row.empty()) return;
        if (!m.rows.empty() && row.size() != m.rows.front().size())
            s.fail("row has " + std::to_string(row.size()) + " columns, expected " +
                   std::to_string(m.rows.front().size()));
        m.rows.push_back(std::move(row));
        m.source_lines.push_back(row_line);
        row.clear();
    };
    s.get();  // '['
    while (true) {
        s.skip_space(false);
        if (s.done()) s.fail("unterminated matrix");
        char c = s.peek();
        if (c == ']') {
            finish_row();
            s.get();
            return m;
        }
        if (c == ';' || c == '\n') {
            finish_row();
            s.get();
            continue;
        }
        if (c == ',') {
            s.get();
            continue;
        }
        if (row.empty()) row_line = s.line();
        row.push_back(s.number());
        char next = s.peek();
        if (!(next == ' ' || next == '\t' || next == '\r' || next == '\n' || next == ',' ||
              next == ';' || next == ']' || next == '%'))
            s.fail("unexpected character '" + std::string(1, next) + "' in matrix");
    }
}

/// Consumes an assignment right-hand side that is not interpreted, up to its closing ';'
/// or end of line at bracket depth zero.
inline void skip_opaque_value(Scanner& s) {
    int depth = 0;
    bool in_string = false;
    while (!s.done()) {
        char c = s.peek();
        if (in_string) {
            s.get();
            if (c == '\'') in_string = false;
            continue;
        }
        if (c == '\'') {
            in_string = true;
        } else if (c == '[' || c == '{' || c == '(') {
            ++depth;
        } else if (c == ']' || c == '}' || c == ')') {
            --depth;
        } else if (c == '%' ) {
            s.skip_comment();
            continue;
        } else if (depth == 0 && (c == ';' || c == '\n')) {
            if (c == ';') s.get();
            return;
        }
        s.get();
    }
    if (depth != 0 || in_string) s.fail("unterminated value");
}

}  // namespace detail

inline CaseFileAst parse_case(std::string_view text) {
    CaseFileAst ast;
    detail::Scanner s(text);
    bool any_statement = false;

    while (true) {
        s.skip_space(true);
        if (s.done()) break;
        if (s.peek() == ';') {
            s.get();
            continue;
        }
        std::size_t const statement_start = s.pos();
        std::string head = s.identifier();
        if (head == "function") {
            s.skip_space(false);
            std::string lhs = s.identifier();
            s.skip_space(false);
            if (s.peek() != '=') s.fail("expected '=' in function header");
            s.get();
            s.skip_space(false);
            ast.name = s.identifier();
            (void)lhs;
            any_statement = true;
            continue;
        }
        if (head == "end" || head == "return") {
            any_statement = true;
            continue;
        }
        if (head != "mpc" || s.peek() != '.') s.fail("expected 'mpc.<field> = ...'");
        s.get();
        std::string field = s.identifier();
        s.skip_space(false);
        if (s.peek() != '=') s.fail("expected '=' after mpc." + field);
        s.get();
        s.skip_space(false);
        any_statement = true;

        bool const core = field == "bus" || field == "gen" || field == "branch" ||
                          field == "gencost" || field == "baseMVA" || field == "version";
        if (!core) {
            detail::skip_opaque_value(s);
            std::string block(s.slice(statement_start, s.pos()));
            while (!block.empty() && (block.back() == '\n' || block.back() == '\r'))
                block.pop_back();
            if (block.back() != ';') block.push_back(';');
            ast.opaque_blocks.push_back(std::move(block));
            continue;
        }
        if (field == "version") {
            if (s.peek() != '\'') s.fail("expected quoted version string");
            s.get();
            std::size_t start = s.pos();
            while (!s.done() && s.peek() != '\'' && s.peek() != '\n') s.get();
            if (s.peek() != '\'') s.fail("unterminated string");
            ast.version = std::string(s.slice(start, s.pos()));
            s.get();
        } else if (field == "baseMVA") {
            ast.base_mva = s.number();
            ast.matrices["baseMVA"];  // presence marker
        } else {
            if (s.peek() != '[') s.fail("expected '[' to open mpc." + field);
            ast.matrices[field] = detail::parse_matrix(s);
        }
        s.skip_space(false);
        if (s.peek() == ';') s.get();
        s.skip_space(false);
        if (!s.done() && s.peek() != '\n') s.fail("unexpected text after mpc." + field);
    }

    if (!any_statement) throw SyntaxError(1, 1, "empty case file");
    for (char const* required : {"baseMVA", "bus", "gen", "branch", "gencost"})
        if (!ast.matrices.count(required)) throw MissingMatrix(required);
    ast.matrices.erase("baseMVA");

    auto check_columns = [&](char const* key, std::size_t minimum) {
        auto const& m = ast.matrices.at(key);
        if (m.row_count() > 0 && m.column_count() < minimum)
            throw SyntaxError(m.source_lines.front(), 1,
                              std::string("mpc.") + key + " needs at least " +
                                  std::to_string(minimum) + " columns");
    };
    check_columns("bus", 13);
    check_columns("branch", 13);
    check_columns("gen", 10);
    check_columns("gencost", 4);
    auto const& gen = ast.matrices.at("gen");
    auto const& gencost = ast.matrices.at("gencost");
    if (gencost.row_count() != gen.row_count() && gencost.row_count() != 2 * gen.row_count())
        throw SyntaxError(gencost.row_count() ? gencost.source_lines.front() : 1, 1,
                          "mpc.gencost rows do not align with mpc.gen rows");
    return ast;
}

namespace detail {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

inline int as_int(double v, std::size_t line, char const* what) {
    if (v != std::floor(v)) throw SyntaxError(line, 1, std::string(what) + " must be an integer");
    return static_cast<int>(v);
}

}  // namespace detail

/// Maps the raw matrices onto a per-unit Network. Out-of-service branches and generators are dropped.
inline Network lower_case(CaseFileAst const& ast) {
    Network net;
    net.name = ast.name;
    net.base_mva = ast.base_mva;
    net.opaque_blocks = ast.opaque_blocks;

    auto const& bus = ast.matrix("bus");
    for (std::size_t i = 0; i < bus.row_count(); ++i) {
        auto const& row = bus.rows[i];
        std::size_t line = bus.source_lines[i];
        Bus b;
        b.id = detail::as_int(row[0], line, "bus id");
        int const type = detail::as_int(row[1], line, "bus type");
        if (type < 1 || type > 3)
            throw InvalidBusType("code " + std::to_string(type) + " at bus " + std::to_string(b.id) +
                                 " (line " + std::to_string(line) + ")");
        b.kind = static_cast<BusKind>(type);
        b.p_load = row[2];
        b.q_load = row[3];
        b.shunt_g = row[4];
        b.shunt_b = row[5];
        b.area = detail::as_int(row[6], line, "area");
        b.v_mag = row[7];
        b.v_ang = detail::deg_to_rad(row[8]);
        b.base_kv = row[9];
        b.zone = detail::as_int(row[10], line, "zone");
        b.v_max = row[11];
        b.v_min = row[12];
        net.buses.push_back(b);
    }

    auto const& branch = ast.matrix("branch");
    for (std::size_t i = 0; i < branch.row_count(); ++i) {
        auto const& row = branch.rows[i];
        std::size_t line = branch.source_lines[i];
        Branch br;
        br.from_bus = detail::as_int(row[0], line, "from bus");
        br.to_bus = detail::as_int(row[1], line, "to bus");
        br.r = row[2];
        br.x = row[3];
        br.b_charge = row[4];
        br.rate_a = row[5];
        br.rate_b = row[6];
        br.rate_c = row[7];
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        br.shift = detail::deg_to_rad(row[9]);
        br.status = row[10] != 0.0;
        br.ang_min = detail::deg_to_rad(row[11]);
        br.ang_max = detail::deg_to_rad(row[12]);
        if (br.status) net.branches.push_back(br);
    }

    auto const& gen = ast.matrix("gen");
    auto const& gencost = ast.matrix("gencost");
    for (std::size_t i = 0; i < gen.row_count(); ++i) {
        auto const& row = gen.rows[i];
        Generator g;
        g.bus = detail::as_int(row[0], gen.source_lines[i], "generator bus");
        g.p_gen = row[1];
        g.q_gen = row[2];
        g.q_max = row[3];
        g.q_min = row[4];
        g.v_set = row[5];
        g.m_base = row[6];
        g.status = row[7] > 0.0;
        g.p_max = row[8];
        g.p_min = row[9];

        auto const& cost = gencost.rows[i];
        std::size_t cline = gencost.source_lines[i];
        int const model = detail::as_int(cost[0], cline, "cost model");
        if (model == 1)
            throw UnsupportedCostModel("piecewise-linear gencost at line " + std::to_string(cline));
        if (model != 2)
            throw UnsupportedCostModel("model code " + std::to_string(model) + " at line " +
                                       std::to_string(cline));
        g.startup = detail::as_int(cost[1], cline, "startup cost");
        g.shutdown = detail::as_int(cost[2], cline, "shutdown cost");
        int const n = detail::as_int(cost[3], cline, "coefficient count");
        if (n < 0 || 4 + static_cast<std::size_t>(n) > cost.size())
            throw SyntaxError(cline, 1, "gencost row lists fewer coefficients than declared");
        g.cost.coefficients.resize(n);
        for (int k = 0; k < n; ++k) g.cost.coefficients[n - 1 - k] = cost[4 + k];
        if (g.status) net.generators.push_back(std::move(g));
    }
    return to_per_unit(std::move(net));
}

namespace detail {

inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    if (std::isnan(v)) return "NaN";
    if (v == 0.0) return "0";
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
    return std::string(buffer, end);
}

inline void write_row(std::string& out, std::vector<double> const& row) {
    out += '\t';
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (k) out += '\t';
        out += format_number(row[k]);
    }
    out += ";\n";
}

}  // namespace detail

/// Writes a MATPOWER version-2 case file. Numbers use the shortest round-trip representation.
inline std::string serialize_case(Network const& input) {
    Network const net = to_physical(input);
    std::string name = net.name.empty() ? "powerlin_case" : net.name;
    std::string out;
    out += "function mpc = " + name + "\n";
    out += "mpc.version = '2';\n";
    out += "mpc.baseMVA = " + detail::format_number(net.base_mva) + ";\n\n";

    out += "%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    out += "mpc.bus = [\n";
    for (auto const& b : net.buses)
        detail::write_row(out, {double(b.id), double(static_cast<int>(b.kind)), b.p_load, b.q_load,
                                b.shunt_g, b.shunt_b, double(b.area), b.v_mag,
                                detail::rad_to_deg(b.v_ang), b.base_kv, double(b.zone), b.v_max,
                                b.v_min});
    out += "];\n\n";

    out += "%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    out += "mpc.gen = [\n";
    for (auto const& g : net.generators)
        detail::write_row(out, {double(g.bus), g.p_gen, g.q_gen, g.q_max, g.q_min, g.v_set,
                                g.m_base, g.status ? 1.0 : 0.0, g.p_max, g.p_min});
    out += "];\n\n";

    out += "%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    out += "mpc.branch = [\n";
    for (auto const& br : net.branches)
        detail::write_row(out, {double(br.from_bus), double(br.to_bus), br.r, br.x, br.b_charge,
                                br.rate_a, br.rate_b, br.rate_c, br.tap,
                                detail::rad_to_deg(br.shift), br.status ? 1.0 : 0.0,
                                detail::rad_to_deg(br.ang_min), detail::rad_to_deg(br.ang_max)});
    out += "];\n\n";

    std::size_t width = 0;
    for (auto const& g : net.generators) width = std::max(width, g.cost.coefficients.size());
    out += "%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\n";
    out += "mpc.gencost = [\n";
    for (auto const& g : net.generators) {
        std::vector<double> row{2.0, double(g.startup), double(g.shutdown),
                                double(g.cost.coefficients.size())};
        for (auto it = g.cost.coefficients.rbegin(); it != g.cost.coefficients.rend(); ++it)
            row.push_back(*it);
        row.resize(4 + width, 0.0);
        detail::write_row(out, row);
    }
    out += "];\n";

    for (auto const& block : net.opaque_blocks) out += "\n" + block + "\n";
    return out;
}

inline Network read_network(std::string_view text) { return lower_case(parse_case(text)); }

}  // namespace powerlin::matpower
