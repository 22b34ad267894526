#pragma once

// Grid dump/load. CSV is row-major with a `# box .. res ..` header line.
// The JSON envelope {domain, res, values} serialises values with 17
// significant digits, which round-trips IEEE doubles bit-exactly.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "osc/grid.hpp"

namespace osc {

namespace detail {
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s(buf);
    // make sure the token reparses as a JSON number, not an integer-looking one
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}
}  // namespace detail

inline void dump_csv(const GridFunction& g, std::ostream& out) {
    out << "# box";
    for (int a = 0; a < g.dim(); ++a)
        out << " " << detail::fmt17(g.domain().lo[a]) << " " << detail::fmt17(g.domain().hi[a]);
    out << " res";
    for (int a = 0; a < g.dim(); ++a) out << " " << g.res(a);
    out << "\n";
    int row_len = g.res(0);
    for (std::int64_t k = 0; k < g.size(); ++k) {
        out << detail::fmt17(g[k]);
        out << ((k % row_len == row_len - 1) ? "\n" : ",");
    }
}

inline GridFunction load_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# box", 0) != 0)
        throw ConfigError("csv: missing '# box .. res ..' header line");
    std::istringstream hs(header.substr(5));
    std::vector<double> bounds;
    std::vector<int> res;
    std::string tok;
    bool in_res = false;
    while (hs >> tok) {
        if (tok == "res") {
            in_res = true;
        } else if (in_res) {
            res.push_back(std::stoi(tok));
        } else {
            bounds.push_back(std::stod(tok));
        }
    }
    if (res.empty() || bounds.size() != 2 * res.size())
        throw ConfigError("csv: malformed header counts");
    Box box;
    for (size_t a = 0; a < res.size(); ++a) {
        box.lo.push_back(bounds[2 * a]);
        box.hi.push_back(bounds[2 * a + 1]);
    }
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            if (!cell.empty()) values.push_back(std::stod(cell));
        }
    }
    return GridFunction::from_values(std::move(box), res, std::move(values));
}

inline void dump_json(const GridFunction& g, std::ostream& out) {
    out << "{\"domain\":{\"lo\":[";
    for (int a = 0; a < g.dim(); ++a) out << (a ? "," : "") << detail::fmt17(g.domain().lo[a]);
    out << "],\"hi\":[";
    for (int a = 0; a < g.dim(); ++a) out << (a ? "," : "") << detail::fmt17(g.domain().hi[a]);
    out << "]},\"res\":[";
    for (int a = 0; a < g.dim(); ++a) out << (a ? "," : "") << g.res(a);
    out << "],\"values\":[";
    for (std::int64_t k = 0; k < g.size(); ++k) out << (k ? "," : "") << detail::fmt17(g[k]);
    out << "]}";
}

inline GridFunction load_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("grid json: ") + e.what());
    }
    if (!j.contains("domain") || !j.contains("res") || !j.contains("values"))
        throw ConfigError("grid json: need {domain, res, values}");
    Box box;
    box.lo = j["domain"]["lo"].get<std::vector<double>>();
    box.hi = j["domain"]["hi"].get<std::vector<double>>();
    auto res = j["res"].get<std::vector<int>>();
    auto values = j["values"].get<std::vector<double>>();
    return GridFunction::from_values(std::move(box), res, std::move(values));
}

inline void dump_grid_file(const GridFunction& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        dump_json(g, out);
    else
        dump_csv(g, out);
}

inline GridFunction load_grid_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open: " + path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") return load_json(in);
    return load_csv(in);
}

}  // namespace osc
