#include "fsi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fsi {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void row(std::ostream& os, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << num(v[i]);
    os << "\n";
}

}  // namespace

void write_body_csv(const std::string& path, const std::vector<BodyRecord>& log) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "t,X1,X2,X3,V1,V2,V3,O11,O12,O13,O21,O22,O23,O31,O32,O33,w1,w2,w3,F1,F2,F3,T1,T2,T3,gap\n";
    for (const BodyRecord& r : log) {
        std::vector<double> v{r.t};
        for (int d = 0; d < 3; ++d) v.push_back(r.body.X[d]);
        for (int d = 0; d < 3; ++d) v.push_back(r.body.V[d]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) v.push_back(r.body.O(i, j));
        for (int d = 0; d < 3; ++d) v.push_back(r.body.w[d]);
        for (int d = 0; d < 3; ++d) v.push_back(r.loads.force[d]);
        for (int d = 0; d < 3; ++d) v.push_back(r.loads.torque[d]);
        v.push_back(r.gap);
        row(os, v);
    }
}

void write_energy_csv(const std::string& path, const std::vector<EnergyReport>& series) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "t,E_total,dissipation,E_rel,E_rel_body,I1F,I1B,I2,I3,I4,I5,I6,REI_residual,h_fit\n";
    for (const EnergyReport& e : series) {
        std::vector<double> v{e.t, e.E_total, e.dissipation, e.E_rel, e.E_rel_body};
        for (double r : e.remainder_terms) v.push_back(r);
        v.push_back(e.REI_residual);
        v.push_back(e.h_fit);
        row(os, v);
    }
}

std::vector<double> CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + name);
    const std::size_t c = std::size_t(it - header.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(c < r.size() ? r[c] : std::nan(""));
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) return t;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> r;
        while (std::getline(ss, cell, ',')) r.push_back(std::strtod(cell.c_str(), nullptr));
        t.rows.push_back(std::move(r));
    }
    return t;
}

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, bool log_y) {
    const double W = 720, H = 440, L = 80, R = 160, T = 40, B = 60;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
    auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0); };
    for (const PlotSeries& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        const double pad = std::abs(y0) > 0 ? 0.1 * std::abs(y0) : 1;
        y0 -= pad;
        y1 += pad;
    }
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                   "#7f7f7f"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    char buf[64];
    for (int q = 0; q <= 4; ++q) {
        const double fx = x0 + (x1 - x0) * q / 4, fy = y0 + (y1 - y0) * q / 4;
        const double X = L + (W - L - R) * q / 4, Y = H - B - (H - T - B) * q / 4;
        std::snprintf(buf, sizeof buf, "%.3g", fx);
        os << "<text x=\"" << X << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << buf
           << "</text>\n";
        std::snprintf(buf, sizeof buf, log_y ? "1e%.2g" : "%.3g", fy);
        os << "<text x=\"" << L - 6 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << buf
           << "</text>\n";
    }
    os << "<text x=\"" << L + (W - L - R) / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
       << xlabel << "</text>\n";
    os << "<text x=\"18\" y=\"" << T + (H - T - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
       << T + (H - T - B) / 2 << ")\">" << ylabel << (log_y ? " (log)" : "") << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = colors[s % 8];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i)
            if (usable(series[s].x[i], series[s].y[i])) os << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
        os << "\"/>\n";
        const double ly = T + 16 + 18 * double(s);
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << series[s].name
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

namespace {

bool has_positive(const std::vector<PlotSeries>& s) {
    for (const PlotSeries& p : s)
        for (double v : p.y)
            if (v > 0 && std::isfinite(v)) return true;
    return false;
}

}  // namespace

int emit_reports(const std::string& dir, std::vector<std::string>* warnings) {
    namespace fs = std::filesystem;
    int written = 0;
    auto warn = [&](const std::string& w) {
        if (warnings) warnings->push_back(w);
    };
    auto emit = [&](const std::string& name, const std::string& svg) {
        std::ofstream os(dir + "/" + name);
        if (!os) throw std::runtime_error("cannot write " + dir + "/" + name);
        os << svg;
        ++written;
    };
    auto table = [&](const std::string& name, CsvTable& t) {
        const std::string p = dir + "/" + name;
        if (!fs::exists(p)) return false;
        t = read_csv(p);
        if (t.rows.empty()) {
            warn(name + " has no rows; plot skipped");
            return false;
        }
        return true;
    };

    CsvTable energy;
    if (table("energy.csv", energy)) {
        const auto t = energy.column("t");
        std::vector<PlotSeries> erel{{"E_rel", t, energy.column("E_rel")},
                                     {"E_rel body", t, energy.column("E_rel_body")}};
        if (has_positive(erel)) emit("erel.svg", svg_line_plot("relative energy", "t", "E_rel", erel, true));
        else {
            warn("E_rel is zero throughout; plotting the total energy instead");
            emit("erel.svg", svg_line_plot("total energy", "t", "E", {{"E_total", t, energy.column("E_total")}}, false));
        }
        std::vector<PlotSeries> rem;
        for (const char* k : {"I1F", "I1B", "I2", "I3", "I4", "I5", "I6"}) rem.push_back({k, t, energy.column(k)});
        emit("remainder.svg", svg_line_plot("remainder terms", "t", "value", rem, false));
    }
    CsvTable est;
    if (table("estimates.csv", est)) {
        const auto t = est.column("t");
        std::vector<PlotSeries> r{{"boundary disp", t, est.column("ratio_boundary_disp")},
                                  {"boundary rate", t, est.column("ratio_boundary_rate")},
                                  {"field W3", t, est.column("ratio_field_w3")},
                                  {"field rate", t, est.column("ratio_field_rate")},
                                  {"inverse", t, est.column("ratio_inverse")}};
        if (has_positive(r)) emit("estimates.svg", svg_line_plot("estimate ratios", "t", "lhs/rhs", r, true));
        else warn("estimate ratios are all zero or undefined; plot skipped");
    }
    CsvTable body;
    if (table("body.csv", body)) {
        std::vector<PlotSeries> g{{"A", body.column("t"), body.column("gap")}};
        CsvTable bb;
        if (table("body_B.csv", bb)) g.push_back({"B", bb.column("t"), bb.column("gap")});
        emit("gap.svg", svg_line_plot("distance to the wall", "t", "gap", g, false));
    }
    return written;
}

}  // namespace fsi
