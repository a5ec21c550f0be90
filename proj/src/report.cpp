#include "elc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "elc/bdrate.hpp"
#include "elc/errors.hpp"
#include "elc/pipeline.hpp"

namespace elc::rep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("short write to " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

long long parse_ll(const std::string& f, const std::string& path) {
    char* end = nullptr;
    long long v = std::strtoll(f.c_str(), &end, 10);
    if (end != f.c_str() + f.size() || f.empty())
        throw ConfigError(path + ": bad integer field '" + f + "'");
    return v;
}

unsigned long long parse_ull(const std::string& f, const std::string& path) {
    long long v = parse_ll(f, path);
    if (v < 0) throw ConfigError(path + ": negative count field '" + f + "'");
    return static_cast<unsigned long long>(v);
}

double parse_num(const std::string& f, const std::string& path) {
    char* end = nullptr;
    double v = std::strtod(f.c_str(), &end);
    if (end != f.c_str() + f.size() || f.empty())
        throw ConfigError(path + ": bad numeric field '" + f + "'");
    return v;
}

uint64_t parse_hex(const std::string& f, const std::string& path) {
    if (f.empty() || f.size() > 16 || f.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw ConfigError(path + ": bad hex field '" + f + "'");
    return std::strtoull(f.c_str(), nullptr, 16);
}

void expect_header(const std::vector<std::string>& lines, const std::string& header,
                   const std::string& path) {
    if (lines.empty() || lines[0] != header)
        throw ConfigError(path + ": expected header '" + header + "'");
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::string s = "label,group,frame,r_bits,lambda,sse_bl,psnr_bl,sse_el,psnr_el,enhanced_luma_fnv64\n";
    for (const MetricsRow& r : rows) {
        s += r.label + "," + std::to_string(r.group) + "," + std::to_string(r.frame) + "," +
             std::to_string(r.r_bits) + "," + fmt(r.lambda) + "," + fmt(r.sse_bl) + "," +
             fmt(r.psnr_bl) + "," + fmt(r.sse_el) + "," + fmt(r.psnr_el) + "," +
             pipe::hex64(r.enhanced_fnv64) + "\n";
    }
    write_text(path, s);
}

void write_selection_csv(const std::string& path, const std::vector<SelectionRow>& rows) {
    std::string s = "label,group,candidate,epoch,id,r_model_bits,group_j,chosen,mean_psnr_gain\n";
    for (const SelectionRow& r : rows) {
        s += r.label + "," + std::to_string(r.group) + "," + std::to_string(r.candidate) + "," +
             std::to_string(r.epoch) + "," + pipe::hex64(r.id) + "," +
             std::to_string(r.r_model_bits) + "," + fmt(r.group_j) + "," +
             (r.chosen ? "1" : "0") + "," + fmt(r.mean_psnr_gain) + "\n";
    }
    write_text(path, s);
}

void write_entropy_csv(const std::string& path, const std::vector<EntropyRow>& rows) {
    std::string s = "label,group,epoch,id,train_mse,entropy_residue,entropy_wq,r_model_bits,file_bytes\n";
    for (const EntropyRow& r : rows) {
        s += r.label + "," + std::to_string(r.group) + "," + std::to_string(r.epoch) + "," +
             pipe::hex64(r.id) + "," + fmt(r.train_mse) + "," + fmt(r.h_residue) + "," +
             fmt(r.h_wq) + "," + std::to_string(r.r_model_bits) + "," +
             std::to_string(r.file_bytes) + "\n";
    }
    write_text(path, s);
}

void write_hist_csv(const std::string& path, const std::vector<HistRow>& rows) {
    std::string s = "label,group,wq,count\n";
    for (const HistRow& r : rows)
        s += r.label + "," + std::to_string(r.group) + "," + std::to_string(r.wq) + "," +
             std::to_string(r.count) + "\n";
    write_text(path, s);
}

void write_rd_csv(const std::string& path, const std::vector<RdRow>& rows) {
    std::string s = "label,layer,rate_bits,psnr\n";
    for (const RdRow& r : rows)
        s += r.label + "," + r.layer + "," + std::to_string(r.rate_bits) + "," + fmt(r.psnr) + "\n";
    write_text(path, s);
}

std::vector<RdRow> read_rd_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines, "label,layer,rate_bits,psnr", path);
    std::vector<RdRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 4) throw ConfigError(path + ": expected 4 fields, got line '" + lines[i] + "'");
        RdRow r;
        r.label = f[0];
        r.layer = f[1];
        r.rate_bits = parse_ull(f[2], path);
        r.psnr = parse_num(f[3], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

std::vector<SelectionRow> read_selection_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines, "label,group,candidate,epoch,id,r_model_bits,group_j,chosen,mean_psnr_gain",
                  path);
    std::vector<SelectionRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 9) throw ConfigError(path + ": expected 9 fields, got line '" + lines[i] + "'");
        SelectionRow r;
        r.label = f[0];
        r.group = int(parse_ll(f[1], path));
        r.candidate = int(parse_ll(f[2], path));
        r.epoch = int(parse_ll(f[3], path));
        r.id = parse_hex(f[4], path);
        r.r_model_bits = parse_ull(f[5], path);
        r.group_j = parse_num(f[6], path);
        r.chosen = parse_ll(f[7], path) != 0;
        r.mean_psnr_gain = parse_num(f[8], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<EntropyRow> read_entropy_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines,
                  "label,group,epoch,id,train_mse,entropy_residue,entropy_wq,r_model_bits,file_bytes",
                  path);
    std::vector<EntropyRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 9) throw ConfigError(path + ": expected 9 fields, got line '" + lines[i] + "'");
        EntropyRow r;
        r.label = f[0];
        r.group = int(parse_ll(f[1], path));
        r.epoch = int(parse_ll(f[2], path));
        r.id = parse_hex(f[3], path);
        r.train_mse = parse_num(f[4], path);
        r.h_residue = parse_num(f[5], path);
        r.h_wq = parse_num(f[6], path);
        r.r_model_bits = parse_ull(f[7], path);
        r.file_bytes = parse_ull(f[8], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<HistRow> read_hist_csv(const std::string& path) {
    std::vector<std::string> lines = read_lines(path);
    expect_header(lines, "label,group,wq,count", path);
    std::vector<HistRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f = split_csv(lines[i]);
        if (f.size() != 4) throw ConfigError(path + ": expected 4 fields, got line '" + lines[i] + "'");
        HistRow r;
        r.label = f[0];
        r.group = int(parse_ll(f[1], path));
        r.wq = int32_t(parse_ll(f[2], path));
        r.count = parse_ull(f[3], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

// Minimal hand-rolled SVG line/bar charts; everything the run reports need,
// nothing more.
struct Series {
    std::string name;
    std::vector<std::pair<double, double>> pts;
    bool dashed = false;
};

constexpr int kW = 720, kH = 480;
constexpr int kL = 76, kR = 24, kT = 44, kB = 56;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct ChartFrame {
    double xmin, xmax, ymin, ymax;
    double px(double x) const { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); }
    double py(double y) const { return kH - kB - (y - ymin) / (ymax - ymin) * (kH - kT - kB); }
};

void chart_scaffold(std::string& s, const ChartFrame& fr, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "viewBox=\"0 0 %d %d\" font-family=\"monospace\" font-size=\"11\">\n"
                  "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n",
                  kW, kH, kW, kH, kW, kH);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" "
                  "stroke=\"#333\"/>\n",
                  kL, kT, kW - kL - kR, kH - kT - kB);
    s += buf;
    s += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" +
         svg_escape(title) + "</text>\n";
    s += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH - 14) +
         "\" text-anchor=\"middle\">" + svg_escape(xlabel) + "</text>\n";
    s += "<text x=\"18\" y=\"" + std::to_string(kH / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         std::to_string(kH / 2) + ")\">" + svg_escape(ylabel) + "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = fr.xmin + (fr.xmax - fr.xmin) * i / 4.0;
        double fy = fr.ymin + (fr.ymax - fr.ymin) * i / 4.0;
        double x = fr.px(fx), y = fr.py(fy);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"#333\"/>\n"
                      "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                      x, kH - kB, x, kH - kB + 5, x, kH - kB + 18, fmt_tick(fx).c_str());
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#333\"/>\n"
                      "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%s</text>\n",
                      kL - 5, y, kL, y, kL - 8, y + 4, fmt_tick(fy).c_str());
        s += buf;
    }
}

void render_line_chart(const std::string& path, const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, const std::vector<Series>& series) {
    ChartFrame fr{0, 1, 0, 1};
    bool any = false;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (const Series& sr : series)
        for (auto [x, y] : sr.pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (!any) {
                xmin = xmax = x;
                ymin = ymax = y;
                any = true;
            }
            xmin = std::min(xmin, x), xmax = std::max(xmax, x);
            ymin = std::min(ymin, y), ymax = std::max(ymax, y);
        }
    std::string s;
    if (!any) {
        chart_scaffold(s, fr, title, xlabel, ylabel);
        s += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH / 2) +
             "\" text-anchor=\"middle\">no finite data</text>\n</svg>\n";
        write_text(path, s);
        return;
    }
    double xpad = (xmax - xmin) * 0.05, ypad = (ymax - ymin) * 0.05;
    if (xpad == 0) xpad = std::abs(xmin) * 0.05 + 0.5;
    if (ypad == 0) ypad = std::abs(ymin) * 0.05 + 0.5;
    fr = ChartFrame{xmin - xpad, xmax + xpad, ymin - ypad, ymax + ypad};
    chart_scaffold(s, fr, title, xlabel, ylabel);

    char buf[256];
    for (size_t si = 0; si < series.size(); ++si) {
        const Series& sr = series[si];
        const char* color = kPalette[si % 6];
        std::string poly;
        for (auto [x, y] : sr.pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", fr.px(x), fr.py(y));
            poly += buf;
            std::snprintf(buf, sizeof(buf), "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"2.5\" fill=\"%s\"/>\n",
                          fr.px(x), fr.py(y), color);
            s += buf;
        }
        if (!poly.empty()) {
            s += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + color +
                 "\" stroke-width=\"1.5\"" + (sr.dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>\n";
        }
        double ly = kT + 16 + 16.0 * double(si);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"%s\" "
                      "stroke-width=\"2\"%s/>\n",
                      kW - kR - 150, ly, kW - kR - 126, ly, color,
                      sr.dashed ? " stroke-dasharray=\"5,4\"" : "");
        s += buf;
        s += "<text x=\"" + std::to_string(kW - kR - 120) + "\" y=\"" + fmt_tick(ly + 4) + "\">" +
             svg_escape(sr.name) + "</text>\n";
    }
    s += "</svg>\n";
    write_text(path, s);
}

void render_bar_chart(const std::string& path, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::map<int32_t, uint64_t>& bins) {
    std::string s;
    if (bins.empty()) {
        ChartFrame fr{0, 1, 0, 1};
        chart_scaffold(s, fr, title, xlabel, ylabel);
        s += "<text x=\"" + std::to_string(kW / 2) + "\" y=\"" + std::to_string(kH / 2) +
             "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
        write_text(path, s);
        return;
    }
    double xmin = bins.begin()->first, xmax = bins.rbegin()->first;
    uint64_t peak = 0;
    for (const auto& [w, c] : bins) peak = std::max(peak, c);
    ChartFrame fr{xmin - 1.0, xmax + 1.0, 0.0, double(peak) * 1.05 + 1.0};
    chart_scaffold(s, fr, title, xlabel, ylabel);
    double bw = std::max(1.0, (kW - kL - kR) / (xmax - xmin + 2.0) * 0.8);
    char buf[256];
    for (const auto& [w, c] : bins) {
        double x = fr.px(double(w)) - bw / 2.0, y = fr.py(double(c));
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%.2f\" y=\"%.1f\" width=\"%.2f\" height=\"%.1f\" fill=\"#1f77b4\"/>\n",
                      x, y, bw, double(kH - kB) - y);
        s += buf;
    }
    s += "</svg>\n";
    write_text(path, s);
}

}  // namespace

void emit_reports(const std::string& run_dir) {
    pipe::Manifest man = pipe::read_manifest(run_dir + "/manifest.json");
    if (!man.complete) throw ConfigError("reports need a complete run, " + run_dir + " is not");

    std::string plots = run_dir + "/plots";
    std::error_code ec;
    fs::create_directories(plots, ec);
    if (ec) throw IoError("cannot create " + plots);

    std::vector<RdRow> rd = read_rd_csv(run_dir + "/rd_curve.csv");
    Series bl{"base layer", {}, false}, el{"with enhancement", {}, false};
    bd::RdCurve bl_curve, el_curve;
    for (const RdRow& r : rd) {
        auto& sr = (r.layer == "bl") ? bl : el;
        sr.pts.emplace_back(double(r.rate_bits), r.psnr);
        auto& cv = (r.layer == "bl") ? bl_curve : el_curve;
        cv.points.push_back({double(r.rate_bits), r.psnr});
    }
    auto by_rate = [](const bd::RdPoint& a, const bd::RdPoint& b) { return a.rate < b.rate; };
    std::sort(bl_curve.points.begin(), bl_curve.points.end(), by_rate);
    std::sort(el_curve.points.begin(), el_curve.points.end(), by_rate);
    std::sort(bl.pts.begin(), bl.pts.end());
    std::sort(el.pts.begin(), el.pts.end());
    render_line_chart(plots + "/rd_curve.svg", "rate vs quality", "rate [bits]", "psnr [dB]",
                      {bl, el});

    json summary;
    summary["config_hash"] = pipe::hex64(man.config_hash);
    summary["mode"] = man.mode;
    if (bl_curve.points.size() >= 4 && el_curve.points.size() >= 4) {
        try {
            summary["bd_rate_el_vs_bl_percent"] = bd::bd_rate(bl_curve, el_curve);
        } catch (const Error& e) {
            summary["bd_rate_el_vs_bl_percent"] = nullptr;
            summary["bd_rate_note"] = e.what();
        }
    } else {
        summary["bd_rate_el_vs_bl_percent"] = nullptr;
        summary["bd_rate_note"] = "needs at least 4 operating points per curve";
    }

    summary["points"] = json::array();
    for (const pipe::PointRecord& p : man.points) {
        std::string dir = run_dir + "/" + p.dir;
        std::vector<SelectionRow> sel = read_selection_csv(dir + "/selection.csv");
        std::vector<EntropyRow> ent = read_entropy_csv(dir + "/entropy.csv");
        std::vector<HistRow> hist = read_hist_csv(dir + "/weights_hist.csv");

        std::vector<Series> cost;
        for (const pipe::GroupRecord& g : p.groups) {
            Series cand{"g" + std::to_string(g.index), {}, false};
            Series base{"g" + std::to_string(g.index) + " baseline", {}, true};
            double bj = 0.0;
            int max_epoch = 0;
            for (const SelectionRow& r : sel) {
                if (r.group != g.index) continue;
                if (r.candidate < 0)
                    bj = r.group_j;
                else {
                    cand.pts.emplace_back(double(r.epoch), r.group_j);
                    max_epoch = std::max(max_epoch, r.epoch);
                }
            }
            base.pts.emplace_back(0.0, bj);
            base.pts.emplace_back(double(max_epoch), bj);
            cost.push_back(std::move(cand));
            cost.push_back(std::move(base));
        }
        render_line_chart(plots + "/cost_" + p.label + ".svg", "group cost per checkpoint, " + p.label,
                          "epoch", "J", cost);

        std::vector<Series> entropy;
        for (const pipe::GroupRecord& g : p.groups) {
            Series hres{"g" + std::to_string(g.index) + " residue", {}, false};
            Series hwq{"g" + std::to_string(g.index) + " weights", {}, true};
            for (const EntropyRow& r : ent) {
                if (r.group != g.index) continue;
                hres.pts.emplace_back(double(r.epoch), r.h_residue);
                hwq.pts.emplace_back(double(r.epoch), r.h_wq);
            }
            entropy.push_back(std::move(hres));
            entropy.push_back(std::move(hwq));
        }
        render_line_chart(plots + "/entropy_" + p.label + ".svg",
                          "symbol entropy per checkpoint, " + p.label, "epoch", "bits/symbol",
                          entropy);

        std::map<int32_t, uint64_t> bins;
        for (const HistRow& r : hist) bins[r.wq] += r.count;
        render_bar_chart(plots + "/hist_" + p.label + ".svg",
                         "transmitted quantized weights, " + p.label, "quantized value", "count",
                         bins);

        json jp;
        jp["label"] = p.label;
        jp["qp"] = p.qp;
        jp["rate_bl_bits"] = p.rate_bl_bits;
        jp["rate_el_bits"] = p.rate_el_bits;
        jp["psnr_bl"] = p.psnr_bl;
        jp["psnr_el"] = p.psnr_el;
        jp["groups"] = json::array();
        for (const pipe::GroupRecord& g : p.groups) {
            json jg;
            jg["index"] = g.index;
            jg["no_el"] = g.no_el;
            jg["chosen_epoch"] = g.chosen_epoch;
            jg["r_model_bits"] = g.r_model_bits;
            jg["j_chosen"] = g.j_chosen;
            jg["j_baseline"] = g.j_baseline;
            jg["mean_psnr_gain"] = g.mean_psnr_gain;
            jp["groups"].push_back(jg);
        }
        summary["points"].push_back(jp);
    }

    write_text(run_dir + "/summary.json", summary.dump(2) + "\n");
}

}  // namespace elc::rep
