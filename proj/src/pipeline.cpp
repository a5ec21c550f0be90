#include "elc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "elc/base_layer.hpp"
#include "elc/errors.hpp"
#include "elc/frame.hpp"
#include "elc/model_codec.hpp"
#include "elc/rate_utility.hpp"
#include "elc/report.hpp"

namespace elc::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

uint64_t fnv64_bytes(const void* data, size_t n) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = 1469598103934665603ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t fnv64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    return fnv64_bytes(s.data(), s.size());
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

uint64_t parse_hex64(const std::string& s, const std::string& what) {
    if (s.empty() || s.size() > 16 || s.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos)
        throw ConfigError("manifest: bad " + what + " value '" + s + "'");
    return std::strtoull(s.c_str(), nullptr, 16);
}

uint64_t mix_seed(uint64_t seed, const std::string& label, uint64_t group) {
    uint64_t h = fnv64_bytes(&seed, sizeof(seed));
    h ^= fnv64_bytes(label.data(), label.size());
    h *= 1099511628211ull;
    h ^= fnv64_bytes(&group, sizeof(group));
    return h;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path);
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("short write to " + path);
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}

struct ByteReader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;
    std::string path;

    uint32_t u32() {
        if (pos + 4 > n) throw DecodeError("truncated stream in " + path);
        uint32_t v = uint32_t(p[pos]) | uint32_t(p[pos + 1]) << 8 | uint32_t(p[pos + 2]) << 16 |
                     uint32_t(p[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    const uint8_t* block(size_t len) {
        if (pos + len > n) throw DecodeError("truncated stream in " + path);
        const uint8_t* b = p + pos;
        pos += len;
        return b;
    }
};

// Toy base-layer stream: coded luma per frame plus verbatim chroma, enough
// for a self-contained decode of one operating point.
struct TbsData {
    int w = 0;
    int h = 0;
    int qp = 0;
    std::vector<std::vector<uint8_t>> luma;
    std::vector<Plane8> u, v;
};

void write_tbs(const std::string& path, int w, int h, int qp,
               const std::vector<std::vector<uint8_t>>& luma,
               const std::vector<YuvFrame>& chroma_src) {
    std::vector<uint8_t> out;
    out.insert(out.end(), {'T', 'B', 'S', '1'});
    put_u32(out, uint32_t(w));
    put_u32(out, uint32_t(h));
    put_u32(out, uint32_t(qp));
    put_u32(out, uint32_t(luma.size()));
    for (size_t i = 0; i < luma.size(); ++i) {
        put_u32(out, uint32_t(luma[i].size()));
        out.insert(out.end(), luma[i].begin(), luma[i].end());
        const YuvFrame& f = chroma_src[i];
        out.insert(out.end(), f.u.data.begin(), f.u.data.end());
        out.insert(out.end(), f.v.data.begin(), f.v.data.end());
    }
    write_file_bytes(path, out);
}

TbsData read_tbs(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r{bytes.data(), bytes.size(), 0, path};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "TBS1", 4) != 0)
        throw DecodeError("not a toy base-layer stream: " + path);
    r.pos = 4;
    TbsData t;
    t.w = int(r.u32());
    t.h = int(r.u32());
    t.qp = int(r.u32());
    uint32_t frames = r.u32();
    if (t.w <= 0 || t.h <= 0 || frames == 0)
        throw DecodeError("bad geometry in " + path);
    int cw = chroma_dim(t.w), ch = chroma_dim(t.h);
    for (uint32_t i = 0; i < frames; ++i) {
        uint32_t len = r.u32();
        const uint8_t* b = r.block(len);
        t.luma.emplace_back(b, b + len);
        Plane8 u(cw, ch), v(cw, ch);
        std::memcpy(u.data.data(), r.block(u.size()), u.size());
        std::memcpy(v.data.data(), r.block(v.size()), v.size());
        t.u.push_back(std::move(u));
        t.v.push_back(std::move(v));
    }
    if (r.pos != bytes.size()) throw DecodeError("trailing bytes in " + path);
    return t;
}

Tensor4 plane_to_tensor(const Plane8& p) {
    Tensor4 t(Shape4{1, 1, p.h, p.w});
    for (size_t i = 0; i < p.data.size(); ++i) t.data[i] = double(p.data[i]) / 255.0;
    return t;
}

std::vector<std::pair<size_t, size_t>> partition(size_t n, int group_size) {
    std::vector<std::pair<size_t, size_t>> out;
    for (size_t b = 0; b < n; b += size_t(group_size))
        out.emplace_back(b, std::min(n, b + size_t(group_size)));
    return out;
}

double aggregate_psnr(double total_sse, uint64_t pixels) {
    if (total_sse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 * double(pixels) / total_sse);
}

json train_to_json(const net::TrainingConfig& t) {
    json j;
    j["patch"] = t.patch;
    j["lr"] = t.lr;
    j["iters_per_epoch"] = t.iters_per_epoch;
    j["max_epochs"] = t.max_epochs;
    j["batch"] = t.batch;
    j["seed"] = t.seed;
    j["size_cap_bytes"] = t.size_cap_bytes;
    j["probe_crops"] = t.probe_crops;
    return j;
}

net::TrainingConfig train_from_json(const json& j) {
    net::TrainingConfig t;
    t.patch = j.at("patch").get<int>();
    t.lr = j.at("lr").get<double>();
    t.iters_per_epoch = j.at("iters_per_epoch").get<int>();
    t.max_epochs = j.at("max_epochs").get<int>();
    t.batch = j.at("batch").get<int>();
    t.seed = j.at("seed").get<uint64_t>();
    t.size_cap_bytes = j.at("size_cap_bytes").get<size_t>();
    t.probe_crops = j.at("probe_crops").get<int>();
    return t;
}

json config_to_json_obj(const RunConfig& cfg) {
    json j;
    j["mode"] = cfg.mode;
    j["input"] = cfg.input;
    j["recon"] = cfg.recon;
    j["rate_log"] = cfg.rate_log;
    j["width"] = cfg.width;
    j["height"] = cfg.height;
    j["qps"] = cfg.qps;
    j["group_size"] = cfg.group_size;
    j["allow_no_el"] = cfg.allow_no_el;
    j["initial_model"] = cfg.initial_model;
    j["outdir"] = cfg.outdir;
    j["seed"] = cfg.seed;
    j["train"] = train_to_json(cfg.train);
    return j;
}

}  // namespace

void RunConfig::validate() const {
    if (mode != "toy-bl" && mode != "ingest")
        throw ConfigError("run config: mode must be 'toy-bl' or 'ingest', got '" + mode + "'");
    if (input.empty()) throw ConfigError("run config: no input clip");
    if (width <= 0 || height <= 0) throw ConfigError("run config: dimensions must be positive");
    if (group_size < 1) throw ConfigError("run config: group size must be at least 1");
    if (outdir.empty()) throw ConfigError("run config: no output directory");
    if (!fs::exists(input)) throw ConfigError("run config: input does not exist: " + input);
    if (mode == "toy-bl") {
        if (qps.empty()) throw ConfigError("run config: empty qp list");
        for (size_t i = 0; i < qps.size(); ++i) {
            if (qps[i] < 0 || qps[i] > 51)
                throw ConfigError("run config: qp " + std::to_string(qps[i]) + " outside [0, 51]");
            if (i > 0 && qps[i] <= qps[i - 1])
                throw ConfigError("run config: qp list must be strictly increasing");
        }
    } else {
        if (recon.empty() || rate_log.empty())
            throw ConfigError("run config: ingest mode needs recon and rate_log paths");
        if (!fs::exists(recon)) throw ConfigError("run config: recon does not exist: " + recon);
        if (!fs::exists(rate_log))
            throw ConfigError("run config: rate log does not exist: " + rate_log);
    }
    if (!initial_model.empty() && !fs::exists(initial_model))
        throw ConfigError("run config: initial model does not exist: " + initial_model);
}

std::string RunConfig::to_json() const { return config_to_json_obj(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: bad JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        cfg.mode = j.at("mode").get<std::string>();
        cfg.input = j.at("input").get<std::string>();
        cfg.recon = j.value("recon", std::string());
        cfg.rate_log = j.value("rate_log", std::string());
        cfg.width = j.at("width").get<int>();
        cfg.height = j.at("height").get<int>();
        cfg.qps = j.at("qps").get<std::vector<int>>();
        cfg.group_size = j.at("group_size").get<int>();
        cfg.allow_no_el = j.at("allow_no_el").get<bool>();
        cfg.initial_model = j.value("initial_model", std::string());
        cfg.outdir = j.at("outdir").get<std::string>();
        cfg.seed = j.at("seed").get<uint64_t>();
        cfg.train = train_from_json(j.at("train"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: missing or mistyped key: ") + e.what());
    }
    return cfg;
}

uint64_t RunConfig::hash() const {
    // The output directory does not change what is computed, so it stays out
    // of the identity.
    json j = config_to_json_obj(*this);
    j.erase("outdir");
    std::string canon = j.dump();
    return fnv64_bytes(canon.data(), canon.size());
}

net::QuantizedModel load_initial_model(const std::string& path) {
    net::NetworkConfig cfg = net::NetworkConfig::standard();
    if (path.empty()) return net::zero_model(cfg);
    return codec::deserialize_initial(read_file_bytes(path), cfg);
}

namespace {

// Everything one operating point contributes to the run reports.
struct PointReports {
    std::vector<rep::MetricsRow> metrics;
    std::vector<rep::SelectionRow> selection;
    std::vector<rep::EntropyRow> entropy;
    std::vector<rep::HistRow> hist;
};

struct EncodeContext {
    const RunConfig& cfg;
    const net::RestorationModel& initial_model;
    const net::QuantizedModel& initial_q;
};

// Trains, selects, and writes the EL for one group of frames; returns the
// group record and appends report rows. `sum_sse_el` and `sum_el_bits`
// accumulate the point totals.
GroupRecord encode_group(const EncodeContext& ctx, const std::string& label,
                         const std::string& point_dir_abs, const std::string& point_dir_rel,
                         int group_index, size_t frame_begin, const bl::FrameGroup& group,
                         PointReports& out, double& sum_sse_bl, double& sum_sse_el,
                         uint64_t& sum_el_bits) {
    std::vector<Tensor4> degraded, original;
    for (const bl::FrameEntry& f : group.frames) {
        degraded.push_back(plane_to_tensor(f.recon_y));
        original.push_back(plane_to_tensor(f.orig_y));
    }

    net::TrainingConfig tc = ctx.cfg.train;
    tc.seed = mix_seed(ctx.cfg.seed, label, uint64_t(group_index));
    const net::QuantizedModel& init_q = ctx.initial_q;
    auto el_size = [&init_q](const net::QuantizedModel& m) {
        return codec::serialize_el(m, init_q).size();
    };
    std::vector<net::ModelCheckpoint> cks =
        net::train_online(ctx.initial_model, degraded, original, tc, el_size);
    if (cks.empty()) throw NumericError("encode: training produced no usable checkpoint");

    ru::SelectionResult sel = ru::select(cks, init_q, group, ctx.cfg.allow_no_el);

    std::string el_name = "el_g" + std::to_string(group_index) + ".elb";
    write_file_bytes(point_dir_abs + "/" + el_name, sel.el_bytes);

    GroupRecord rec;
    rec.index = group_index;
    rec.frame_begin = frame_begin;
    rec.frame_end = frame_begin + group.size();
    rec.el_path = point_dir_rel + "/" + el_name;
    rec.el_fnv64 = fnv64_bytes(sel.el_bytes.data(), sel.el_bytes.size());
    rec.no_el = sel.no_el();
    rec.r_model_bits = uint64_t(sel.el_bytes.size()) * 8;
    rec.j_chosen = sel.chosen_j;
    rec.j_baseline = sel.baseline_j;
    sum_el_bits += rec.r_model_bits;

    // Enhanced output exactly as the decoder will compute it.
    std::vector<const Plane8*> enhanced;
    std::vector<Plane8> owned;
    if (sel.no_el()) {
        for (const bl::FrameEntry& f : group.frames) enhanced.push_back(&f.recon_y);
    } else {
        const ru::CandidateEvaluation& ev = sel.table[size_t(sel.chosen)];
        rec.chosen_epoch = ev.epoch;
        rec.chosen_id = ev.id;
        double gain = 0.0;
        for (double g : ev.psnr_gain) gain += g;
        rec.mean_psnr_gain = gain / double(ev.psnr_gain.size());
        net::QuantizedModel decoded = codec::deserialize_el(sel.el_bytes, init_q);
        for (const bl::FrameEntry& f : group.frames)
            owned.push_back(ru::enhance_frame(decoded, f.recon_y));
        for (const Plane8& p : owned) enhanced.push_back(&p);
    }

    for (size_t i = 0; i < group.size(); ++i) {
        const bl::FrameEntry& f = group.frames[i];
        rep::MetricsRow row;
        row.label = label;
        row.group = group_index;
        row.frame = int(frame_begin + i);
        row.r_bits = f.r_bits;
        row.lambda = f.lambda;
        row.sse_bl = sel.baseline_d[i];
        row.psnr_bl = sel.baseline_psnr[i];
        if (sel.no_el()) {
            row.sse_el = row.sse_bl;
            row.psnr_el = row.psnr_bl;
        } else {
            ru::Metrics m = ru::metrics(f.orig_y, *enhanced[i]);
            row.sse_el = m.sse;
            row.psnr_el = m.psnr;
        }
        row.enhanced_fnv64 = fnv64_bytes(enhanced[i]->data.data(), enhanced[i]->data.size());
        sum_sse_bl += row.sse_bl;
        sum_sse_el += row.sse_el;
        out.metrics.push_back(std::move(row));
    }

    rep::SelectionRow base;
    base.label = label;
    base.group = group_index;
    base.candidate = -1;
    base.epoch = -1;
    base.group_j = sel.baseline_j;
    base.chosen = sel.no_el();
    out.selection.push_back(base);
    for (size_t c = 0; c < sel.table.size(); ++c) {
        const ru::CandidateEvaluation& ev = sel.table[c];
        rep::SelectionRow row;
        row.label = label;
        row.group = group_index;
        row.candidate = int(c);
        row.epoch = ev.epoch;
        row.id = ev.id;
        row.r_model_bits = ev.r_model_bits;
        row.group_j = ev.group_j;
        row.chosen = (int(c) == sel.chosen);
        double gain = 0.0;
        for (double g : ev.psnr_gain) gain += g;
        row.mean_psnr_gain = gain / double(ev.psnr_gain.size());
        out.selection.push_back(row);
    }

    for (size_t c = 0; c < cks.size(); ++c) {
        const net::ModelCheckpoint& ck = cks[c];
        rep::EntropyRow row;
        row.label = label;
        row.group = group_index;
        row.epoch = ck.epoch;
        row.id = ck.id;
        row.train_mse = ck.train_mse;
        std::vector<int32_t> residue = codec::diff(ck.quantized, init_q);
        row.h_residue = codec::empirical_entropy(residue);
        row.h_wq = codec::empirical_entropy(ck.quantized.flat_wq());
        row.r_model_bits = sel.table[c].r_model_bits;
        row.file_bytes = sel.table[c].r_model_bits / 8;
        out.entropy.push_back(row);
    }

    const net::QuantizedModel& hist_model =
        sel.no_el() ? init_q : cks[size_t(sel.chosen)].quantized;
    std::map<int32_t, uint64_t> bins;
    for (int32_t w : hist_model.flat_wq()) ++bins[w];
    for (const auto& [wq, count] : bins) out.hist.push_back({label, group_index, wq, count});

    return rec;
}

void write_point_reports(const std::string& dir_abs, const PointReports& r) {
    rep::write_metrics_csv(dir_abs + "/metrics.csv", r.metrics);
    rep::write_selection_csv(dir_abs + "/selection.csv", r.selection);
    rep::write_entropy_csv(dir_abs + "/entropy.csv", r.entropy);
    rep::write_hist_csv(dir_abs + "/weights_hist.csv", r.hist);
}

json manifest_to_json(const RunConfig& cfg, uint64_t cfg_hash, uint64_t initial_fnv,
                      const std::vector<PointRecord>& points, bool complete) {
    json j;
    json cfg_echo = config_to_json_obj(cfg);
    cfg_echo.erase("outdir");
    j["config"] = cfg_echo;
    j["config_hash"] = hex64(cfg_hash);
    j["mode"] = cfg.mode;
    j["width"] = cfg.width;
    j["height"] = cfg.height;
    j["input"] = cfg.input;
    j["recon"] = cfg.recon;
    j["rate_log"] = cfg.rate_log;
    j["initial_model"] = cfg.initial_model;
    j["initial_fnv64"] = hex64(initial_fnv);
    j["complete"] = complete;
    j["points"] = json::array();
    for (const PointRecord& p : points) {
        json jp;
        jp["label"] = p.label;
        jp["qp"] = p.qp;
        jp["dir"] = p.dir;
        jp["bl_bitstream"] = p.bl_bitstream;
        jp["bl_fnv64"] = hex64(p.bl_fnv64);
        jp["rate_bl_bits"] = p.rate_bl_bits;
        jp["rate_el_bits"] = p.rate_el_bits;
        jp["psnr_bl"] = p.psnr_bl;
        jp["psnr_el"] = p.psnr_el;
        jp["groups"] = json::array();
        for (const GroupRecord& g : p.groups) {
            json jg;
            jg["index"] = g.index;
            jg["frame_begin"] = g.frame_begin;
            jg["frame_end"] = g.frame_end;
            jg["el"] = g.el_path;
            jg["el_fnv64"] = hex64(g.el_fnv64);
            jg["no_el"] = g.no_el;
            jg["chosen_epoch"] = g.chosen_epoch;
            jg["chosen_id"] = hex64(g.chosen_id);
            jg["r_model_bits"] = g.r_model_bits;
            jg["j_chosen"] = g.j_chosen;
            jg["j_baseline"] = g.j_baseline;
            jg["mean_psnr_gain"] = g.mean_psnr_gain;
            jp["groups"].push_back(jg);
        }
        j["points"].push_back(jp);
    }
    return j;
}

}  // namespace

RunResult run_encode(const RunConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.outdir);

    net::QuantizedModel initial_q = load_initial_model(cfg.initial_model);
    net::NetworkConfig net_cfg = net::NetworkConfig::standard();
    net::RestorationModel initial_model(net_cfg);
    initial_model.load_quantized(initial_q);
    uint64_t initial_fnv = cfg.initial_model.empty() ? 0 : fnv64_file(cfg.initial_model);

    RunResult res;
    res.config_hash = cfg.hash();
    res.manifest_path = cfg.outdir + "/manifest.json";

    EncodeContext ctx{cfg, initial_model, initial_q};
    std::vector<rep::RdRow> rd_rows;

    auto flush_manifest = [&](bool complete) {
        json j = manifest_to_json(cfg, res.config_hash, initial_fnv, res.points, complete);
        write_text_file(res.manifest_path, j.dump(2) + "\n");
    };

    try {
        std::vector<YuvFrame> orig_frames = read_yuv420(cfg.input, cfg.width, cfg.height);
        uint64_t total_pixels =
            uint64_t(orig_frames.size()) * uint64_t(cfg.width) * uint64_t(cfg.height);

        if (cfg.mode == "toy-bl") {
            for (int qp : cfg.qps) {
                PointRecord point;
                point.label = "qp" + std::to_string(qp);
                point.qp = qp;
                point.dir = point.label;
                std::string dir_abs = cfg.outdir + "/" + point.dir;
                fs::create_directories(dir_abs);

                std::vector<std::vector<uint8_t>> luma_streams;
                bl::FrameGroup all;
                for (const YuvFrame& f : orig_frames) {
                    bl::ToyEncodeResult enc = bl::toy_encode(f.y, qp);
                    bl::FrameEntry e;
                    e.orig_y = f.y;
                    e.recon_y = std::move(enc.recon);
                    e.r_bits = enc.bits;
                    e.lambda = bl::lambda_from_qp(qp);
                    e.qp = qp;
                    point.rate_bl_bits += e.r_bits;
                    all.frames.push_back(std::move(e));
                    luma_streams.push_back(std::move(enc.bitstream));
                }
                point.bl_bitstream = point.dir + "/bl.tbs";
                write_tbs(cfg.outdir + "/" + point.bl_bitstream, cfg.width, cfg.height, qp,
                          luma_streams, orig_frames);
                point.bl_fnv64 = fnv64_file(cfg.outdir + "/" + point.bl_bitstream);

                PointReports reports;
                double sse_bl = 0.0, sse_el = 0.0;
                uint64_t el_bits = 0;
                int gi = 0;
                for (auto [b, e] : partition(all.frames.size(), cfg.group_size)) {
                    bl::FrameGroup group;
                    group.frames.assign(all.frames.begin() + long(b), all.frames.begin() + long(e));
                    point.groups.push_back(encode_group(ctx, point.label, dir_abs, point.dir, gi,
                                                        b, group, reports, sse_bl, sse_el,
                                                        el_bits));
                    ++gi;
                }
                write_point_reports(dir_abs, reports);
                point.rate_el_bits = point.rate_bl_bits + el_bits;
                point.psnr_bl = aggregate_psnr(sse_bl, total_pixels);
                point.psnr_el = aggregate_psnr(sse_el, total_pixels);
                rd_rows.push_back({point.label, "bl", point.rate_bl_bits, point.psnr_bl});
                rd_rows.push_back({point.label, "el", point.rate_el_bits, point.psnr_el});
                res.points.push_back(std::move(point));
            }
        } else {
            PointRecord point;
            point.label = "ingest";
            point.qp = -1;
            point.dir = point.label;
            std::string dir_abs = cfg.outdir + "/" + point.dir;
            fs::create_directories(dir_abs);

            std::vector<bl::RateLogRow> log = bl::read_rate_log(cfg.rate_log);
            bl::FrameGroup all = bl::ingest(cfg.input, cfg.recon, cfg.width, cfg.height, log);
            for (const bl::FrameEntry& f : all.frames) point.rate_bl_bits += f.r_bits;
            point.bl_fnv64 = fnv64_file(cfg.recon);

            PointReports reports;
            double sse_bl = 0.0, sse_el = 0.0;
            uint64_t el_bits = 0;
            int gi = 0;
            for (auto [b, e] : partition(all.frames.size(), cfg.group_size)) {
                bl::FrameGroup group;
                group.frames.assign(all.frames.begin() + long(b), all.frames.begin() + long(e));
                point.groups.push_back(encode_group(ctx, point.label, dir_abs, point.dir, gi, b,
                                                    group, reports, sse_bl, sse_el, el_bits));
                ++gi;
            }
            write_point_reports(dir_abs, reports);
            point.rate_el_bits = point.rate_bl_bits + el_bits;
            point.psnr_bl = aggregate_psnr(sse_bl, total_pixels);
            point.psnr_el = aggregate_psnr(sse_el, total_pixels);
            rd_rows.push_back({point.label, "bl", point.rate_bl_bits, point.psnr_bl});
            rd_rows.push_back({point.label, "el", point.rate_el_bits, point.psnr_el});
            res.points.push_back(std::move(point));
        }
    } catch (const Error&) {
        flush_manifest(false);
        throw;
    }

    rep::write_rd_csv(cfg.outdir + "/rd_curve.csv", rd_rows);
    res.complete = true;
    flush_manifest(true);
    return res;
}

Manifest read_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file_bytes(path));
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path + ": bad JSON: " + e.what());
    }
    Manifest m;
    try {
        m.config_hash = parse_hex64(j.at("config_hash").get<std::string>(), "config_hash");
        m.mode = j.at("mode").get<std::string>();
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.input = j.at("input").get<std::string>();
        m.recon = j.value("recon", std::string());
        m.rate_log = j.value("rate_log", std::string());
        m.initial_model = j.at("initial_model").get<std::string>();
        m.initial_fnv64 = parse_hex64(j.at("initial_fnv64").get<std::string>(), "initial_fnv64");
        m.complete = j.at("complete").get<bool>();
        for (const auto& jp : j.at("points")) {
            PointRecord p;
            p.label = jp.at("label").get<std::string>();
            p.qp = jp.at("qp").get<int>();
            p.dir = jp.at("dir").get<std::string>();
            p.bl_bitstream = jp.at("bl_bitstream").get<std::string>();
            p.bl_fnv64 = parse_hex64(jp.at("bl_fnv64").get<std::string>(), "bl_fnv64");
            p.rate_bl_bits = jp.at("rate_bl_bits").get<uint64_t>();
            p.rate_el_bits = jp.at("rate_el_bits").get<uint64_t>();
            p.psnr_bl = jp.at("psnr_bl").get<double>();
            p.psnr_el = jp.at("psnr_el").get<double>();
            for (const auto& jg : jp.at("groups")) {
                GroupRecord g;
                g.index = jg.at("index").get<int>();
                g.frame_begin = jg.at("frame_begin").get<size_t>();
                g.frame_end = jg.at("frame_end").get<size_t>();
                g.el_path = jg.at("el").get<std::string>();
                g.el_fnv64 = parse_hex64(jg.at("el_fnv64").get<std::string>(), "el_fnv64");
                g.no_el = jg.at("no_el").get<bool>();
                g.chosen_epoch = jg.at("chosen_epoch").get<int>();
                g.chosen_id = parse_hex64(jg.at("chosen_id").get<std::string>(), "chosen_id");
                g.r_model_bits = jg.at("r_model_bits").get<uint64_t>();
                g.j_chosen = jg.at("j_chosen").get<double>();
                g.j_baseline = jg.at("j_baseline").get<double>();
                g.mean_psnr_gain = jg.at("mean_psnr_gain").get<double>();
                p.groups.push_back(std::move(g));
            }
            m.points.push_back(std::move(p));
        }
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path + ": missing or mistyped key: " + e.what());
    }
    return m;
}

namespace {

// A path stored in the manifest may be relative to the encode-time working
// directory or to the run directory itself; accept either.
std::string resolve_path(const std::string& stored, const std::string& run_dir) {
    if (stored.empty()) return stored;
    if (fs::exists(stored)) return stored;
    std::string alt = run_dir + "/" + stored;
    if (fs::exists(alt)) return alt;
    throw IoError("cannot find " + stored + " (also tried " + alt + ")");
}

}  // namespace

DecodeResult run_decode(const std::string& manifest_path, const std::string& label,
                        const std::string& outdir) {
    Manifest man = read_manifest(manifest_path);
    std::string run_dir = fs::path(manifest_path).parent_path().string();
    if (run_dir.empty()) run_dir = ".";

    const PointRecord* point = nullptr;
    for (const PointRecord& p : man.points)
        if (p.label == label) point = &p;
    if (!point) throw ConfigError("decode: manifest has no operating point '" + label + "'");

    std::string initial_path;
    if (!man.initial_model.empty()) {
        initial_path = resolve_path(man.initial_model, run_dir);
        if (fnv64_file(initial_path) != man.initial_fnv64)
            throw ConfigError("decode: initial model does not match the manifest hash");
    }
    net::QuantizedModel initial_q = load_initial_model(initial_path);

    // Base layer first; it must survive an enhancement failure.
    std::vector<Plane8> recon_luma;
    std::vector<Plane8> chroma_u, chroma_v;
    if (man.mode == "toy-bl") {
        std::string tbs_path = run_dir + "/" + point->bl_bitstream;
        if (fnv64_file(tbs_path) != point->bl_fnv64)
            throw ConfigError("decode: base-layer stream does not match the manifest hash");
        TbsData tbs = read_tbs(tbs_path);
        if (tbs.w != man.width || tbs.h != man.height || tbs.qp != point->qp)
            throw ConfigError("decode: base-layer geometry disagrees with the manifest");
        for (size_t i = 0; i < tbs.luma.size(); ++i) {
            recon_luma.push_back(bl::toy_decode(tbs.luma[i], tbs.w, tbs.h, tbs.qp));
            chroma_u.push_back(std::move(tbs.u[i]));
            chroma_v.push_back(std::move(tbs.v[i]));
        }
    } else {
        std::string recon_path = resolve_path(man.recon, run_dir);
        if (fnv64_file(recon_path) != point->bl_fnv64)
            throw ConfigError("decode: reconstruction does not match the manifest hash");
        for (YuvFrame& f : read_yuv420(recon_path, man.width, man.height)) {
            recon_luma.push_back(std::move(f.y));
            chroma_u.push_back(std::move(f.u));
            chroma_v.push_back(std::move(f.v));
        }
    }

    fs::create_directories(outdir);
    std::string out_path = outdir + "/enhanced.yuv";

    auto assemble = [&](const std::vector<Plane8>& luma) {
        std::vector<YuvFrame> frames;
        for (size_t i = 0; i < luma.size(); ++i) {
            YuvFrame f;
            f.y = luma[i];
            f.u = chroma_u[i];
            f.v = chroma_v[i];
            frames.push_back(std::move(f));
        }
        return frames;
    };

    DecodeResult res;
    res.enhanced_path = out_path;
    std::vector<Plane8> enhanced = recon_luma;
    try {
        for (const GroupRecord& g : point->groups) {
            if (g.frame_end > recon_luma.size() || g.frame_begin >= g.frame_end)
                throw ConfigError("decode: group " + std::to_string(g.index) +
                                  " frame range exceeds the base layer");
            std::vector<uint8_t> bytes = read_file_bytes(run_dir + "/" + g.el_path);
            codec::ElHeader hdr = codec::parse_el_header(bytes);
            if (!hdr.present) continue;  // base layer already in place
            net::QuantizedModel model = codec::deserialize_el(bytes, initial_q);
            for (size_t i = g.frame_begin; i < g.frame_end; ++i)
                enhanced[i] = ru::enhance_frame(model, recon_luma[i]);
            res.any_el = true;
        }
    } catch (const DecodeError&) {
        // Degrade to the plain base layer, then report the failure.
        write_yuv420(out_path, assemble(recon_luma));
        throw;
    }

    write_yuv420(out_path, assemble(enhanced));

    for (const Plane8& p : enhanced)
        res.luma_fnv64.push_back(fnv64_bytes(p.data.data(), p.data.size()));

    // Quality report only when the original material is still around.
    std::vector<YuvFrame> orig;
    try {
        std::string orig_path = resolve_path(man.input, run_dir);
        orig = read_yuv420(orig_path, man.width, man.height);
    } catch (const Error&) {
        orig.clear();
    }
    if (orig.size() == enhanced.size())
        for (size_t i = 0; i < enhanced.size(); ++i)
            res.psnr.push_back(ru::metrics(orig[i].y, enhanced[i]).psnr);

    std::string csv = "label,frame,psnr,luma_fnv64\n";
    for (size_t i = 0; i < enhanced.size(); ++i) {
        char num[64];
        if (res.psnr.empty())
            std::snprintf(num, sizeof(num), "nan");
        else
            std::snprintf(num, sizeof(num), "%.17g", res.psnr[i]);
        csv += label + "," + std::to_string(i) + "," + num + "," + hex64(res.luma_fnv64[i]) + "\n";
    }
    write_text_file(outdir + "/decode_metrics.csv", csv);
    return res;
}

PretrainResult pretrain_initial(const PretrainConfig& cfg) {
    if (cfg.out_path.empty()) throw ConfigError("pretrain: no output path");
    if (cfg.qps.empty()) throw ConfigError("pretrain: empty qp list");
    std::vector<std::string> paths;
    try {
        for (const auto& entry : fs::directory_iterator(cfg.corpus_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".pgm")
                paths.push_back(entry.path().string());
    } catch (const fs::filesystem_error& e) {
        throw IoError("pretrain: cannot list corpus: " + std::string(e.what()));
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw ConfigError("pretrain: no .pgm images under " + cfg.corpus_dir);

    std::vector<Tensor4> degraded, original;
    for (const std::string& p : paths) {
        Plane8 img = read_pgm(p);
        Tensor4 orig = plane_to_tensor(img);
        for (int qp : cfg.qps) {
            bl::ToyEncodeResult enc = bl::toy_encode(img, qp);
            degraded.push_back(plane_to_tensor(enc.recon));
            original.push_back(orig);
        }
    }

    net::NetworkConfig net_cfg = net::NetworkConfig::standard();
    net::RestorationModel model = net::RestorationModel::init_random(net_cfg, cfg.train.seed);
    auto free_size = [](const net::QuantizedModel&) { return size_t(0); };
    std::vector<net::ModelCheckpoint> cks =
        net::train_online(model, degraded, original, cfg.train, free_size);
    if (cks.empty()) throw NumericError("pretrain: training produced no checkpoint");

    fs::path out(cfg.out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_file_bytes(cfg.out_path, codec::serialize_initial(cks.back().quantized));

    PretrainResult res;
    res.out_path = cfg.out_path;
    res.probe_mse_before = cks.front().train_mse;
    res.probe_mse_after = cks.back().train_mse;
    res.images = paths.size();
    res.pairs = degraded.size();
    return res;
}

}  // namespace elc::pipe
