// Command-line driver: pretrain the shared reference model, run encodes,
// decode operating points, compare rate curves, and render reports.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "elc/bdrate.hpp"
#include "elc/errors.hpp"
#include "elc/pipeline.hpp"
#include "elc/report.hpp"

using namespace elc;

namespace {

// Training knobs shared by `encode` and `pretrain`. A profile sets the bulk
// defaults; any explicit flag wins over the profile.
struct TrainFlags {
    std::string profile = "desk";
    int iters = 0, epochs = 0, batch = 0, patch = 0, probe = 0;
    double lr = 0.0;
    uint64_t cap = 0;
    CLI::Option *oi = nullptr, *oe = nullptr, *ob = nullptr, *op = nullptr, *opr = nullptr,
                *olr = nullptr, *ocap = nullptr;

    void add(CLI::App* cmd) {
        cmd->add_option("--profile", profile,
                        "training scale: desk (200 iters/epoch, batch 8) or full (1000 "
                        "iters/epoch, batch 64)")
            ->check(CLI::IsMember({"desk", "full"}))
            ->capture_default_str();
        oi = cmd->add_option("--train-iters", iters, "iterations per epoch");
        oe = cmd->add_option("--train-epochs", epochs, "maximum epochs");
        ob = cmd->add_option("--train-batch", batch, "patches per iteration");
        op = cmd->add_option("--train-patch", patch, "square crop size");
        olr = cmd->add_option("--train-lr", lr, "Adam learning rate");
        ocap = cmd->add_option("--size-cap", cap, "compressed-model budget in bytes");
        opr = cmd->add_option("--probe-crops", probe, "crops for the per-epoch loss probe");
    }

    void apply(net::TrainingConfig& t) const {
        if (profile == "desk") {
            t.iters_per_epoch = 200;
            t.max_epochs = 5;
            t.batch = 8;
        } else {
            t.iters_per_epoch = 1000;
            t.max_epochs = 5;
            t.batch = 64;
        }
        if (oi->count()) t.iters_per_epoch = iters;
        if (oe->count()) t.max_epochs = epochs;
        if (ob->count()) t.batch = batch;
        if (op->count()) t.patch = patch;
        if (olr->count()) t.lr = lr;
        if (ocap->count()) t.size_cap_bytes = size_t(cap);
        if (opr->count()) t.probe_crops = probe;
    }
};

std::string fmt_db(double v) {
    char buf[32];
    if (std::isinf(v))
        std::snprintf(buf, sizeof(buf), "lossless");
    else
        std::snprintf(buf, sizeof(buf), "%.3f dB", v);
    return buf;
}

bd::RdCurve curve_from_csv(const std::string& path, const std::string& layer) {
    bd::RdCurve c;
    for (const rep::RdRow& r : rep::read_rd_csv(path))
        if (r.layer == layer) c.points.push_back({double(r.rate_bits), r.psnr});
    std::sort(c.points.begin(), c.points.end(),
              [](const bd::RdPoint& a, const bd::RdPoint& b) { return a.rate < b.rate; });
    if (c.points.empty())
        throw ConfigError(path + " has no rows for layer '" + layer + "'");
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned enhancement layer over a toy or external base layer"};
    app.require_subcommand(1);

    // ---- encode
    CLI::App* enc = app.add_subcommand("encode", "base-layer pass plus per-group model training");
    pipe::RunConfig cfg;
    TrainFlags enc_train;
    bool always_send = false;
    enc->add_option("--mode", cfg.mode, "toy-bl codes the clip itself; ingest wraps external output")
        ->check(CLI::IsMember({"toy-bl", "ingest"}))
        ->capture_default_str();
    enc->add_option("--input", cfg.input, "original 4:2:0 8-bit clip")->required();
    enc->add_option("--recon", cfg.recon, "ingest: externally reconstructed clip");
    enc->add_option("--rate-log", cfg.rate_log, "ingest: per-frame 'index bits qp' table");
    enc->add_option("--width", cfg.width, "luma width")->required();
    enc->add_option("--height", cfg.height, "luma height")->required();
    enc->add_option("--qps", cfg.qps, "toy-bl qp sweep")->delimiter(',')->capture_default_str();
    enc->add_option("--group-size", cfg.group_size, "frames sharing one model")
        ->capture_default_str();
    enc->add_flag("--always-send-model", always_send,
                  "transmit the best model even when skipping it scores better");
    enc->add_option("--initial", cfg.initial_model, "shared reference model file");
    enc->add_option("--outdir", cfg.outdir, "run directory (env ELC_OUT_DIR)")
        ->envname("ELC_OUT_DIR")
        ->capture_default_str();
    enc->add_option("--seed", cfg.seed, "run seed")->capture_default_str();
    enc_train.add(enc);

    // ---- decode
    CLI::App* dec = app.add_subcommand("decode", "reconstruct one operating point");
    std::string manifest, label, dec_outdir = "decoded";
    dec->add_option("--manifest", manifest, "run manifest.json")->required();
    dec->add_option("--label", label, "operating point, e.g. qp37 or ingest")->required();
    dec->add_option("--outdir", dec_outdir, "output directory (env ELC_OUT_DIR)")
        ->envname("ELC_OUT_DIR")
        ->capture_default_str();

    // ---- pretrain
    CLI::App* pre = app.add_subcommand("pretrain", "train the shared reference model on stills");
    pipe::PretrainConfig pcfg;
    TrainFlags pre_train;
    pre->add_option("--corpus", pcfg.corpus_dir, "directory of 8-bit .pgm stills")->required();
    pre->add_option("--out", pcfg.out_path, "reference model file to write")->required();
    pre->add_option("--qps", pcfg.qps, "degradation qp mix")->delimiter(',')->capture_default_str();
    pre->add_option("--seed", pcfg.train.seed, "training seed")->capture_default_str();
    pre_train.add(pre);

    // ---- bdrate
    CLI::App* bdr = app.add_subcommand("bdrate", "average rate change between two rate curves");
    std::string anchor_csv, test_csv, anchor_layer = "bl", test_layer = "el";
    bdr->add_option("--anchor", anchor_csv, "rd_curve.csv of the anchor")->required();
    bdr->add_option("--test", test_csv, "rd_curve.csv of the test run")->required();
    bdr->add_option("--anchor-layer", anchor_layer)->capture_default_str();
    bdr->add_option("--test-layer", test_layer)->capture_default_str();

    // ---- report
    CLI::App* rpt = app.add_subcommand("report", "render plots and summary.json for a run");
    std::string run_dir;
    rpt->add_option("--run", run_dir, "run directory with manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (enc->parsed()) {
            cfg.allow_no_el = !always_send;
            enc_train.apply(cfg.train);
            pipe::RunResult res = pipe::run_encode(cfg);
            for (const pipe::PointRecord& p : res.points) {
                size_t with_el = 0;
                for (const pipe::GroupRecord& g : p.groups) with_el += g.no_el ? 0 : 1;
                std::printf("%-7s base %10llu bits %s | enhanced %10llu bits %s | models %zu/%zu\n",
                            p.label.c_str(), (unsigned long long)p.rate_bl_bits,
                            fmt_db(p.psnr_bl).c_str(), (unsigned long long)p.rate_el_bits,
                            fmt_db(p.psnr_el).c_str(), with_el, p.groups.size());
            }
            std::printf("manifest: %s\n", res.manifest_path.c_str());
        } else if (dec->parsed()) {
            pipe::DecodeResult res = pipe::run_decode(manifest, label, dec_outdir);
            double mean = 0.0;
            for (double v : res.psnr) mean += v;
            if (!res.psnr.empty()) mean /= double(res.psnr.size());
            std::printf("%s: %zu frames, %s%s\n", res.enhanced_path.c_str(),
                        res.luma_fnv64.size(),
                        res.any_el ? "enhanced" : "base layer only",
                        res.psnr.empty() ? "" : (", mean " + fmt_db(mean)).c_str());
        } else if (pre->parsed()) {
            pre_train.apply(pcfg.train);
            pipe::PretrainResult res = pipe::pretrain_initial(pcfg);
            std::printf("%s: %zu stills, %zu pairs, probe mse %.6g -> %.6g\n",
                        res.out_path.c_str(), res.images, res.pairs, res.probe_mse_before,
                        res.probe_mse_after);
        } else if (bdr->parsed()) {
            double pct = bd::bd_rate(curve_from_csv(anchor_csv, anchor_layer),
                                     curve_from_csv(test_csv, test_layer));
            std::printf("%.4f\n", pct);
        } else if (rpt->parsed()) {
            rep::emit_reports(run_dir);
            std::printf("%s: summary.json and plots/ written\n", run_dir.c_str());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.kind()) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Io: return 3;
            case ErrorKind::Numeric: return 4;
            case ErrorKind::Decode: return 5;
        }
    }
    return 0;
}
