#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace elc::rep {

// Per-frame rate/distortion bookkeeping, one row per coded frame.
// Columns: label,group,frame,r_bits,lambda,sse_bl,psnr_bl,sse_el,psnr_el,enhanced_luma_fnv64
struct MetricsRow {
    std::string label;
    int group = 0;
    int frame = 0;
    uint64_t r_bits = 0;
    double lambda = 0.0;
    double sse_bl = 0.0;
    double psnr_bl = 0.0;
    double sse_el = 0.0;
    double psnr_el = 0.0;
    uint64_t enhanced_fnv64 = 0;
};

// One row per scored option; candidate -1 is the no-model baseline.
// Columns: label,group,candidate,epoch,id,r_model_bits,group_j,chosen,mean_psnr_gain
struct SelectionRow {
    std::string label;
    int group = 0;
    int candidate = -1;
    int epoch = -1;
    uint64_t id = 0;
    uint64_t r_model_bits = 0;
    double group_j = 0.0;
    bool chosen = false;
    double mean_psnr_gain = 0.0;
};

// One row per training checkpoint.
// Columns: label,group,epoch,id,train_mse,entropy_residue,entropy_wq,r_model_bits,file_bytes
struct EntropyRow {
    std::string label;
    int group = 0;
    int epoch = 0;
    uint64_t id = 0;
    double train_mse = 0.0;
    double h_residue = 0.0;
    double h_wq = 0.0;
    uint64_t r_model_bits = 0;
    uint64_t file_bytes = 0;
};

// Quantized-weight histogram of the transmitted model (initial model when
// no EL was selected). Counts over all bins sum to the weight count.
// Columns: label,group,wq,count
struct HistRow {
    std::string label;
    int group = 0;
    int32_t wq = 0;
    uint64_t count = 0;
};

// Aggregate operating points, two rows (layer bl / el) per label.
// Columns: label,layer,rate_bits,psnr
struct RdRow {
    std::string label;
    std::string layer;
    uint64_t rate_bits = 0;
    double psnr = 0.0;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
void write_selection_csv(const std::string& path, const std::vector<SelectionRow>& rows);
void write_entropy_csv(const std::string& path, const std::vector<EntropyRow>& rows);
void write_hist_csv(const std::string& path, const std::vector<HistRow>& rows);
void write_rd_csv(const std::string& path, const std::vector<RdRow>& rows);

// Reads an rd-curve CSV back (used by the bd-rate command and plot pass).
std::vector<RdRow> read_rd_csv(const std::string& path);

// Renders plots/*.svg and summary.json from a completed run directory
// (manifest plus the CSV artifacts above). Throws ConfigError when expected
// artifacts are missing, IoError when files cannot be read or written.
void emit_reports(const std::string& run_dir);

}  // namespace elc::rep
