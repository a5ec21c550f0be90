#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elc/network.hpp"

namespace elc::pipe {

// Full description of one encode run. `hash()` covers the canonical JSON
// form minus the output directory, so the same material and knobs produce
// the same hash wherever the artifacts land.
struct RunConfig {
    std::string mode = "toy-bl";  // "toy-bl" codes input itself; "ingest" wraps external material
    std::string input;            // original 4:2:0 clip
    std::string recon;            // ingest: externally reconstructed clip
    std::string rate_log;         // ingest: per-frame bits/qp table
    int width = 0;
    int height = 0;
    std::vector<int> qps = {22, 27, 32, 37};  // toy-bl sweep; ignored by ingest
    int group_size = 8;           // frames sharing one transmitted model
    bool allow_no_el = true;
    std::string initial_model;    // reference-model file; empty = identity model
    std::string outdir = "out";
    uint64_t seed = 1;
    net::TrainingConfig train;

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    uint64_t hash() const;
};

struct GroupRecord {
    int index = 0;
    size_t frame_begin = 0;
    size_t frame_end = 0;  // half-open
    std::string el_path;   // relative to the run directory
    uint64_t el_fnv64 = 0;
    bool no_el = true;
    int chosen_epoch = -1;
    uint64_t chosen_id = 0;
    uint64_t r_model_bits = 0;
    double j_chosen = 0.0;
    double j_baseline = 0.0;
    double mean_psnr_gain = 0.0;
};

struct PointRecord {
    std::string label;  // "qp22".."qp51" or "ingest"
    int qp = -1;        // -1 when rates come from an external log
    std::string dir;
    std::string bl_bitstream;  // toy mode only, relative path
    uint64_t bl_fnv64 = 0;
    std::vector<GroupRecord> groups;
    uint64_t rate_bl_bits = 0;  // sum of frame rates
    uint64_t rate_el_bits = 0;  // frame rates plus every group's model bits
    double psnr_bl = 0.0;       // aggregate over the whole point
    double psnr_el = 0.0;
};

struct RunResult {
    uint64_t config_hash = 0;
    std::string manifest_path;
    std::vector<PointRecord> points;
    bool complete = false;
};

// Encodes every operating point: base-layer pass (or ingestion), online
// training per group, checkpoint selection, EL emission, CSV reports, and
// the manifest. A failure still writes a manifest flagged incomplete
// before the error propagates.
RunResult run_encode(const RunConfig& cfg);

// Manifest mirror used by the decoder and the report pass.
struct Manifest {
    uint64_t config_hash = 0;
    std::string mode;
    int width = 0;
    int height = 0;
    std::string input;
    std::string recon;
    std::string rate_log;
    std::string initial_model;  // path as configured; empty = identity
    uint64_t initial_fnv64 = 0;
    bool complete = false;
    std::vector<PointRecord> points;
};

Manifest read_manifest(const std::string& path);

struct DecodeResult {
    std::string enhanced_path;
    std::vector<uint64_t> luma_fnv64;  // per decoded frame
    std::vector<double> psnr;          // empty when the original is unavailable
    bool any_el = false;
};

// Reconstructs one operating point from its manifest entry: base layer from
// the toy bitstream (or the ingested reconstruction), then the enhancement
// model per group. File hashes are verified against the manifest first. On
// an EL decode failure the plain base-layer output is still written before
// the error propagates.
DecodeResult run_decode(const std::string& manifest_path, const std::string& label,
                        const std::string& outdir);

struct PretrainConfig {
    std::string corpus_dir;  // directory of 8-bit PGM stills
    std::string out_path;    // reference-model file to write
    std::vector<int> qps = {22, 27, 32, 37};
    net::TrainingConfig train;
};

struct PretrainResult {
    std::string out_path;
    double probe_mse_before = 0.0;  // identity-start model on the probe crops
    double probe_mse_after = 0.0;
    size_t images = 0;
    size_t pairs = 0;
};

// Trains the shared reference model on toy-degraded stills at mixed QPs and
// writes it as a reference-flagged container.
PretrainResult pretrain_initial(const PretrainConfig& cfg);

// Loads the reference model for a run: the configured file when set, the
// all-zero identity model otherwise.
net::QuantizedModel load_initial_model(const std::string& path);

uint64_t fnv64_bytes(const void* data, size_t n);
uint64_t fnv64_file(const std::string& path);
std::string hex64(uint64_t v);

}  // namespace elc::pipe
