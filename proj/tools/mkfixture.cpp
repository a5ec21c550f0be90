// Generates the synthetic clips and stills used by the demos and tests.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <string>

#include "elc/errors.hpp"
#include "elc/frame.hpp"
#include "fixture_gen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic test-content generator"};
    app.require_subcommand(1);

    std::string out;
    int width = 288, height = 288, frames = 8, count = 4;
    uint64_t seed = 1;
    fixgen::Params params;

    CLI::App* yuv = app.add_subcommand("yuv", "write one textured 4:2:0 clip");
    yuv->add_option("--out", out, "output .yuv path")->required();
    yuv->add_option("--width", width)->capture_default_str();
    yuv->add_option("--height", height)->capture_default_str();
    yuv->add_option("--frames", frames)->capture_default_str();
    yuv->add_option("--seed", seed)->capture_default_str();
    yuv->add_option("--rects", params.rects, "rectangles per frame")->capture_default_str();
    yuv->add_option("--noise", params.noise, "peak pixel-noise amplitude")->capture_default_str();
    yuv->add_option("--detail", params.detail, "fine ripple amplitude")->capture_default_str();

    CLI::App* pgm = app.add_subcommand("pgm", "write textured stills into a directory");
    pgm->add_option("--outdir", out, "directory for the .pgm files")->required();
    pgm->add_option("--count", count)->capture_default_str();
    pgm->add_option("--width", width)->capture_default_str();
    pgm->add_option("--height", height)->capture_default_str();
    pgm->add_option("--seed", seed)->capture_default_str();
    pgm->add_option("--rects", params.rects, "rectangles per image")->capture_default_str();
    pgm->add_option("--noise", params.noise, "peak pixel-noise amplitude")->capture_default_str();
    pgm->add_option("--detail", params.detail, "fine ripple amplitude")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (yuv->parsed()) {
            elc::write_yuv420(out, fixgen::clip(width, height, frames, seed, params));
            std::printf("%s: %dx%d, %d frames\n", out.c_str(), width, height, frames);
        } else {
            std::filesystem::create_directories(out);
            std::mt19937_64 rng(seed);
            for (int i = 0; i < count; ++i) {
                std::string path = out + "/still_" + std::to_string(i) + ".pgm";
                elc::write_pgm(path, fixgen::luma(width, height, rng, params));
                std::printf("%s\n", path.c_str());
            }
        }
    } catch (const elc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        switch (e.kind()) {
            case elc::ErrorKind::Config: return 2;
            case elc::ErrorKind::Io: return 3;
            case elc::ErrorKind::Numeric: return 4;
            case elc::ErrorKind::Decode: return 5;
        }
    }
    return 0;
}
