#include <CLI11.hpp>

#include "lorbpano/cli.hpp"

using namespace lorbpano;

int main(int argc, char** argv) {
    CLI::App app{"panoramic video stitching toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode;
    std::string out_dir;
    std::string image_path;
    std::string suite = "features";
    std::uint64_t seed = 0;
    int frames_in_flight = 0;
    bool emit_timings = false;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file path");
        cmd->add_option("--mode", mode, "serial|pipelined");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; }, "RNG seed");
        cmd->add_option("--frames-in-flight", frames_in_flight, "pipeline depth");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_flag("--emit-timings", emit_timings, "write timings.csv");
    };

    CLI::App* stitch = app.add_subcommand("stitch", "stitch frame sequences to panoramas");
    add_common(stitch);
    CLI::App* extract = app.add_subcommand("extract", "extract features from one image");
    add_common(extract);
    extract->add_option("image", image_path, "input image")->required();
    CLI::App* benchcmd = app.add_subcommand("bench", "run a benchmark suite");
    add_common(benchcmd);
    benchcmd->add_option("suite", suite, "features|match|pipeline");

    CLI11_PARSE(app, argc, argv);

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = parse_config(config_path);
        if (!mode.empty()) {
            if (mode == "serial")
                cfg.pipeline.mode = PipelineMode::Serial;
            else if (mode == "pipelined")
                cfg.pipeline.mode = PipelineMode::Pipelined;
            else
                throw ValidationError("mode: expected serial or pipelined");
        }
        if (seed_set) {
            cfg.seed = seed;
            cfg.matching.seed = seed;
            cfg.prosac.seed = seed;
        }
        if (frames_in_flight > 0) cfg.pipeline.frames_in_flight = frames_in_flight;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (emit_timings) cfg.emit_timings = true;
    } catch (const Error& e) {
        cli::log_error(e.what());
        return 2;
    }

    try {
        if (stitch->parsed()) {
            if (config_path.empty()) {
                cli::log_error("stitch requires --config");
                return 2;
            }
            return cli::cmd_stitch(cfg);
        }
        if (extract->parsed()) return cli::cmd_extract(cfg, image_path);
        if (benchcmd->parsed()) return cli::cmd_bench(cfg, suite);
    } catch (const ValidationError& e) {
        cli::log_error(e.what());
        return 2;
    } catch (const std::exception& e) {
        cli::log_error(e.what());
        return 1;
    }
    return 2;
}
