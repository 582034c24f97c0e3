// qgda: command-line front end.
//
//   qgda <truth|filter-vorticity|filter-layer2|particles|sweep|run> [--config file] [overrides]
//
// Precedence: flags > QGDA_* environment variables > config file > defaults.
// Exit codes: 0 ok, 1 unexpected internal error, 2 config error, 3 numerical
// divergence, 4 I/O error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qgda/harness.hpp"

namespace {

enum Exit { ok = 0, internal_error = 1, config_error = 2, divergence = 3, io_error = 4 };

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> n;
    std::optional<long> n_steps, stride, smoothing_interval;
    std::optional<double> dt, kd2, beta, B1, b2, drag_beta, sigma_x;
    std::optional<int> smoothing_width, count, layer;
    std::optional<std::string> out_dir, cov_mode, ic, format, flow, std_divisor, sweep_filter;
    std::vector<int> grids;
    std::vector<long> steps;
    std::vector<std::uint64_t> seeds;
    bool print_config = false;
};

void add_options(CLI::App& cmd, Overrides& o) {
    cmd.add_option("-c,--config", o.config_path, "JSON config or manifest")->envname("QGDA_CONFIG");
    cmd.add_option("--seed", o.seed, "noise seed")->envname("QGDA_SEED");
    cmd.add_option("-o,--out-dir", o.out_dir, "output directory")->envname("QGDA_OUT_DIR");
    cmd.add_option("--stride", o.stride, "snapshot stride in steps")->envname("QGDA_STRIDE");
    cmd.add_option("--cov-mode", o.cov_mode, "dense|diagonal")->envname("QGDA_COV_MODE");
    cmd.add_option("-n,--grid", o.n, "grid points per side")->envname("QGDA_N");
    cmd.add_option("--n-steps", o.n_steps, "number of time steps")->envname("QGDA_N_STEPS");
    cmd.add_option("--dt", o.dt, "time step")->envname("QGDA_DT");
    cmd.add_option("--kd2", o.kd2, "squared deformation wavenumber")->envname("QGDA_KD2");
    cmd.add_option("--beta", o.beta, "planetary beta")->envname("QGDA_BETA");
    cmd.add_option("--ic", o.ic, "sinusoidal|gaussian")->envname("QGDA_IC");
    cmd.add_option("--B1", o.B1, "observation noise amplitude")->envname("QGDA_B1");
    cmd.add_option("--b2", o.b2, "model noise amplitude")->envname("QGDA_B2");
    cmd.add_option("--format", o.format, "csv|binary snapshots")->envname("QGDA_FORMAT");
    cmd.add_option("--std-divisor", o.std_divisor, "population|sample")->envname("QGDA_STD_DIVISOR");
    cmd.add_option("--smoothing-interval", o.smoothing_interval, "steps between box filters (0 off, -1 auto)")
        ->envname("QGDA_SMOOTHING_INTERVAL");
    cmd.add_option("--smoothing-width", o.smoothing_width, "odd box filter width")->envname("QGDA_SMOOTHING_WIDTH");
    cmd.add_option("--particles", o.count, "particle count")->envname("QGDA_PARTICLES");
    cmd.add_option("--drag-beta", o.drag_beta, "particle drag rate")->envname("QGDA_DRAG_BETA");
    cmd.add_option("--sigma-x", o.sigma_x, "particle position noise")->envname("QGDA_SIGMA_X");
    cmd.add_option("--layer", o.layer, "flow layer driving particles (1|2)")->envname("QGDA_LAYER");
    cmd.add_option("--flow", o.flow, "truth|recovered particle flow")->envname("QGDA_FLOW");
    cmd.add_option("--grids", o.grids, "sweep grid sizes")->delimiter(',')->envname("QGDA_GRIDS");
    cmd.add_option("--steps", o.steps, "sweep step counts")->delimiter(',')->envname("QGDA_STEPS");
    cmd.add_option("--seeds", o.seeds, "sweep seeds")->delimiter(',')->envname("QGDA_SEEDS");
    cmd.add_option("--sweep-filter", o.sweep_filter, "filter-layer2|filter-vorticity")->envname("QGDA_SWEEP_FILTER");
    cmd.add_flag("--print-config", o.print_config, "print the resolved config and exit");
}

template <class T>
void set_if(qgda::Json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

qgda::Json overlay(qgda::Json doc, const Overrides& o, const std::optional<std::string>& mode) {
    qgda::Json& j = doc.contains("config") ? doc["config"] : doc;
    if (mode) j["mode"] = *mode;
    set_if(j, "seed", o.seed);
    set_if(j, "out_dir", o.out_dir);
    set_if(j, "stride", o.stride);
    set_if(j, "cov_mode", o.cov_mode);
    set_if(j, "n", o.n);
    set_if(j, "n_steps", o.n_steps);
    set_if(j, "dt", o.dt);
    set_if(j, "kd2", o.kd2);
    set_if(j, "beta", o.beta);
    set_if(j, "ic", o.ic);
    set_if(j, "B1", o.B1);
    set_if(j, "b2", o.b2);
    set_if(j, "format", o.format);
    set_if(j, "std_divisor", o.std_divisor);
    auto sub = [&](const char* name) -> qgda::Json& {
        if (!j.contains(name) || !j[name].is_object()) j[name] = qgda::Json::object();
        return j[name];
    };
    if (o.smoothing_interval) {
        if (*o.smoothing_interval < 0) sub("smoothing")["interval"] = "auto";
        else sub("smoothing")["interval"] = *o.smoothing_interval;
    }
    if (o.smoothing_width) sub("smoothing")["width"] = *o.smoothing_width;
    if (o.count) sub("particles")["count"] = *o.count;
    if (o.drag_beta) sub("particles")["drag_beta"] = *o.drag_beta;
    if (o.sigma_x) sub("particles")["sigma_x"] = *o.sigma_x;
    if (o.layer) sub("particles")["layer"] = *o.layer;
    if (o.flow) sub("particles")["flow"] = *o.flow;
    if (!o.grids.empty()) sub("sweep")["grids"] = o.grids;
    if (!o.steps.empty()) sub("sweep")["n_steps"] = o.steps;
    if (!o.seeds.empty()) sub("sweep")["seeds"] = o.seeds;
    if (o.sweep_filter) sub("sweep")["filter"] = *o.sweep_filter;
    return doc;
}

int execute(const Overrides& o, const std::optional<std::string>& mode) {
    qgda::Json doc = qgda::Json::object();
    if (!o.config_path.empty()) {
        try {
            doc = qgda::Json::parse(qgda::read_file(o.config_path));
        } catch (const qgda::Json::parse_error& e) {
            throw qgda::ConfigError(std::string("config: malformed JSON: ") + e.what());
        }
    }
    const qgda::RunConfig cfg = qgda::parse_config(overlay(std::move(doc), o, mode));
    if (o.print_config) {
        std::cout << qgda::to_json(cfg).dump(2) << "\nconfig_hash " << qgda::config_hash(cfg) << "\n";
        return ok;
    }
    if (*cfg.mode == qgda::Mode::sweep) {
        const auto rows = qgda::run_sweep(cfg, [](const std::string& line) { std::cerr << line << std::endl; });
        std::printf("%6s %8s %5s %5s %10s %10s %12s %14s\n", "n", "N_t", "ok", "div", "rmse", "corr", "wall_s",
                    "norm_time");
        for (const auto& r : rows)
            std::printf("%6d %8ld %5d %5d %10.4g %10.4g %12.4g %14.4g\n", r.n, r.n_steps, r.completed, r.diverged,
                        r.rmse, r.corr, r.wall_seconds, r.normalized_time);
        return ok;
    }
    const qgda::RunReport rep = qgda::run_single(cfg);
    std::cout << "mode " << qgda::to_string(*cfg.mode) << " config " << rep.config_hash << " wall "
              << rep.wall_seconds << "s files " << rep.files.size() << " -> " << cfg.out_dir << "\n";
    if (!rep.metrics.empty())
        std::cout << "final step " << rep.metrics.back().step << " rmse " << rep.metrics.back().rmse << " corr "
                  << rep.metrics.back().corr << "\n";
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-layer QG truth solver and conditional Gaussian data assimilation"};
    app.require_subcommand(1);
    Overrides o;
    std::optional<std::string> mode;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"truth", "run the truth model and write field snapshots"},
        {"filter-vorticity", "observe both streamfunctions, recover both potential vorticities"},
        {"filter-layer2", "observe the upper streamfunction, recover the lower one"},
        {"particles", "advect drifting floes in the true or recovered flow"},
        {"sweep", "grid x step-count x seed sweep with a summary table"},
        {"run", "use the mode given in the config file"}};
    for (const auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_options(*cmd, o);
        cmd->callback([&mode, name = name] {
            if (name != "run") mode = name;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }
    try {
        return execute(o, mode);
    } catch (const qgda::ConfigError& e) {
        std::cerr << "qgda: " << e.what() << "\n";
        return config_error;
    } catch (const qgda::DivergenceError& e) {
        std::cerr << "qgda: divergence: " << e.what() << "\n";
        return divergence;
    } catch (const qgda::IoError& e) {
        std::cerr << "qgda: I/O error: " << e.what() << "\n";
        return io_error;
    } catch (const std::exception& e) {
        std::cerr << "qgda: internal error: " << e.what() << "\n";
        return internal_error;
    }
}
