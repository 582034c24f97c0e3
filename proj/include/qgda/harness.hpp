#pragma once

// Orchestration of one configured run: compute, then persist snapshots,
// metrics, trajectories and a manifest under cfg.out_dir.
//
// Layout of cfg.out_dir:
//   manifest.json                config echo, hash, seed, wall time, status
//   snapshots/<var>_<step>.csv   (or .bin) every `stride` steps and the last step
//   metrics.csv                  filter modes: rmse/corr per snapshot
//   trajectories.csv             particles mode
//   summary.csv, cells/...       sweep mode

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "qgda/config.hpp"
#include "qgda/io.hpp"
#include "qgda/layer2_filter.hpp"
#include "qgda/metrics.hpp"
#include "qgda/particles.hpp"
#include "qgda/vorticity_filter.hpp"

namespace qgda {

struct RunReport {
    std::string config_hash;
    double wall_seconds = 0.0;
    std::vector<MetricSample> metrics;  // filter modes only
    std::vector<std::string> files;     // relative to out_dir
};

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

class SnapshotWriter {
public:
    SnapshotWriter(const RunConfig& cfg, std::string hash, RunReport& report)
        : root_(cfg.out_dir), format_(cfg.format), dt_(cfg.phys.dt), hash_(std::move(hash)), report_(report) {}

    void write(const std::string& variable, long step, const GridSpec& grid, const Vector& values) {
        char name[64];
        std::snprintf(name, sizeof name, "%s_%07ld.%s", variable.c_str(), step,
                      format_ == SnapshotFormat::csv ? "csv" : "bin");
        const fs::path rel = fs::path("snapshots") / name;
        const SnapshotRecord rec{variable, step, grid.n(), step * dt_, hash_, values};
        if (format_ == SnapshotFormat::csv) write_snapshot_csv(root_ / rel, rec);
        else write_snapshot_binary(root_ / rel, rec);
        report_.files.push_back(rel.generic_string());
    }

private:
    fs::path root_;
    SnapshotFormat format_;
    double dt_;
    std::string hash_;
    RunReport& report_;
};

inline Json manifest_json(const RunConfig& cfg, const RunReport& report, const std::string& status,
                          const std::string& message) {
    Json j;
    j["config"] = to_json(cfg);
    j["config_hash"] = report.config_hash;
    j["seed"] = cfg.noise.seed;
    j["wall_seconds"] = report.wall_seconds;
    j["status"] = status;
    if (!message.empty()) j["message"] = message;
    j["files"] = report.files;
    if (!report.metrics.empty()) {
        const MetricSample& last = report.metrics.back();
        j["final"] = {{"step", last.step}, {"rmse", last.rmse}, {"corr", last.corr}};
        if (last.normalized_time) j["final"]["normalized_time"] = *last.normalized_time;
    }
    return j;
}

inline std::vector<MetricSample> snapshot_metrics(const FilterResult& r, StdDivisor divisor) {
    std::vector<MetricSample> out;
    for (const FilterSnapshot& s : r.snapshots) {
        MetricSample m;
        m.step = s.step;
        m.rmse = rmse(s.mean, s.truth, divisor);
        m.corr = corr(s.mean, s.truth);
        out.push_back(m);
    }
    return out;
}

inline VorticityFilterConfig vorticity_config(const RunConfig& c) {
    return {c.grid(), c.phys, c.noise, c.cov_mode, c.ic, c.smoothing, c.stride};
}

inline Layer2FilterConfig layer2_config(const RunConfig& c) {
    return {c.grid(), c.phys, c.noise, c.cov_mode, c.ic, c.smoothing, c.stride};
}

inline void run_truth_mode(const RunConfig& cfg, SnapshotWriter& out) {
    run_truth(
        cfg.grid(), cfg.phys, cfg.ic,
        [&](const QGState& s) {
            if (s.step % cfg.stride != 0 && s.step != cfg.phys.n_steps) return;
            out.write("psi1", s.step, s.grid(), s.psi1.values());
            out.write("psi2", s.step, s.grid(), s.psi2.values());
            out.write("q1", s.step, s.grid(), s.q1.values());
            out.write("q2", s.step, s.grid(), s.q2.values());
        },
        cfg.smoothing);
}

inline FilterResult run_filter_mode(const RunConfig& cfg, SnapshotWriter* out) {
    const bool layer2 = *cfg.mode == Mode::filter_layer2;
    const long n_steps = cfg.phys.n_steps;
    auto observer = [&](const QGState& s, const FilterMoments& m) {
        if (!out || (s.step % cfg.stride != 0 && s.step != n_steps)) return;
        out->write("psi1", s.step, s.grid(), s.psi1.values());
        out->write("psi2", s.step, s.grid(), s.psi2.values());
        if (layer2) {
            out->write("mu_psi2", s.step, s.grid(), m.mu);
        } else {
            const auto cells = static_cast<Eigen::Index>(s.grid().cells());
            out->write("q1", s.step, s.grid(), s.q1.values());
            out->write("q2", s.step, s.grid(), s.q2.values());
            out->write("mu_q1", s.step, s.grid(), m.mu.head(cells));
            out->write("mu_q2", s.step, s.grid(), m.mu.tail(cells));
        }
    };
    return layer2 ? run_layer2_filter(layer2_config(cfg), observer)
                  : run_vorticity_filter(vorticity_config(cfg), observer);
}

inline void write_trajectory_rows(std::ofstream& out, long step, const ParticleSet& p) {
    for (std::size_t i = 0; i < p.size(); ++i)
        out << step << ',' << i << ',' << format_double(p.positions[i][0]) << ',' << format_double(p.positions[i][1])
            << ',' << format_double(p.velocities[i][0]) << ',' << format_double(p.velocities[i][1]) << '\n';
}

/// Particles follow the chosen layer's flow. With the recovered flow they
/// start once the filter's run-up window ends.
inline void run_particles_mode(const RunConfig& cfg, const std::string& hash, RunReport& report) {
    const fs::path rel = "trajectories.csv";
    std::ofstream traj = open_output(fs::path(cfg.out_dir) / rel);
    traj << "# particles count=" << cfg.particles.tracer.count << " layer=" << cfg.particles.tracer.layer
         << " flow=" << (cfg.particles.flow == FlowSource::truth ? "truth" : "recovered") << " config=" << hash
         << "\n";
    traj << "step,particle,x,y,vx,vy\n";
    ParticleSet set = scatter_particles(cfg.particles.tracer);
    const long n_steps = cfg.phys.n_steps;
    auto advance = [&](long step, const ScalarField& psi) {
        if (step % cfg.stride == 0) write_trajectory_rows(traj, step, set);
        if (step == n_steps) return;
        const auto [u, v] = velocity_field(psi);
        set = step_particles(set, u, v, cfg.particles.tracer, cfg.phys.dt, step);
    };
    if (cfg.particles.flow == FlowSource::truth) {
        run_truth(
            cfg.grid(), cfg.phys, cfg.ic,
            [&](const QGState& s) { advance(s.step, cfg.particles.tracer.layer == 1 ? s.psi1 : s.psi2); },
            cfg.smoothing);
    } else {
        run_layer2_filter(layer2_config(cfg), [&](const QGState& s, const FilterMoments& m) {
            advance(s.step, ScalarField(s.grid(), m.mu));
        });
    }
    if (n_steps % cfg.stride != 0) write_trajectory_rows(traj, n_steps, set);
    finish_output(traj, fs::path(cfg.out_dir) / rel);
    report.files.push_back(rel.generic_string());
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs a non-sweep mode. Always writes manifest.json; on failure the
/// manifest records the status and the error is rethrown.
inline RunReport run_single(const RunConfig& cfg) {
    validate(cfg);
    if (*cfg.mode == Mode::sweep) throw ConfigError("run_single: sweep configs go through run_sweep");
    RunReport report;
    report.config_hash = config_hash(cfg);
    ensure_directory(cfg.out_dir);
    detail::SnapshotWriter writer(cfg, report.config_hash, report);
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.json";
    try {
        switch (*cfg.mode) {
            case Mode::truth:
                detail::run_truth_mode(cfg, writer);
                break;
            case Mode::filter_vorticity:
            case Mode::filter_layer2: {
                const FilterResult r = detail::run_filter_mode(cfg, &writer);
                report.metrics = detail::snapshot_metrics(r, cfg.std_divisor);
                const char* variable = *cfg.mode == Mode::filter_layer2 ? "psi2" : "q";
                write_metrics_csv(fs::path(cfg.out_dir) / "metrics.csv", variable, cfg.n, report.config_hash,
                                  cfg.phys.dt, report.metrics);
                report.files.push_back("metrics.csv");
                break;
            }
            case Mode::particles:
                detail::run_particles_mode(cfg, report.config_hash, report);
                break;
            case Mode::sweep:
                break;
        }
    } catch (const Error& e) {
        report.wall_seconds = detail::seconds_since(t0);
        const char* status = dynamic_cast<const DivergenceError*>(&e) ? "diverged" : "failed";
        try {
            write_json(manifest_path, detail::manifest_json(cfg, report, status, e.what()));
        } catch (const IoError&) {
        }
        throw;
    }
    report.wall_seconds = detail::seconds_since(t0);
    if (!report.metrics.empty())
        report.metrics.back().normalized_time = normalized_time(report.wall_seconds, cfg.phys.n_steps, cfg.n);
    if (!report.metrics.empty()) report.metrics.back().wall_seconds = report.wall_seconds;
    write_json(manifest_path, detail::manifest_json(cfg, report, "ok", ""));
    return report;
}

struct SweepCellResult {
    SweepCell cell;
    bool diverged = false;
    std::string message;
    long diverged_step = -1;
    MetricSample final;  // valid when !diverged
};

struct SweepRow {
    int n = 0;
    long n_steps = 0;
    int completed = 0;
    int diverged = 0;
    double rmse = std::numeric_limits<double>::quiet_NaN();  // mean over completed seeds
    double corr = std::numeric_limits<double>::quiet_NaN();
    double wall_seconds = std::numeric_limits<double>::quiet_NaN();
    double normalized_time = std::numeric_limits<double>::quiet_NaN();
};

/// Averages completed seeds per (n, N_t); diverged seeds are counted, not averaged.
inline std::vector<SweepRow> summarize_sweep(const SweepConfig& sweep, const std::vector<SweepCellResult>& cells) {
    std::vector<SweepRow> rows;
    for (const auto& [n, nt] : sweep_rows(sweep)) {
        SweepRow row;
        row.n = n;
        row.n_steps = nt;
        double r = 0, c = 0, w = 0, t = 0;
        for (const SweepCellResult& cr : cells) {
            if (cr.cell.n != n || cr.cell.n_steps != nt) continue;
            if (cr.diverged) {
                ++row.diverged;
                continue;
            }
            ++row.completed;
            r += cr.final.rmse;
            c += cr.final.corr;
            w += cr.final.wall_seconds;
            t += cr.final.normalized_time.value_or(0.0);
        }
        if (row.completed > 0) {
            row.rmse = r / row.completed;
            row.corr = c / row.completed;
            row.wall_seconds = w / row.completed;
            row.normalized_time = t / row.completed;
        }
        rows.push_back(row);
    }
    return rows;
}

inline void write_sweep_summary(const fs::path& path, const std::string& hash, const std::vector<SweepRow>& rows) {
    std::ofstream out = open_output(path);
    out << "# sweep config=" << hash << "\n";
    out << "n,n_steps,completed,diverged,rmse,corr,wall_seconds,normalized_time\n";
    for (const SweepRow& r : rows)
        out << r.n << ',' << r.n_steps << ',' << r.completed << ',' << r.diverged << ',' << format_double(r.rmse) << ','
            << format_double(r.corr) << ',' << format_double(r.wall_seconds) << ','
            << format_double(r.normalized_time) << '\n';
    finish_output(out, path);
}

/// Runs every (n, N_t, seed) cell sequentially into out_dir/cells/<cell>/.
/// A diverging cell is recorded and the sweep continues.
inline std::vector<SweepRow> run_sweep(const RunConfig& cfg, const ProgressFn& progress = {}) {
    validate(cfg);
    if (*cfg.mode != Mode::sweep) throw ConfigError("run_sweep: mode must be sweep");
    const std::string hash = config_hash(cfg);
    ensure_directory(cfg.out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SweepCellResult> results;
    Json cells = Json::array();
    for (const SweepCell& cell : expand_sweep(cfg.sweep)) {
        RunConfig c = cell_config(cfg, cell);
        char dir[96];
        std::snprintf(dir, sizeof dir, "cells/n%d_nt%ld_seed%llu", cell.n, cell.n_steps,
                      static_cast<unsigned long long>(cell.seed));
        c.out_dir = (fs::path(cfg.out_dir) / dir).string();
        c.stride = std::max<long>(cfg.stride, cell.n_steps);  // cells keep only the first and last snapshot
        SweepCellResult res;
        res.cell = cell;
        try {
            const RunReport rep = run_single(c);
            res.final = rep.metrics.back();
        } catch (const DivergenceError& e) {
            res.diverged = true;
            res.message = e.what();
            res.diverged_step = e.step();
        }
        if (progress) {
            char line[256];
            if (res.diverged)
                std::snprintf(line, sizeof line, "n=%d N_t=%ld seed=%llu diverged: %s", cell.n, cell.n_steps,
                              static_cast<unsigned long long>(cell.seed), res.message.c_str());
            else
                std::snprintf(line, sizeof line, "n=%d N_t=%ld seed=%llu rmse=%.4g corr=%.4g wall=%.3gs", cell.n,
                              cell.n_steps, static_cast<unsigned long long>(cell.seed), res.final.rmse,
                              res.final.corr, res.final.wall_seconds);
            progress(line);
        }
        cells.push_back({{"dir", dir}, {"status", res.diverged ? "diverged" : "ok"}});
        results.push_back(std::move(res));
    }
    const std::vector<SweepRow> rows = summarize_sweep(cfg.sweep, results);
    write_sweep_summary(fs::path(cfg.out_dir) / "summary.csv", hash, rows);
    Json manifest;
    manifest["config"] = to_json(cfg);
    manifest["config_hash"] = hash;
    manifest["seed"] = cfg.noise.seed;
    manifest["wall_seconds"] = detail::seconds_since(t0);
    manifest["status"] = "ok";
    manifest["cells"] = cells;
    manifest["files"] = {"summary.csv"};
    write_json(fs::path(cfg.out_dir) / "manifest.json", manifest);
    return rows;
}

}  // namespace qgda
