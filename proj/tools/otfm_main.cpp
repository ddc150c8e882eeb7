// otfm: function-space generative modeling of turbulent fields.
//
// Subcommands: datagen, train, sample, eval, oracle.
// Exit codes: 0 success, 1 contract/assertion failure, 2 usage/config error.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "otfm/datagen.hpp"
#include "otfm/evalmetrics.hpp"
#include "otfm/grf.hpp"
#include "otfm/io.hpp"
#include "otfm/odesample.hpp"
#include "otfm/oracles.hpp"
#include "otfm/trainer.hpp"

using namespace otfm;
using nlohmann::json;

namespace {

struct CliError {
    int code;
    std::string message;
};

struct Args {
    std::string command;
    std::map<std::string, std::string> flags;

    const std::string& require(const std::string& name) const {
        auto it = flags.find(name);
        if (it == flags.end()) throw CliError{2, "missing required flag --" + name};
        return it->second;
    }
    std::optional<std::string> get(const std::string& name) const {
        auto it = flags.find(name);
        if (it == flags.end()) return std::nullopt;
        return it->second;
    }
};

Args parse_args(int argc, char** argv) {
    if (argc < 2) throw CliError{2, "usage: otfm <datagen|train|sample|eval|oracle> [--flag value ...]"};
    Args args;
    args.command = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string flag = argv[i];
        if (flag.rfind("--", 0) != 0) throw CliError{2, "unexpected argument: " + flag};
        if (i + 1 >= argc) throw CliError{2, "flag " + flag + " needs a value"};
        args.flags[flag.substr(2)] = argv[++i];
    }
    return args;
}

int workers_from(const Args& args) {
    if (auto w = args.get("workers")) {
        const int n = std::stoi(*w);
        if (n < 1) throw CliError{2, "--workers must be >= 1"};
        return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

RunConfig load_config(const Args& args) {
    const auto path = args.get("config");
    try {
        return path ? RunConfig::parse_file(*path) : RunConfig::parse_text("");
    } catch (const std::exception& e) {
        throw CliError{2, e.what()};
    }
}

void require_keys(const RunConfig& config, const std::vector<std::string>& keys) {
    for (const auto& key : keys)
        if (!config.has(key)) throw CliError{2, "missing required key " + key};
}

GridSpec parse_grid_override(const std::string& text, const GridSpec& base) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw CliError{2, "--grid-override expects NXxNY"};
    GridSpec g = base;
    try {
        g.nx = std::stoi(text.substr(0, x));
        g.ny = std::stoi(text.substr(x + 1));
        g.validate();
    } catch (const std::exception& e) {
        throw CliError{2, std::string("--grid-override: ") + e.what()};
    }
    return g;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw CliError{1, "cannot open for writing: " + path};
    os << text;
    if (!os) throw CliError{1, "write failed: " + path};
}

void write_manifest(const std::string& data_path, json manifest) {
    manifest["format_version"] = 1;
    write_text(data_path + ".manifest.json", manifest.dump(2) + "\n");
}

std::uint64_t seed_from(const Args& args, const RunConfig& config) {
    if (auto s = args.get("seed")) return std::stoull(*s);
    return config.get_u64("train.seed", 0);
}

// ---------------------------------------------------------------------------

int cmd_datagen(const Args& args) {
    auto config = load_config(args);
    const std::string out = args.require("out");
    require_keys(config, {"grid.nx", "grid.ny", "datagen.snapshots"});

    const GridSpec grid = config.grid();
    const std::uint64_t seed = seed_from(args, config);
    const int workers = workers_from(args);
    const std::string kind = config.get_string("datagen.kind", "kolmogorov");
    const int n = static_cast<int>(config.get_long("datagen.snapshots", 0));

    std::vector<Field> fields;
    if (kind == "kolmogorov") {
        KolmogorovConfig kc;
        kc.grid = grid;
        kc.re = config.get_double("datagen.re", 40.0);
        kc.n_forcing = static_cast<int>(config.get_long("datagen.n_forcing", 4));
        kc.dt = config.get_double("datagen.dt", 1e-3);
        kc.spinup_time = config.get_double("datagen.spinup", 50.0);
        kc.snapshot_interval = config.get_double("datagen.interval", 1.0);
        kc.init_amplitude = config.get_double("datagen.init_amplitude", 0.1);
        kc.trajectories = static_cast<int>(config.get_long("datagen.trajectories", workers));
        kc.n_snapshots = n;
        kc.seed = seed;
        fields = simulate_kolmogorov(kc, workers);
    } else if (kind == "grf") {
        const KernelSpec kernel = config.kernel(grid);
        fields = make_grf_dataset(kernel, grid, n, seed, config.get_double("datagen.mixture_shift", 0.0),
                                  config.get_double("datagen.mixture_weight", 0.5));
    } else {
        throw CliError{2, "datagen.kind must be 'kolmogorov' or 'grf'"};
    }

    write_field_batch(out, fields);
    json manifest;
    manifest["command"] = "datagen";
    manifest["seed"] = seed;
    manifest["count"] = fields.size();
    manifest["effective_config"] = config.dump_effective();
    write_manifest(out, manifest);
    std::printf("datagen: wrote %zu fields (%s) to %s\n", fields.size(), grid.describe().c_str(), out.c_str());
    return 0;
}

int cmd_train(const Args& args) {
    auto config = load_config(args);
    const std::string data_path = args.require("data");
    const std::string out_dir = args.require("out");
    std::filesystem::create_directories(out_dir);

    const auto dataset = read_field_batch(data_path);
    if (dataset.empty()) throw CliError{2, "train: empty dataset"};
    const GridSpec grid = dataset.front().grid;

    TrainConfig tc = config.train();
    if (auto s = args.get("seed")) tc.seed = std::stoull(*s);
    tc.workers = workers_from(args);
    const FnoConfig fno = config.fno();
    const KernelSpec kernel = config.kernel(grid);

    TrainerState state;
    if (auto resume = args.get("resume")) {
        const Checkpoint ckpt = read_checkpoint(*resume);
        state = ckpt.state;
        if (ckpt.master_seed != tc.seed)
            throw CliError{2, "train: checkpoint seed differs from the configured seed"};
    } else {
        state = init_trainer(fno, tc);
    }

    const std::string trace_path = out_dir + "/trace.csv";
    std::ofstream trace(trace_path, state.step == 0 ? std::ios::trunc : std::ios::app);
    if (!trace) throw CliError{1, "cannot open " + trace_path};
    if (state.step == 0) trace << "step,epoch,lr,loss,ot_cost,id_cost,seconds\n";
    trace.precision(17);

    auto save = [&](const TrainerState& s, const std::string& name) {
        Checkpoint ckpt;
        ckpt.fno = fno;
        ckpt.kernel = kernel;
        ckpt.state = s;
        ckpt.master_seed = tc.seed;
        write_checkpoint(out_dir + "/" + name, ckpt);
    };

    std::string last_checkpoint = "(none)";
    TrainHooks hooks;
    hooks.on_record = [&](const TrainRecord& r) {
        trace << r.step << "," << r.epoch << "," << r.lr << "," << r.loss << "," << r.ot_cost << ","
              << r.id_cost << "," << r.seconds << "\n";
    };
    hooks.on_checkpoint = [&](const TrainerState& s, int epoch) {
        const long total = steps_per_epoch(dataset.size(), tc.batch_size) * tc.epochs;
        const std::string name =
            s.step == total ? "checkpoint_final.fck" : "checkpoint_epoch" + std::to_string(epoch + 1) + ".fck";
        save(s, name);
        last_checkpoint = name;
    };

    try {
        train(state, dataset, tc, kernel, hooks);
    } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "train aborted: %s (last checkpoint: %s)\n", e.what(), last_checkpoint.c_str());
        return 1;
    }
    if (last_checkpoint != "checkpoint_final.fck") save(state, "checkpoint_final.fck");

    json manifest;
    manifest["command"] = "train";
    manifest["seed"] = tc.seed;
    manifest["steps"] = state.step;
    manifest["effective_config"] = config.dump_effective();
    write_manifest(out_dir + "/checkpoint_final.fck", manifest);
    std::printf("train: %ld steps done, final checkpoint in %s\n", state.step, out_dir.c_str());
    return 0;
}

int cmd_sample(const Args& args) {
    auto config = load_config(args);
    const std::string ckpt_path = args.require("checkpoint");
    const std::string out = args.require("out");
    const Checkpoint ckpt = read_checkpoint(ckpt_path);

    GridSpec grid = config.grid();
    if (auto o = args.get("grid-override")) grid = parse_grid_override(*o, grid);
    if (ckpt.fno.modes > grid.nx / 2 || ckpt.fno.modes > grid.ny / 2)
        throw CliError{2, "sample: fno modes " + std::to_string(ckpt.fno.modes) +
                              " exceed the target grid Nyquist (need nx, ny >= " +
                              std::to_string(ckpt.fno.min_grid_edge()) + ")"};

    IntegratorSpec spec;
    const std::string scheme = config.get_string("sample.scheme", "euler");
    if (scheme == "euler")
        spec.scheme = IntegratorSpec::Scheme::Euler;
    else if (scheme == "rk4")
        spec.scheme = IntegratorSpec::Scheme::Rk4;
    else
        throw CliError{2, "sample.scheme must be 'euler' or 'rk4'"};
    spec.n_steps = static_cast<int>(config.get_long("sample.steps", 5));
    spec.grid = grid;

    const int count = static_cast<int>(config.get_long("sample.count", 64));
    const std::uint64_t seed = seed_from(args, config);
    GrfSampler noise(ckpt.kernel, grid, Rng(seed).stream("sample-noise").next_u64());

    const auto result = sample_flow(ckpt.state.params, spec, noise, count, workers_from(args), true);
    write_field_batch(out, result.fields);
    json manifest;
    manifest["command"] = "sample";
    manifest["seed"] = seed;
    manifest["nfe"] = result.nfe_per_sample;
    manifest["scheme"] = scheme;
    manifest["steps"] = spec.n_steps;
    manifest["count"] = count;
    manifest["checkpoint"] = ckpt_path;
    manifest["effective_config"] = config.dump_effective();
    write_manifest(out, manifest);
    std::printf("sample: wrote %d fields at %s with NFE=%ld to %s\n", count, grid.describe().c_str(),
                result.nfe_per_sample, out.c_str());
    return 0;
}

void write_curve_csv(const std::string& path, const SpectrumCurve& curve) {
    std::ostringstream os;
    os.precision(17);
    os << "bin,energy\n";
    for (std::size_t i = 0; i < curve.k_bins.size(); ++i)
        os << curve.k_bins[i] << "," << curve.energy[i] << "\n";
    write_text(path, os.str());
}

void write_density_csv(const std::string& path, const DensityCurve& curve) {
    std::ostringstream os;
    os.precision(17);
    os << "x,pdf\n";
    for (std::size_t i = 0; i < curve.eval_points.size(); ++i)
        os << curve.eval_points[i] << "," << curve.pdf[i] << "\n";
    write_text(path, os.str());
}

int cmd_eval(const Args& args) {
    const std::string gen_path = args.require("gen");
    const std::string ref_path = args.require("ref");
    const std::string out = args.require("out");

    const auto gen = read_field_batch(gen_path);
    const auto ref = read_field_batch(ref_path);
    if (gen.empty() || ref.empty()) throw CliError{2, "eval: empty ensemble"};
    if (!(gen.front().grid == ref.front().grid)) throw CliError{2, "eval: grid mismatch between files"};

    long nfe = 0;
    {
        std::ifstream mf(gen_path + ".manifest.json");
        if (mf) {
            json manifest = json::parse(mf, nullptr, false);
            if (!manifest.is_discarded() && manifest.contains("nfe")) nfe = manifest["nfe"].get<long>();
        }
    }

    MetricsReport report;
    report.nfe = nfe;
    auto rs_gen = radial_spectrum(gen);
    auto rs_ref = radial_spectrum(ref);
    restrict_to_positive_reference(rs_gen, rs_ref);
    std::tie(report.rs_r2, report.rs_rmse) = log_fit_metrics(rs_gen, rs_ref);
    auto dsx_gen = directional_spectrum(gen, Axis::X);
    auto dsx_ref = directional_spectrum(ref, Axis::X);
    restrict_to_positive_reference(dsx_gen, dsx_ref);
    std::tie(report.ds_kx_r2, report.ds_kx_rmse) = log_fit_metrics(dsx_gen, dsx_ref);
    auto dsy_gen = directional_spectrum(gen, Axis::Y);
    auto dsy_ref = directional_spectrum(ref, Axis::Y);
    restrict_to_positive_reference(dsy_gen, dsy_ref);
    std::tie(report.ds_ky_r2, report.ds_ky_rmse) = log_fit_metrics(dsy_gen, dsy_ref);
    const auto kde = kde_metrics(gen, ref);
    report.kde_r2 = kde.r2;
    report.kde_rmse = kde.rmse;

    std::ostringstream os;
    os.precision(17);
    os << "kde_r2,kde_rmse,rs_r2,rs_rmse,ds_kx_r2,ds_kx_rmse,ds_ky_r2,ds_ky_rmse,nfe\n";
    os << report.kde_r2 << "," << report.kde_rmse << "," << report.rs_r2 << "," << report.rs_rmse << ","
       << report.ds_kx_r2 << "," << report.ds_kx_rmse << "," << report.ds_ky_r2 << "," << report.ds_ky_rmse
       << "," << report.nfe << "\n";
    write_text(out, os.str());

    write_curve_csv(out + ".rs_gen.csv", rs_gen);
    write_curve_csv(out + ".rs_ref.csv", rs_ref);
    write_curve_csv(out + ".ds_kx_gen.csv", dsx_gen);
    write_curve_csv(out + ".ds_kx_ref.csv", dsx_ref);
    write_curve_csv(out + ".ds_ky_gen.csv", dsy_gen);
    write_curve_csv(out + ".ds_ky_ref.csv", dsy_ref);
    write_density_csv(out + ".kde_gen.csv", kde.gen);
    write_density_csv(out + ".kde_ref.csv", kde.ref);

    std::printf("eval: kde_r2=%.4f rs_r2=%.4f ds_kx_r2=%.4f ds_ky_r2=%.4f (nfe=%ld) -> %s\n", report.kde_r2,
                report.rs_r2, report.ds_kx_r2, report.ds_ky_r2, report.nfe, out.c_str());
    return 0;
}

int cmd_oracle(const Args& args) {
    const std::string which = args.require("which");
    const std::string out = args.require("out");

    if (which == "thm2") {
        Theorem2Scenario sc;
        if (auto s = args.get("seed")) sc.seed = std::stoull(*s);
        const auto r = check_theorem2(sc);
        std::ostringstream os;
        os.precision(17);
        os << "theta_index,delta\n";
        for (std::size_t i = 0; i < r.delta_per_theta.size(); ++i) os << i << "," << r.delta_per_theta[i] << "\n";
        os << "spread," << r.spread << "\nidentity_gap," << r.identity_gap << "\norder_doubling_gap,"
           << r.order_doubling_gap << "\nrhs_constant," << r.rhs << "\n";
        write_text(out, os.str());
        std::printf("thm2: spread=%.3e (<1e-6) identity_gap=%.3e (<1e-6) doubling=%.3e (<1e-8) : %s\n",
                    r.spread, r.identity_gap, r.order_doubling_gap, r.pass ? "PASS" : "FAIL");
        return r.pass ? 0 : 1;
    }
    if (which == "thm3") {
        Theorem3Scenario sc;
        if (auto s = args.get("seed")) sc.seed = std::stoull(*s);
        const auto r = check_theorem3(sc);
        std::ostringstream os;
        os.precision(17);
        os << "batch,mean_w2,std_w2,rel_error\n";
        for (const auto& row : r.rows)
            os << row.batch_size << "," << row.mean_w2 << "," << row.std_w2 << "," << row.rel_error << "\n";
        write_text(out, os.str());
        for (const auto& row : r.rows)
            std::printf("thm3: B=%4d mean W2=%.4f rel err=%.4f (closed form %.4f)\n", row.batch_size,
                        row.mean_w2, row.rel_error, r.closed_form);
        std::printf("thm3: monotone=%s final<15%%=%s\n", r.monotone ? "yes" : "no",
                    r.final_below_15 ? "yes" : "no");
        return (r.monotone && r.final_below_15) ? 0 : 1;
    }
    throw CliError{2, "oracle: --which must be thm2 or thm3"};
}

} // namespace

int main(int argc, char** argv) {
    try {
        const Args args = parse_args(argc, argv);
        if (args.command == "datagen") return cmd_datagen(args);
        if (args.command == "train") return cmd_train(args);
        if (args.command == "sample") return cmd_sample(args);
        if (args.command == "eval") return cmd_eval(args);
        if (args.command == "oracle") return cmd_oracle(args);
        throw CliError{2, "unknown command: " + args.command};
    } catch (const CliError& e) {
        std::fprintf(stderr, "otfm: %s\n", e.message.c_str());
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "otfm: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "otfm: %s\n", e.what());
        return 1;
    }
}
