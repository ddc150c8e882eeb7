#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "otfm/io.hpp"

using namespace otfm;
namespace fs = std::filesystem;

namespace {

std::string bin() { return OTFM_BIN; }

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path work_dir() {
    auto p = fs::temp_directory_path() / "otfm_cli_test";
    fs::create_directories(p);
    return p;
}

std::string write_config(const std::string& name, const std::string& text) {
    const auto path = work_dir() / name;
    std::ofstream os(path);
    os << text;
    return path.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

} // namespace

TEST_CASE("datagen grf: format arithmetic, determinism, required keys") {
    const auto dir = work_dir();
    const auto config = write_config("gen.cfg",
                                     "grid.nx = 16\ngrid.ny = 16\ngrid.lx = 6.283185307179586\n"
                                     "grid.ly = 6.283185307179586\ndatagen.kind = grf\n"
                                     "datagen.snapshots = 10\n");
    const auto out = (dir / "grf.fgb").string();
    REQUIRE(run(bin() + " datagen --config " + config + " --out " + out + " --seed 7") == 0);
    CHECK(fs::file_size(out) == 32 + 8ull * 10 * 256);

    const auto out2 = (dir / "grf2.fgb").string();
    REQUIRE(run(bin() + " datagen --config " + config + " --out " + out2 + " --seed 7") == 0);
    CHECK(slurp(out) == slurp(out2));

    const auto bad = write_config("bad.cfg", "grid.ny = 16\ndatagen.snapshots = 4\n");
    const int rc = std::system(
        (bin() + " datagen --config " + bad + " --out " + (dir / "x.fgb").string() + " 2> " +
         (dir / "err.txt").string())
            .c_str());
    CHECK(WEXITSTATUS(rc) == 2);
    CHECK(slurp(dir / "err.txt").find("grid.nx") != std::string::npos);
}

TEST_CASE("train, sample, eval pipeline on a tiny model") {
    const auto dir = work_dir();
    const auto gen_cfg = write_config("data.cfg",
                                      "grid.nx = 16\ngrid.ny = 16\ndatagen.kind = grf\n"
                                      "datagen.snapshots = 10\n");
    const auto data = (dir / "train_data.fgb").string();
    REQUIRE(run(bin() + " datagen --config " + gen_cfg + " --out " + data + " --seed 3") == 0);

    const auto train_cfg = write_config("train.cfg",
                                        "fno.layers = 1\nfno.modes = 4\nfno.width = 2\nfno.lift = 2\n"
                                        "fno.proj = 2\ntrain.batch = 4\ntrain.epochs = 1\n"
                                        "train.seed = 5\n");
    const auto run_dir = (dir / "run").string();
    REQUIRE(run(bin() + " train --config " + train_cfg + " --data " + data + " --out " + run_dir +
                " --workers 1") == 0);
    CHECK(fs::exists(run_dir + "/checkpoint_final.fck"));
    const auto trace = slurp(run_dir + "/trace.csv");
    CHECK(trace.rfind("step,epoch,lr,loss,ot_cost,id_cost,seconds\n", 0) == 0);
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 4); // header + 3 steps

    SUBCASE("sampling records the NFE and respects grid overrides") {
        const auto sample_cfg = write_config("sample.cfg",
                                             "grid.nx = 16\ngrid.ny = 16\nsample.scheme = euler\n"
                                             "sample.steps = 5\nsample.count = 6\n");
        const auto gen_out = (dir / "gen.fgb").string();
        REQUIRE(run(bin() + " sample --config " + sample_cfg + " --checkpoint " + run_dir +
                    "/checkpoint_final.fck --out " + gen_out + " --seed 9") == 0);
        const auto manifest = slurp(gen_out + ".manifest.json");
        CHECK(manifest.find("\"nfe\": 5") != std::string::npos);
        CHECK(read_field_batch(gen_out).size() == 6);

        // Zero-shot override to a finer grid works (modes=2 fits easily).
        const auto up_out = (dir / "gen24.fgb").string();
        REQUIRE(run(bin() + " sample --config " + sample_cfg + " --checkpoint " + run_dir +
                    "/checkpoint_final.fck --out " + up_out + " --seed 9 --grid-override 24x24") == 0);
        CHECK(read_field_batch(up_out).front().grid.nx == 24);

        // Below the Nyquist floor the request is rejected as a config error.
        CHECK(run(bin() + " sample --config " + sample_cfg + " --checkpoint " + run_dir +
                  "/checkpoint_final.fck --out " + up_out + " --seed 9 --grid-override 4x4") == 2);

        SUBCASE("eval of a file against itself is exact and column-stable") {
            const auto report = (dir / "report.csv").string();
            REQUIRE(run(bin() + " eval --gen " + gen_out + " --ref " + gen_out + " --out " + report) == 0);
            const auto text = slurp(report);
            CHECK(text.rfind("kde_r2,kde_rmse,rs_r2,rs_rmse,ds_kx_r2,ds_kx_rmse,ds_ky_r2,ds_ky_rmse,nfe\n",
                             0) == 0);
            std::istringstream row(text.substr(text.find('\n') + 1));
            std::string cell;
            std::vector<double> cells;
            while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
            REQUIRE(cells.size() == 9);
            CHECK(cells[0] == 1.0); // kde_r2
            CHECK(cells[1] == 0.0); // kde_rmse
            CHECK(cells[2] == 1.0); // rs_r2
            CHECK(cells[3] == 0.0); // rs_rmse
            CHECK(cells[8] == 5.0); // nfe from the manifest
            CHECK(fs::exists(report + ".rs_gen.csv"));
            CHECK(fs::exists(report + ".kde_ref.csv"));
        }

        SUBCASE("eval rejects grid mismatches") {
            CHECK(run(bin() + " eval --gen " + gen_out + " --ref " + up_out + " --out " +
                      (dir / "r2.csv").string()) == 2);
        }
    }

    SUBCASE("resume reproduces the uninterrupted trace") {
        const auto two_cfg = write_config("train2.cfg",
                                          "fno.layers = 1\nfno.modes = 2\nfno.width = 2\nfno.lift = 2\n"
                                          "fno.proj = 2\ntrain.batch = 4\ntrain.epochs = 2\n"
                                          "train.seed = 5\ntrain.checkpoint_every = 1\n");
        const auto full_dir = (dir / "full").string();
        REQUIRE(run(bin() + " train --config " + two_cfg + " --data " + data + " --out " + full_dir +
                    " --workers 1") == 0);
        const auto resumed_dir = (dir / "resumed").string();
        fs::create_directories(resumed_dir);
        // Restart from the epoch-1 checkpoint of the full run.
        REQUIRE(run(bin() + " train --config " + two_cfg + " --data " + data + " --out " + resumed_dir +
                    " --workers 1 --resume " + full_dir + "/checkpoint_epoch1.fck") == 0);
        CHECK(slurp(full_dir + "/checkpoint_final.fck") == slurp(resumed_dir + "/checkpoint_final.fck"));
    }
}

TEST_CASE("oracle subcommand") {
    const auto dir = work_dir();
    CHECK(run(bin() + " oracle --which thm2 --out " + (dir / "thm2.csv").string()) == 0);
    CHECK(run(bin() + " oracle --which nope --out " + (dir / "x.csv").string()) == 2);
}
