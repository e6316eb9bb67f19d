#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "driftcast/grid.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "driftcast_test_cli";

int run(const std::string& args) {
    const std::string cmd = std::string(DRIFTCAST_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

std::string dir(const char* name) {
    const fs::path p = kWork / name;
    fs::create_directories(p);
    return p.string();
}

} // namespace

TEST_CASE("help and usage errors map to the documented exit codes") {
    CHECK(run("--help") == 0);
    CHECK(run("synth --help") == 0);
    CHECK(run("definitely-not-a-subcommand") == 2);
    CHECK(run("synth") == 2);                       // missing required --out
    CHECK(run("flow --input x --out y --bogus 1") == 2);
    CHECK(run("") == 2); // a subcommand is required
}

TEST_CASE("runtime failures exit 1 with a diagnostic") {
    CHECK(run("flow --input /nonexistent.sstgrid --out " + dir("r1")) == 1);
    CHECK(run("synth --kind volcano --T 4 --H 4 --W 4 --out " + dir("r2")) == 1);
}

TEST_CASE("synth writes the series plus a manifest") {
    const std::string out = dir("synth");
    CHECK(run("synth --kind advecting_wave --T 30 --H 8 --W 8 --seed 7 --out " + out) == 0);
    driftcast::GridSeries s = driftcast::load_grid_series(fs::path(out) / "synthetic.sstgrid");
    CHECK(s.T == 30);
    CHECK(s.H == 8);
    nlohmann::json manifest = read_json(fs::path(out) / "run.json");
    CHECK(manifest["command"] == "synth");
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["version"] == "0.1.0");
}

TEST_CASE("DRIFTCAST_SEED overrides the flag") {
    const std::string out = dir("seeded");
    setenv("DRIFTCAST_SEED", "4242", 1);
    CHECK(run("synth --kind seasonal --T 8 --H 4 --W 4 --seed 7 --out " + out) == 0);
    unsetenv("DRIFTCAST_SEED");
    nlohmann::json manifest = read_json(fs::path(out) / "run.json");
    CHECK(manifest["seed"] == 4242);
}

TEST_CASE("flow dumps per-frame CSVs and PGMs") {
    const std::string data = dir("flowdata");
    REQUIRE(run("synth --kind advecting_wave --T 4 --H 12 --W 12 --seed 3 --out " + data) == 0);
    const std::string out = dir("flowout");
    CHECK(run("flow --input " + data + "/synthetic.sstgrid --out " + out + " --window-radius 3") == 0);
    for (int m = 0; m < 4; ++m) {
        CHECK(fs::exists(fs::path(out) / ("flow_u_" + std::to_string(m) + ".csv")));
        CHECK(fs::exists(fs::path(out) / ("flow_v_" + std::to_string(m) + ".csv")));
        CHECK(fs::exists(fs::path(out) / ("flow_mag_" + std::to_string(m) + ".pgm")));
    }
    std::ifstream pgm(fs::path(out) / "flow_mag_0.pgm", std::ios::binary);
    std::string magic;
    pgm >> magic;
    CHECK(magic == "P5");
}

TEST_CASE("train, predict, evaluate pipeline on a tiny run") {
    const std::string data = dir("traindata");
    REQUIRE(run("synth --kind advecting_wave --T 60 --H 4 --W 4 --seed 7 --out " + data) == 0);
    const std::string rundir = dir("trainrun");
    const std::string train_args =
        " --input " + data + "/synthetic.sstgrid --out " + rundir +
        " --M 6 --L 4 --t-gap 3 --epochs 3 --batch 8 --d-model 8 --d-ff 12 --kernel-sizes 1,3"
        " --window-radius 2 --pyramid-levels 1 --seed 11";
    CHECK(run("train" + train_args) == 0);
    CHECK(fs::exists(fs::path(rundir) / "model.ckpt"));
    CHECK(fs::exists(fs::path(rundir) / "loss.csv"));
    nlohmann::json manifest = read_json(fs::path(rundir) / "run.json");
    CHECK(manifest["command"] == "train");
    CHECK(manifest["model"]["d_model"] == 8);

    std::ifstream loss(fs::path(rundir) / "loss.csv");
    std::string header;
    std::getline(loss, header);
    CHECK(header == "epoch,loss");
    int lines = 0;
    for (std::string l; std::getline(loss, l);) ++lines;
    CHECK(lines == 3);

    const std::string pout = dir("predout");
    CHECK(run("predict --input " + data + "/synthetic.sstgrid --checkpoint " + rundir + "/model.ckpt --out " + pout) ==
          0);
    CHECK(fs::exists(fs::path(pout) / "forecasts.csv"));

    const std::string eout = dir("evalout");
    CHECK(run("evaluate --input " + data + "/synthetic.sstgrid --checkpoint " + rundir + "/model.ckpt --out " + eout) ==
          0);
    CHECK(fs::exists(fs::path(eout) / "report.csv"));
    CHECK(fs::exists(fs::path(eout) / "per_window.csv"));
    std::ifstream rep(fs::path(eout) / "report.csv");
    std::string h;
    std::getline(rep, h);
    CHECK(h == "model,rmse,mape");
}

TEST_CASE("sweep and ablate emit their tables") {
    const std::string data = dir("sweepdata");
    REQUIRE(run("synth --kind seasonal --T 40 --H 16 --W 16 --seed 5 --out " + data) == 0);
    const std::string sout = dir("sweepout");
    CHECK(run("sweep --input " + data + "/synthetic.sstgrid --out " + sout +
              " --axis area --values 1,2 --M 5 --L 3 --t-gap 4 --epochs 1 --d-model 6 --d-ff 8 --kernel-sizes 1"
              " --window-radius 2 --pyramid-levels 1") == 0);
    CHECK(fs::exists(fs::path(sout) / "sweep_area.csv"));

    const std::string adata = dir("abldata");
    REQUIRE(run("synth --kind eddy --T 40 --H 6 --W 6 --seed 5 --shift-j 1 --out " + adata) == 0);
    const std::string aout = dir("ablout");
    CHECK(run("ablate --input " + adata + "/synthetic.sstgrid --out " + aout +
              " --seeds 1 --M 5 --L 3 --t-gap 4 --epochs 1 --d-model 6 --d-ff 8 --kernel-sizes 1"
              " --window-radius 2 --pyramid-levels 1") == 0);
    std::ifstream abl(fs::path(aout) / "ablation.csv");
    std::string h;
    std::getline(abl, h);
    CHECK(h == "optical_attention,inception,autocorrelation,rmse,mape");
}

TEST_CASE("parallel-eval writes the averaged report") {
    const std::string data = dir("pedata");
    REQUIRE(run("synth --kind seasonal --T 30 --H 12 --W 12 --seed 2 --out " + data) == 0);
    const std::string out = dir("peout");
    CHECK(run("parallel-eval --input " + data + "/synthetic.sstgrid --out " + out +
              " --eval-span 0.5 --window-span 1 --M 5 --L 3 --t-gap 4 --epochs 1 --d-model 6 --d-ff 8"
              " --kernel-sizes 1 --window-radius 2 --pyramid-levels 1 --jobs 2") == 0);
    CHECK(fs::exists(fs::path(out) / "parallel_eval.csv"));
    nlohmann::json manifest = read_json(fs::path(out) / "run.json");
    CHECK(manifest["windows"] == 4); // 0.5 deg on the quarter-degree grid -> 2x2 points
}
