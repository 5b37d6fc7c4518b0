#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sfmap/mapper.hpp"
#include "sfmap/touchsim.hpp"
#include "testutil.hpp"

using namespace sfmap;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(SFMAP_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) result.output += buf;
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

fs::path test_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "sfmap_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string small_setup(const fs::path& dir) {
    Scene scene = testutil::hemisphere_scene();
    std::string scene_path = (dir / "scene.json").string();
    scene.save(scene_path);

    RunConfig cfg;
    cfg.scene_path = scene_path;
    cfg.seed = 9;
    cfg.steps = 40;
    cfg.snapshot_every = 20;
    cfg.eval_points = 500;
    cfg.replay_capacity = 20000;
    cfg.early_stop_patience = 0;
    cfg.global_freespace_per_step = 8;
    cfg.field.grid.levels = 6;
    cfg.field.grid.log2_hashmap_size = 13;
    cfg.export_snapshot_ply = false;
    cfg.export_resolution = 16;
    std::string cfg_path = (dir / "run.json").string();
    cfg.save(cfg_path);
    return cfg_path;
}

double parse_metric(const std::string& output, const std::string& key) {
    size_t pos = output.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::stod(output.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("train: success, report rows, printed metric") {
    fs::path dir = test_dir("train");
    std::string cfg = small_setup(dir);
    CliResult r = run_cli("train --config " + cfg + " --out " + (dir / "out").string());
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("final_matching_pct=") != std::string::npos);

    std::string csv = slurp((dir / "out" / "report.csv").string());
    CHECK(csv.rfind("timestep,matching_pct,", 0) == 0);
    int rows = 0;
    for (char c : csv) rows += c == '\n';
    CHECK(rows >= 2);  // header + at least one snapshot
    CHECK(fs::exists(dir / "out" / "final.sfck"));
    CHECK(fs::exists(dir / "out" / "config.json"));
}

TEST_CASE("train: missing scene file exits 1 and names the path") {
    fs::path dir = test_dir("missing_scene");
    std::string cfg_path = small_setup(dir);
    // point the config at a scene that does not exist
    RunConfig cfg = RunConfig::load(cfg_path);
    cfg.scene_path = (dir / "nope.json").string();
    cfg.save(cfg_path);
    CliResult r = run_cli("train --config " + cfg_path + " --out " + (dir / "out").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("nope.json") != std::string::npos);
}

TEST_CASE("train: identical seeds give identical reports") {
    fs::path dir = test_dir("repeat");
    std::string cfg = small_setup(dir);
    CliResult a = run_cli("train --config " + cfg + " --out " + (dir / "a").string());
    CliResult b = run_cli("train --config " + cfg + " --out " + (dir / "b").string());
    CHECK(a.exit_code == 0);
    CHECK(b.exit_code == 0);
    CHECK(slurp((dir / "a" / "report.csv").string()) ==
          slurp((dir / "b" / "report.csv").string()));
}

TEST_CASE("train: unknown config key exits 1 naming the key") {
    fs::path dir = test_dir("bad_key");
    std::string cfg = small_setup(dir);
    std::string text = slurp(cfg);
    text.insert(text.find_first_of('{') + 1, "\"surprise\": 1,");
    std::ofstream(cfg) << text;
    CliResult r = run_cli("train --config " + cfg + " --out " + (dir / "out").string());
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("surprise") != std::string::npos);
}

TEST_CASE("evaluate: matches the training report and honors --quiet") {
    fs::path dir = test_dir("evaluate");
    std::string cfg = small_setup(dir);
    CliResult train = run_cli("train --config " + cfg + " --out " + (dir / "out").string());
    REQUIRE(train.exit_code == 0);
    double trained = parse_metric(train.output, "final_matching_pct");

    std::string ckpt = (dir / "out" / "final.sfck").string();
    CliResult eval = run_cli("evaluate --checkpoint " + ckpt + " --out " +
                             (dir / "eval").string());
    CHECK(eval.exit_code == 0);
    CHECK(parse_metric(eval.output, "matching_pct") == doctest::Approx(trained));
    CHECK(eval.output.find("accuracy[") != std::string::npos);
    CHECK(fs::exists(dir / "eval" / "metrics.csv"));

    CliResult quiet = run_cli("evaluate --checkpoint " + ckpt + " --quiet --out " +
                              (dir / "eval_q").string());
    CHECK(quiet.exit_code == 0);
    // stdout is exactly the single metric line
    CHECK(quiet.output.rfind("matching_pct=", 0) == 0);
    CHECK(std::count(quiet.output.begin(), quiet.output.end(), '\n') == 1);
}

TEST_CASE("evaluate: corrupted checkpoint exits 2") {
    fs::path dir = test_dir("corrupt");
    std::string cfg = small_setup(dir);
    REQUIRE(run_cli("train --config " + cfg + " --out " + (dir / "out").string()).exit_code == 0);
    std::string ckpt = (dir / "out" / "final.sfck").string();
    std::string bytes = slurp(ckpt);
    bytes.resize(bytes.size() / 3);
    std::ofstream(ckpt, std::ios::binary) << bytes;
    CliResult r = run_cli("evaluate --checkpoint " + ckpt + " --out " + (dir / "e").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("simulate + replay reproduce the training report; bad dumps exit 2") {
    fs::path dir = test_dir("replay");
    std::string cfg = small_setup(dir);
    REQUIRE(run_cli("simulate --config " + cfg + " --out " + (dir / "sim").string())
                .exit_code == 0);
    std::string dump = (dir / "sim" / "stream.sfts").string();
    REQUIRE(fs::exists(dump));

    REQUIRE(run_cli("train --config " + cfg + " --out " + (dir / "live").string())
                .exit_code == 0);
    CliResult rep = run_cli("replay --stream " + dump + " --config " + cfg + " --out " +
                            (dir / "rep").string());
    CHECK(rep.exit_code == 0);
    CHECK(slurp((dir / "live" / "report.csv").string()) ==
          slurp((dir / "rep" / "report.csv").string()));

    // a different field seed replays the same stream to a different outcome
    CliResult other = run_cli("replay --stream " + dump + " --config " + cfg +
                              " --seed 777 --out " + (dir / "rep2").string());
    CHECK(other.exit_code == 0);
    CHECK(slurp((dir / "rep" / "report.csv").string()) !=
          slurp((dir / "rep2" / "report.csv").string()));

    // zero-record dump
    std::string empty_dump = (dir / "empty.sfts").string();
    write_stream_dump(empty_dump, {});
    CliResult empty = run_cli("replay --stream " + empty_dump + " --config " + cfg +
                              " --out " + (dir / "rep3").string());
    CHECK(empty.exit_code == 2);
    CHECK(empty.output.find("no records") != std::string::npos);

    // truncated dump names the record index
    std::string bytes = slurp(dump);
    bytes.resize(bytes.size() - 9);
    std::string trunc = (dir / "trunc.sfts").string();
    std::ofstream(trunc, std::ios::binary) << bytes;
    CliResult tr = run_cli("replay --stream " + trunc + " --config " + cfg + " --out " +
                           (dir / "rep4").string());
    CHECK(tr.exit_code == 2);
    CHECK(tr.output.find("truncated record") != std::string::npos);
}

TEST_CASE("export writes a parseable surface and a mask image") {
    fs::path dir = test_dir("export");
    std::string cfg = small_setup(dir);
    REQUIRE(run_cli("train --config " + cfg + " --out " + (dir / "out").string())
                .exit_code == 0);
    std::string ckpt = (dir / "out" / "final.sfck").string();
    CliResult r = run_cli("export --checkpoint " + ckpt + " --resolution 16 --mask-axis z --out " +
                          (dir / "exp").string());
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "exp" / "surface.ply"));
    CHECK(fs::exists(dir / "exp" / "mask.ppm"));
    std::string ply = slurp((dir / "exp" / "surface.ply").string());
    CHECK(ply.rfind("ply\n", 0) == 0);
    std::string ppm = slurp((dir / "exp" / "mask.ppm").string());
    CHECK(ppm.rfind("P6\n", 0) == 0);
}

TEST_CASE("train --runs executes isolated seeds") {
    fs::path dir = test_dir("runs");
    std::string cfg = small_setup(dir);
    CliResult r = run_cli("train --config " + cfg + " --runs 2 --out " + (dir / "out").string());
    CAPTURE(r.output);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "out" / "run_9" / "report.csv"));
    CHECK(fs::exists(dir / "out" / "run_10" / "report.csv"));
    size_t first = r.output.find("final_matching_pct=");
    size_t second = r.output.find("final_matching_pct=", first + 1);
    CHECK(first != std::string::npos);
    CHECK(second != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
    CliResult r = run_cli("train");
    CHECK(r.exit_code == 1);
    CliResult unknown = run_cli("frobnicate");
    CHECK(unknown.exit_code == 1);
}
