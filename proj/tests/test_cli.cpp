// End-to-end checks of the installed command-line binary. Each case spawns
// the real executable (path injected at compile time) and inspects its exit
// code and captured streams.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct cli_result {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path scratch_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "qhybrid_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

cli_result run_cli(const std::string& args, const fs::path& dir) {
    fs::path out_file = dir / "cli_stdout.txt";
    fs::path err_file = dir / "cli_stderr.txt";
    std::string cmd = std::string("\"") + QHYBRID_CLI_PATH + "\" " + args + " >" +
                      out_file.string() + " 2>" + err_file.string();
    int raw = std::system(cmd.c_str());
    cli_result r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// small synthetic run so CLI-level tests stay fast
fs::path write_small_config(const fs::path& dir) {
    nlohmann::json cfg;
    cfg["dataset"] = "synthetic";
    cfg["synthetic_classes"] = 2;
    cfg["synthetic_train_per_class"] = 8;
    cfg["synthetic_test_per_class"] = 4;
    cfg["batch_size"] = 8;
    fs::path p = dir / "small.json";
    std::ofstream f(p);
    f << cfg.dump();
    return p;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("train writes its artifacts and reports the run") {
    auto dir = scratch_dir("train");
    auto cfg = write_small_config(dir);
    auto out = dir / "run";
    auto r = run_cli("train --config " + cfg.string() + " --epochs 2 --out " + out.string(), dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("trained hybrid") != std::string::npos);
    REQUIRE(fs::exists(out / "metrics.csv"));
    CHECK(count_lines(slurp(out / "metrics.csv")) == 3); // header + one row per epoch
    CHECK(fs::exists(out / "model.qhcp"));
    CHECK(fs::exists(out / "final.json"));
}

TEST_CASE("flags override values from the config file") {
    auto dir = scratch_dir("override");
    nlohmann::json cfg = nlohmann::json::parse(slurp(write_small_config(dir)));
    cfg["epochs"] = 5;
    fs::path p = dir / "five.json";
    std::ofstream(p) << cfg.dump();
    auto out = dir / "run";
    auto r = run_cli("train --config " + p.string() + " --epochs 1 --out " + out.string(), dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(count_lines(slurp(out / "metrics.csv")) == 2); // the flag's single epoch won
}

TEST_CASE("invalid option values exit with the config code") {
    auto dir = scratch_dir("badopts");
    auto cfg = write_small_config(dir);
    auto r = run_cli("train --config " + cfg.string() + " --epochs 0", dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("epochs") != std::string::npos);
}

TEST_CASE("missing dataset files exit with the data code") {
    auto dir = scratch_dir("nodata");
    auto r = run_cli("train --dataset mnist --data-dir /nonexistent/qhybrid-cli", dir);
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("/nonexistent/qhybrid-cli") != std::string::npos);
}

TEST_CASE("checkpoint whose shapes disagree with the model exits with the checkpoint code") {
    auto dir = scratch_dir("archmismatch");
    auto cfg = write_small_config(dir);
    auto out = dir / "run";
    auto r = run_cli("train --config " + cfg.string() + " --epochs 1 --qubits 3 --out " +
                         out.string(),
                     dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    // default register width is 4 qubits, so the layer shapes cannot match
    auto r2 = run_cli("evaluate --config " + cfg.string() + " --checkpoint " +
                          (out / "model.qhcp").string() + " --out " + (dir / "eval").string(),
                      dir);
    CHECK(r2.exit_code == 5);
}

TEST_CASE("config file problems are reported before any work happens") {
    auto dir = scratch_dir("badconfig");
    auto r = run_cli("train --config " + (dir / "absent.json").string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("cannot open config file") != std::string::npos);

    fs::path unknown = dir / "unknown.json";
    std::ofstream(unknown) << "{\"epoch\": 3}";
    auto r2 = run_cli("train --config " + unknown.string(), dir);
    CHECK(r2.exit_code == 2);

    fs::path garbage = dir / "garbage.json";
    std::ofstream(garbage) << "not json";
    auto r3 = run_cli("train --config " + garbage.string(), dir);
    CHECK(r3.exit_code == 2);
}

TEST_CASE("describe prints a machine-readable architecture document") {
    auto dir = scratch_dir("describe");
    auto cfg = write_small_config(dir);
    auto r = run_cli("describe --config " + cfg.string(), dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["kind"] == "hybrid");
    CHECK(doc["n_classes"] == 2);
}

TEST_CASE("render-circuit draws the register") {
    auto dir = scratch_dir("render");
    auto r = run_cli("render-circuit --qubits 1 --layers 1", dir);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("RX(0.00)") != std::string::npos);
    CHECK(r.out.find("●") == std::string::npos); // one wire has nothing to entangle
    CHECK(r.out.find("⊕") == std::string::npos);

    auto r2 = run_cli("render-circuit --qubits 11", dir);
    CHECK(r2.exit_code == 2);

    fs::path weights = dir / "weights.json";
    std::ofstream(weights) << "[0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]";
    auto r3 = run_cli("render-circuit --weights " + weights.string(), dir);
    REQUIRE(r3.exit_code == 0);
    CHECK(r3.out.find("RX(0.50)") != std::string::npos);
}

TEST_CASE("usage errors and help behave like a normal unix tool") {
    auto dir = scratch_dir("usage");
    CHECK(run_cli("--help", dir).exit_code == 0);
    auto help = run_cli("train --help", dir);
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("--epochs") != std::string::npos);
    CHECK(run_cli("train --bogus-flag", dir).exit_code == 2);
    CHECK(run_cli("", dir).exit_code == 2);          // a subcommand is required
    CHECK(run_cli("fit", dir).exit_code == 2);       // unknown subcommand
}

} // TEST_SUITE
