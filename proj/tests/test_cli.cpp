#include <doctest.h>

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "misspec/cli.hpp"
#include "misspec/csv.hpp"
#include "misspec/dataset.hpp"

using namespace misspec;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "misspec");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch() {
    const fs::path d = fs::temp_directory_path() / "misspec_test_cli";
    fs::create_directories(d);
    return d;
}

fs::path write_file(const std::string& name, const std::string& text) {
    const fs::path p = scratch() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) rows.push_back(split_csv_line(line));
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return k;
    FAIL("missing column " << name);
    return 0;
}

}  // namespace

TEST_CASE("analytic grid rows and columns") {
    const fs::path cfg = write_file("grid.toml",
                                    "[analytic]\np_S = 100\np_C = 0\nn = 200\nsigma_v = [1, 5, 10, 50]\n"
                                    "p_F = \"0:300:50\"\n");
    const Run r = cli({"analytic", "--config", cfg.string()});
    REQUIRE(r.code == 0);
    const auto rows = rows_of(r.out);
    REQUIRE(rows.size() == 1 + 4 * 7);
    const auto& h = rows[0];
    for (const char* name : {"p_S", "p_C", "p_F", "n", "sigma_v2", "sigma_hat2", "eps", "eps_F", "eps_y", "regime",
                             "formula_id"})
        CHECK(std::find(h.begin(), h.end(), name) != h.end());
    // First row: p_F = 0, sigma_v2 = 1.
    CHECK(std::stod(rows[1][column(h, "eps")]) == doctest::Approx(100.0 / 99.0).epsilon(1e-15));
    CHECK(rows[1][column(h, "regime")] == "Under");
    CHECK(rows[1][column(h, "formula_id")] == "thm1");
}

TEST_CASE("near-threshold cell has an empty eps field") {
    const fs::path cfg = write_file("near.toml", "[analytic]\np_S = 100\np_F = 100\nn = 200\n");
    const Run r = cli({"analytic", "--config", cfg.string()});
    REQUIRE(r.code == 0);
    const auto rows = rows_of(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][column(rows[0], "regime")] == "NearThreshold");
    CHECK(rows[1][column(rows[0], "eps")].empty());
    CHECK(rows[1][column(rows[0], "eps_y")].empty());
}

TEST_CASE("empty axis gives a header-only CSV") {
    const fs::path cfg = write_file("empty.toml", "[analytic]\np_F = []\n");
    const Run r = cli({"analytic", "--config", cfg.string()});
    CHECK(r.code == 0);
    CHECK(rows_of(r.out).size() == 1);
}

TEST_CASE("config errors exit with code 2 and name the line") {
    const fs::path bad = write_file("bad.toml", "[analytic]\np_S = 100\np_F = [1, 2\n");
    Run r = cli({"analytic", "--config", bad.string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("bad.toml:3") != std::string::npos);

    const fs::path both = write_file("both.toml", "[analytic]\nsigma_v = 1\nsigma_v2 = 1\n");
    r = cli({"analytic", "--config", both.string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("both.toml:2") != std::string::npos);

    const fs::path unknown = write_file("unknown.toml", "[montecarlo]\nM_r = 5\nsigmav = 3\n");
    r = cli({"montecarlo", "--config", unknown.string()});
    CHECK(r.code == kExitConfigError);
    CHECK(r.err.find("unknown.toml:3") != std::string::npos);

    CHECK(cli({"analytic", "--threads", "0"}).code == kExitConfigError);
    CHECK(cli({"nonsense"}).code == kExitConfigError);
    CHECK(cli({}).code == kExitConfigError);
    CHECK(cli({"analytic", "--help"}).code == kExitOk);
}

TEST_CASE("I/O errors exit with code 3") {
    CHECK(cli({"analytic", "--config", "/nonexistent/x.toml"}).code == kExitIoError);
    CHECK(cli({"analytic", "--out", "/nonexistent/dir/out.csv"}).code == kExitIoError);
    const fs::path cfg = write_file("rd.toml", "[realdata]\ndata = \"/nonexistent/data.csv\"\n");
    CHECK(cli({"realdata", "--config", cfg.string()}).code == kExitIoError);
    const fs::path junk = write_file("junk.csv", "a,y\n1,high\n");
    CHECK(cli({"realdata", "--data", junk.string()}).code == kExitIoError);
}

TEST_CASE("validate fails on an injected fault with exit code 1") {
    const Run r = cli({"validate", "--quick", "--inject-fault", "m_cross"});
    CHECK(r.code == kExitValidationFailed);
    CHECK(r.err.find("FAIL haar_m_cross_p8") != std::string::npos);
    CHECK(r.err.find("PASS haar_m4_p8") != std::string::npos);
}

TEST_CASE("quick validation passes within ten seconds") {
    const auto t0 = std::chrono::steady_clock::now();
    const Run r = cli({"validate", "--quick"});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(r.code == kExitOk);
    CHECK(r.err.find("FAIL") == std::string::npos);
    CHECK(secs < 10.0);
}

TEST_CASE("tool binary reports exit codes") {
    const std::string tool = MISSPEC_TOOL;
    CHECK(std::system((tool + " analytic --config /nonexistent.toml > /dev/null 2>&1").c_str()) != 0);
    const int status = std::system((tool + " analytic > /dev/null 2>&1").c_str());
    CHECK(status == 0);
}

TEST_CASE("one realization leaves standard error cells empty") {
    const fs::path cfg = write_file("mr1.toml", "[montecarlo]\np_S = 10\nn = 30\np_F = [5]\nM_r = 1\nM_u = 3\n");
    const Run r = cli({"montecarlo", "--config", cfg.string()});
    REQUIRE(r.code == 0);
    const auto rows = rows_of(r.out);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[1][column(rows[0], "eps_hat")].empty());
    CHECK(rows[1][column(rows[0], "eps_hat_stderr")].empty());
}

TEST_CASE("CSV cells are finite or empty") {
    const fs::path cfg = write_file("cells.toml",
                                    "[montecarlo]\np_S = 10\np_C = 2\nn = 20\np_F = [0, 10, 30]\nM_r = 4\nM_u = 3\n");
    const Run r = cli({"montecarlo", "--config", cfg.string()});
    REQUIRE(r.code == 0);
    for (const auto& row : rows_of(r.out))
        for (const std::string& cell : row) {
            CHECK(cell.find("nan") == std::string::npos);
            CHECK(cell.find("inf") == std::string::npos);
        }
}

TEST_CASE("montecarlo output is byte-identical across reruns and thread counts") {
    const fs::path cfg = write_file("det.toml",
                                    "[montecarlo]\nprotocol = \"decomposition\"\np_S = 12\np_C = 3\nn = 30\n"
                                    "p_F = [4, 40]\nsigma_v = 2\nM_r = 6\nM_u = 4\ntest_points = 5\nseed = 99\n");
    const Run a = cli({"montecarlo", "--config", cfg.string()});
    const Run b = cli({"montecarlo", "--config", cfg.string()});
    const Run c = cli({"montecarlo", "--config", cfg.string(), "--threads", "3"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out == c.out);
    const Run d = cli({"montecarlo", "--config", cfg.string(), "--seed", "100"});
    CHECK(d.out != a.out);
}

TEST_CASE("manifest records output hash and reruns identically") {
    const fs::path cfg = write_file("man.toml",
                                    "[montecarlo]\nprotocol = \"sigma_sweep\"\np_S = 10\nn = 30\np_F = [0, 20]\n"
                                    "sigma_v = 2\nsigma_hat = [0, 1, 2]\nM_r = 5\nM_u = 3\nnum_spectra = 10\n");
    const fs::path out1 = scratch() / "run1.csv";
    const fs::path out2 = scratch() / "run2.csv";
    REQUIRE(cli({"montecarlo", "--config", cfg.string(), "--seed", "7", "--out", out1.string()}).code == 0);
    const fs::path manifest = out1.string() + ".manifest.json";
    const auto m = nlohmann::json::parse(read_file(manifest));
    const std::string csv = read_file(out1);
    CHECK(m["outputs"][0]["sha256"] == sha256_hex(csv));
    CHECK(m["outputs"][0]["bytes"] == csv.size());
    CHECK(m["master_seed"] == 7);
    CHECK(m["command"] == "montecarlo");
    REQUIRE(cli({"montecarlo", "--config", manifest.string(), "--threads", "2", "--out", out2.string()}).code == 0);
    CHECK(read_file(out2) == csv);
}

TEST_CASE("realdata on a planted table") {
    const fs::path data = scratch() / "planted.csv";
    REQUIRE(cli({"synthesize", "--rows", "40", "--cols", "60", "--seed", "3", "--out", data.string()}).code == 0);
    const fs::path cfg = write_file("real.toml", "[realdata]\nn = 30\nn_test = 10\nwidths = [1]\nrepeats = 5\n");
    const Run one = cli({"realdata", "--config", cfg.string(), "--data", data.string()});
    REQUIRE(one.code == 0);
    CHECK(rows_of(one.out).size() == 2);

    const fs::path cfg2 = write_file("real2.toml", "[realdata]\nn = 30\nn_test = 10\nwidths = \"1:60:1\"\n"
                                                   "sigma_hat2 = [0, 0.5]\nrepeats = 8\ncolumn_order = \"shuffled\"\n");
    const fs::path out1 = scratch() / "real1.csv";
    const fs::path out2 = scratch() / "real2.csv";
    REQUIRE(cli({"realdata", "--config", cfg2.string(), "--data", data.string(), "--out", out1.string()}).code == 0);
    REQUIRE(cli({"realdata", "--config", (out1.string() + ".manifest.json"), "--threads", "4", "--out",
                 out2.string()})
                .code == 0);
    CHECK(read_file(out1) == read_file(out2));
    const auto m = nlohmann::json::parse(read_file(out1.string() + ".manifest.json"));
    CHECK(m["data"]["sha256"] == sha256_file(data));
    CHECK(m["summary"]["double_descent"].size() == 2);
}
