#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "misspec/config.hpp"
#include "misspec/csv.hpp"

using namespace misspec;

TEST_CASE("sections, scalars and arrays") {
    const Config c = Config::parse(
        "# experiment\n"
        "[montecarlo]\n"
        "p_S = 100   # shared\n"
        "sigma_v = [1, 5.5, 1e1]\n"
        "mode = \"full\"\n"
        "redraw = false\n"
        "seed = 18446744073709551615\n"
        "big = 1_000\n"
        "\n"
        "[analytic]\n"
        "n = 200\n");
    const ConfigTable& t = c.section("montecarlo");
    CHECK(t.get_int("p_S", 0) == 100);
    CHECK(t.get_list("sigma_v", {}) == std::vector<double>{1.0, 5.5, 10.0});
    CHECK(t.get_string("mode", "") == "full");
    CHECK_FALSE(t.get_bool("redraw", true));
    CHECK(t.get_u64("seed", 0) == std::numeric_limits<std::uint64_t>::max());
    CHECK(t.get_int("big", 0) == 1000);
    CHECK(t.get_int("absent", 7) == 7);
    CHECK(t.get_double("p_S", 0.0) == 100.0);
    CHECK(c.section("analytic").get_int("n", 0) == 200);
    CHECK_FALSE(c.has_section("realdata"));
    CHECK(c.section("realdata").entries().empty());
}

TEST_CASE("range strings expand inclusively") {
    const Config c = Config::parse("[a]\nw = \"1:5:1, 10:30:10, 42\"\nx = \"0:1:0.25\"\n");
    CHECK(c.section("a").get_list("w", {}) == std::vector<double>{1, 2, 3, 4, 5, 10, 20, 30, 42});
    CHECK(c.section("a").get_list("x", {}) == std::vector<double>{0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("empty arrays are allowed") {
    const Config c = Config::parse("[a]\np_F = []\n");
    CHECK(c.section("a").get_list("p_F", {1.0}).empty());
}

namespace {

std::size_t error_line(const std::string& text) {
    try {
        const Config c = Config::parse(text, "exp.toml");
        c.section("a").require_known({"ok", "n"});
        (void)c.section("a").get_int("n", 0);
        (void)c.section("a").get_list("ok", {});
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).rfind("exp.toml:", 0) == 0);
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("errors point at the offending line") {
    CHECK(error_line("[a]\nok = 1\nnot a pair\n") == 3);
    CHECK(error_line("[a]\nok = 1\nok = 2\n") == 3);
    CHECK(error_line("ok = 1\n") == 1);
    CHECK(error_line("[a]\n\n\nok = [1, 2\n") == 4);
    CHECK(error_line("[a]\nok = \"open\n") == 2);
    CHECK(error_line("[a]\nok = 1\n[a]\n") == 3);
    CHECK(error_line("[a\nok = 1\n") == 1);
    CHECK(error_line("[a]\nok = 1\nbogus = 2\n") == 3);
    CHECK(error_line("[a]\nok = 1\nn = 2.5\n") == 3);
    CHECK(error_line("[a]\nn = 1\nok = \"1:0:1\"\n") == 3);
    CHECK(error_line("[a]\nok = 1 2\n") == 2);
    CHECK(error_line("[a]\nok = inf\n") == 2);
    CHECK(error_line("[a]\nn = 3\nok = [1, \"x\"]\n") == 3);
}

TEST_CASE("writer output parses back") {
    ConfigWriter w;
    w.section("montecarlo");
    w.put("p_S", std::int64_t{100});
    w.put("sigma_v2", std::vector<double>{1.0, 25.0});
    w.put("sigma_hat2", 0.0);
    w.put("mode", std::string("full"));
    w.put("redraw", true);
    w.put_u64("seed", std::numeric_limits<std::uint64_t>::max());
    const Config c = Config::parse(w.text());
    const ConfigTable& t = c.section("montecarlo");
    CHECK(t.get_int("p_S", 0) == 100);
    CHECK(t.get_list("sigma_v2", {}) == std::vector<double>{1.0, 25.0});
    CHECK(t.get_double("sigma_hat2", 1.0) == 0.0);
    CHECK(t.get_string("mode", "") == "full");
    CHECK(t.get_bool("redraw", false));
    CHECK(t.get_u64("seed", 0) == std::numeric_limits<std::uint64_t>::max());
}

TEST_CASE("numbers print with 17 significant digits") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(100.0 / 99.0) == "1.0101010101010102");
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(-2.5e-12) == "-2.4999999999999998e-12");
    CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("non-finite numbers print as empty cells") {
    CHECK(format_number(std::nan("")).empty());
    CHECK(format_number(std::numeric_limits<double>::infinity()).empty());
    CHECK(format_number(std::optional<double>{}).empty());
}

TEST_CASE("CSV quoting and splitting") {
    CHECK(quote_csv("plain") == "plain");
    CHECK(quote_csv("a,b") == "\"a,b\"");
    CHECK(quote_csv("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(split_csv_line("a,\"b,c\",,\"d\"\"e\"") == std::vector<std::string>{"a", "b,c", "", "d\"e"});
    CHECK(split_csv_line("x,y\r") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("CSV writer rows") {
    std::ostringstream out;
    CsvWriter w(out);
    w.header({"name", "value", "missing"});
    w.cell("a,b").cell(0.5).cell(std::optional<double>{});
    w.end_row();
    w.cell("c").cell(2LL).cell(std::nan(""));
    w.end_row();
    CHECK(out.str() == "name,value,missing\n\"a,b\",0.5,\nc,2,\n");
}
