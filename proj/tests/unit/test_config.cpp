#include <doctest.h>

#include <fstream>

#include "sysfb/config.hpp"
#include "sysfb/errors.hpp"
#include "test_support.hpp"

using namespace sysfb;

namespace {

const char* kMinimal = R"([endpoints.refiner]
url = "stub://refiner"
[endpoints.judge]
url = "stub://judge"
[endpoints.checker]
url = "stub://checker"
)";

std::size_t error_line(std::string_view text) {
    try {
        parse_toml(text);
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        const auto at = what.find("line ");
        if (at == std::string::npos) return 0;
        return std::stoul(what.substr(at + 5));
    }
    return 0;
}

}  // namespace

TEST_SUITE("config") {
    TEST_CASE("toml subset values") {
        const auto doc = parse_toml(R"(# comment
name = "x"   # trailing comment
literal = 'C:\path'
escaped = "tab\there \u00e9"
count = 42
negative = -3
ratio = 0.25
exp = 7e-6
flag = true
off = false
list = [1, 2,
  3,]
words = ["a", "b"]
"quoted key" = 1

[table]
inner = "v"

[a.b]
deep = 1
)");
        CHECK(doc["name"] == "x");
        CHECK(doc["literal"] == "C:\\path");
        CHECK(doc["escaped"] == "tab\there \xC3\xA9");
        CHECK(doc["count"] == 42);
        CHECK(doc["negative"] == -3);
        CHECK(doc["ratio"] == 0.25);
        CHECK(doc["exp"] == 7e-6);
        CHECK(doc["flag"] == true);
        CHECK(doc["off"] == false);
        CHECK(doc["list"] == json::array({1, 2, 3}));
        CHECK(doc["words"] == json::array({"a", "b"}));
        CHECK(doc["quoted key"] == 1);
        CHECK(doc["table"]["inner"] == "v");
        CHECK(doc["a"]["b"]["deep"] == 1);
    }

    TEST_CASE("environment interpolation") {
        test::ScopedEnv env("SYSFB_TEST_KEY", "s3cret");
        const auto doc = parse_toml("key = \"Bearer ${SYSFB_TEST_KEY}!\"\n");
        CHECK(doc["key"] == "Bearer s3cret!");
        CHECK_THROWS_AS(parse_toml("key = \"${SYSFB_SURELY_UNSET_VAR}\"\n"), ConfigError);
    }

    TEST_CASE("errors carry line numbers") {
        CHECK(error_line("a = 1\nb = \n") == 2);
        CHECK(error_line("a = 1\na = 2\n") == 2);
        CHECK(error_line("a = 1\n\n[t\n") == 3);
        CHECK(error_line("x = \"open\n") == 1);
        CHECK(error_line("ok = 1\nbad key = 2\n") == 2);
    }

    TEST_CASE("defaults and resolution") {
        test::TempDir dir;
        {
            std::ofstream(dir / "config.toml") << kMinimal;
        }
        const auto c = load_config(dir / "config.toml");
        CHECK(c.run_dir == dir.path());
        CHECK(c.k_query == 5);
        CHECK(c.k_response == 10);
        CHECK(c.C == 100000.0);
        CHECK(c.target_precision == 0.8);
        CHECK(c.embedder.url == "builtin");
        CHECK(c.grammar.url == "builtin");
        CHECK(c.feedback.url == "stub://refiner");
        CHECK(c.search.url.empty());
        CHECK_FALSE(c.frequency_table.has_value());
        CHECK(c.k_for(TargetKind::response) == 10);
    }

    TEST_CASE("desk fixture config") {
        test::TempDir dir;
        const auto path = test::stage_desk_config(dir.path());
        const auto c = load_config(path);
        CHECK(c.k_query == 3);
        CHECK(c.cluster_seed == 11);
        CHECK(c.retry.base_delay == std::chrono::milliseconds(1));
        CHECK(c.n_representatives == 2);
        CHECK(c.search.url == "stub://pagecount");
        REQUIRE(c.frequency_table.has_value());
        CHECK(c.frequency_table->is_absolute());
        CHECK(std::filesystem::exists(*c.frequency_table));
    }

    TEST_CASE("validation failures") {
        auto load = [](const std::string& extra) {
            test::TempDir dir;
            {
                std::ofstream(dir / "config.toml") << extra << "\n" << kMinimal;
            }
            return load_config(dir / "config.toml");
        };
        CHECK_THROWS_AS(load("C = 0"), ConfigError);
        CHECK_THROWS_AS(load("target_precision = 1.5"), ConfigError);
        CHECK_THROWS_AS(load("parallelism = 0"), ConfigError);
        CHECK_THROWS_AS(load("frequency_table = \"missing.csv\""), ConfigError);
        CHECK_THROWS_AS(load("[k]\nquery = 0"), ConfigError);
        CHECK_THROWS_AS(load("[k]\nquery = -2"), ConfigError);
        CHECK_THROWS_AS(load("C = \"big\""), ConfigError);
        CHECK_NOTHROW(load("run_dir = \"work\""));

        test::TempDir dir;
        {
            std::ofstream(dir / "config.toml") << "[endpoints.refiner]\nurl = \"stub://refiner\"\n";
        }
        CHECK_THROWS_AS(load_config(dir / "config.toml"), ConfigError);
        CHECK_THROWS_AS(load_config(dir / "absent.toml"), ConfigError);
    }
}
