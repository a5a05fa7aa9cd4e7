#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct Runner {
    fs::path bin = ERGO_CLI_PATH;
    fs::path configs = ERGO_CONFIG_DIR;
    fs::path golden = ERGO_GOLDEN_DIR;
    fs::path work;

    Runner() {
        work = fs::temp_directory_path() / "ergo_cli_test";
        fs::remove_all(work);
        fs::create_directories(work);
    }

    int run(const std::string& sub, const std::string& config,
            const std::string& extra = "") {
        std::string cmd = bin.string() + " " + sub + " --config " +
                          (configs / config).string() + " --out " + work.string() +
                          (extra.empty() ? "" : " " + extra) + " > " +
                          (work / "stdout.txt").string() + " 2> " +
                          (work / "stderr.txt").string();
        int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    }
};

} // namespace

TEST_CASE("golden complexity runs") {
    Runner r;
    CHECK(r.run("complexity", "constant.json") == 0);
    CHECK(r.run("complexity", "linear.json") == 0);
    CHECK(r.run("complexity", "linear_pair.json") == 0);
    CHECK(r.run("complexity", "heisenberg_linear.json") == 0);
    for (const char* name :
         {"constant_complexity.json", "linear_complexity.json",
          "linear_pair_complexity.json", "heisenberg_linear_complexity.json"})
        CHECK(slurp(r.work / name) == slurp(r.golden / name));
}

TEST_CASE("golden exact average and coupling suite") {
    Runner r;
    CHECK(r.run("average", "linear.json") == 0);
    CHECK(slurp(r.work / "linear_average.csv") == slurp(r.golden / "linear_average.csv"));
    CHECK(r.run("couple", "couple_q5.json") == 0);
    CHECK(slurp(r.work / "couple_q5_couple.json") ==
          slurp(r.golden / "couple_q5_couple.json"));
    CHECK(r.run("couple", "couple_heis3.json") == 0);
    CHECK(slurp(r.work / "couple_heis3_couple.json") ==
          slurp(r.golden / "couple_heis3_couple.json"));
}

TEST_CASE("fixed-seed torus runs are byte-identical") {
    Runner r;
    CHECK(r.run("average", "torus_resonant.json") == 0);
    std::string first = slurp(r.work / "torus_resonant_average.csv");
    fs::remove(r.work / "torus_resonant_average.csv");
    CHECK(r.run("average", "torus_resonant.json") == 0);
    CHECK(slurp(r.work / "torus_resonant_average.csv") == first);

    // a different seed changes the bytes
    CHECK(r.run("average", "torus_resonant.json", "--seed 777") == 0);
    CHECK(slurp(r.work / "torus_resonant_average.csv") != first);
}

TEST_CASE("verify batteries pass on bundled configs") {
    Runner r;
    CHECK(r.run("verify", "couple_q5.json") == 0);
    std::string out = slurp(r.work / "couple_q5_verify.txt");
    CHECK(out.find("FAIL") == std::string::npos);
    CHECK(out.find("PASS rearrangement-lemma-indices") != std::string::npos);
    CHECK(out.find("PASS pairing-rearrangement") != std::string::npos);
}

TEST_CASE("exit codes") {
    Runner r;
    // closure-violating window: refused with a diagnostic, not approximated
    CHECK(r.run("couple", "closure_violation.json") == 2);
    std::string err = slurp(r.work / "stderr.txt");
    CHECK(err.find("closure") != std::string::npos);

    // search exceeding max_depth is a value, reported as exit 3
    CHECK(r.run("complexity", "linear.json", "--max-depth 0") == 3);

    // unknown config fields are rejected
    std::ofstream bad(r.work / "bad.json");
    bad << R"({"schema_version":1,"system":{"dim":2,"entries":[[["1","n"],["0","1"]]]},"wat":1})";
    bad.close();
    std::string cmd = r.bin.string() + " complexity --config " +
                      (r.work / "bad.json").string() + " > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 2);
}

TEST_CASE("config parse-serialize-parse is idempotent") {
    Runner r;
    for (const char* cfg : {"couple_q5.json", "torus_resonant.json", "linear.json"}) {
        fs::path d1 = r.work / "dump1.json";
        fs::path d2 = r.work / "dump2.json";
        CHECK(r.run("complexity", cfg, "--dump-config " + d1.string()) <= 3);
        std::string cmd = r.bin.string() + " complexity --config " + d1.string() +
                          " --out " + r.work.string() + " --dump-config " + d2.string() +
                          " > /dev/null 2>&1";
        CHECK(WEXITSTATUS(std::system(cmd.c_str())) <= 3);
        CHECK(slurp(d1) == slurp(d2));
    }
}
