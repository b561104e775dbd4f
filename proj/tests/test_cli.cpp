#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = FLEXCAP_CLI;
const std::string kData = FLEXCAP_DATA_DIR;

struct Run {
    int code = -1;
    std::string output;
};

Run run(const std::string& args) {
    Run r;
    const std::string cmd = kCli + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("flexcap_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json toy_config(const fs::path& out) {
    const std::string dir = kData + "/toy/feeder_a";
    std::ifstream in(dir + "/config.json");
    json j = json::parse(in);
    for (const char* key : {"network", "fleet", "prosumers"}) j[key] = dir + "/" + j[key].get<std::string>();
    for (const char* key : {"scenarios", "prices", "frequency"}) j[key] = kData + "/" + fs::path(j[key].get<std::string>()).filename().string();
    j["output"] = out.string();
    return j;
}

fs::path write_json(const fs::path& p, const json& j) {
    std::ofstream(p) << j.dump(2);
    return p;
}

}  // namespace

TEST_CASE("a missing scenario file is a configuration error naming the path") {
    const fs::path dir = scratch("missing");
    json j = toy_config(dir / "out");
    j["scenarios"] = (dir / "nope.csv").string();
    const Run r = run("aggregate --config " + write_json(dir / "config.json", j).string());
    CHECK(r.code == 2);
    CHECK(r.output.find("nope.csv") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out" / "result.json"));
}

TEST_CASE("an empty service list with uncontrolled baseload has zero objective") {
    const fs::path dir = scratch("empty");
    json j = toy_config(dir / "out");
    j["services"] = json::array();
    const Run r = run("aggregate --config " + write_json(dir / "config.json", j).string());
    REQUIRE(r.code == 0);
    const json res = json::parse(slurp(dir / "out" / "result.json"));
    CHECK(std::abs(res.at("objective").get<double>()) <= 1e-9);
}

TEST_CASE("coverage set reaches the requested in-sample coverage") {
    const fs::path dir = scratch("uncset");
    const Run r = run("uncset --config " + write_json(dir / "config.json", toy_config(dir / "out")).string() +
                      " --kind coverage --eps 0.1");
    REQUIRE(r.code == 0);
    const json u = json::parse(slurp(dir / "out" / "uncset.json"));
    CHECK(u.at("in_sample_coverage").get<double>() >= 0.9);
}

TEST_CASE("aggregation output is byte-identical across runs and thread counts") {
    const fs::path dir = scratch("repeat");
    const std::string cfg = write_json(dir / "config.json", toy_config(dir / "out")).string();
    REQUIRE(run("aggregate --config " + cfg + " --out " + (dir / "a").string()).code == 0);
    REQUIRE(run("--jobs 1 aggregate --config " + cfg + " --out " + (dir / "b").string()).code == 0);
    CHECK(slurp(dir / "a" / "result.json") == slurp(dir / "b" / "result.json"));
}

TEST_CASE("synthetic scenarios are reproducible from the seed") {
    const fs::path dir = scratch("synth");
    const std::string base = "synth --drivers load,pv --horizon 4 --samples 50 --in-sample 40 --seed 3 --out ";
    REQUIRE(run(base + (dir / "a.csv").string()).code == 0);
    REQUIRE(run(base + (dir / "b.csv").string()).code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(!slurp(dir / "a.csv").empty());
}

TEST_CASE("doubling the FCR price makes the substation offer FCR") {
    const fs::path dir = scratch("fcr2");
    const Run r = run("multifeeder --config " + kData + "/toy/bundle_fcr2.json --out " + dir.string());
    REQUIRE(r.code == 0);
    const json c = json::parse(slurp(dir / "combined.json"));
    double total = 0.0;
    for (const auto& s : c.at("services")) {
        if (s.at("name") == "fcr") {
            for (double e : s.at("e_kw")) total += e;
        }
    }
    CHECK(total > 1.0);
    CHECK(c.at("containment").at("ok").get<bool>());
}
