#include "doctest.h"
#include "helpers.hpp"

#include "fgray/cli.hpp"

#include "json.hpp"

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

using namespace fgray;

namespace {

int run(std::initializer_list<std::string> args)
{
    std::vector<std::string> store{"fgray"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : store) argv.push_back(s.data());
    argv.push_back(nullptr);
    return dispatch(static_cast<int>(store.size()), argv.data());
}

nlohmann::json read_json(const std::string& path)
{
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("usage errors exit with 1")
    {
        CHECK(run({"--version"}) == kExitOk);
        CHECK(run({}) == kExitUsage);
        CHECK(run({"fit", "--bogus"}) == kExitUsage);
        CHECK(run({"fit", "-i", "x.csv"}) == kExitUsage);
        CHECK(run({"nosuchcommand"}) == kExitUsage);
    }

    TEST_CASE("invalid data exits with 2 and names the row")
    {
        testing::ScratchDir dir("cli");
        testing::write_file(dir.file("bad.csv"), "time,status,z1\n1.0,1,0.5\n2.0,5,0.1\n3.0,0,0.2\n");
        CHECK(run({"fit", "-i", dir.file("bad.csv"), "-o", dir.file("fit.json"), "--lambda", "0.1", "-q"}) ==
              kExitData);
        CHECK(run({"fit", "-i", dir.file("missing.csv"), "-o", dir.file("fit.json"), "-q"}) == kExitData);
    }

    TEST_CASE("simulate, fit, debias and infer end to end")
    {
        testing::ScratchDir dir("cli");
        const auto data = dir.file("sim.csv");
        REQUIRE(run({"simulate", "--setup", "1", "--n", "120", "--p", "10", "--seed", "3", "-o", data, "-q"}) ==
                kExitOk);
        const auto sim_manifest = read_json(data + ".manifest.json");
        CHECK(sim_manifest.at("command") == "simulate");
        CHECK(sim_manifest.at("seed") == 3);

        CHECK(run({"fit", "-i", data, "-o", dir.file("dry.json"), "--dry-run", "-q"}) == kExitOk);

        REQUIRE(run({"fit", "-i", data, "-o", dir.file("fit.json"), "--folds", "5", "--n-lambdas", "20", "-q"}) ==
                kExitOk);
        const auto fit = read_json(dir.file("fit.json"));
        CHECK(fit.at("p") == 10);
        CHECK(fit.at("kkt_residual").get<double>() <= 1e-6);
        CHECK(fit.contains("cv"));
        CHECK(fit.at("manifest").contains("timing"));

        REQUIRE(run({"debias", "-i", data, "-o", dir.file("debias.json"), "--lambda", "0.05", "--lambda-j", "0.05",
                     "-q"}) == kExitOk);
        const auto deb = read_json(dir.file("debias.json"));
        CHECK(deb.at("max_abs_diag_error").get<double>() <= 1e-8);

        REQUIRE(run({"infer", "-i", data, "-o", dir.file("infer.csv"), "--lambda", "0.05", "--lambda-j", "0.05",
                     "--contrast", "e:1", "--contrast", "e:3", "-q"}) == kExitOk);
        const auto text = testing::read_file(dir.file("infer.csv"));
        CHECK(text.rfind("contrast_id,estimate,se,se_corrected,ci_lo,ci_hi,z,p_value\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 3);
        CHECK(read_json(dir.file("infer.csv") + ".manifest.json").at("command") == "infer");

        CHECK(run({"infer", "-i", data, "-o", dir.file("infer2.csv"), "--lambda", "0.05", "--contrast", "e:11",
                   "-q"}) != kExitOk);
    }

    TEST_CASE("study command writes the design summary")
    {
        testing::ScratchDir dir("cli");
        testing::write_file(dir.file("design.json"),
                            R"({"setup": 1, "n": 100, "p": 10, "n_reps": 2, "seed": 7, "folds": 5,
                                "n_lambdas": 15, "nodewise": 0.05})");
        REQUIRE(run({"study", "--design", dir.file("design.json"), "-o", dir.file("study.json"), "-q"}) == kExitOk);
        const auto res = read_json(dir.file("study.json"));
        CHECK(res.at("n_ok").get<int>() + res.at("n_failed").get<int>() == 2);
        CHECK(res.at("coefficients").size() == 3);

        testing::write_file(dir.file("bad.json"), R"({"setup": 1, "colour": "blue"})");
        CHECK(run({"study", "--design", dir.file("bad.json"), "-o", dir.file("x.json"), "-q"}) == kExitData);
    }
}
