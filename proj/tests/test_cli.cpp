#include "doctest.h"

#include "fixtures.hpp"
#include "shctl/explicit_format.hpp"
#include "shctl/gridworld.hpp"
#include "shctl/report.hpp"
#include "shctl/spec_parser.hpp"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace shctl;
namespace fs = std::filesystem;

namespace {

const fs::path kData(SHCTL_DATA_DIR);
const std::string kCli(SHCTL_CLI_PATH);

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    Run r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++n;
    return n;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("shctl_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string twobranch_args() {
    return "--model " + (kData / "twobranch.json").string() + " --human " + (kData / "twobranch_uniform.json").string();
}

}  // namespace

TEST_CASE("spec descriptors parse into the three property shapes") {
    const auto reach = parse_spec_descriptor("P<=0.21 [F target]");
    CHECK(reach.kind == SpecDescriptor::Kind::Reach);
    CHECK(reach.cmp == Comparison::LessEqual);
    CHECK(reach.bound == 0.21);
    CHECK(reach.target == "target");

    const auto until = parse_spec_descriptor("P>=0.7 [!crash U target]");
    CHECK(until.kind == SpecDescriptor::Kind::Until);
    CHECK(until.cmp == Comparison::GreaterEqual);
    CHECK(until.bound == 0.7);
    CHECK(until.avoid == "crash");
    CHECK(until.target == "target");

    const auto cost = parse_spec_descriptor("E<=12 [F target]");
    CHECK(cost.kind == SpecDescriptor::Kind::Cost);
    CHECK(cost.bound == 12.0);
    CHECK(cost.target == "target");

    CHECK(std::isinf(parse_spec_descriptor("E<=inf [F goal]").bound));
    CHECK(parse_spec_descriptor("  P>=0.5[F  s3 ] ").target == "s3");
}

TEST_CASE("spec parse errors report the column") {
    auto message = [](const std::string& text) {
        try {
            parse_spec_descriptor(text);
        } catch (const InvalidInput& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("P<0.2 [F t]").find("column 2") != std::string::npos);
    CHECK(message("P<=x [F t]").find("column 4") != std::string::npos);
    CHECK(message("P<=0.2 [G t]").find("column 9") != std::string::npos);
    CHECK(message("P<=0.2 [F t").find("expected") != std::string::npos);
    CHECK(message("P<=0.2 [F t] extra").find("column 14") != std::string::npos);
    CHECK(message("E>=1 [F t]").find("column 2") != std::string::npos);
    CHECK(message("P<=1.5 [F t]") != "no error");
}

TEST_CASE("parsed specs resolve labels and state names") {
    const Mdp m = testing::twobranch();
    const auto spec = parse_spec("P<=0.21 [F target]", m);
    REQUIRE(std::holds_alternative<SafetyReach>(spec));
    CHECK(std::get<SafetyReach>(spec).target == m.label_set("target"));
    CHECK(std::get<SafetyReach>(parse_spec("P<=0.21 [F s2]", m)).target == m.label_set("target"));
    CHECK_THROWS_AS(parse_spec("P<=0.2 [F nowhere]", m), InvalidInput);
}

TEST_CASE("reports render deterministically and parse back") {
    Report r{"title"};
    r.add("alpha", 0.25);
    r.add("longer key", "x");
    r.add("infinite", std::numeric_limits<double>::infinity());
    r.data = {{"value", 0.25}, {"inf", number_json(std::numeric_limits<double>::infinity())}};
    const std::string text = render(r);
    CHECK(text == render(r));
    CHECK(text.find("  alpha:      0.25\n") != std::string::npos);
    CHECK(text.find("infinite:   inf") != std::string::npos);
    CHECK(parse_report_json(text) == r.data);
    CHECK_THROWS_AS(parse_report_json("no block"), InvalidInput);
    CHECK(format_number(0.208712152522) == "0.208712");
}

TEST_CASE("explicit export of the two-branch model") {
    TempDir dir;
    const Mdp m = load_mdp(kData / "twobranch.json");
    const auto prefix = dir.path / "twobranch";
    export_explicit(m, prefix);
    const auto paths = explicit_paths(prefix);
    CHECK(read_file(paths.states).rfind("5\n", 0) == 0);
    CHECK(count_lines(paths.transitions) == 14);
    CHECK(read_file(paths.labels) == "2 target\n");
    CHECK(!fs::exists(paths.costs));
    CHECK(import_explicit(prefix) == m);
}

TEST_CASE("explicit round trip for every fixture") {
    TempDir dir;
    std::vector<Mdp> models{load_mdp(kData / "twobranch.json"), testing::twobranch()};
    for (const char* grid : {"grid_3x3.json", "grid_5x5.json"}) models.push_back(compile(load_scenario(kData / grid)).model);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 20; ++i) models.push_back(testing::random_mdp(rng, 6, 3, i % 2 == 0));
    for (std::size_t i = 0; i < models.size(); ++i) {
        CAPTURE(i);
        const auto prefix = dir.path / ("m" + std::to_string(i));
        export_explicit(models[i], prefix);
        CHECK(import_explicit(prefix) == models[i]);
    }
}

TEST_CASE("explicit export of an unlabelled model writes an empty labels file") {
    TempDir dir;
    Mdp m(2, 0, {"go"});
    m.add_transition(0, 0, 1, 1.0);
    m.add_transition(1, 0, 1, 1.0);
    export_explicit(m, dir.path / "plain");
    CHECK(read_file(explicit_paths(dir.path / "plain").labels).empty());
    CHECK(import_explicit(dir.path / "plain") == m);
}

TEST_CASE("explicit import errors carry file and line") {
    TempDir dir;
    const auto prefix = dir.path / "broken";
    export_explicit(testing::twobranch(), prefix);
    std::ofstream(explicit_paths(prefix).transitions, std::ios::app) << "0 1 nonsense\n";
    try {
        import_explicit(prefix);
        FAIL("expected an error");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("broken.tra:15") != std::string::npos);
    }
}

TEST_CASE("cli check reports the violated bound") {
    const Run r = run("check --model " + (kData / "twobranch.json").string() + " --strategy " +
                      (kData / "twobranch_uniform.json").string() + " --reach-leq 0.21 --target s2");
    CHECK(r.code == 0);
    CHECK(r.out.find("0.25 (NOT SATISFIED)") != std::string::npos);
    const Json doc = parse_report_json(r.out);
    CHECK(doc["certificates"][0]["value"].get<double>() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(doc["certificates"][0]["satisfied"] == false);
}

TEST_CASE("cli exact synthesis at b = 0.5") {
    const Run r = run("synthesize --method exact --blend 0.5 " + twobranch_args() + " --reach-leq 0.21 --target s2");
    CHECK(r.code == 0);
    const Json doc = parse_report_json(r.out);
    CHECK(doc["status"] == "feasible");
    const double objective = doc["objective"];
    // Reference value is given to two digits.
    CHECK(std::round(objective * 100) / 100 == doctest::Approx(0.21));
    CHECK(doc["certificates"][0]["satisfied"] == true);
    CHECK(doc["certificates"][0]["value"].get<double>() <= 0.21 + 1e-9);
}

TEST_CASE("cli reports infeasibility with exit code 2") {
    const Run r = run("synthesize --blend 0.6 " + twobranch_args() + " --reach-leq 0.21 --target s2");
    CHECK(r.code == 2);
    CHECK(parse_report_json(r.out)["status"] == "infeasible");
}

TEST_CASE("cli synthesis variants") {
    TempDir dir;
    const auto auto_path = (dir.path / "auto.json").string();
    const Run general = run("synthesize --method general --blend 0.5 " + twobranch_args() +
                            " --spec 'P<=0.21 [F target]' --save-autonomous " + auto_path);
    CHECK(general.code == 0);
    CHECK(fs::exists(auto_path));
    const Run blended = run("blend --model " + (kData / "twobranch.json").string() + " --human " +
                            (kData / "twobranch_uniform.json").string() + " --autonomous " + auto_path +
                            " --blend 0.5 --reach-leq 0.21 --target target");
    CHECK(blended.code == 0);
    CHECK(parse_report_json(blended.out)["all_satisfied"] == true);

    const Run repaired = run("repair --blend 0.5 " + twobranch_args() + " --reach-leq 0.21 --target s2");
    CHECK(repaired.code == 0);
    CHECK(parse_report_json(repaired.out)["method"] == "repair");

    const Run umax = run("synthesize --uniform-max " + twobranch_args() + " --reach-leq 0.21 --target s2");
    CHECK(umax.code == 0);
    const Json b = parse_report_json(umax.out)["blending"];
    CHECK(b["0"].get<double>() == doctest::Approx((std::sqrt(0.21) - 0.4) / 0.1).epsilon(1e-4));
}

TEST_CASE("cli errors exit with 1") {
    CHECK(run("check --model /nonexistent.json --reach-leq 0.2 --target s2").code == 1);
    CHECK(run("check --model " + (kData / "twobranch.json").string() + " --spec 'P<=0.2 [X s2]'").code == 1);
    CHECK(run("check --model " + (kData / "twobranch.json").string()).code == 1);
    CHECK(run("synthesize " + twobranch_args() + " --reach-leq 0.21 --target s2").code == 1);
    CHECK(run("bogus").code == 1);
    CHECK(run("").code == 1);
    CHECK(run("--help").code == 0);

    TempDir dir;
    const auto bad = dir.path / "bad.json";
    std::ofstream(bad) << "{\n  \"states\": 2,\n  oops\n}\n";
    const std::string cmd = kCli + " check --model " + bad.string() + " --reach-leq 0.2 --target s1 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string text;
    std::array<char, 512> buf{};
    for (std::size_t n; (n = fread(buf.data(), 1, buf.size(), pipe)) > 0;) text.append(buf.data(), n);
    CHECK(WEXITSTATUS(pclose(pipe)) == 1);
    CHECK(text.find("bad.json") != std::string::npos);
    CHECK(text.find("line 3") != std::string::npos);
}

TEST_CASE("identical configurations give byte-identical reports") {
    TempDir dir;
    const auto a = dir.path / "a.txt";
    const auto b = dir.path / "b.txt";
    const std::string args = "synthesize --method general --blend 0.5 " + twobranch_args() + " --reach-leq 0.21 --target s2";
    CHECK(run("-o " + a.string() + " " + args).code == 0);
    CHECK(run("-o " + b.string() + " " + args).code == 0);
    CHECK(read_file(a) == read_file(b));
    CHECK(!read_file(a).empty());

    const std::string roll = "rollout --scenario " + (kData / "grid_3x3.json").string() + " --episodes 500 --seed 12";
    const Run r1 = run(roll);
    const Run r2 = run(roll);
    CHECK(r1.code == 0);
    CHECK(r1.out == r2.out);
    const Run r3 = run(roll + "3");
    CHECK(parse_report_json(r3.out)["seed"] == 123);
}

TEST_CASE("cli export and import") {
    TempDir dir;
    const auto prefix = (dir.path / "tb").string();
    const Run ex = run("export --model " + (kData / "twobranch.json").string() + " --prefix " + prefix);
    CHECK(ex.code == 0);
    CHECK(count_lines(prefix + ".tra") == 14);
    const auto model = (dir.path / "back.json").string();
    CHECK(run("import --prefix " + prefix + " --save-model " + model).code == 0);
    CHECK(load_mdp(model) == load_mdp(kData / "twobranch.json"));
}

TEST_CASE("cli gridworld, heatmap and estimate") {
    TempDir dir;
    const auto model = (dir.path / "grid.json").string();
    const auto human = (dir.path / "human.json").string();
    const Run g = run("gridworld --scenario " + (kData / "grid_3x3.json").string() + " --save-model " + model +
                      " --save-human " + human);
    CHECK(g.code == 0);
    const Json gd = parse_report_json(g.out);
    const Mdp m = load_mdp(model);
    CHECK(gd["states"] == m.num_states());
    CHECK(m.label_set("crash").size() == m.num_states());

    const Run h = run("heatmap --scenario " + (kData / "grid_3x3.json").string() + " --strategy " + human);
    CHECK(h.code == 0);
    const Json hd = parse_report_json(h.out);
    CHECK(hd["values"][2][2] == 1.0);
    CHECK(h.out.find("row 0") != std::string::npos);

    // Trajectories drawn from the baseline human; the model path is relative to the file.
    const auto traj = dir.path / "runs.txt";
    {
        std::ofstream out(traj);
        out << "# two short runs\nmodel grid.json\n\n";
        out << "0 right " << m.find_choice(0, 3)->successors.front().state << "\n\n";
        out << "0 stay " << m.find_choice(0, 4)->successors.front().state << "\n";
    }
    const Run e = run("estimate --trajectories " + traj.string() + " --epsilon 0.1 --delta 0.05");
    CHECK(e.code == 0);
    const Json ed = parse_report_json(e.out);
    CHECK(ed["trajectories"] == 2);
    CHECK(ed["steps"] == 2);
    CHECK(ed["hoeffding_samples"] == 185);
    // With smoothing 1: right seen once among the three enabled actions at s0.
    CHECK(ed["strategy"]["0"]["right"].get<double>() == doctest::Approx(2.0 / 5.0));

    {
        std::ofstream out(traj);
        out << "model grid.json\n0 up 0\n";
    }
    CHECK(run("estimate --trajectories " + traj.string()).code == 1);
}
