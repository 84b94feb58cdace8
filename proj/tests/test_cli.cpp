#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "certens/cli.hpp"
#include "support/oracles.hpp"

using namespace certens;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "certens");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("evaluate prints the example 1 table", "[cli]")
{
    oracle::TempDir dir("cli");
    const auto recs = dir / "ex1.jsonl";
    save_records(recs, build_example1_fixture());

    const auto r = run_cli({"evaluate", "--in", recs});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("CRA(%)") != std::string::npos);
    std::istringstream lines(r.out);
    std::string line;
    bool saw_uniform = false;
    while (std::getline(lines, line)) {
        if (line.rfind("Uniform Voting", 0) != 0) continue;
        saw_uniform = true;
        CHECK(line.find("75.00") != std::string::npos);
    }
    CHECK(saw_uniform);
    CHECK(r.err.find("warning") != std::string::npos);

    const auto csv = run_cli({"evaluate", "--in", recs, "--format", "csv", "--weights", dir / "w.json"});
    CHECK(csv.code == cli::kUsage);

    std::ofstream(dir / "w.json") << R"({"weights": [1, 1, 1]})";
    const auto c = run_cli({"evaluate", "--in", recs, "--format", "csv", "--weights", dir / "w.json"});
    REQUIRE(c.code == cli::kOk);
    CHECK(c.err.empty());
    CHECK(c.out.rfind("system,cra_pct,acc_pct,k\n", 0) == 0);
    CHECK(c.out.find("Uniform Voting,75.00,") != std::string::npos);
    CHECK(c.out.find("Weighted Voting,75.00,") != std::string::npos);
    CHECK(c.out.find("Model 0,50.00,") != std::string::npos);
}

TEST_CASE("ensemble writes one prediction per record", "[cli]")
{
    oracle::TempDir dir("cli");
    const auto rs = build_cascade_style_fixture();
    save_records(dir / "r.jsonl", rs);
    for (const char* method : {"cascade", "uniform", "permutation"}) {
        const auto r = run_cli({"ensemble", "--in", dir / "r.jsonl", "--out", dir / "p.jsonl", "--method", method});
        REQUIRE(r.code == cli::kOk);
        CHECK(line_count(slurp(dir / "p.jsonl")) == rs.size());
    }
    const auto w = run_cli({"ensemble", "--in", dir / "r.jsonl", "--out", dir / "p.jsonl", "--method", "weighted"});
    CHECK(w.code == cli::kOk);
    CHECK(w.err.find("warning") != std::string::npos);

    const auto f = run_cli({"ensemble", "--in", dir / "r.jsonl", "--out", dir / "p.jsonl", "--method", "permutation",
                            "--fallback", "random:9", "--prefix-bound", "relaxed"});
    CHECK(f.code == cli::kOk);
    CHECK(run_cli({"ensemble", "--in", dir / "r.jsonl", "--out", dir / "p.jsonl", "--method", "permutation",
                   "--fallback", "coin"})
              .code == cli::kUsage);
}

TEST_CASE("learn-weights writes weights and a trace", "[cli]")
{
    oracle::TempDir dir("cli");
    save_records(dir / "r.jsonl", build_dominant_fixture());
    const auto r = run_cli({"learn-weights", "--in", dir / "r.jsonl", "--out", dir / "w.json", "--trace",
                            dir / "t.csv", "--epochs", "300"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.rfind("learned exact objective", 0) == 0);
    const auto w = load_weights(dir / "w.json");
    CHECK(w.size() == 3);
    CHECK(w[0] > 0.9);
    CHECK(slurp(dir / "t.csv").rfind("epoch,objective,best_objective\n", 0) == 0);

    // the weights file feeds straight back into ensemble and evaluate
    CHECK(run_cli({"evaluate", "--in", dir / "r.jsonl", "--weights", dir / "w.json"}).code == cli::kOk);
    CHECK(run_cli({"ensemble", "--in", dir / "r.jsonl", "--out", dir / "p.jsonl", "--method", "weighted",
                   "--weights", dir / "w.json"})
              .err.empty());

    CHECK(run_cli({"learn-weights", "--in", dir / "r.jsonl", "--out", dir / "w.json", "--param", "cubic"}).code ==
          cli::kUsage);
}

TEST_CASE("gen-toy and check-soundness", "[cli][toy]")
{
    oracle::TempDir dir("cli");
    const auto grid = dir / "fig1.csv";
    const auto g = run_cli({"gen-toy", "--scenario", "fig1", "--h", "0.02", "--epsilon", "0.08", "--out", grid,
                            "--records", dir / "fig1.jsonl"});
    REQUIRE(g.code == cli::kOk);
    CHECK(g.out == "wrote 10201 points (101x101), 3 constituents\n");
    CHECK(load_records(dir / "fig1.jsonl").size() == 10201);

    const auto bad = run_cli({"check-soundness", "--grid", grid, "--epsilon", "0.08", "--method", "cascade",
                              "--report", dir / "v.csv"});
    CHECK(bad.code == cli::kViolations);
    CHECK(bad.out.rfind("cascade: ", 0) == 0);
    const auto report = slurp(dir / "v.csv");
    CHECK(line_count(report) > 1);
    CHECK(report.rfind("p,px,py,", 0) == 0);

    for (const char* method : {"uniform", "permutation"}) {
        const auto ok = run_cli({"check-soundness", "--grid", grid, "--epsilon", "0.08", "--method", method});
        CHECK(ok.code == cli::kOk);
        CHECK(ok.out.find(": 0 violation(s) on 10201 grid points") != std::string::npos);
    }
    const auto wv = run_cli({"check-soundness", "--grid", grid, "--epsilon", "0.08", "--method", "weighted"});
    CHECK(wv.code == cli::kOk);
    CHECK(wv.err.find("warning") != std::string::npos);

    // a radius below the grid resolution is refused
    CHECK(run_cli({"check-soundness", "--grid", grid, "--epsilon", "0.001", "--method", "uniform"}).code ==
          cli::kData);
}

TEST_CASE("export-figure", "[cli][toy]")
{
    oracle::TempDir dir("cli");
    REQUIRE(run_cli({"gen-toy", "--scenario", "agree", "--h", "0.05", "--out", dir / "g.csv"}).code == cli::kOk);
    const auto r = run_cli({"export-figure", "--grid", dir / "g.csv", "--out", dir / "f.svg", "--csv", dir / "f.csv"});
    REQUIRE(r.code == cli::kOk);
    const auto svg = slurp(dir / "f.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(line_count(slurp(dir / "f.csv")) > 1);
}

TEST_CASE("outputs are byte-identical across runs", "[cli]")
{
    oracle::TempDir dir("cli");
    for (int k = 0; k < 2; ++k) {
        const auto tag = std::to_string(k);
        REQUIRE(run_cli({"gen-toy", "--scenario", "random", "--seed", "5", "--h", "0.05", "--out",
                         dir / ("g" + tag + ".csv"), "--records", dir / ("r" + tag + ".jsonl")})
                    .code == cli::kOk);
        REQUIRE(run_cli({"learn-weights", "--in", dir / ("r" + tag + ".jsonl"), "--out", dir / ("w" + tag + ".json"),
                         "--init-jitter", "0.1", "--seed", "3", "--epochs", "200"})
                    .code == cli::kOk);
        REQUIRE(run_cli({"ensemble", "--in", dir / ("r" + tag + ".jsonl"), "--out", dir / ("p" + tag + ".jsonl"),
                         "--method", "permutation", "--fallback", "random:4"})
                    .code == cli::kOk);
    }
    for (const char* stem : {"g", "r", "w", "p"}) {
        const std::string ext = std::string(stem) == "g" ? ".csv" : std::string(stem) == "w" ? ".json" : ".jsonl";
        CHECK(slurp(dir / (stem + std::string("0") + ext)) == slurp(dir / (stem + std::string("1") + ext)));
    }
}

TEST_CASE("usage and data errors", "[cli]")
{
    oracle::TempDir dir("cli");
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
    CHECK(run_cli({"evaluate"}).code == cli::kUsage);
    CHECK(run_cli({"evaluate", "--in", dir / "missing.jsonl"}).code == cli::kUsage);
    CHECK(run_cli({"gen-toy", "--scenario", "fig2", "--out", dir / "g.csv"}).code == cli::kUsage);
    CHECK(run_cli({"gen-toy", "--out", dir / "g.csv", "--h", "-1"}).code == cli::kUsage);
    CHECK(run_cli({"check-soundness", "--grid", dir / "missing.csv", "--epsilon", "0.1"}).code == cli::kUsage);

    std::ofstream(dir / "bad.jsonl") << R"({"version":1,"N":3,"m":2,"epsilon":0.1,"norm":"l2"})" << '\n'
                                     << R"({"input_id":"z9","true_label":0,"outputs":[{"label":0,"cert":1}]})" << '\n';
    const auto r = run_cli({"evaluate", "--in", dir / "bad.jsonl"});
    CHECK(r.code == cli::kData);
    CHECK(r.err.rfind("error: ", 0) == 0);
    CHECK(r.err.find("z9") != std::string::npos);

    std::ofstream(dir / "empty.jsonl").close();
    CHECK(run_cli({"evaluate", "--in", dir / "empty.jsonl"}).code == cli::kData);

    std::ofstream(dir / "g.csv") << "nonsense\n";
    CHECK(run_cli({"check-soundness", "--grid", dir / "g.csv", "--epsilon", "0.1", "--method", "uniform"}).code ==
          cli::kData);

    save_records(dir / "even.jsonl", build_cascade_style_fixture());
    auto even = build_cascade_style_fixture();
    even.constituents = 2;
    for (auto& rec : even.records) rec.outputs.pop_back();
    save_records(dir / "even.jsonl", even);
    CHECK(run_cli({"ensemble", "--in", dir / "even.jsonl", "--out", dir / "p.jsonl", "--method", "permutation"})
              .code == cli::kData);

    const auto help = run_cli({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("check-soundness") != std::string::npos);
}
