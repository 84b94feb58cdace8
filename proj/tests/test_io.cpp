#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "certens/io.hpp"
#include "certens/toy_lab.hpp"
#include "support/catch_print.hpp"
#include "support/oracles.hpp"

using namespace certens;
using Catch::Approx;
using oracle::out;

namespace {

RecordSet read_text(const std::string& text)
{
    std::istringstream in(text);
    return read_records(in);
}

std::string write_text(const RecordSet& rs)
{
    std::ostringstream out;
    write_records(out, rs);
    return out.str();
}

const std::string kHeader = R"({"version":1,"N":3,"m":10,"epsilon":0.1,"norm":"linf"})";

/// Runs `fn`, expecting a SchemaError, and returns it.
template <class F>
SchemaError schema_error(F fn)
{
    try {
        fn();
    } catch (const SchemaError& e) {
        return e;
    }
    FAIL("expected a schema error");
    throw std::logic_error("unreachable");
}

} // namespace

TEST_CASE("record files round-trip", "[io][records]")
{
    auto ex1 = build_example1_fixture();
    CHECK(read_text(write_text(ex1)) == ex1);

    ex1.model_names = {"a", "b", "c"};
    ex1.norm = Norm::L2;
    ex1.epsilon = 36.0 / 255.0;
    CHECK(read_text(write_text(ex1)) == ex1);

    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 50; ++trial) {
        auto rs = oracle::random_records(rng, 1 + rng() % 6, 2 + rng() % 8, rng() % 20);
        rs.epsilon = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        REQUIRE(read_text(write_text(rs)) == rs);
        REQUIRE(write_text(read_text(write_text(rs))) == write_text(rs));
    }
}

TEST_CASE("record file on disk", "[io][records]")
{
    oracle::TempDir dir("io");
    const auto rs = build_cascade_style_fixture();
    save_records(dir / "r.jsonl", rs);
    CHECK(load_records(dir / "r.jsonl") == rs);
    CHECK_THROWS_AS(load_records(dir / "missing.jsonl"), DataError);
    CHECK_THROWS_AS(save_records(dir / "no/such/dir/r.jsonl", rs), DataError);
}

TEST_CASE("record file format details", "[io][records]")
{
    const auto rs = read_text(kHeader + "\n\n" +
                              R"({"input_id": 17, "true_label": 3, "outputs": [{"label":3,"cert":true},)"
                              R"({"label":0,"cert":0},{"label":9,"cert":1}]})" +
                              "\n");
    REQUIRE(rs.size() == 1);
    CHECK(rs.records[0].input_id == "17");
    CHECK(rs.records[0].outputs == std::vector<CertOutput>{out(3, true), out(0, false), out(9, true)});
    CHECK(rs.norm == Norm::Linf);
    CHECK(rs.epsilon == 0.1);

    CHECK(read_text(kHeader + "\n").empty());
    const auto text = write_text(build_example1_fixture());
    CHECK(text.substr(0, text.find('\n')) == kHeader);
    CHECK(text.find(R"({"input_id":"x0","true_label":0,"outputs":[{"label":0,"cert":1},)") != std::string::npos);
}

TEST_CASE("record file errors", "[io][records]")
{
    CHECK_THROWS_AS(read_text(""), DataError);
    CHECK_THROWS_AS(read_text("\n  \n"), DataError);

    SECTION("wrong arity names the input")
    {
        const auto e = schema_error([] {
            read_text(kHeader + "\n" + R"({"input_id":"img-42","true_label":1,"outputs":[{"label":1,"cert":1},)"
                                       R"({"label":1,"cert":1}]})");
        });
        CHECK(e.line() == 2);
        CHECK(e.field_path() == "record[img-42].outputs");
        CHECK(std::string(e.what()).find("img-42") != std::string::npos);
    }
    SECTION("label out of range")
    {
        const auto e = schema_error([] {
            read_text(kHeader + "\n" + R"({"input_id":"a","true_label":1,"outputs":[{"label":1,"cert":1},)"
                                       R"({"label":10,"cert":1},{"label":1,"cert":0}]})");
        });
        CHECK(e.field_path() == "record[a].outputs[1].label");
    }
    SECTION("true label out of range")
    {
        const auto e = schema_error([] {
            read_text(kHeader + "\n" + R"({"input_id":"a","true_label":12,"outputs":[]})");
        });
        CHECK(e.field_path() == "record[a].true_label");
    }
    SECTION("cert not a bit")
    {
        const auto e = schema_error([] {
            read_text(kHeader + "\n" + R"({"input_id":"a","true_label":1,"outputs":[{"label":1,"cert":2},)"
                                       R"({"label":1,"cert":1},{"label":1,"cert":0}]})");
        });
        CHECK(e.field_path() == "record[a].outputs[0].cert");
    }
    SECTION("header problems")
    {
        CHECK(schema_error([] { read_text(R"({"version":2,"N":3,"m":10,"epsilon":0.1,"norm":"linf"})"); })
                  .field_path() == "header.version");
        CHECK(schema_error([] { read_text(R"({"version":1,"m":10,"epsilon":0.1,"norm":"linf"})"); }).field_path() ==
              "header.N");
        CHECK(schema_error([] { read_text(R"({"version":1,"N":3,"m":1,"epsilon":0.1,"norm":"linf"})"); })
                  .field_path() == "header.m");
        CHECK(schema_error([] { read_text(R"({"version":1,"N":3,"m":4,"epsilon":-1,"norm":"linf"})"); })
                  .field_path() == "header.epsilon");
        CHECK(schema_error([] { read_text(R"({"version":1,"N":3,"m":4,"epsilon":0.1,"norm":"l1"})"); })
                  .field_path() == "header.norm");
        CHECK(schema_error([] {
                  read_text(R"({"version":1,"N":2,"m":4,"epsilon":0.1,"norm":"l2","model_names":["x"]})");
              }).field_path() == "header.model_names");
    }
    SECTION("malformed JSON reports its line")
    {
        try {
            read_text(kHeader + "\n\n{\"input_id\": \n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
            CHECK(std::string(e.what()).rfind("line 3:", 0) == 0);
        }
    }
    SECTION("errors are data errors")
    {
        CHECK_THROWS_AS(read_text(kHeader + "\n[1,2]"), DataError);
        CHECK_THROWS_AS(read_text(kHeader + "\n" + R"({"true_label":1,"outputs":[]})"), DataError);
    }
}

TEST_CASE("predictions", "[io]")
{
    const auto rs = build_example1_fixture();
    const auto preds = certens::apply(UniformVoting{}, rs);
    std::ostringstream os;
    write_predictions(os, rs, preds);
    std::istringstream in(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        REQUIRE(j["input_id"] == rs.records[n].input_id);
        REQUIRE(j["label"].get<std::uint32_t>() == preds[n].label.value);
        REQUIRE(j["cert"].get<int>() == (preds[n].cert ? 1 : 0));
        ++n;
    }
    CHECK(n == rs.size());
    CHECK_THROWS_AS(write_predictions(os, rs, std::vector<CertOutput>(2)), DimensionError);
}

TEST_CASE("weights round-trip", "[io][weights]")
{
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 100; ++trial) {
        const auto w = WeightVector::normalized(oracle::random_raw_weights(rng, 1 + rng() % 8));
        std::ostringstream os;
        write_weights(os, w);
        std::istringstream in(os.str());
        REQUIRE(read_weights(in) == w);
    }

    std::istringstream bare("[1, 3]");
    CHECK(read_weights(bare) == WeightVector::from_normalized({0.25, 0.75}));
    for (const char* bad : {"[]", "{}", "[1, -1]", "[0, 0]", "[\"a\"]", "not json", "{\"weights\": 3}"}) {
        std::istringstream in(bad);
        CHECK_THROWS_AS(read_weights(in), DataError);
    }
}

TEST_CASE("weights file with learner details", "[io][weights]")
{
    const auto res = learn(build_dominant_fixture());
    std::ostringstream os;
    write_weights(os, res.trace.selected, &res.trace);
    const auto doc = nlohmann::json::parse(os.str());
    CHECK(doc["version"] == 1);
    CHECK(doc["weights"].size() == 3);
    CHECK(doc["learned_weights"].size() == 3);
    CHECK(doc.contains("selected"));
    CHECK(doc["epochs_run"].get<std::size_t>() == res.trace.epochs_run);
    std::istringstream in(os.str());
    CHECK(read_weights(in) == res.trace.selected);

    std::ostringstream trace;
    write_trace_csv(trace, res.trace);
    const auto text = trace.str();
    CHECK(text.rfind("epoch,objective,best_objective\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == res.trace.objectives.size() + 1);
}

TEST_CASE("grid CSV round-trip", "[io][grid]")
{
    for (const char* tag : {"fig1", "thm1-minimal", "random"}) {
        const auto g = build_grid(gen_toy(tag, 3), GridSpec{-1, 1, -0.5, 0.7, 0.02}, 0.08);
        std::ostringstream os;
        write_grid_csv(os, g);
        std::istringstream in(os.str());
        const auto back = read_grid_csv(in);
        CHECK(back.size() == g.size());
        CHECK(back.nx == g.nx);
        CHECK(back.ny == g.ny);
        CHECK(back.h == Approx(g.h).epsilon(1e-9));
        CHECK(back.xmin == g.xmin);
        CHECK(back.ymax == Approx(g.ymax));
        CHECK(back.constituents == g.constituents);
        CHECK(back.truth == g.truth);
        CHECK(back.outputs == g.outputs);
        for (std::size_t p = 0; p < g.size(); ++p) {
            REQUIRE(back.points[p].x == g.points[p].x);
            REQUIRE(back.points[p].y == g.points[p].y);
        }
        std::ostringstream again;
        write_grid_csv(again, back);
        CHECK(again.str() == os.str());
    }
}

TEST_CASE("grid CSV edge cases", "[io][grid]")
{
    ToyGrid empty;
    empty.constituents = 2;
    std::ostringstream os;
    write_grid_csv(os, empty);
    CHECK(os.str() == "px,py,truth,s0_label,s0_cert,s1_label,s1_cert\n");
    std::istringstream in(os.str());
    const auto back = read_grid_csv(in);
    CHECK(back.size() == 0);
    CHECK(back.constituents == 2);

    auto parse = [](const std::string& s) {
        std::istringstream i(s);
        return read_grid_csv(i);
    };
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("x,y,truth\n"), ParseError);
    CHECK_THROWS_AS(parse("px,py,truth,s0_label\n"), ParseError);
    CHECK_THROWS_AS(parse("px,py,truth,s1_label,s1_cert\n"), ParseError);
    CHECK_THROWS_AS(parse("px,py,truth,s0_label,s0_cert\n0,0,1,1\n"), ParseError);
    CHECK_THROWS_AS(parse("px,py,truth,s0_label,s0_cert\n0,zero,1,1,1\n"), ParseError);
    CHECK_THROWS_AS(parse("px,py,truth,s0_label,s0_cert\n0,0,1,1,2\n"), SchemaError);

    const auto g = parse("px,py,truth,s0_label,s0_cert\r\n0,0,1,4,1\r\n0.5,0,0,0,0\r\n");
    CHECK(g.size() == 2);
    CHECK(g.class_count == 5);
    CHECK(g.h == 0.5);
    CHECK(g.outputs[0][0] == out(4, true));
}

TEST_CASE("violations CSV", "[io][grid]")
{
    const auto g = build_grid(gen_toy("thm1-minimal"), GridSpec{-0.2, 0.4, -0.05, 0.05, 0.01}, 0.08);
    const auto v = find_violations(g, Cascade{}, 0.08, Norm::L2);
    REQUIRE_FALSE(v.empty());
    std::ostringstream os;
    write_violations_csv(os, v);
    const auto text = os.str();
    CHECK(text.rfind("p,px,py,p_label,p_cert,q,qx,qy,q_label,q_cert,distance\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == v.size() + 1);
}

TEST_CASE("shortest round-trip number formatting", "[io]")
{
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(-0.75) == "-0.75");
    std::mt19937_64 rng(63);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng);
        REQUIRE(std::stod(format_double(x)) == x);
    }
}
