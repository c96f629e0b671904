#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "vdm/config.hpp"
#include "vdm/report.hpp"
#include "vdm/run.hpp"

using namespace vdm;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(static_cast<bool>(in));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("vdm-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

RunConfig base_config(const std::string& text, const std::string& command, std::uint64_t seed,
                      const std::filesystem::path& out) {
    RunConfig cfg = RunConfig::from_string(text);
    cfg.command = command;
    cfg.seed = seed;
    cfg.seed_set = true;
    cfg.out_dir = out.string();
    return cfg;
}

}  // namespace

TEST_CASE("config parsing: comments, whitespace, typed getters, errors") {
    const RunConfig cfg = RunConfig::from_string(
        "# a comment line\n"
        "schedule.kind = cosine   # trailing comment\n"
        "  train.lr=0.5\n"
        "train.steps=250\n"
        "model.residual=true\n"
        "name=run one\n"
        "seed=42\n");
    CHECK(cfg.get_str("schedule.kind", "x") == "cosine");
    CHECK(cfg.get_num("train.lr", 0.0) == 0.5);
    CHECK(cfg.get_count("train.steps", 0) == 250);
    CHECK(cfg.get_flag("model.residual", false));
    CHECK(cfg.get_str("name", "") == "run one");
    CHECK(cfg.seed_set);
    CHECK(cfg.require_seed() == 42);
    CHECK(cfg.get_num("missing", 7.5) == 7.5);
    CHECK_FALSE(cfg.has("missing"));
    CHECK_THROWS_AS(cfg.require_str("missing"), ConfigError);
    CHECK_THROWS_AS(cfg.get_num("schedule.kind", 0.0), ConfigError);
    CHECK_THROWS_AS(cfg.get_flag("train.lr", false), ConfigError);

    // Parse errors carry the line number.
    try {
        RunConfig::from_string("a=1\nnot a pair\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(RunConfig::from_string("=value\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_file("/nonexistent/config"), IoError);

    // Seed stays unset without an explicit value.
    const RunConfig bare = RunConfig::from_string("a=1\n");
    CHECK_FALSE(bare.seed_set);
    CHECK_THROWS_AS(bare.require_seed(), ConfigError);
}

TEST_CASE("decimal rendering round-trips doubles exactly") {
    const double cases[] = {0.0, 1.0, -1.0, 0.1, 1.0 / 3.0, 1e-300, -1e300, 3.0000000000000004,
                            6.02214076e23, 2.2250738585072014e-308};
    for (double v : cases) {
        CHECK(std::stod(render_number(v)) == v);
    }
}

TEST_CASE("csv writer: header row, lossless cells, width enforcement") {
    const auto dir = fresh_dir("csv");
    const std::string path = (dir / "t.csv").string();
    {
        CsvWriter csv(path, {"a", "b"});
        csv.row({1.5, 1.0 / 3.0});
        csv.row_mixed({"x", "y"});
        CHECK_THROWS_AS(csv.row({1.0}), DimensionError);
        CHECK_THROWS_AS(csv.row_mixed({"1", "2", "3"}), DimensionError);
    }
    const std::string text = slurp(path);
    CHECK(text.find("a,b\n") == 0);
    CHECK(text.find(render_number(1.0 / 3.0)) != std::string::npos);
    CHECK(text.find("x,y\n") != std::string::npos);
}

TEST_CASE("manifest appears atomically with its key: value lines") {
    const auto dir = fresh_dir("manifest");
    Manifest m;
    m.add("status", "ok");
    m.add_num("metric.loss", 0.25);
    const std::string path = (dir / "manifest.txt").string();
    m.write(path);
    CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
    const std::string text = slurp(path);
    CHECK(text.find("status: ok\n") != std::string::npos);
    CHECK(text.find("metric.loss: 0.25\n") != std::string::npos);
}

TEST_CASE("svg renderers emit well-formed plot elements") {
    const auto dir = fresh_dir("svg");
    SvgSeries s;
    s.label = "series";
    s.x = {0.0, 1.0, 2.0};
    s.y = {0.0, 1.0, 0.5};
    const std::string lp = (dir / "line.svg").string();
    svg_line_plot(lp, "a line", {s});
    const std::string line = slurp(lp);
    CHECK(line.find("<svg") == 0);
    CHECK(line.find("<polyline") != std::string::npos);
    CHECK(line.find("a line") != std::string::npos);
    CHECK(line.rfind("</svg>\n") == line.size() - 7);

    const std::string sp = (dir / "scatter.svg").string();
    svg_scatter_plot(sp, "dots", {s});
    const std::string scat = slurp(sp);
    CHECK(scat.find("<circle") != std::string::npos);
}

TEST_CASE("the verification registry passes end to end") {
    const auto checks = run_verification(123);
    CHECK(checks.size() >= 20);
    for (const auto& c : checks) {
        INFO(c.name, " observed ", c.observed, " tolerance ", c.tolerance);
        CHECK(c.pass);
    }
}

TEST_CASE("a corrupted posterior rule is caught by the conjugacy check") {
    // Scale one coefficient by 1%: the grid oracle is independent of the
    // closed form, so the mismatch must surface as a failed check.
    const PosteriorFn broken = [](const ScheduleSample& s, const ScheduleSample& t) {
        PosteriorParams p = posterior_params(s, t);
        p.coef_x *= 1.01;
        return p;
    };
    const auto checks = run_verification(123, broken);
    bool conjugacy_failed = false;
    for (const auto& c : checks) {
        if (c.name == "posterior-conjugacy-grid-oracle") conjugacy_failed = !c.pass;
    }
    CHECK(conjugacy_failed);
}

TEST_CASE("dispatch: schedule dump output, byte-identical re-runs, unknown command") {
    const std::string text =
        "schedule.kind=linear-lambda\n"
        "seed=5\n";
    const auto d1 = fresh_dir("dump1"), d2 = fresh_dir("dump2");
    CHECK(dispatch(base_config(text, "schedule-dump", 5, d1)) == 0);
    CHECK(dispatch(base_config(text, "schedule-dump", 5, d2)) == 0);
    const std::string csv1 = slurp((d1 / "schedule.csv").string());
    CHECK(csv1 == slurp((d2 / "schedule.csv").string()));
    CHECK(csv1.find("t,alpha,sigma2,lambda,p_lambda\n") == 0);
    CHECK(std::filesystem::exists(d1 / "schedule.svg"));
    CHECK(std::filesystem::exists(d1 / "manifest.txt"));
    CHECK(slurp((d1 / "manifest.txt").string()).find("status: ok") != std::string::npos);

    RunConfig bad = base_config(text, "frobnicate", 5, d1);
    CHECK_THROWS_AS(dispatch(bad), ConfigError);
}

TEST_CASE("parameter table lists all 25 ordered pairs") {
    const auto dir = fresh_dir("ptab");
    RunConfig cfg = base_config("param.lambda=0\nseed=1\n", "param-table", 1, dir);
    CHECK(dispatch(cfg) == 0);
    const std::string text = slurp((dir / "param_table.csv").string());
    // Header + 25 rows.
    std::size_t lines = 0;
    for (char c : text) {
        if (c == '\n') ++lines;
    }
    CHECK(lines == 26);
    CHECK(text.find("from,to,loss_factor\n") == 0);
    // At lambda = 0: x -> eps multiplies the error by alpha^2/sigma^2 = 1 and
    // eps -> score by 1/sigma^2 = 2 (up to rendering of the last ulp).
    const auto factor_of = [&](const std::string& prefix) {
        const auto pos = text.find(prefix);
        REQUIRE(pos != std::string::npos);
        return std::stod(text.substr(pos + prefix.size()));
    };
    CHECK(factor_of("\nx,eps,") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(factor_of("\neps,score,") == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("short training run: falling objective, reusable checkpoint, reproducible samples") {
    const std::string text =
        "schedule.kind=linear-lambda\n"
        "dataset.n=600\n"
        "model.hidden=24\n"
        "model.depth=1\n"
        "train.steps=250\n"
        "train.batch=16\n"
        "train.lr=0.02\n"
        "loss.mode=continuous\n"
        "loss.weighting=simple-eps\n"
        "sample.n=40\n"
        "sample.T=25\n";
    const auto dt1 = fresh_dir("train1"), dt2 = fresh_dir("train2");
    REQUIRE(dispatch(base_config(text, "train", 9, dt1)) == 0);
    REQUIRE(dispatch(base_config(text, "train", 9, dt2)) == 0);

    // Same seed, same bytes out.
    CHECK(slurp((dt1 / "loss_curve.csv").string()) == slurp((dt2 / "loss_curve.csv").string()));
    CHECK(slurp((dt1 / "checkpoint.txt").string()) == slurp((dt2 / "checkpoint.txt").string()));

    // The manifest records a net objective decrease.
    const std::string man = slurp((dt1 / "manifest.txt").string());
    double initial = 0.0, final_loss = 0.0;
    std::stringstream ss(man);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.rfind("metric.initial_loss: ", 0) == 0) initial = std::stod(line.substr(21));
        if (line.rfind("metric.final_loss: ", 0) == 0) final_loss = std::stod(line.substr(19));
    }
    CHECK(final_loss < initial);

    // Sampling from the checkpoint is byte-reproducible too.
    const auto ds1 = fresh_dir("sample1"), ds2 = fresh_dir("sample2");
    std::string stext = text + "sample.checkpoint=" + (dt1 / "checkpoint.txt").string() + "\n";
    REQUIRE(dispatch(base_config(stext, "sample", 9, ds1)) == 0);
    REQUIRE(dispatch(base_config(stext, "sample", 9, ds2)) == 0);
    const std::string samples = slurp((ds1 / "samples.csv").string());
    CHECK(samples == slurp((ds2 / "samples.csv").string()));
    CHECK(samples.find("x0,x1\n") == 0);
    CHECK(slurp((ds1 / "trajectory.csv").string()) == slurp((ds2 / "trajectory.csv").string()));

    // A mismatched prediction kind is refused before any sampling happens.
    std::string wrong = stext + "model.kind=v\n";
    CHECK_THROWS_AS(dispatch(base_config(wrong, "sample", 9, ds1)), ConfigError);
}
