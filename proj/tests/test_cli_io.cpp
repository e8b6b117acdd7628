#include "doctest.h"
#include "support.hpp"

#include "mobnp/cli_io.hpp"
#include "mobnp/errors.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace mobnp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mobnp_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.jsonl")
            out[entry.path().filename().string()] = read_text(entry.path());
    return out;
}

RunConfig simulated_fit(const fs::path& dir, bool survival, std::uint64_t seed) {
    RunConfig sim;
    sim.seed = seed;
    sim.out_dir = dir;
    sim.simulation.n = 20;
    sim.simulation.p = {40, 40};
    sim.simulate_survival = survival;
    sim.survival.num_predictors = 3;
    run_simulate(sim);
    RunConfig fit = load_config(dir / "fit.ini");
    fit.selection.sweeps = 200;
    return fit;
}

} // namespace

TEST_CASE("well-formed platform CSV") {
    const auto dir = scratch("platform");
    write_text(dir / "p.csv", "patient_id,a,b\nx,1,2\ny,3,4.5\nz,-1,0\n");
    const PlatformMatrix pm = load_platform(dir / "p.csv", Transform::identity);
    CHECK(pm.n() == 3);
    CHECK(pm.p() == 2);
    CHECK(pm.values(1, 1) == 4.5);
    CHECK(pm.patient_ids == std::vector<std::string>{"x", "y", "z"});
    CHECK(pm.probe_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("malformed platform CSVs are parse errors with a location") {
    const auto dir = scratch("malformed");
    write_text(dir / "ragged.csv", "id,a,b\nx,1,2\ny,3\n");
    CHECK_THROWS_AS(load_platform(dir / "ragged.csv", Transform::identity), ParseError);
    write_text(dir / "text.csv", "id,a,b\nx,1,2\ny,3,oops\n");
    try {
        (void)load_platform(dir / "text.csv", Transform::identity);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":3:3") != std::string::npos);
    }
    write_text(dir / "dup.csv", "id,a\nx,1\nx,2\n");
    CHECK_THROWS_AS(load_platform(dir / "dup.csv", Transform::identity), ParseError);
}

TEST_CASE("logit of 1.0 without clipping is a domain error") {
    const auto dir = scratch("logit");
    write_text(dir / "m.csv", "id,a\nx,0.5\ny,1.0\n");
    CHECK_THROWS_AS(load_platform(dir / "m.csv", Transform::logit), DomainError);
    const PlatformMatrix clipped = load_platform(dir / "m.csv", Transform::logit, 1e-3);
    CHECK(clipped.values(1, 0) == doctest::Approx(std::log(0.999 / 0.001)));
}

TEST_CASE("platforms with different patients are rejected") {
    const auto dir = scratch("mismatch");
    write_text(dir / "a.csv", "id,p\nx,1\ny,2\n");
    write_text(dir / "b.csv", "id,q\ny,1\nx,2\n");
    RunConfig config;
    config.platforms = {{dir / "a.csv", Transform::identity}, {dir / "b.csv", Transform::identity}};
    CHECK_THROWS_AS(load_dataset(config), ParseError);
}

TEST_CASE("clinical file") {
    const auto dir = scratch("clinical");
    const std::vector<std::string> order{"a", "b", "c"};
    write_text(dir / "c1.csv", "patient_id,time,event\na,2,1\nb,3,0\nc,5,1\n");
    write_text(dir / "c2.csv", "event,patient_id,time\n1,c,5\n1,a,2\n0,b,3\n");
    const ClinicalOutcomes x = load_clinical(dir / "c1.csv", order);
    const ClinicalOutcomes y = load_clinical(dir / "c2.csv", order);
    CHECK(x.observed_time == y.observed_time);
    CHECK(x.event == y.event);
    CHECK(x.log_time == y.log_time);
    CHECK(x.log_time(0) == std::log(2.0));

    write_text(dir / "zero.csv", "patient_id,time,event\na,0,1\nb,3,0\nc,5,1\n");
    CHECK_THROWS_AS(load_clinical(dir / "zero.csv", order), DomainError);
    write_text(dir / "event.csv", "patient_id,time,event\na,1,2\nb,3,0\nc,5,1\n");
    CHECK_THROWS_AS(load_clinical(dir / "event.csv", order), DomainError);
    write_text(dir / "unknown.csv", "patient_id,time,event\na,1,1\nb,3,0\nq,5,1\n");
    CHECK_THROWS_AS(load_clinical(dir / "unknown.csv", order), ParseError);
}

TEST_CASE("artifacts round-trip at full precision") {
    const auto dir = scratch("roundtrip");
    Rng rng(3);
    MatrixXd m(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j)
            m(i, j) = rng.normal() * std::pow(10.0, rng.uniform_int(20) - 10);
    m(0, 0) = 0.1;
    m(1, 1) = 1.0 / 3.0;
    write_matrix(dir / "m.csv", m, {"a", "b", "c"}, {"r1", "r2", "r3", "r4"}, "id");
    CHECK(read_matrix(dir / "m.csv", true, true) == m);
    write_matrix(dir / "plain.csv", m);
    CHECK(read_matrix(dir / "plain.csv", false, false) == m);

    const Allocation a{0, 1, 0, 2, 1};
    write_allocation(dir / "alloc.csv", a, {"p1", "p2", "p3", "p4", "p5"}, "probe");
    CHECK(read_allocation(dir / "alloc.csv") == a);
    CHECK(read_text(dir / "alloc.csv").find("p4,3") != std::string::npos);

    PlatformMatrix pm;
    pm.values = m;
    pm.probe_names = {"x", "y,z", "w"};
    pm.patient_ids = {"s1", "s2", "s3", "s4"};
    write_platform(dir / "pm.csv", pm);
    const PlatformMatrix back = load_platform(dir / "pm.csv", Transform::identity);
    CHECK(back.values == pm.values);
    CHECK(back.probe_names == pm.probe_names);

    VectorXd time(4);
    time << 1.5, 2.25, 1e-3, 7.0 / 3.0;
    const ClinicalOutcomes c = ClinicalOutcomes::from_times(time, {1, 0, 1, 0});
    write_clinical(dir / "c.csv", c, pm.patient_ids);
    const ClinicalOutcomes cb = load_clinical(dir / "c.csv", pm.patient_ids);
    CHECK(cb.observed_time == c.observed_time);
    CHECK(cb.event == c.event);
}

TEST_CASE("config parsing") {
    std::istringstream good("[run]\nseed = 9\n[data]\nplatform1 = a.csv\ntransform1 = logit\nplatform2 = b.csv\n"
                            "[chain]\nsweeps_1a = 10\n[selection]\nfdr_alpha = 0.1\n");
    const RunConfig c = parse_config(good, "/base");
    CHECK(c.seed == 9);
    REQUIRE(c.platforms.size() == 2);
    CHECK(c.platforms[0].path == fs::path("/base/a.csv"));
    CHECK(c.platforms[0].transform == Transform::logit);
    CHECK(c.sampler.schedule.sweeps_1a == 10);
    CHECK(c.selection.fdr_alpha == 0.1);

    std::istringstream unknown("[chain]\nsweeps = 10\n");
    CHECK_THROWS_AS(parse_config(unknown), ConfigError);
    std::istringstream bad_alpha("[data]\nplatform1 = a.csv\n[selection]\nfdr_alpha = 1.5\n");
    CHECK_THROWS_AS(parse_config(bad_alpha), ConfigError);

    // The formatted defaults parse back to the same text.
    std::istringstream again(format_config(c));
    CHECK(format_config(parse_config(again)) == format_config(c));
}

TEST_CASE("simulate then fit: artifacts, timing, determinism") {
    const auto dir = scratch("pipeline");
    RunConfig fit = simulated_fit(dir, true, 5);
    fit.out_dir = dir / "fit_a";
    const auto start = std::chrono::steady_clock::now();
    const PipelineResult res = run_pipeline(fit);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 60.0);
    CHECK(res.selection.has_value());
    for (const char* name : {"row_allocation.csv", "column_allocation_1.csv", "column_allocation_2.csv",
                             "coclustering_rows.csv", "coclustering_columns_1.csv", "phi_1.csv", "atom_ids_2.csv",
                             "heatmap_1.csv", "sigma.csv", "diagnostics.csv", "selection_report.csv",
                             "manifest.jsonl"})
        CHECK_MESSAGE(fs::exists(fit.out_dir / name), name);
    CHECK(read_allocation(fit.out_dir / "row_allocation.csv") == res.stage1.row_ls);

    fit.out_dir = dir / "fit_b";
    run_pipeline(fit);
    const auto a = artifacts(dir / "fit_a");
    const auto b = artifacts(dir / "fit_b");
    CHECK(a.size() == b.size());
    CHECK(a == b);

    // Stage 2 alone from the saved fit reproduces the pipeline's report.
    fit.out_dir = dir / "select";
    run_selection_from_fit(fit, dir / "fit_a");
    CHECK(read_text(dir / "select" / "selection_report.csv") == a.at("selection_report.csv"));
}

TEST_CASE("without clinical data Stage 2 is skipped") {
    const auto dir = scratch("noclinical");
    RunConfig fit = simulated_fit(dir, false, 6);
    fit.out_dir = dir / "fit";
    const PipelineResult res = run_pipeline(fit);
    CHECK_FALSE(res.selection.has_value());
    CHECK(fs::exists(fit.out_dir / "row_allocation.csv"));
    CHECK_FALSE(fs::exists(fit.out_dir / "selection_report.csv"));
}
