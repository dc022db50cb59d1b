#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>

#include "fndt1/compare.hpp"
#include "fndt1/pipeline.hpp"

using namespace fndt1;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fndt1-pipeline" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json quick_config(const std::string& out_dir) {
    return json::parse(R"({
        "seed": 77,
        "threads": 1,
        "ensemble": {"preset": "fnd-100nm", "fnd_concentration": "20 ug/ml",
                     "gamma_intrinsic_logsigma": 0.0, "max_sampled_emitters": 1000},
        "target": {"uniform_rate": "400 /s"},
        "schedule": {
            "bin_width": "2 us",
            "tau_grid": {"gamma_guess": "250 /s", "points": 10},
            "stop": {"mode": "fixed_repeats", "repeats": 6000}
        },
        "noise": {"excess_noise_factor": 1.0},
        "analysis": {"fix_p": 1.0, "bootstrap_draws": 40}
    })")
        .patch(json::parse(R"([{"op":"add","path":"/out_dir","value":")" + out_dir + R"("}])"));
}

std::map<std::string, std::string> manifest_digests(const fs::path& dir) {
    const auto j = json::parse(read_text_file(dir / "manifest.json"));
    std::map<std::string, std::string> digests;
    for (const auto& e : j.at("artifacts"))
        digests[e.at("path").get<std::string>()] = e.at("fnv64").get<std::string>();
    return digests;
}

} // namespace

TEST_CASE("pipeline produces the full artifact set and isolates the target") {
    const auto dir = fresh_dir("full");
    const auto cfg = parse_run_config(quick_config(dir.string()));
    const auto res = run_pipeline(cfg);

    CHECK(fs::exists(dir / "control.trace.json"));
    CHECK(fs::exists(dir / "control.curve.tsv"));
    CHECK(fs::exists(dir / "control.fit.json"));
    CHECK(fs::exists(dir / "target.trace.json"));
    CHECK(fs::exists(dir / "target.curve.tsv"));
    CHECK(fs::exists(dir / "target.fit.json"));
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "manifest.json"));

    CHECK(res.control_fit.converged);
    REQUIRE(res.target_fit.has_value());
    REQUIRE(res.isolation.has_value());
    // injected 400/s on a homogeneous ensemble; generous window for a short run
    CHECK(res.isolation->gamma_target ==
          Catch::Approx(400.0).margin(4.0 * res.isolation->sigma));
}

TEST_CASE("identical configs reproduce identical artifacts") {
    const auto dir_a = fresh_dir("det-a");
    const auto dir_b = fresh_dir("det-b");
    run_pipeline(parse_run_config(quick_config(dir_a.string())));
    run_pipeline(parse_run_config(quick_config(dir_b.string())));

    const auto da = manifest_digests(dir_a);
    const auto db = manifest_digests(dir_b);
    REQUIRE(da.size() == db.size());
    for (const auto& [path, digest] : da) {
        INFO(path);
        CHECK(db.at(path) == digest);
    }
    // and the bytes themselves agree
    CHECK(read_text_file(dir_a / "control.trace.json") ==
          read_text_file(dir_b / "control.trace.json"));
}

TEST_CASE("parallel and serial execution agree exactly") {
    const auto dir_s = fresh_dir("serial");
    const auto dir_p = fresh_dir("parallel");
    auto doc_s = quick_config(dir_s.string());
    auto doc_p = quick_config(dir_p.string());
    doc_p["threads"] = 2;
    run_pipeline(parse_run_config(doc_s));
    run_pipeline(parse_run_config(doc_p));

    CHECK(read_text_file(dir_s / "control.trace.json") ==
          read_text_file(dir_p / "control.trace.json"));
    CHECK(read_text_file(dir_s / "target.curve.tsv") ==
          read_text_file(dir_p / "target.curve.tsv"));
    CHECK(read_text_file(dir_s / "control.fit.json") ==
          read_text_file(dir_p / "control.fit.json"));
}

TEST_CASE("plot option adds SVG artifacts") {
    const auto dir = fresh_dir("plot");
    auto doc = quick_config(dir.string());
    doc["plot"] = true;
    run_pipeline(parse_run_config(doc));
    CHECK(fs::exists(dir / "control.curve.svg"));
}

TEST_CASE("compare_sizes produces a ranked report and keeps going per-row") {
    const auto dir = fresh_dir("compare");
    auto doc = json::parse(R"({
        "seed": 11,
        "compare": {"sizes": ["fnd-100nm", "fnd-140nm"], "tau_points": 12},
        "schedule": {"bin_width": "2 us",
                     "stop": {"mode": "fixed_repeats", "repeats": 12000}},
        "noise": {"excess_noise_factor": 1.0},
        "analysis": {"bootstrap_draws": 30}
    })");
    doc["out_dir"] = dir.string();
    const auto cfg = parse_compare_config(doc);
    const auto report = compare_sizes(cfg);

    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows) {
        INFO(row.preset << " notes: " << row.notes);
        CHECK(row.intrinsic_reliable);
        CHECK(row.target_attempted);
        CHECK(row.has_snr);
        CHECK(row.rank >= 1);
    }
    CHECK(fs::exists(dir / "report.tsv"));
    CHECK(fs::exists(dir / "fnd-100nm" / "control.fit.json"));
    CHECK(fs::exists(dir / "fnd-140nm" / "target.fit.json"));
}
