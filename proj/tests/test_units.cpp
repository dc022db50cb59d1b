#include <catch2/catch_amalgamated.hpp>

#include "fndt1/units.hpp"

using namespace fndt1;

TEST_CASE("time quantities parse to seconds") {
    CHECK(units::parse_time("80 us") == Catch::Approx(80e-6));
    CHECK(units::parse_time("0.5 ms") == Catch::Approx(0.5e-3));
    CHECK(units::parse_time("25 ns") == Catch::Approx(25e-9));
    CHECK(units::parse_time("3000 s") == Catch::Approx(3000.0));
    CHECK(units::parse_time("1e-3s") == Catch::Approx(1e-3));
}

TEST_CASE("rate units disambiguate per-second from per-millisecond") {
    CHECK(units::parse_rate("200 /s") == Catch::Approx(200.0));
    CHECK(units::parse_rate("0.2 /ms") == Catch::Approx(200.0));
    CHECK(units::parse_rate("200 s^-1") == Catch::Approx(200.0));
    CHECK(units::parse_rate("1/s") == Catch::Approx(1.0)); // "1" then unit "/s"
}

TEST_CASE("count rates, concentrations, lengths, volumes") {
    CHECK(units::parse_count_rate("11 Mcps") == Catch::Approx(11e6));
    CHECK(units::parse_count_rate("900 kcps") == Catch::Approx(0.9e6));
    CHECK(units::parse_molar("26.6 mM") == Catch::Approx(26.6));
    CHECK(units::parse_molar("500 uM") == Catch::Approx(0.5));
    CHECK(units::parse_mass_concentration("25 ug/ml") == Catch::Approx(25.0));
    CHECK(units::parse_mass_concentration("0.3 mg/ml") == Catch::Approx(300.0));
    CHECK(units::parse_length("140 nm") == Catch::Approx(140.0));
    CHECK(units::parse_volume("170 uL") == Catch::Approx(170.0));
    CHECK(units::parse_volume("0.03 mL") == Catch::Approx(30.0));
}

TEST_CASE("unit suffixes are mandatory and unknown units are rejected") {
    CHECK_THROWS_AS(units::parse_time("80"), ValidationError);
    CHECK_THROWS_AS(units::parse_time("80 parsec"), ValidationError);
    CHECK_THROWS_AS(units::parse_rate("200"), ValidationError);
    CHECK_THROWS_AS(units::parse_rate("200 Hz2"), ValidationError);
    CHECK_THROWS_AS(units::parse_time(""), ValidationError);
    CHECK_THROWS_AS(units::parse_time("abc us"), ValidationError);
}
