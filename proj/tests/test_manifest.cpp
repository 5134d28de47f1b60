#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pulsealign/manifest.hpp"

using namespace pulsealign;

TEST_CASE("key-value config parsing, comments and overrides") {
    const auto cfg = KeyValueConfig::from_string(
        "# a comment\n"
        "base_lr = 1e-3\n"
        "total_steps=500   # trailing comment\n"
        "encoder_preset = compact\n"
        "sqi_enabled = false\n");
    CHECK(cfg.get_double("base_lr", 0.0) == doctest::Approx(1e-3));
    CHECK(cfg.get_int("total_steps", 0) == 500);
    CHECK(cfg.get_string("encoder_preset", "") == "compact");
    CHECK(cfg.get_bool("sqi_enabled", true) == false);
    CHECK(cfg.get_int("missing", 42) == 42);
}

TEST_CASE("malformed config lines are rejected") {
    CHECK_THROWS_AS(KeyValueConfig::from_string("novalue\n"), Error);
    const auto cfg = KeyValueConfig::from_string("x = abc\n");
    CHECK_THROWS_AS(cfg.get_double("x", 0.0), Error);
    CHECK_THROWS_AS(cfg.get_int("x", 0), Error);
    CHECK_THROWS_AS(cfg.get_bool("x", false), Error);
}

TEST_CASE("sha256 matches known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("run manifest records inputs by digest and round-trips as json") {
    const auto dir = std::filesystem::temp_directory_path() / "pa_manifest";
    std::filesystem::create_directories(dir);
    const std::string input = (dir / "input.bin").string();
    {
        std::ofstream out(input, std::ios::binary);
        out << "abc";
    }

    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = 7;
    manifest.config["n"] = "100";
    manifest.add_input(input);
    manifest.outputs = {"a.apss"};
    manifest.wall_time_s = 1.25;
    const std::string path = (dir / "manifest.json").string();
    manifest.write(path);

    std::ifstream in(path);
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc["command"] == "synth");
    CHECK(doc["seed"] == 7);
    CHECK(doc["inputs"][input] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(doc["config"]["n"] == "100");
    CHECK(doc["tool_version"] == kToolVersion);
}
