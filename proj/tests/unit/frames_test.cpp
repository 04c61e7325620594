#include <doctest.h>

#include "support.hpp"
#include "vpc/digest.hpp"
#include "vpc/frames.hpp"

using namespace vpc::model;
using vpc::testing::TempDir;

TEST_CASE("digest known answers") {
  CHECK(vpc::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(vpc::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(vpc::base64_encode("") == "");
  CHECK(vpc::base64_encode("f") == "Zg==");
  CHECK(vpc::base64_encode("fo") == "Zm8=");
  CHECK(vpc::base64_encode("foobar") == "Zm9vYmFy");
}

TEST_CASE("frame timestamps sit at bin midpoints") {
  const auto ts = frame_timestamps(32.4, 8);
  REQUIRE(ts.size() == 8);
  for (int k = 0; k < 8; ++k) CHECK(ts[k] == doctest::Approx((k + 0.5) * 32.4 / 8).epsilon(1e-15));
  CHECK(frame_timestamps(10.0, 1) == std::vector<double>{5.0});
  CHECK_THROWS(frame_timestamps(10.0, 0));
  CHECK(format_timestamp(2.025) == "2.025");
  CHECK(format_timestamp(0.0625) == "0.062");
  CHECK(format_timestamp(30.375) == "30.375");
}

TEST_CASE("extractor command parsing") {
  const auto c = parse_extractor_command("  tools/extract_frame.sh --quality 2 ");
  CHECK(c.program == "tools/extract_frame.sh");
  CHECK(c.args == std::vector<std::string>{"--quality", "2"});
  CHECK(parse_extractor_command("").program.empty());
}

TEST_CASE("frames come from the external extractor in timestamp order") {
  TempDir dir;
  const auto cmd = parse_extractor_command(vpc::testing::write_stub_extractor(dir.path()));
  const auto frames = sample_frames("media/ep1.mp4", 4.0, 4, cmd);
  REQUIRE(frames.size() == 4);
  const char* stamps[] = {"0.500", "1.500", "2.500", "3.500"};
  for (int k = 0; k < 4; ++k) {
    CHECK(frames[k].mime == "image/jpeg");
    CHECK(frames[k].base64 == vpc::base64_encode(std::string("FRAME media/ep1.mp4 ") + stamps[k]));
  }
}

TEST_CASE("extractor failures") {
  TempDir dir;
  SUBCASE("non-zero exit carries stderr") {
    const auto path = dir.path() / "fail.sh";
    vpc::testing::write_file(path, "#!/bin/sh\necho 'no such stream' >&2\nexit 3\n");
    std::filesystem::permissions(path, std::filesystem::perms::owner_all);
    try {
      sample_frames("v.mp4", 10.0, 2, parse_extractor_command(path.string()));
      FAIL("expected ExtractionFailed");
    } catch (const ExtractionFailed& e) {
      CHECK(std::string(e.what()).find("status 3") != std::string::npos);
      CHECK(std::string(e.what()).find("no such stream") != std::string::npos);
    }
  }
  SUBCASE("no output file") {
    const auto path = dir.path() / "silent.sh";
    vpc::testing::write_file(path, "#!/bin/sh\nexit 0\n");
    std::filesystem::permissions(path, std::filesystem::perms::owner_all);
    CHECK_THROWS_AS(sample_frames("v.mp4", 10.0, 2, parse_extractor_command(path.string())), ExtractionFailed);
  }
  SUBCASE("missing program") {
    CHECK_THROWS_AS(sample_frames("v.mp4", 10.0, 2, parse_extractor_command("/nonexistent/extractor")),
                    ExtractionFailed);
  }
  SUBCASE("no extractor configured") { CHECK_THROWS_AS(sample_frames("v.mp4", 10.0, 2, {}), ExtractionFailed); }
  SUBCASE("unusable media") {
    const auto cmd = parse_extractor_command(vpc::testing::write_stub_extractor(dir.path()));
    CHECK_THROWS_AS(sample_frames("", 10.0, 2, cmd), UnsupportedMedia);
    CHECK_THROWS_AS(sample_frames("v.mp4", 0.0, 2, cmd), UnsupportedMedia);
  }
}
