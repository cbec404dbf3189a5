#include <sys/wait.h>

#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support.hpp"

namespace fs = std::filesystem;
using venkman::pipeline::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string("\"") + VENKMAN_CLI_PATH + "\" " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Result r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("venkman_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const std::string kCorpus = VENKMAN_CORPUS_DIR;

}  // namespace

TEST_CASE("transform, verify and sim every corpus program") {
  TempDir tmp;
  for (const auto& p : vt::corpus()) {
    INFO(p.name);
    const auto src = kCorpus + "/" + p.name + ".s";
    const auto img = tmp / (p.name + ".vkm");
    const auto stats = tmp / (p.name + ".json");
    REQUIRE(cli("transform " + src + " -o " + img + " --cfi --sfi-store --fence --stats " + stats).code == 0);
    std::ifstream sf(stats);
    const auto sj = json::parse(sf);
    CHECK(sj["config"]["cfi"] == true);
    CHECK(sj["stats"]["code_bytes"].get<std::uint64_t>() % 32 == 0);
    CHECK(fs::file_size(img) > sj["stats"]["code_bytes"].get<std::uint64_t>());
    CHECK(cli("verify " + img + " --policy " + stats).code == 0);
    const auto sim = cli("sim " + img + " --policy " + stats + " --input " + kCorpus + "/" + p.name + ".inputs.json");
    CHECK(sim.code == 0);
    const auto sj2 = json::parse(sim.out);
    CHECK(sj2["status"] != "trap");
  }
}

TEST_CASE("bundle size validation") {
  TempDir tmp;
  const auto src = kCorpus + "/fib.s";
  CHECK(cli("transform " + src + " -o " + (tmp / "a.vkm") + " --bundle-size 24").code != 0);
  CHECK_FALSE(fs::exists(tmp / "a.vkm"));
  CHECK(cli("transform " + src + " -o " + (tmp / "b.vkm") + " --bundle-size 64").code == 0);
  CHECK(cli("transform " + src + " -o " + (tmp / "c.vkm") + " --bundle-size 8").code != 0);
  CHECK(cli("transform " + src + " -o " + (tmp / "d.vkm") + " --fence --sfi-load").code == 0);
  CHECK(cli("transform " + src + " -o " + (tmp / "e.vkm") + " --baseline --cfi").code == 64);
}

TEST_CASE("verify exit codes") {
  TempDir tmp;
  const auto src = kCorpus + "/fnptr_dispatch.s";
  const auto img = tmp / "x.vkm";
  REQUIRE(cli("transform " + src + " -o " + img + " --stats " + (tmp / "s.json")).code == 0);
  CHECK(cli("verify " + img).code == 0);
  // Policy asks for masks the image does not have.
  const auto fail = cli("verify " + img + " --cfi --sfi-store --json");
  CHECK(fail.code == 1);
  const auto j = json::parse(fail.out);
  CHECK(j["verdict"] == "fail");
  CHECK_FALSE(j["violations"].empty());
  {
    std::ofstream f(tmp / "junk.vkm", std::ios::binary);
    f << "NOPE";
  }
  CHECK(cli("verify " + (tmp / "junk.vkm")).code == 2);
  CHECK(cli("verify " + (tmp / "missing.vkm")).code == 2);
  CHECK(cli("sim " + img).code == 0);
}

TEST_CASE("sim refuses unverified images unless asked") {
  TempDir tmp;
  const auto img = tmp / "u.vkm";
  REQUIRE(cli("transform " + kCorpus + "/fnptr_dispatch.s -o " + img + " --baseline").code == 0);
  CHECK(cli("sim " + img + " --cfi").code == 1);
  const auto r = cli("sim " + img + " --unverified --input " + kCorpus + "/fnptr_dispatch.inputs.json");
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["status"] == "returned");
}

TEST_CASE("attack subcommand") {
  TempDir tmp;
  {
    std::ofstream f(tmp / "cfg.json");
    f << R"({"spec_window": 8, "secret": "Hi"})";
  }
  const auto base = cli("attack --mode baseline --config " + (tmp / "cfg.json"));
  REQUIRE(base.code == 0);
  const auto bj = json::parse(base.out);
  CHECK(bj["recovered_hex"] == "4869");
  CHECK(bj["leaked"] == true);
  const auto def = cli("attack --mode defended --config " + (tmp / "cfg.json"));
  REQUIRE(def.code == 0);
  const auto dj = json::parse(def.out);
  CHECK(dj["leaked"] == false);
  CHECK(dj["verified"] == true);
  CHECK(cli("attack --mode sideways").code != 0);
  {
    std::ofstream f(tmp / "fwd.json");
    f << R"({"store_forwarding": true})";
  }
  CHECK(cli("attack --mode baseline --config " + (tmp / "fwd.json")).code != 0);
}

TEST_CASE("report subcommand") {
  TempDir tmp;
  const auto r = cli("report " + kCorpus + " --no-attack --json " + (tmp / "r.json") + " --markdown " + (tmp / "r.md"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("| program") != std::string::npos);
  std::ifstream f(tmp / "r.json");
  const auto j = json::parse(f);
  CHECK(j["programs"].size() == vt::corpus().size());
  CHECK(fs::file_size(tmp / "r.md") > 0);
  CHECK(cli("report /nonexistent").code != 0);
}

TEST_CASE("usage errors") {
  CHECK(cli("").code != 0);
  CHECK(cli("frobnicate").code != 0);
  CHECK(cli("transform /nonexistent.s -o /tmp/x.vkm").code != 0);
}
