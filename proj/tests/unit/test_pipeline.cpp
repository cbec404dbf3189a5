#include "doctest.h"
#include "support.hpp"

using namespace venkman;
using pipeline::json;

TEST_CASE("presets accumulate one pass at a time") {
  const auto ps = pipeline::standard_presets();
  std::vector<std::string> names;
  for (const auto& p : ps) names.push_back(p.name);
  CHECK(names == std::vector<std::string>{"baseline", "align", "align+cfi", "+sfi-store", "+fence", "+sfi-load"});
  const auto count = [](const transform::HardeningConfig& c) {
    return int(c.enable_align) + c.enable_cfi + c.enable_sfi_store + c.enable_fence + c.enable_sfi_load;
  };
  for (std::size_t k = 0; k < ps.size(); ++k) CHECK(count(ps[k].config) == static_cast<int>(k));
  CHECK_THROWS(pipeline::find_preset(ps, "nonsense"));
  const auto d = pipeline::defended_config(64);
  CHECK(d.bundle_size_bytes == 64);
  CHECK((d.enable_align && d.enable_cfi && d.enable_sfi_store && d.enable_fence && !d.enable_sfi_load));
  for (const auto& p : pipeline::standard_presets(16)) {
    if (p.config.enable_align) CHECK(p.config.bundle_size_bytes == 16);
  }
}

TEST_CASE("policy mirrors the configuration") {
  const auto out = vt::build(pipeline::attack_program_source(), pipeline::defended_config());
  const auto p = pipeline::policy_for(out);
  CHECK(p.bundle_size == 32);
  CHECK(p.align);
  CHECK(p.cfi);
  CHECK(p.sfi_store);
  CHECK(p.fence);
  CHECK_FALSE(p.sfi_load);
  const auto b = pipeline::policy_for(vt::baseline());
  CHECK_FALSE(b.align);
}

TEST_CASE("values and run inputs from json") {
  CHECK(std::get<std::uint64_t>(pipeline::value_from_json(json(42))) == 42);
  CHECK(std::get<std::uint64_t>(pipeline::value_from_json(json("0x2000"))) == 0x2000);
  CHECK(std::get<std::string>(pipeline::value_from_json(json("@main"))) == "main");
  CHECK_THROWS(pipeline::value_from_json(json("bogus")));

  const auto j = json::parse(R"({
    "entry": "f", "regs": {"r3": 7, "r4": "@g"},
    "mem": [{"addr": "0x200000000000", "words": [1, 2], "bytes": [9]}, {"addr": 35184372088832, "string": "hi"}],
    "observe_regs": [3, 4], "observe_mem": [["0x200000000000", 17]], "limit": 99})");
  const auto in = pipeline::run_inputs_from_json(j);
  CHECK(in.entry == "f");
  REQUIRE(in.regs.size() == 2);
  CHECK(in.regs[0].first == 3);
  CHECK(std::get<std::string>(in.regs[1].second) == "g");
  REQUIRE(in.mem.size() == 2);
  CHECK(in.mem[0].words.size() == 2);
  CHECK(in.mem[0].bytes == std::vector<std::uint8_t>{9});
  CHECK(in.mem[1].bytes == std::vector<std::uint8_t>{'h', 'i'});
  CHECK(in.observe_regs == std::vector<unsigned>{3, 4});
  CHECK(in.observe_mem[0] == std::pair<std::uint64_t, std::uint64_t>{0x200000000000, 17});
  CHECK(in.limit == 99);
  CHECK_THROWS(pipeline::run_inputs_from_json(json::parse(R"({"regs": {"x3": 1}})")));
}

TEST_CASE("expectation checks report each mismatch") {
  const auto out = vt::build(".func main\n  addi r3, r0, 5\n  blr\n.endfunc\n", vt::baseline());
  const auto r = specsim::run(out.image, {});
  CHECK(pipeline::check_expectations(r, json::parse(R"({"status": "returned", "regs": {"r3": 5}})"), out.image).empty());
  const auto bad = pipeline::check_expectations(r, json::parse(R"({"status": "halted", "regs": {"r3": 6}})"), out.image);
  CHECK(bad.size() == 2);
}

TEST_CASE("scenario configuration round trip") {
  pipeline::ScenarioConfig c;
  c.sim.spec_window = 8;
  c.sim.btb_slots = 16;
  c.secret = {1, 2, 3};
  const auto back = pipeline::scenario_config_from_json(pipeline::scenario_config_to_json(c));
  CHECK(back.sim.spec_window == 8);
  CHECK(back.sim.btb_slots == 16);
  CHECK(back.secret == c.secret);
  const auto d = pipeline::scenario_config_from_json(json::object());
  CHECK(std::string(d.secret.begin(), d.secret.end()) == pipeline::kDefaultSecret);
  CHECK(d.sim.spec_window == 32);
  CHECK_THROWS(pipeline::scenario_config_from_json(json::parse(R"({"store_forwarding": true})")));
}

TEST_CASE("attack result json") {
  specsim::AttackResult r;
  r.recovered = {std::uint8_t{'A'}, std::nullopt};
  r.hit_map = {{'A'}, {}};
  r.secret_indexed_hits = 1;
  const std::vector<std::uint8_t> secret{'A', 'B'};
  const auto j = pipeline::attack_result_to_json(r, secret);
  CHECK(j["recovered_hex"] == "41..");
  CHECK(j["leaked"] == true);
  CHECK(j["per_byte_hits"].size() == 2);
  CHECK(r.correct_bytes(secret) == 1);
  specsim::AttackResult none;
  none.recovered = {std::nullopt};
  CHECK_FALSE(none.leaked());
}

TEST_CASE("stats conservation detects tampering") {
  const auto out = vt::build(pipeline::attack_program_source(), pipeline::defended_config());
  CHECK(pipeline::stats_conserved(out.stats, out.image));
  auto s = out.stats;
  s.nop_padding += 1;
  CHECK_FALSE(pipeline::stats_conserved(s, out.image));
  const auto j = pipeline::stats_to_json(out.stats);
  CHECK(j.contains("nop_padding"));
  CHECK(j.contains("code_bytes"));
}

TEST_CASE("corpus loading") {
  const auto c = vt::corpus();
  CHECK(c.size() >= 12);
  CHECK(std::is_sorted(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.name < b.name; }));
  for (const auto& p : c) CHECK(p.inputs.has_value());
  CHECK_THROWS(pipeline::load_corpus("/nonexistent/corpus"));
}

TEST_CASE("report over the corpus") {
  pipeline::ReportOptions opt;
  opt.attack_windows = {32};
  const auto rep = pipeline::build_report(vt::corpus(), opt);
  CHECK(rep.configs.size() == 6);
  for (const auto& row : rep.rows) {
    INFO(row.name);
    CHECK(row.expectation_failures.empty());
    REQUIRE(row.configs.size() == 6);
    CHECK(row.configs[0].ratio == doctest::Approx(1.0));
    for (const auto& c : row.configs) {
      INFO(c.config);
      CHECK(c.verified);
      CHECK(c.stats_ok);
      CHECK(c.outputs_match.value_or(false));
      CHECK(c.stores_match.value_or(false));
      CHECK(c.monitor_violations == 0);
      CHECK(c.code_bytes == c.stats.code_bytes);
    }
    // Every pass adds code; alignment alone never shrinks it.
    for (std::size_t k = 1; k < row.configs.size(); ++k) CHECK(row.configs[k].code_bytes >= row.configs[k - 1].code_bytes);
  }
  REQUIRE(rep.attacks.size() == 1);
  CHECK(rep.attacks[0].baseline_leaked);
  CHECK_FALSE(rep.attacks[0].defended_leaked);
  const auto j = rep.to_json();
  CHECK(j["programs"].size() == rep.rows.size());
  CHECK(j.contains("geomean"));
  const auto md = rep.to_markdown();
  CHECK(md.find("| program") != std::string::npos);
  CHECK(md.find("geomean") != std::string::npos);
}
