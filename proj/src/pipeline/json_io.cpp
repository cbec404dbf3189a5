//===- json_io.cpp - JSON codecs ---------------------------------------------===//

#include <charconv>

#include "venkman/pipeline.hpp"

namespace venkman::pipeline {

using specsim::Value;

json stats_to_json(const transform::TransformStats& s) {
  return {{"original_instrs", s.original_instrs},
          {"cfi_added", s.cfi_added},
          {"sfi_store_added", s.sfi_store_added},
          {"sfi_load_added", s.sfi_load_added},
          {"fence_added", s.fence_added},
          {"nop_padding", s.nop_padding},
          {"total_instrs", s.total_instrs},
          {"code_bytes", s.code_bytes},
          {"ratio_vs_baseline", s.ratio_vs_baseline},
          {"scratch_sequences", s.scratch_sequences}};
}

verifier::Policy policy_from_json(const json& j) {
  const json& c = j.contains("config") ? j.at("config") : j;
  verifier::Policy p;
  p.bundle_size = c.value("bundle_size", 32u);
  p.align = c.value("align", true);
  p.cfi = c.value("cfi", false);
  p.sfi_store = c.value("sfi_store", false);
  p.sfi_load = c.value("sfi_load", false);
  p.fence = c.value("fence", false);
  if (j.contains("exempt_functions")) p.exempt_functions = j.at("exempt_functions").get<std::vector<std::string>>();
  return p;
}

json config_to_json(const transform::HardeningConfig& c) {
  return {{"bundle_size", c.bundle_size_bytes}, {"align", c.enable_align},         {"cfi", c.enable_cfi},
          {"sfi_store", c.enable_sfi_store},    {"sfi_load", c.enable_sfi_load},   {"fence", c.enable_fence}};
}

namespace {

std::uint64_t parse_number(const std::string& s) {
  std::uint64_t v = 0;
  int base = 10;
  std::string_view t = s;
  if (t.starts_with("0x") || t.starts_with("0X")) {
    t.remove_prefix(2);
    base = 16;
  }
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v, base);
  if (ec != std::errc{} || p != t.data() + t.size() || t.empty()) {
    throw specsim::SimError("bad number '" + s + "'");
  }
  return v;
}

std::uint64_t number(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  if (j.is_string()) return parse_number(j.get<std::string>());
  throw specsim::SimError("expected a number, got " + j.dump());
}

unsigned reg_index(const std::string& key) {
  if (key.size() < 2 || key[0] != 'r') throw specsim::SimError("bad register name '" + key + "'");
  const auto n = parse_number(key.substr(1));
  if (n >= 32) throw specsim::SimError("bad register name '" + key + "'");
  return static_cast<unsigned>(n);
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

Value value_from_json(const json& j) {
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s.starts_with("@")) return Value{s.substr(1)};
  }
  return Value{number(j)};
}

specsim::RunInputs run_inputs_from_json(const json& j) {
  specsim::RunInputs in;
  in.entry = j.value("entry", std::string{});
  if (j.contains("regs")) {
    for (const auto& [k, v] : j.at("regs").items()) in.regs.emplace_back(reg_index(k), value_from_json(v));
  }
  if (j.contains("mem")) {
    for (const auto& m : j.at("mem")) {
      specsim::MemInit init;
      init.addr = number(m.at("addr"));
      if (m.contains("words")) {
        for (const auto& w : m.at("words")) init.words.push_back(value_from_json(w));
      }
      if (m.contains("bytes")) {
        for (const auto& b : m.at("bytes")) init.bytes.push_back(static_cast<std::uint8_t>(number(b)));
      }
      if (m.contains("string")) {
        for (char c : m.at("string").get<std::string>()) init.bytes.push_back(static_cast<std::uint8_t>(c));
      }
      in.mem.push_back(std::move(init));
    }
  }
  if (j.contains("observe_regs")) {
    in.observe_regs.clear();
    for (const auto& r : j.at("observe_regs")) {
      in.observe_regs.push_back(r.is_string() ? reg_index(r.get<std::string>()) : r.get<unsigned>());
    }
  }
  if (j.contains("observe_mem")) {
    for (const auto& m : j.at("observe_mem")) in.observe_mem.emplace_back(number(m.at(0)), number(m.at(1)));
  }
  if (j.contains("limit")) in.limit = number(j.at("limit"));
  return in;
}

json run_result_to_json(const specsim::RunResult& r) {
  json j;
  j["status"] = r.status;
  if (!r.trap.empty()) j["trap"] = r.trap;
  j["regs"] = json::object();
  for (const auto& [k, v] : r.regs) j["regs"]["r" + std::to_string(k)] = v;
  j["mem"] = json::array();
  for (const auto& [a, bytes] : r.mem) j["mem"].push_back({{"addr", hex(a)}, {"bytes", bytes}});
  j["store_trace"] = json::array();
  for (const auto& [a, v] : r.store_trace) j["store_trace"].push_back({hex(a), v});
  j["cache_final"] = json::array();
  for (auto l : r.cache_final) j["cache_final"].push_back(hex(l));
  j["counters"] = {{"instret", r.counters.instret},
                   {"episodes", r.counters.episodes},
                   {"spec_instrs", r.counters.spec_instrs},
                   {"fence_stalls", r.counters.fence_stalls},
                   {"monitor_violations", r.counters.monitor_violations}};
  return j;
}

std::vector<std::string> check_expectations(const specsim::RunResult& r, const json& expect, const LayoutImage& img) {
  std::vector<std::string> out;
  if (expect.contains("status") && expect.at("status").get<std::string>() != r.status) {
    out.push_back("status " + r.status + ", expected " + expect.at("status").get<std::string>());
  }
  if (expect.contains("regs")) {
    for (const auto& [k, v] : expect.at("regs").items()) {
      const unsigned idx = reg_index(k);
      const std::uint64_t want = specsim::resolve(value_from_json(v), img);
      auto it = std::find_if(r.regs.begin(), r.regs.end(), [&](const auto& p) { return p.first == idx; });
      if (it == r.regs.end()) {
        out.push_back(k + " was not observed");
      } else if (it->second != want) {
        out.push_back(k + " = " + std::to_string(it->second) + ", expected " + std::to_string(want));
      }
    }
  }
  if (expect.contains("mem")) {
    const auto byte_at = [&](std::uint64_t a) -> std::optional<std::uint8_t> {
      for (const auto& [base, bytes] : r.mem) {
        if (a >= base && a - base < bytes.size()) return bytes[a - base];
      }
      return std::nullopt;
    };
    for (const auto& m : expect.at("mem")) {
      const std::uint64_t addr = number(m.at("addr"));
      std::uint64_t a = addr;
      for (const auto& w : m.at("words")) {
        const std::uint64_t want = specsim::resolve(value_from_json(w), img);
        std::uint64_t got = 0;
        bool seen = true;
        for (unsigned k = 0; k < 8; ++k) {
          auto b = byte_at(a + k);
          if (!b) seen = false;
          got |= std::uint64_t{b.value_or(0)} << (8 * k);
        }
        if (!seen) {
          out.push_back("memory at " + hex(a) + " was not observed");
        } else if (got != want) {
          out.push_back("word at " + hex(a) + " = " + std::to_string(got) + ", expected " + std::to_string(want));
        }
        a += 8;
      }
    }
  }
  return out;
}

ScenarioConfig scenario_config_from_json(const json& j) {
  ScenarioConfig c;
  auto& s = c.sim;
  s.btb_slots = j.value("btb_slots", s.btb_slots);
  s.rsb_depth = j.value("rsb_depth", s.rsb_depth);
  s.line_size = j.value("line_size", s.line_size);
  s.spec_window = j.value("spec_window", s.spec_window);
  s.bht_slots = j.value("bht_slots", s.bht_slots);
  s.direct_branch_btb = j.value("direct_branch_btb", s.direct_branch_btb);
  s.store_forwarding = j.value("store_forwarding", s.store_forwarding);
  const std::string secret = j.value("secret", std::string(kDefaultSecret));
  c.secret.assign(secret.begin(), secret.end());
  s.validate();
  return c;
}

json scenario_config_to_json(const ScenarioConfig& c) {
  return {{"btb_slots", c.sim.btb_slots},
          {"rsb_depth", c.sim.rsb_depth},
          {"line_size", c.sim.line_size},
          {"spec_window", c.sim.spec_window},
          {"direct_branch_btb", c.sim.direct_branch_btb},
          {"store_forwarding", c.sim.store_forwarding},
          {"secret", std::string(c.secret.begin(), c.secret.end())}};
}

json attack_result_to_json(const specsim::AttackResult& r, std::span<const std::uint8_t> secret) {
  json j;
  j["recovered_hex"] = r.recovered_hex();
  j["per_byte_hits"] = r.hit_map;
  j["leaked"] = r.leaked();
  j["correct_bytes"] = r.correct_bytes(secret);
  j["secret_bytes"] = secret.size();
  j["secret_indexed_hits"] = r.secret_indexed_hits;
  j["episodes"] = r.episodes;
  j["monitor_violations"] = r.monitor_violations;
  return j;
}

}  // namespace venkman::pipeline
