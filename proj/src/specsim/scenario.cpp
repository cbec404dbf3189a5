//===- scenario.cpp - Branch target injection against a dispatcher ---------===//
//
// Register contract of the scenario program:
//   r3 = x, r4 = function pointer, r5 = array1, r6 = &array1_size,
//   r10 = array2.
//
//===----------------------------------------------------------------------===//

#include <algorithm>
#include <cstdio>

#include "venkman/specsim.hpp"

namespace venkman::specsim {

std::size_t AttackResult::correct_bytes(std::span<const std::uint8_t> secret) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < secret.size() && k < recovered.size(); ++k) {
    if (recovered[k] && *recovered[k] == secret[k]) ++n;
  }
  return n;
}

bool AttackResult::leaked() const {
  return secret_indexed_hits > 0 ||
         std::any_of(recovered.begin(), recovered.end(), [](const auto& b) { return b.has_value(); });
}

std::string AttackResult::recovered_hex() const {
  std::string s;
  char buf[3];
  for (const auto& b : recovered) {
    if (b) {
      std::snprintf(buf, sizeof buf, "%02x", *b);
      s += buf;
    } else {
      s += "..";
    }
  }
  return s;
}

std::vector<unsigned> probe_cache(const CacheModel& cache, const ScenarioLayout& lay) {
  std::vector<unsigned> hits;
  for (unsigned v = 0; v < 256; ++v) {
    if (cache.contains(lay.array2_addr + v * lay.stride)) hits.push_back(v);
  }
  return hits;
}

namespace {

void flush_array2(CacheModel& c, const ScenarioLayout& lay) {
  for (unsigned v = 0; v < 256; ++v) c.flush(lay.array2_addr + v * lay.stride);
}

}  // namespace

AttackResult spectre_v2_scenario(const LayoutImage& img, std::span<const std::uint8_t> secret, const SimConfig& cfg,
                                 const ScenarioLayout& lay) {
  const auto need = [&](const char* name) {
    const Symbol* s = img.symbol(name);
    if (s == nullptr) throw ScenarioError(std::string("scenario image lacks '") + name + "'");
    return s->address;
  };
  const std::uint64_t victim = need("victim_function");
  const std::uint64_t benign = need("benign_function");
  const std::uint64_t dispatcher = need("dispatcher");
  if (lay.array1_len == 0) throw ScenarioError("array1 must not be empty");
  if (lay.stride < cfg.line_size) throw ScenarioError("probe stride is smaller than a cache line");

  Machine m(img, cfg);
  auto& mem = m.state().mem;
  mem.write64(lay.array1_size_addr, lay.array1_len);
  for (std::uint64_t k = 0; k < lay.array1_len; ++k) mem.write8(lay.array1_addr + k, static_cast<std::uint8_t>(k + 1));
  for (std::size_t k = 0; k < secret.size(); ++k) mem.write8(lay.secret_addr + k, secret[k]);

  const auto call = [&](std::uint64_t fp, std::uint64_t x) {
    auto& g = m.state().regs.gprs;
    g[1] = kDefaultStackTop;
    g[3] = x;
    g[4] = fp;
    g[5] = lay.array1_addr;
    g[6] = lay.array1_size_addr;
    g[10] = lay.array2_addr;
    const StepStatus s = m.call(dispatcher, 100'000);
    if (s != StepStatus::kReturned) {
      throw ScenarioError("dispatcher call did not return: " +
                          (s == StepStatus::kTrap ? m.trap_message() : std::string("limit reached")));
    }
  };

  AttackResult res;
  for (std::size_t i = 0; i < secret.size(); ++i) {
    flush_array2(m.cache(), lay);
    for (unsigned t = 0; t < lay.training_calls; ++t) call(victim, (i + t) % lay.array1_len);
    flush_array2(m.cache(), lay);
    call(benign, lay.secret_addr - lay.array1_addr + i);
    auto hits = probe_cache(m.cache(), lay);
    if (std::find(hits.begin(), hits.end(), secret[i]) != hits.end()) ++res.secret_indexed_hits;
    res.recovered.push_back(hits.size() == 1 ? std::optional<std::uint8_t>(static_cast<std::uint8_t>(hits[0]))
                                             : std::nullopt);
    res.hit_map.push_back(std::move(hits));
  }
  res.monitor_violations = m.counters().monitor_violations;
  res.episodes = m.counters().episodes;
  return res;
}

}  // namespace venkman::specsim
