//===- run.cpp - Whole-program simulation -----------------------------------===//

#include "venkman/specsim.hpp"

namespace venkman::specsim {

std::uint64_t resolve(const Value& v, const LayoutImage& img) {
  if (const auto* n = std::get_if<std::uint64_t>(&v)) return *n;
  const auto& name = std::get<std::string>(v);
  const Symbol* s = img.symbol(name);
  if (s == nullptr) throw SimError("unknown symbol '" + name + "'");
  return s->address;
}

RunResult run(const LayoutImage& img, const RunInputs& in, const SimConfig& cfg) {
  Machine m(img, cfg);
  auto& st = m.state();
  st.regs.gprs[1] = kDefaultStackTop;
  for (const auto& [r, v] : in.regs) {
    if (r >= 32) throw SimError("register r" + std::to_string(r) + " does not exist");
    st.regs.gprs[r] = resolve(v, img);
  }
  for (const auto& init : in.mem) {
    std::uint64_t a = init.addr;
    for (const auto& w : init.words) {
      st.mem.write64(a, resolve(w, img));
      a += 8;
    }
    for (std::uint8_t b : init.bytes) st.mem.write8(a++, b);
  }

  std::uint64_t entry = 0;
  if (!in.entry.empty()) {
    entry = resolve(Value{in.entry}, img);
  } else if (const Symbol* s = img.symbol("main")) {
    entry = s->address;
  } else if (!img.symbols.empty()) {
    entry = img.symbols.front().address;
  } else {
    throw SimError("image has no symbols");
  }

  RunResult r;
  switch (m.call(entry, in.limit)) {
    case StepStatus::kHalted: r.status = "halted"; break;
    case StepStatus::kReturned: r.status = "returned"; break;
    case StepStatus::kTrap: r.status = "trap"; r.trap = m.trap_message(); break;
    case StepStatus::kRunning: r.status = "timeout"; break;
  }
  for (unsigned k : in.observe_regs) {
    if (k >= 32) throw SimError("register r" + std::to_string(k) + " does not exist");
    r.regs.emplace_back(k, st.regs.gprs[k]);
  }
  for (const auto& [addr, len] : in.observe_mem) {
    std::vector<std::uint8_t> bytes(len);
    for (std::uint64_t k = 0; k < len; ++k) bytes[k] = st.mem.read8(addr + k);
    r.mem.emplace_back(addr, std::move(bytes));
  }
  r.store_trace = m.store_trace();
  r.cache_final.assign(m.cache().lines().begin(), m.cache().lines().end());
  r.counters = m.counters();
  return r;
}

}  // namespace venkman::specsim
