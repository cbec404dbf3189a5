//===- machine.cpp - Interpreter, predictors and speculation --------------===//

#include <algorithm>
#include <bit>

#include "venkman/specsim.hpp"

namespace venkman::specsim {

using isa::Instruction;
using isa::Opcode;
using isa::Reg;

void SimConfig::validate() const {
  const auto pow2 = [](std::uint32_t v) { return v != 0 && std::has_single_bit(v); };
  if (!pow2(btb_slots)) throw SimError("btb_slots must be a power of two");
  if (!pow2(bht_slots)) throw SimError("bht_slots must be a power of two");
  if (!pow2(line_size)) throw SimError("line_size must be a power of two");
  if (rsb_depth == 0) throw SimError("rsb_depth must be positive");
  if (store_forwarding) {
    throw SimError("store_forwarding=ON is not supported: speculative code modification is not modelled");
  }
}

// --- Memory -----------------------------------------------------------------

std::uint8_t Memory::read8(std::uint64_t a) const {
  auto it = pages_.find(a / kPage);
  return it == pages_.end() ? 0 : it->second[a % kPage];
}

void Memory::write8(std::uint64_t a, std::uint8_t v) {
  auto it = pages_.find(a / kPage);
  if (it == pages_.end()) {
    if (v == 0) return;
    it = pages_.emplace(a / kPage, std::array<std::uint8_t, kPage>{}).first;
  }
  it->second[a % kPage] = v;
}

std::uint64_t Memory::read64(std::uint64_t a) const {
  std::uint64_t v = 0;
  for (unsigned k = 0; k < 8; ++k) v |= std::uint64_t{read8(a + k)} << (8 * k);
  return v;
}

void Memory::write64(std::uint64_t a, std::uint64_t v) {
  for (unsigned k = 0; k < 8; ++k) write8(a + k, static_cast<std::uint8_t>(v >> (8 * k)));
}

bool operator==(const Memory& a, const Memory& b) {
  // Missing pages read as zero.
  const auto covered = [](const Memory& x, const Memory& y) {
    for (const auto& [p, bytes] : x.pages_) {
      auto it = y.pages_.find(p);
      if (it == y.pages_.end()) {
        if (std::any_of(bytes.begin(), bytes.end(), [](std::uint8_t v) { return v != 0; })) return false;
      } else if (it->second != bytes) {
        return false;
      }
    }
    return true;
  };
  return covered(a, b) && covered(b, a);
}

// --- Predictors and cache ---------------------------------------------------

Btb::Btb(std::uint32_t slots) : entries_(slots) {}

void Rsb::push(std::uint64_t ret) {
  if (stack_.size() == depth_) stack_.erase(stack_.begin());
  stack_.push_back(ret);
}

std::optional<std::uint64_t> Rsb::pop() {
  if (stack_.empty()) return std::nullopt;
  const auto v = stack_.back();
  stack_.pop_back();
  return v;
}

void CacheModel::touch(std::uint64_t a, std::uint64_t len) {
  const std::uint64_t last = line_of(a + len - 1);
  for (std::uint64_t l = line_of(a);; l += line_size_) {
    lines_.insert(l);
    if (l >= last) break;
  }
}

// --- Machine ----------------------------------------------------------------

Machine::Machine(const LayoutImage& img, const SimConfig& cfg)
    : img_(img),
      cfg_(cfg),
      btb_(cfg.btb_slots),
      rsb_(cfg.rsb_depth),
      bht_(cfg.bht_slots),
      cache_(cfg.line_size) {
  cfg_.validate();
  for (const auto& b : img.bundles) {
    for (isa::Word w : b.words) code_.push_back(isa::try_decode(w).instr);
  }
  spec_.rsb_checkpoint = Rsb(cfg.rsb_depth);
}

const Instruction* Machine::fetch(std::uint64_t pc) const {
  if (pc < img_.base_address || pc >= img_.end_address() || pc % 4 != 0) return nullptr;
  const auto& slot = code_[static_cast<std::size_t>((pc - img_.base_address) / 4)];
  return slot ? &*slot : nullptr;
}

void Machine::begin_speculation(std::uint64_t predicted, std::uint64_t resolved) {
  spec_.in_speculation = true;
  spec_.window_remaining = cfg_.spec_window;
  spec_.checkpoint = state_.regs;
  spec_.checkpoint.pc = resolved;
  spec_.rsb_checkpoint = rsb_;
  spec_.resolve_target = resolved;
  spec_.store_buffer.clear();
  spec_.episode = ++counters_.episodes;
  state_.regs.pc = predicted;
}

void Machine::squash() {
  state_.regs = spec_.checkpoint;
  rsb_ = spec_.rsb_checkpoint;
  spec_.store_buffer.clear();
  spec_.in_speculation = false;
  spec_.window_remaining = 0;
}

std::uint64_t Machine::load64(std::uint64_t a, bool spec) const {
  if (!spec) return state_.mem.read64(a);
  std::uint64_t v = 0;
  for (unsigned k = 0; k < 8; ++k) {
    auto it = spec_.store_buffer.find(a + k);
    const std::uint8_t byte = it != spec_.store_buffer.end() ? it->second : state_.mem.read8(a + k);
    v |= std::uint64_t{byte} << (8 * k);
  }
  return v;
}

void Machine::transfer(const Instruction& i, bool spec, std::uint64_t actual, std::optional<std::uint64_t> pred) {
  const std::uint64_t pc = state_.regs.pc;
  if (spec) {
    state_.regs.pc = pred.value_or(actual);
    return;
  }
  // Committed: train on the resolved outcome.
  if (i.op == Opcode::kB || i.op == Opcode::kBl || i.op == Opcode::kBctr || i.op == Opcode::kBctrl) {
    btb_.update(pc, actual);
  }
  if (pred && *pred != actual) {
    begin_speculation(*pred, actual);
  } else {
    state_.regs.pc = actual;
  }
}

void Machine::execute(const Instruction& i, bool spec) {
  auto& r = state_.regs;
  auto& g = r.gprs;
  const std::uint64_t pc = r.pc;
  const auto src = [&](Reg x) -> std::uint64_t {
    switch (x.kind) {
      case isa::RegKind::kLr: return r.lr;
      case isa::RegKind::kCtr: return r.ctr;
      case isa::RegKind::kGpr: break;
    }
    return g[x.index];
  };
  const auto sext = [](std::int16_t v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); };
  const auto disp = [&] { return pc + static_cast<std::uint64_t>(std::get<isa::Disp>(i.target).bytes); };

  const auto do_load = [&](std::uint64_t a) {
    if (!mem_ok(a)) {
      fault_ = true;
      trap_ = "load outside user space at " + std::to_string(a);
      return;
    }
    cache_.touch(a);
    g[i.rd.index] = load64(a, spec);
  };
  const auto do_store = [&](std::uint64_t a, std::uint64_t v) {
    if (!mem_ok(a)) {
      fault_ = true;
      trap_ = "store outside user space at " + std::to_string(a);
      return;
    }
    cache_.touch(a);
    if (spec) {
      for (unsigned k = 0; k < 8; ++k) spec_.store_buffer[a + k] = static_cast<std::uint8_t>(v >> (8 * k));
    } else {
      state_.mem.write64(a, v);
      stores_.emplace_back(a, v);
    }
  };

  switch (i.op) {
    case Opcode::kNop:
    case Opcode::kFence:
      r.pc = pc + 4;
      return;
    case Opcode::kHalt:
      state_.halted = true;
      return;
    case Opcode::kAdd: g[i.rd.index] = g[i.ra.index] + g[i.rb.index]; break;
    case Opcode::kSub: g[i.rd.index] = g[i.ra.index] - g[i.rb.index]; break;
    case Opcode::kAnd: g[i.rd.index] = g[i.ra.index] & g[i.rb.index]; break;
    case Opcode::kOr: g[i.rd.index] = g[i.ra.index] | g[i.rb.index]; break;
    case Opcode::kXor: g[i.rd.index] = g[i.ra.index] ^ g[i.rb.index]; break;
    case Opcode::kCmp: g[i.rd.index] = g[i.ra.index] < g[i.rb.index] ? 1 : 0; break;
    case Opcode::kAddi: g[i.rd.index] = g[i.ra.index] + sext(i.imm); break;
    case Opcode::kAndi: g[i.rd.index] = g[i.ra.index] & sext(i.imm); break;
    case Opcode::kOri: g[i.rd.index] = g[i.ra.index] | sext(i.imm); break;
    case Opcode::kShl: g[i.rd.index] = g[i.ra.index] << i.nbits; break;
    case Opcode::kShr: g[i.rd.index] = g[i.ra.index] >> i.nbits; break;
    case Opcode::kClrlo:
      g[i.rd.index] = i.nbits == 0 ? g[i.ra.index] : g[i.ra.index] & ~((std::uint64_t{1} << i.nbits) - 1);
      break;
    case Opcode::kClrhi:
      g[i.rd.index] = i.nbits == 0 ? g[i.ra.index] : g[i.ra.index] & (~std::uint64_t{0} >> i.nbits);
      break;
    case Opcode::kSetbit: g[i.rd.index] = g[i.ra.index] | (std::uint64_t{1} << i.nbits); break;
    case Opcode::kLdD: do_load(g[i.ra.index] + sext(i.imm)); break;
    case Opcode::kLdX: do_load(g[i.ra.index] + g[i.rb.index]); break;
    case Opcode::kStD: do_store(g[i.ra.index] + sext(i.imm), g[i.rd.index]); break;
    case Opcode::kStX: do_store(g[i.ra.index] + g[i.rb.index], g[i.rd.index]); break;
    case Opcode::kMtlr: r.lr = src(i.ra); break;
    case Opcode::kMtctr: r.ctr = src(i.ra); break;
    case Opcode::kMflr: g[i.rd.index] = src(i.ra); break;

    case Opcode::kB: {
      std::optional<std::uint64_t> pred;
      if (cfg_.direct_branch_btb) pred = btb_.predict(pc);
      transfer(i, spec, disp(), pred);
      return;
    }
    case Opcode::kBl: {
      std::optional<std::uint64_t> pred;
      if (cfg_.direct_branch_btb) pred = btb_.predict(pc);
      r.lr = pc + 4;
      rsb_.push(pc + 4);
      transfer(i, spec, disp(), pred);
      return;
    }
    case Opcode::kBc: {
      const bool taken = i.nonzero ? g[i.rd.index] != 0 : g[i.rd.index] == 0;
      const bool pred_taken = bht_.predict(pc);
      if (!spec) bht_.update(pc, taken);
      transfer(i, spec, taken ? disp() : pc + 4, pred_taken ? disp() : pc + 4);
      return;
    }
    case Opcode::kBctr:
      transfer(i, spec, r.ctr, btb_.predict(pc));
      return;
    case Opcode::kBctrl: {
      const std::uint64_t target = r.ctr;
      r.lr = pc + 4;
      rsb_.push(pc + 4);
      transfer(i, spec, target, btb_.predict(pc));
      return;
    }
    case Opcode::kBlr: {
      const auto pred = rsb_.pop();
      transfer(i, spec, r.lr, pred);
      return;
    }
  }
  r.pc = pc + 4;
}

StepStatus Machine::step() {
  if (spec_.in_speculation) {
    if (spec_.window_remaining == 0) {
      squash();
      return StepStatus::kRunning;
    }
    const std::uint64_t pc = state_.regs.pc;
    const Instruction* i = fetch(pc);
    if (i == nullptr) {
      squash();
      return StepStatus::kRunning;
    }
    if (cfg_.monitor_bundle_size != 0 && pc % cfg_.monitor_bundle_size != 0 && pc != last_fetch_ + 4) {
      ++counters_.monitor_violations;
      if (monitor_log_.size() < 64) monitor_log_.push_back(pc);
    }
    last_fetch_ = pc;
    --spec_.window_remaining;
    ++counters_.spec_instrs;
    if (on_exec) on_exec({pc, *i, true, spec_.episode});
    if (i->op == Opcode::kFence) {
      // Nothing past the fence issues before the mispredicted branch resolves.
      ++counters_.fence_stalls;
      squash();
      return StepStatus::kRunning;
    }
    if (i->op == Opcode::kHalt) {
      squash();
      return StepStatus::kRunning;
    }
    fault_ = false;
    const std::string saved = trap_;
    execute(*i, true);
    if (fault_) {
      trap_ = saved;
      fault_ = false;
      squash();
    }
    return StepStatus::kRunning;
  }

  if (state_.halted) return StepStatus::kHalted;
  const std::uint64_t pc = state_.regs.pc;
  if (pc == kHostReturn) return StepStatus::kReturned;
  const Instruction* i = fetch(pc);
  if (i == nullptr) {
    trap_ = "committed fetch outside the image or of an invalid word at pc " + std::to_string(pc);
    return StepStatus::kTrap;
  }
  last_fetch_ = pc;
  if (on_exec) on_exec({pc, *i, false, 0});
  fault_ = false;
  execute(*i, false);
  if (fault_) return StepStatus::kTrap;
  ++counters_.instret;
  if (state_.halted) return StepStatus::kHalted;
  return StepStatus::kRunning;
}

StepStatus Machine::run_until_stop(std::uint64_t limit) {
  const std::uint64_t stop_at = counters_.instret + limit;
  for (;;) {
    const StepStatus s = step();
    if (s != StepStatus::kRunning) return s;
    if (!spec_.in_speculation && counters_.instret >= stop_at) {
      // A pending return to the host is not a timeout.
      if (state_.regs.pc == kHostReturn) return StepStatus::kReturned;
      return StepStatus::kRunning;
    }
  }
}

StepStatus Machine::call(std::uint64_t target, std::uint64_t limit) {
  state_.halted = false;
  state_.regs.pc = target;
  state_.regs.lr = kHostReturn;
  return run_until_stop(limit);
}

}  // namespace venkman::specsim
