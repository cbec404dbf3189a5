//===- passes.cpp - CFI and SFI instrumentation passes --------------------===//

#include <algorithm>

#include "venkman/transform.hpp"

namespace venkman::transform {

using cfg::BasicBlock;
using cfg::FunctionCFG;
using isa::Instruction;
using isa::Opcode;
using isa::Reg;

namespace {

void bump(TransformStats* s, std::uint64_t TransformStats::*field, std::uint64_t n) {
  if (s != nullptr) s->*field += n;
}

// Applies `rewrite` to every instruction of every block; `rewrite` returns
// the number of slots it inserted before (and including) the original
// position so the scan can skip them.
template <typename F>
void for_each_instr(FunctionCFG& fn, F&& rewrite) {
  for (auto& b : fn.blocks) {
    for (std::size_t k = 0; k < b.instrs.size(); ++k) k += rewrite(b, k);
  }
}

}  // namespace

bool is_masking_exempt(const FunctionCFG& fn) { return fn.extern_called || fn.name == "main"; }

FunctionCFG pass_cfi(FunctionCFG fn, const HardeningConfig& c, const AddressMap& m, TransformStats* stats) {
  if (!c.enable_cfi) return fn;

  // Decide on the unmodified graph; inserting instructions shifts indices.
  std::vector<std::vector<std::size_t>> sites(fn.blocks.size());
  const bool exempt = is_masking_exempt(fn);
  for (const auto& b : fn.blocks) {
    for (std::size_t k = 0; k < b.instrs.size(); ++k) {
      const Opcode op = b.instrs[k].op;
      if ((op == Opcode::kMtlr && !exempt) ||
          (op == Opcode::kMtctr && cfg::next_ctr_use_is_branch(fn, b.id, k))) {
        sites[b.id].push_back(k);
      }
    }
  }

  for (auto& b : fn.blocks) {
    auto& ks = sites[b.id];
    for (auto it = ks.rbegin(); it != ks.rend(); ++it) {
      const std::size_t k = *it;
      Instruction& move = b.instrs[k];
      std::vector<Instruction> seq;
      if (!move.ra.is_gpr()) {
        // No GPR holds the value; copy it out so it can be masked.
        seq.push_back(isa::make_mflr(kScratch, move.ra));
        move.ra = kScratch;
        bump(stats, &TransformStats::scratch_sequences, 1);
      }
      const auto mask = code_mask_sequence(move.ra, c, m);
      seq.insert(seq.end(), mask.begin(), mask.end());
      b.insert(k, seq, true);
      bump(stats, &TransformStats::cfi_added, seq.size());
    }
  }
  return fn;
}

FunctionCFG pass_sfi_store(FunctionCFG fn, const HardeningConfig& c, const AddressMap& m, TransformStats* stats) {
  if (!c.enable_sfi_store) return fn;
  for_each_instr(fn, [&](BasicBlock& b, std::size_t k) -> std::size_t {
    const Instruction st = b.instrs[k];
    if (st.op == Opcode::kStD) {
      auto seq = store_mask_sequence(st.ra, m);
      b.insert(k, seq, true);
      bump(stats, &TransformStats::sfi_store_added, seq.size());
      return seq.size();
    }
    if (st.op != Opcode::kStX) return 0;

    const Reg value = st.rd;
    const Reg base = st.ra;
    const Reg index = st.rb;
    // Summing into the base clobbers the stored value or the index when they
    // alias it; the sum then goes to the scratch register instead.
    const bool alias = value == base || index == base;
    const Reg addr = alias ? kScratch : base;
    std::vector<Instruction> seq{isa::make_r3(Opcode::kAdd, addr, base, index)};
    const auto mask = store_mask_sequence(addr, m);
    seq.insert(seq.end(), mask.begin(), mask.end());
    b.instrs[k] = isa::make_ri(Opcode::kStD, value, addr, 0);
    b.insert(k, seq, true);
    std::size_t added = seq.size();
    if (!alias) {
      b.insert(k + seq.size() + 1, {isa::make_r3(Opcode::kSub, base, base, index)}, false);
      ++added;
    } else {
      bump(stats, &TransformStats::scratch_sequences, 1);
    }
    bump(stats, &TransformStats::sfi_store_added, added);
    return added;
  });
  return fn;
}

FunctionCFG pass_sfi_load(FunctionCFG fn, const HardeningConfig& c, TransformStats* stats) {
  if (!c.enable_sfi_load) return fn;
  for_each_instr(fn, [&](BasicBlock& b, std::size_t k) -> std::size_t {
    const Instruction ld = b.instrs[k];
    if (ld.op == Opcode::kLdD) {
      auto seq = load_mask_sequence(ld.ra);
      b.insert(k, seq, true);
      bump(stats, &TransformStats::sfi_load_added, seq.size());
      return seq.size();
    }
    if (ld.op != Opcode::kLdX) return 0;

    const Reg dst = ld.rd;
    const Reg base = ld.ra;
    const Reg index = ld.rb;
    // The restoring subtract needs base and index intact after the load.
    const bool alias = dst == base || dst == index || base == index;
    const Reg addr = alias ? kScratch : base;
    std::vector<Instruction> seq{isa::make_r3(Opcode::kAdd, addr, base, index)};
    const auto mask = load_mask_sequence(addr);
    seq.insert(seq.end(), mask.begin(), mask.end());
    b.instrs[k] = isa::make_ri(Opcode::kLdD, dst, addr, 0);
    b.insert(k, seq, true);
    std::size_t added = seq.size();
    if (!alias) {
      b.insert(k + seq.size() + 1, {isa::make_r3(Opcode::kSub, base, base, index)}, false);
      ++added;
    } else {
      bump(stats, &TransformStats::scratch_sequences, 1);
    }
    bump(stats, &TransformStats::sfi_load_added, added);
    return added;
  });
  return fn;
}

}  // namespace venkman::transform
