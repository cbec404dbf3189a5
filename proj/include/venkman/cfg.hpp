//===- cfg.hpp - Per-function control-flow graphs ---------------*- C++ -*-===//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venkman/asm.hpp"

namespace venkman::cfg {

enum class TerminatorKind : std::uint8_t {
  kFallthrough,
  kDirectBranch,
  kConditional,
  kIndirectJump,
  kCall,
  kReturn,
  kHalt,
};

std::string_view to_string(TerminatorKind k);

using BlockId = std::size_t;

struct BasicBlock {
  BlockId id = 0;
  std::vector<std::string> labels;  // labels naming the block's first instruction
  std::vector<isa::Instruction> instrs;
  // glue[k] != 0 binds instrs[k] to instrs[k + 1]: the bundler never places
  // a bundle boundary between them. Kept the same length as instrs.
  std::vector<std::uint8_t> glue;
  std::vector<BlockId> succs;
  TerminatorKind kind = TerminatorKind::kFallthrough;

  /// Inserts `seq` before position `at`. When `bind` is set, every inserted
  /// instruction is glued to its successor, so the sequence travels with the
  /// instruction originally at `at`.
  void insert(std::size_t at, const std::vector<isa::Instruction>& seq, bool bind);
};

struct FunctionCFG {
  std::string name;
  bool extern_called = false;
  std::vector<BasicBlock> blocks;  // layout order
  BlockId entry = 0;

  std::size_t instruction_count() const;
  /// Concatenation of all blocks in layout order.
  std::vector<isa::Instruction> linear() const;
};

class CfgError : public Error {
 public:
  using Error::Error;
};

/// Builds one CFG per function. Leaders are the function entry, every label
/// target and every instruction following a control transfer.
std::vector<FunctionCFG> build_cfg(const AsmProgram& prog);
FunctionCFG build_function_cfg(const AsmFunction& fn, const AsmProgram& prog);

/// Decides whether a CTR write must be treated as producing a branch target.
/// Instruction `at` of `block` writes CTR. Walks forward through the CFG
/// (calls fall through to their return point) and stops each path at the
/// first CTR read or redefinition. Returns true iff some path reaches a
/// BCTR/BCTRL as its first CTR use.
bool next_ctr_use_is_branch(const FunctionCFG& fn, BlockId block, std::size_t at);

/// Graphviz rendering of the CFGs.
std::string to_dot(const std::vector<FunctionCFG>& fns);

}  // namespace venkman::cfg
