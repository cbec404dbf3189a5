//===- cfg.cpp - CFG construction and CTR-use scanning --------------------===//

#include "venkman/cfg.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace venkman::cfg {

using isa::Instruction;
using isa::Opcode;
using isa::Reg;

std::string_view to_string(TerminatorKind k) {
  switch (k) {
    case TerminatorKind::kFallthrough: return "fallthrough";
    case TerminatorKind::kDirectBranch: return "direct-branch";
    case TerminatorKind::kConditional: return "conditional";
    case TerminatorKind::kIndirectJump: return "indirect-jump";
    case TerminatorKind::kCall: return "call";
    case TerminatorKind::kReturn: return "return";
    case TerminatorKind::kHalt: return "halt";
  }
  return "?";
}

void BasicBlock::insert(std::size_t at, const std::vector<Instruction>& seq, bool bind) {
  instrs.insert(instrs.begin() + static_cast<std::ptrdiff_t>(at), seq.begin(), seq.end());
  glue.insert(glue.begin() + static_cast<std::ptrdiff_t>(at), seq.size(), bind ? 1 : 0);
}

std::size_t FunctionCFG::instruction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.instrs.size();
  return n;
}

std::vector<Instruction> FunctionCFG::linear() const {
  std::vector<Instruction> out;
  for (const auto& b : blocks) out.insert(out.end(), b.instrs.begin(), b.instrs.end());
  return out;
}

namespace {

TerminatorKind kind_of(const Instruction& last) {
  switch (last.op) {
    case Opcode::kB: return TerminatorKind::kDirectBranch;
    case Opcode::kBc: return TerminatorKind::kConditional;
    case Opcode::kBctr: return TerminatorKind::kIndirectJump;
    case Opcode::kBl:
    case Opcode::kBctrl: return TerminatorKind::kCall;
    case Opcode::kBlr: return TerminatorKind::kReturn;
    case Opcode::kHalt: return TerminatorKind::kHalt;
    default: return TerminatorKind::kFallthrough;
  }
}

}  // namespace

FunctionCFG build_function_cfg(const AsmFunction& fn, const AsmProgram& prog) {
  FunctionCFG g;
  g.name = fn.name;
  g.extern_called = fn.extern_called;
  const std::size_t n = fn.instrs.size();
  if (n == 0) throw CfgError("function '" + fn.name + "' is empty and falls off its end");

  std::set<std::size_t> leaders{0};
  for (const auto& l : fn.labels) {
    if (l.index >= n) throw CfgError("label '" + l.name + "' in '" + fn.name + "' marks no instruction");
    leaders.insert(l.index);
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (isa::is_control_transfer(fn.instrs[k].op)) leaders.insert(k + 1);
  }

  std::map<std::size_t, BlockId> block_at;
  std::vector<std::size_t> starts(leaders.begin(), leaders.end());
  for (std::size_t b = 0; b < starts.size(); ++b) {
    BasicBlock bb;
    bb.id = b;
    const std::size_t lo = starts[b];
    const std::size_t hi = b + 1 < starts.size() ? starts[b + 1] : n;
    bb.instrs.assign(fn.instrs.begin() + static_cast<std::ptrdiff_t>(lo),
                     fn.instrs.begin() + static_cast<std::ptrdiff_t>(hi));
    bb.glue.assign(bb.instrs.size(), 0);
    for (const auto& l : fn.labels) {
      if (l.index == lo) bb.labels.push_back(l.name);
    }
    bb.kind = kind_of(bb.instrs.back());
    block_at[lo] = b;
    g.blocks.push_back(std::move(bb));
  }

  std::map<std::string, BlockId, std::less<>> label_block;
  for (const auto& l : fn.labels) label_block[l.name] = block_at.at(l.index);

  const auto resolve = [&](const Instruction& i) -> std::optional<BlockId> {
    const auto* lab = std::get_if<isa::Label>(&i.target);
    if (lab == nullptr) {
      throw CfgError("function '" + fn.name + "': branch '" + std::string(isa::mnemonic(i.op)) +
                     "' has no symbolic target");
    }
    if (auto it = label_block.find(lab->name); it != label_block.end()) return it->second;
    if (lab->name == fn.name) return g.entry;
    if (prog.find(lab->name) != nullptr) return std::nullopt;  // leaves the function
    throw CfgError("function '" + fn.name + "': branch to '" + lab->name + "' which is inside no function");
  };

  std::vector<BlockId> indirect_targets{g.entry};
  for (const auto& b : g.blocks) {
    if (!b.labels.empty() && b.id != g.entry) indirect_targets.push_back(b.id);
  }

  for (auto& b : g.blocks) {
    const Instruction& last = b.instrs.back();
    const bool has_next = b.id + 1 < g.blocks.size();
    switch (b.kind) {
      case TerminatorKind::kFallthrough:
      case TerminatorKind::kCall:
        if (last.op == Opcode::kBl) resolve(last);
        if (!has_next) {
          throw CfgError("function '" + fn.name + "' falls off its end without halt or blr");
        }
        b.succs.push_back(b.id + 1);
        break;
      case TerminatorKind::kDirectBranch:
        if (auto t = resolve(last)) b.succs.push_back(*t);
        break;
      case TerminatorKind::kConditional:
        if (!has_next) throw CfgError("function '" + fn.name + "' falls off its end after bc");
        if (auto t = resolve(last)) b.succs.push_back(*t);
        if (std::find(b.succs.begin(), b.succs.end(), b.id + 1) == b.succs.end()) b.succs.push_back(b.id + 1);
        break;
      case TerminatorKind::kIndirectJump:
        b.succs = indirect_targets;
        break;
      case TerminatorKind::kReturn:
      case TerminatorKind::kHalt:
        break;
    }
  }
  return g;
}

std::vector<FunctionCFG> build_cfg(const AsmProgram& prog) {
  std::vector<FunctionCFG> out;
  out.reserve(prog.functions.size());
  for (const auto& f : prog.functions) out.push_back(build_function_cfg(f, prog));
  return out;
}

bool next_ctr_use_is_branch(const FunctionCFG& fn, BlockId block, std::size_t at) {
  const Reg ctr = Reg::ctr();
  std::set<BlockId> seen;
  std::vector<std::pair<BlockId, std::size_t>> work{{block, at + 1}};
  bool first = true;
  while (!work.empty()) {
    auto [b, k] = work.back();
    work.pop_back();
    // The starting block is re-entered from its top if a loop leads back to it.
    if (!first && !seen.insert(b).second) continue;
    first = false;
    const auto& bb = fn.blocks.at(b);
    bool stopped = false;
    for (; k < bb.instrs.size(); ++k) {
      const Instruction& i = bb.instrs[k];
      if (isa::reads(i, ctr)) {
        if (i.op == Opcode::kBctr || i.op == Opcode::kBctrl) return true;
        stopped = true;
        break;
      }
      if (isa::writes(i, ctr)) {
        stopped = true;
        break;
      }
    }
    if (stopped) continue;
    for (BlockId s : bb.succs) work.emplace_back(s, 0);
  }
  return false;
}

std::string to_dot(const std::vector<FunctionCFG>& fns) {
  std::ostringstream os;
  os << "digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n";
  for (const auto& f : fns) {
    os << "  subgraph \"cluster_" << f.name << "\" {\n    label=\"" << f.name << "\";\n";
    for (const auto& b : f.blocks) {
      os << "    \"" << f.name << "." << b.id << "\" [label=\"";
      for (const auto& l : b.labels) os << l << ":\\l";
      for (const auto& i : b.instrs) os << "  " << print_instruction(i) << "\\l";
      os << "\"];\n";
    }
    for (const auto& b : f.blocks) {
      for (BlockId s : b.succs) {
        os << "    \"" << f.name << "." << b.id << "\" -> \"" << f.name << "." << s << "\";\n";
      }
    }
    os << "  }\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace venkman::cfg
