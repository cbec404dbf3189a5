//===- asm.hpp - Assembly text format ---------------------------*- C++ -*-===//
//
// Textual syntax:
//
//   # comment to end of line
//   .entry main               optional; defaults to `main`, else first function
//   .func name
//   .extern_called            function is entered from uninstrumented code
//   label:
//       add   r3, r4, r5
//       addi  r3, r3, -8
//       ld_d  r3, r1, 8       dst, base, imm
//       st_x  r3, r1, r2      value, base, index
//       clrlo r5, r5, 5       dst, src, nbits
//       mtctr r5 | mtctr lr   mflr r3 | mfctr r3
//       bc    r3, nz, label   branch if r3 != 0 (`z`: if r3 == 0)
//       b     label | b .+32  symbolic or resolved pc-relative target
//       li    r3, 0x200000001000   pseudo: expands to xor/ori/shl
//   .endfunc
//
//===----------------------------------------------------------------------===//
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "venkman/isa.hpp"

namespace venkman {

struct LabelDef {
  std::string name;
  std::size_t index = 0;  // instruction index the label precedes
  friend bool operator==(const LabelDef&, const LabelDef&) = default;
};

struct AsmFunction {
  std::string name;
  bool extern_called = false;
  std::vector<isa::Instruction> instrs;
  std::vector<LabelDef> labels;
  std::vector<int> lines;  // source line of each instruction, 0 if synthesised

  friend bool operator==(const AsmFunction& a, const AsmFunction& b) {
    return a.name == b.name && a.extern_called == b.extern_called && a.instrs == b.instrs &&
           a.labels == b.labels;
  }
};

struct AsmProgram {
  std::vector<AsmFunction> functions;
  std::string entry;

  const AsmFunction* find(std::string_view name) const;
  std::size_t instruction_count() const;
  friend bool operator==(const AsmProgram&, const AsmProgram&) = default;
};

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& msg);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Parses assembly text. Labels must resolve to a label of the same function
/// or to a function name.
AsmProgram parse_asm(std::string_view text);

/// Parses a single instruction line (no labels, no pseudo-ops).
isa::Instruction parse_instruction(std::string_view line);

std::string print_instruction(const isa::Instruction& i);
std::string print_asm(const AsmProgram& prog);

/// Expansion used by the `li` pseudo-instruction.
std::vector<isa::Instruction> load_immediate(isa::Reg rd, std::uint64_t value);

}  // namespace venkman
