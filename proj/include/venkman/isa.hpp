//===- isa.hpp - Toy fixed-width ISA ----------------------------*- C++ -*-===//
//
// Instruction model, binary encoding and register def/use queries for the
// 32-bit fixed-width toy ISA. Every instruction is one little-endian 4-byte
// word. Bit numbering is value-based: bit n carries value 2^n.
//
// Word layout (bit ranges inclusive):
//
//   [31:26] opcode
//   R3   ADD SUB AND OR XOR CMP LD_X ST_X   rd[25:21] ra[20:16] rb[15:11]
//   RI   ADDI ANDI ORI LD_D ST_D            rd[25:21] ra[20:16] imm[15:0]
//   RN   SHL SHR CLRLO CLRHI SETBIT         rd[25:21] ra[20:16] nbits[15:10]
//   MT   MTLR MTCTR                         src[20:16] src_kind[15:14]
//   MF   MFLR                               rd[25:21] src_kind[15:14]
//   J    B BL                               disp_words[25:0] (signed)
//   BC                                      rs[25:21] nz[20] disp_words[19:0]
//   N    BCTR BCTRL BLR FENCE NOP HALT      (no operands)
//
// All bits not named by a format are reserved and must be zero.
// src_kind: 0 = GPR, 1 = LR, 2 = CTR.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace venkman {

/// Base class of every error the toolchain reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace isa {

using Word = std::uint32_t;
using Addr = std::uint64_t;

constexpr std::size_t kInstrBytes = 4;
constexpr std::size_t kNumGprs = 32;

enum class Opcode : std::uint8_t {
  kNop = 0,
  kAdd,
  kSub,
  kAddi,
  kAnd,
  kOr,
  kXor,
  kAndi,
  kOri,
  kShl,
  kShr,
  kClrlo,
  kClrhi,
  kSetbit,
  kLdD,
  kLdX,
  kStD,
  kStX,
  kMtlr,
  kMtctr,
  kMflr,
  kB,
  kBc,
  kBl,
  kBctrl,
  kBctr,
  kBlr,
  kCmp,
  kFence,
  kHalt,
};

constexpr std::size_t kNumOpcodes = static_cast<std::size_t>(Opcode::kHalt) + 1;

enum class RegKind : std::uint8_t { kGpr = 0, kLr = 1, kCtr = 2 };

struct Reg {
  RegKind kind = RegKind::kGpr;
  std::uint8_t index = 0;  // only meaningful for GPRs

  static constexpr Reg gpr(unsigned n) { return Reg{RegKind::kGpr, static_cast<std::uint8_t>(n)}; }
  static constexpr Reg lr() { return Reg{RegKind::kLr, 0}; }
  static constexpr Reg ctr() { return Reg{RegKind::kCtr, 0}; }

  constexpr bool is_gpr() const { return kind == RegKind::kGpr; }
  friend constexpr bool operator==(const Reg&, const Reg&) = default;
};

std::string to_string(Reg r);

/// A symbolic branch target, resolved by layout.
struct Label {
  std::string name;
  friend bool operator==(const Label&, const Label&) = default;
};

/// A resolved pc-relative branch displacement in bytes.
struct Disp {
  std::int64_t bytes = 0;
  friend bool operator==(const Disp&, const Disp&) = default;
};

using Target = std::variant<std::monostate, Label, Disp>;

/// Operand roles per opcode:
///   rd      destination GPR (ALU, loads, MFLR); stored value for stores;
///           tested register for BC
///   ra      first source GPR; base register for memory ops; source of
///           MTLR/MTCTR (may be LR/CTR); source special of MFLR
///   rb      second source GPR; index register for X-Form memory ops
///   imm     16-bit signed immediate (ADDI/ANDI/ORI/LD_D/ST_D)
///   nbits   6-bit count (SHL/SHR/CLRLO/CLRHI/SETBIT)
///   nonzero BC condition: branch if rd != 0 (true) or rd == 0 (false)
///   target  B/BL/BC target
/// Fields not used by the opcode stay value-initialised, so defaulted
/// equality is structural equality.
struct Instruction {
  Opcode op = Opcode::kNop;
  Reg rd{};
  Reg ra{};
  Reg rb{};
  std::int16_t imm = 0;
  std::uint8_t nbits = 0;
  bool nonzero = false;
  Target target{};

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Constructors that keep unused fields canonical.
Instruction make_r3(Opcode op, Reg rd, Reg ra, Reg rb);
Instruction make_ri(Opcode op, Reg rd, Reg ra, std::int16_t imm);
Instruction make_rn(Opcode op, Reg rd, Reg ra, unsigned nbits);
Instruction make_move_to(Opcode op, Reg src);  // MTLR / MTCTR
Instruction make_mflr(Reg rd, Reg special);
Instruction make_jump(Opcode op, Target t);  // B / BL
Instruction make_bc(Reg rs, bool nonzero, Target t);
Instruction make_plain(Opcode op);

std::string_view mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view m);

enum class Format : std::uint8_t { kR3, kRI, kRN, kMT, kMF, kJ, kBC, kN };
Format format_of(Opcode op);

// Instruction classes.
bool is_load(Opcode op);
bool is_store(Opcode op);
bool is_call(Opcode op);          // BL, BCTRL
bool is_direct_branch(Opcode op);  // B, BC, BL
bool is_control_transfer(Opcode op);
bool is_unconditional_exit(Opcode op);  // B, BCTR, BLR, HALT: no fallthrough

/// Register defs/uses, including the implicit LR/CTR effects of branches.
std::vector<Reg> defs(const Instruction& i);
std::vector<Reg> uses(const Instruction& i);
bool writes(const Instruction& i, Reg r);
bool reads(const Instruction& i, Reg r);

class EncodeError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Encodes one instruction. Branch targets must already be Disp values that
/// are word-aligned and fit the format's displacement field.
Word encode(const Instruction& i);

/// Outcome of decoding one word; exactly one of `instr` / `error` is set.
struct Decoded {
  std::optional<Instruction> instr;
  std::string error;
  explicit operator bool() const { return instr.has_value(); }
};

/// Total over all 2^32 words; never throws.
Decoded try_decode(Word w);

/// Throwing variant of try_decode.
Instruction decode(Word w);

std::array<std::uint8_t, 4> to_bytes(Word w);
Word from_bytes(std::span<const std::uint8_t, 4> b);

/// Designated encoding of NOP.
constexpr Word kNopWord = 0x00000000u;

}  // namespace isa
}  // namespace venkman
