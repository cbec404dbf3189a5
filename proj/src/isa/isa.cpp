//===- isa.cpp - Instruction encoding and decoding ------------------------===//

#include "venkman/isa.hpp"

#include <algorithm>
#include <cstdio>

namespace venkman::isa {
namespace {

constexpr std::array<std::string_view, kNumOpcodes> kMnemonics = {
    "nop",   "add",   "sub",   "addi",  "and",   "or",     "xor",  "andi",
    "ori",   "shl",   "shr",   "clrlo", "clrhi", "setbit", "ld_d", "ld_x",
    "st_d",  "st_x",  "mtlr",  "mtctr", "mflr",  "b",      "bc",   "bl",
    "bctrl", "bctr",  "blr",   "cmp",   "fence", "halt",
};

constexpr Word field(Word w, unsigned lo, unsigned width) {
  return (w >> lo) & ((Word{1} << width) - 1);
}

constexpr Word put(Word v, unsigned lo, unsigned width) {
  return (v & ((Word{1} << width) - 1)) << lo;
}

std::int64_t sign_extend(Word v, unsigned width) {
  const Word sign = Word{1} << (width - 1);
  return static_cast<std::int64_t>(static_cast<std::int32_t>((v ^ sign) - sign));
}

// Mask of bits a format defines, including the opcode field.
Word used_bits(Format f) {
  constexpr Word kOp = 0xFC000000u;
  switch (f) {
    case Format::kR3: return kOp | 0x03FFF800u;
    case Format::kRI: return kOp | 0x03FFFFFFu;
    case Format::kRN: return kOp | 0x03FFFC00u;
    case Format::kMT: return kOp | 0x001FC000u;
    case Format::kMF: return kOp | 0x03E0C000u;
    case Format::kJ: return kOp | 0x03FFFFFFu;
    case Format::kBC: return kOp | 0x03FFFFFFu;
    case Format::kN: return kOp;
  }
  return kOp;
}

std::string hex_word(Word w) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", w);
  return buf;
}

Word gpr_field(Reg r, const char* what, Opcode op) {
  if (!r.is_gpr() || r.index >= kNumGprs) {
    throw EncodeError(std::string(mnemonic(op)) + ": " + what + " must be a GPR r0..r31");
  }
  return r.index;
}

Word disp_field(const Instruction& i, unsigned width) {
  const auto* d = std::get_if<Disp>(&i.target);
  if (d == nullptr) {
    if (const auto* l = std::get_if<Label>(&i.target)) {
      throw EncodeError(std::string(mnemonic(i.op)) + ": unresolved symbolic target '" + l->name + "'");
    }
    throw EncodeError(std::string(mnemonic(i.op)) + ": missing branch target");
  }
  if (d->bytes % static_cast<std::int64_t>(kInstrBytes) != 0) {
    throw EncodeError(std::string(mnemonic(i.op)) + ": displacement not a multiple of 4");
  }
  const std::int64_t words = d->bytes / static_cast<std::int64_t>(kInstrBytes);
  const std::int64_t lim = std::int64_t{1} << (width - 1);
  if (words < -lim || words >= lim) {
    throw EncodeError(std::string(mnemonic(i.op)) + ": displacement " + std::to_string(d->bytes) +
                      " out of range");
  }
  return put(static_cast<Word>(words), 0, width);
}

}  // namespace

std::string to_string(Reg r) {
  switch (r.kind) {
    case RegKind::kLr: return "lr";
    case RegKind::kCtr: return "ctr";
    case RegKind::kGpr: break;
  }
  return "r" + std::to_string(r.index);
}

Instruction make_r3(Opcode op, Reg rd, Reg ra, Reg rb) {
  Instruction i;
  i.op = op;
  i.rd = rd;
  i.ra = ra;
  i.rb = rb;
  return i;
}

Instruction make_ri(Opcode op, Reg rd, Reg ra, std::int16_t imm) {
  Instruction i;
  i.op = op;
  i.rd = rd;
  i.ra = ra;
  i.imm = imm;
  return i;
}

Instruction make_rn(Opcode op, Reg rd, Reg ra, unsigned nbits) {
  Instruction i;
  i.op = op;
  i.rd = rd;
  i.ra = ra;
  i.nbits = static_cast<std::uint8_t>(nbits);
  return i;
}

Instruction make_move_to(Opcode op, Reg src) {
  Instruction i;
  i.op = op;
  i.ra = src;
  return i;
}

Instruction make_mflr(Reg rd, Reg special) {
  Instruction i;
  i.op = Opcode::kMflr;
  i.rd = rd;
  i.ra = special;
  return i;
}

Instruction make_jump(Opcode op, Target t) {
  Instruction i;
  i.op = op;
  i.target = std::move(t);
  return i;
}

Instruction make_bc(Reg rs, bool nonzero, Target t) {
  Instruction i;
  i.op = Opcode::kBc;
  i.rd = rs;
  i.nonzero = nonzero;
  i.target = std::move(t);
  return i;
}

Instruction make_plain(Opcode op) {
  Instruction i;
  i.op = op;
  return i;
}

std::string_view mnemonic(Opcode op) { return kMnemonics[static_cast<std::size_t>(op)]; }

std::optional<Opcode> opcode_from_mnemonic(std::string_view m) {
  auto it = std::find(kMnemonics.begin(), kMnemonics.end(), m);
  if (it == kMnemonics.end()) return std::nullopt;
  return static_cast<Opcode>(it - kMnemonics.begin());
}

Format format_of(Opcode op) {
  switch (op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kCmp:
    case Opcode::kLdX:
    case Opcode::kStX:
      return Format::kR3;
    case Opcode::kAddi:
    case Opcode::kAndi:
    case Opcode::kOri:
    case Opcode::kLdD:
    case Opcode::kStD:
      return Format::kRI;
    case Opcode::kShl:
    case Opcode::kShr:
    case Opcode::kClrlo:
    case Opcode::kClrhi:
    case Opcode::kSetbit:
      return Format::kRN;
    case Opcode::kMtlr:
    case Opcode::kMtctr:
      return Format::kMT;
    case Opcode::kMflr:
      return Format::kMF;
    case Opcode::kB:
    case Opcode::kBl:
      return Format::kJ;
    case Opcode::kBc:
      return Format::kBC;
    case Opcode::kBctrl:
    case Opcode::kBctr:
    case Opcode::kBlr:
    case Opcode::kFence:
    case Opcode::kNop:
    case Opcode::kHalt:
      return Format::kN;
  }
  return Format::kN;
}

bool is_load(Opcode op) { return op == Opcode::kLdD || op == Opcode::kLdX; }
bool is_store(Opcode op) { return op == Opcode::kStD || op == Opcode::kStX; }
bool is_call(Opcode op) { return op == Opcode::kBl || op == Opcode::kBctrl; }

bool is_direct_branch(Opcode op) {
  return op == Opcode::kB || op == Opcode::kBc || op == Opcode::kBl;
}

bool is_control_transfer(Opcode op) {
  switch (op) {
    case Opcode::kB:
    case Opcode::kBc:
    case Opcode::kBl:
    case Opcode::kBctrl:
    case Opcode::kBctr:
    case Opcode::kBlr:
    case Opcode::kHalt:
      return true;
    default:
      return false;
  }
}

bool is_unconditional_exit(Opcode op) {
  return op == Opcode::kB || op == Opcode::kBctr || op == Opcode::kBlr || op == Opcode::kHalt;
}

std::vector<Reg> defs(const Instruction& i) {
  switch (i.op) {
    case Opcode::kAdd:
    case Opcode::kSub:
    case Opcode::kAnd:
    case Opcode::kOr:
    case Opcode::kXor:
    case Opcode::kCmp:
    case Opcode::kAddi:
    case Opcode::kAndi:
    case Opcode::kOri:
    case Opcode::kShl:
    case Opcode::kShr:
    case Opcode::kClrlo:
    case Opcode::kClrhi:
    case Opcode::kSetbit:
    case Opcode::kLdD:
    case Opcode::kLdX:
    case Opcode::kMflr:
      return {i.rd};
    case Opcode::kMtlr:
    case Opcode::kBl:
    case Opcode::kBctrl:
      return {Reg::lr()};
    case Opcode::kMtctr:
      return {Reg::ctr()};
    default:
      return {};
  }
}

std::vector<Reg> uses(const Instruction& i) {
  switch (format_of(i.op)) {
    case Format::kR3:
      if (i.op == Opcode::kStX) return {i.rd, i.ra, i.rb};
      return {i.ra, i.rb};
    case Format::kRI:
      if (i.op == Opcode::kStD) return {i.rd, i.ra};
      return {i.ra};
    case Format::kRN:
      return {i.ra};
    case Format::kMT:
    case Format::kMF:
      return {i.ra};
    case Format::kBC:
      return {i.rd};
    case Format::kJ:
      return {};
    case Format::kN:
      if (i.op == Opcode::kBctr || i.op == Opcode::kBctrl) return {Reg::ctr()};
      if (i.op == Opcode::kBlr) return {Reg::lr()};
      return {};
  }
  return {};
}

bool writes(const Instruction& i, Reg r) {
  const auto d = defs(i);
  return std::find(d.begin(), d.end(), r) != d.end();
}

bool reads(const Instruction& i, Reg r) {
  const auto u = uses(i);
  return std::find(u.begin(), u.end(), r) != u.end();
}

Word encode(const Instruction& i) {
  const auto op = static_cast<Word>(i.op);
  if (op >= kNumOpcodes) throw EncodeError("invalid opcode value " + std::to_string(op));
  Word w = put(op, 26, 6);
  switch (format_of(i.op)) {
    case Format::kR3:
      w |= put(gpr_field(i.rd, "rd", i.op), 21, 5);
      w |= put(gpr_field(i.ra, "ra", i.op), 16, 5);
      w |= put(gpr_field(i.rb, "rb", i.op), 11, 5);
      break;
    case Format::kRI:
      w |= put(gpr_field(i.rd, "rd", i.op), 21, 5);
      w |= put(gpr_field(i.ra, "ra", i.op), 16, 5);
      w |= put(static_cast<std::uint16_t>(i.imm), 0, 16);
      break;
    case Format::kRN:
      if (i.nbits > 63) throw EncodeError(std::string(mnemonic(i.op)) + ": bit count exceeds 63");
      w |= put(gpr_field(i.rd, "rd", i.op), 21, 5);
      w |= put(gpr_field(i.ra, "ra", i.op), 16, 5);
      w |= put(i.nbits, 10, 6);
      break;
    case Format::kMT:
      w |= put(i.ra.is_gpr() ? gpr_field(i.ra, "source", i.op) : 0u, 16, 5);
      w |= put(static_cast<Word>(i.ra.kind), 14, 2);
      break;
    case Format::kMF:
      if (i.ra.is_gpr()) throw EncodeError("mflr: source must be lr or ctr");
      w |= put(gpr_field(i.rd, "rd", i.op), 21, 5);
      w |= put(static_cast<Word>(i.ra.kind), 14, 2);
      break;
    case Format::kJ:
      w |= disp_field(i, 26);
      break;
    case Format::kBC:
      w |= put(gpr_field(i.rd, "rs", i.op), 21, 5);
      w |= put(i.nonzero ? 1u : 0u, 20, 1);
      w |= disp_field(i, 20);
      break;
    case Format::kN:
      break;
  }
  return w;
}

Decoded try_decode(Word w) {
  Decoded out;
  const Word op = field(w, 26, 6);
  if (op >= kNumOpcodes) {
    out.error = "invalid encoding " + hex_word(w) + ": undefined opcode bits " + std::to_string(op);
    return out;
  }
  const auto opc = static_cast<Opcode>(op);
  const Format fmt = format_of(opc);
  if ((w & ~used_bits(fmt)) != 0) {
    out.error = "invalid encoding " + hex_word(w) + ": reserved bits set for " + std::string(mnemonic(opc));
    return out;
  }
  const auto g = [&](unsigned lo) { return Reg::gpr(field(w, lo, 5)); };
  switch (fmt) {
    case Format::kR3:
      out.instr = make_r3(opc, g(21), g(16), g(11));
      break;
    case Format::kRI:
      out.instr = make_ri(opc, g(21), g(16), static_cast<std::int16_t>(field(w, 0, 16)));
      break;
    case Format::kRN:
      out.instr = make_rn(opc, g(21), g(16), field(w, 10, 6));
      break;
    case Format::kMT: {
      const Word kind = field(w, 14, 2);
      const Word idx = field(w, 16, 5);
      if (kind == 3 || (kind != 0 && idx != 0)) {
        out.error = "invalid encoding " + hex_word(w) + ": bad special-register source";
        return out;
      }
      out.instr = make_move_to(opc, kind == 0 ? Reg::gpr(idx) : Reg{static_cast<RegKind>(kind), 0});
      break;
    }
    case Format::kMF: {
      const Word kind = field(w, 14, 2);
      if (kind != 1 && kind != 2) {
        out.error = "invalid encoding " + hex_word(w) + ": mflr source must be lr or ctr";
        return out;
      }
      out.instr = make_mflr(g(21), Reg{static_cast<RegKind>(kind), 0});
      break;
    }
    case Format::kJ:
      out.instr = make_jump(opc, Disp{sign_extend(field(w, 0, 26), 26) * 4});
      break;
    case Format::kBC:
      out.instr = make_bc(g(21), field(w, 20, 1) != 0, Disp{sign_extend(field(w, 0, 20), 20) * 4});
      break;
    case Format::kN:
      out.instr = make_plain(opc);
      break;
  }
  return out;
}

Instruction decode(Word w) {
  auto d = try_decode(w);
  if (!d) throw DecodeError(d.error);
  return *d.instr;
}

std::array<std::uint8_t, 4> to_bytes(Word w) {
  return {static_cast<std::uint8_t>(w), static_cast<std::uint8_t>(w >> 8),
          static_cast<std::uint8_t>(w >> 16), static_cast<std::uint8_t>(w >> 24)};
}

Word from_bytes(std::span<const std::uint8_t, 4> b) {
  return Word{b[0]} | (Word{b[1]} << 8) | (Word{b[2]} << 16) | (Word{b[3]} << 24);
}

}  // namespace venkman::isa
