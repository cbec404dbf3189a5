//===- masks.cpp - Pointer mask value functions and sequences -------------===//

#include <bit>

#include "venkman/transform.hpp"

namespace venkman::transform {

using isa::Instruction;
using isa::Opcode;
using isa::Reg;

void HardeningConfig::validate() const {
  if (enable_align) {
    if (bundle_size_bytes < 16 || !std::has_single_bit(bundle_size_bytes)) {
      throw ConfigError("bundle size " + std::to_string(bundle_size_bytes) +
                        " must be a power of two >= 16");
    }
    if (bundle_size_bytes > 0x8000) {
      throw ConfigError("bundle size " + std::to_string(bundle_size_bytes) + " exceeds the 32 KB guard hole");
    }
  } else if (enable_cfi || enable_sfi_store || enable_sfi_load || enable_fence) {
    throw ConfigError("cfi, sfi and fence passes require bundle alignment");
  }
}

unsigned HardeningConfig::bundle_log2() const {
  return static_cast<unsigned>(std::countr_zero(unit_bytes()));
}

std::uint64_t mask_code_pointer_value(std::uint64_t p, const HardeningConfig& c, const AddressMap& m) {
  const std::uint64_t below_code_bit = (std::uint64_t{1} << m.code_bit) - 1;
  return p & below_code_bit & ~(std::uint64_t{c.unit_bytes()} - 1);
}

std::uint64_t mask_store_pointer_value(std::uint64_t p, const AddressMap& m) {
  return (p | (std::uint64_t{1} << m.code_bit)) & m.data_hi;
}

std::uint64_t mask_load_pointer_value(std::uint64_t p) { return p & ~(std::uint64_t{1} << 63); }

std::vector<Instruction> code_mask_sequence(Reg r, const HardeningConfig& c, const AddressMap& m) {
  return {isa::make_rn(Opcode::kClrlo, r, r, c.bundle_log2()),
          isa::make_rn(Opcode::kClrhi, r, r, 64 - m.code_bit)};
}

std::vector<Instruction> store_mask_sequence(Reg r, const AddressMap& m) {
  const unsigned user_bits = static_cast<unsigned>(std::bit_width(m.data_hi));
  return {isa::make_rn(Opcode::kSetbit, r, r, m.code_bit), isa::make_rn(Opcode::kClrhi, r, r, 64 - user_bits)};
}

std::vector<Instruction> load_mask_sequence(Reg r) { return {isa::make_rn(Opcode::kClrhi, r, r, 1)}; }

}  // namespace venkman::transform
