//===- image.hpp - Laid-out code images and the address map -----*- C++ -*-===//
//
// Shared vocabulary of the transformer, verifier and simulator. A
// LayoutImage is exactly what the VKM1 container stores: a contiguous run of
// fixed-size bundles starting at `base_address`, plus a function symbol
// table. Instructions stay as raw words so consumers decode them
// independently.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "venkman/isa.hpp"

namespace venkman {

/// User virtual address space split: code in the lower half of [0, 2^46),
/// data in the upper half, with 32 KB guard holes at both ends of the code
/// segment.
struct AddressMap {
  std::uint64_t code_lo = 0x8000;
  std::uint64_t code_hi = 0x1FFF'FFFF'7FFF;  // inclusive
  std::uint64_t data_lo = std::uint64_t{1} << 45;
  std::uint64_t data_hi = (std::uint64_t{1} << 46) - 1;  // inclusive
  unsigned code_bit = 45;
  unsigned user_msb = 63;

  bool in_code(std::uint64_t a) const { return a >= code_lo && a <= code_hi; }
  bool in_data(std::uint64_t a) const { return a >= data_lo && a <= data_hi; }
  friend bool operator==(const AddressMap&, const AddressMap&) = default;
};

struct Symbol {
  std::string name;
  std::uint64_t address = 0;
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

struct Bundle {
  std::uint64_t base_addr = 0;
  std::vector<isa::Word> words;
  friend bool operator==(const Bundle&, const Bundle&) = default;
};

struct LayoutImage {
  std::uint32_t bundle_size = 32;  // bytes
  std::uint64_t base_address = 0;
  std::vector<Symbol> symbols;  // in emission order
  std::vector<Bundle> bundles;  // address-ordered, contiguous

  std::uint64_t code_bytes() const { return static_cast<std::uint64_t>(bundles.size()) * bundle_size; }
  std::uint64_t end_address() const { return base_address + code_bytes(); }
  const Symbol* symbol(const std::string& name) const {
    for (const auto& s : symbols) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
  friend bool operator==(const LayoutImage&, const LayoutImage&) = default;
};

/// Container magic.
inline constexpr char kImageMagic[4] = {'V', 'K', 'M', '1'};

}  // namespace venkman
