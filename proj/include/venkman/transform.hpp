//===- transform.hpp - Hardening passes and bundle layout -------*- C++ -*-===//
//
// Pipeline: CFI masking -> SFI store masking -> SFI load masking -> bundle
// planning -> fence insertion -> address assignment. Each pass rewrites a
// FunctionCFG; instructions a pass inserts are glued to the instruction they
// protect so the bundler keeps them in one bundle.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "venkman/cfg.hpp"
#include "venkman/image.hpp"

namespace venkman::transform {

/// Scratch register reserved for mask materialisation and aliasing SFI
/// sequences. Input programs must not use it.
inline constexpr isa::Reg kScratch = isa::Reg::gpr(31);

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TransformError : public Error {
 public:
  using Error::Error;
};

struct HardeningConfig {
  std::uint32_t bundle_size_bytes = 32;
  bool enable_align = true;  // off: untransformed baseline layout
  bool enable_cfi = false;
  bool enable_sfi_store = false;
  bool enable_sfi_load = false;
  bool enable_fence = false;

  /// Throws ConfigError unless the bundle size is a power of two >= 16
  /// (when aligning) and every enabled pass has alignment to rely on.
  void validate() const;
  /// Bytes per layout unit: the bundle size, or one instruction unaligned.
  std::uint32_t unit_bytes() const { return enable_align ? bundle_size_bytes : 4; }
  std::uint32_t capacity() const { return unit_bytes() / 4; }
  unsigned bundle_log2() const;

  friend bool operator==(const HardeningConfig&, const HardeningConfig&) = default;
};

struct TransformStats {
  std::uint64_t original_instrs = 0;
  std::uint64_t cfi_added = 0;
  std::uint64_t sfi_store_added = 0;
  std::uint64_t sfi_load_added = 0;
  std::uint64_t fence_added = 0;
  std::uint64_t nop_padding = 0;
  std::uint64_t total_instrs = 0;
  std::uint64_t code_bytes = 0;
  double ratio_vs_baseline = 1.0;
  // Informational: rewrites that went through the scratch register.
  std::uint64_t scratch_sequences = 0;

  std::uint64_t inserted() const {
    return cfi_added + sfi_store_added + sfi_load_added + fence_added + nop_padding;
  }
};

// Value semantics of the three mask sequences.

/// Clears the low log2(bundle) bits and every bit at or above the code bit:
/// the result is a bundle base below 2^45.
std::uint64_t mask_code_pointer_value(std::uint64_t p, const HardeningConfig& c, const AddressMap& m);
/// Sets the code bit and clears everything above the user space: the result
/// lies in the data region.
std::uint64_t mask_store_pointer_value(std::uint64_t p, const AddressMap& m);
/// Clears the most significant bit.
std::uint64_t mask_load_pointer_value(std::uint64_t p);

// Instruction sequences realising the masks on register `r`.
std::vector<isa::Instruction> code_mask_sequence(isa::Reg r, const HardeningConfig& c, const AddressMap& m);
std::vector<isa::Instruction> store_mask_sequence(isa::Reg r, const AddressMap& m);
std::vector<isa::Instruction> load_mask_sequence(isa::Reg r);

/// True when return-address masking is skipped for the function (`main` and
/// `.extern_called` functions are entered from uninstrumented callers).
bool is_masking_exempt(const cfg::FunctionCFG& fn);

cfg::FunctionCFG pass_cfi(cfg::FunctionCFG fn, const HardeningConfig& c, const AddressMap& m = {},
                          TransformStats* stats = nullptr);
cfg::FunctionCFG pass_sfi_store(cfg::FunctionCFG fn, const HardeningConfig& c, const AddressMap& m = {},
                                TransformStats* stats = nullptr);
cfg::FunctionCFG pass_sfi_load(cfg::FunctionCFG fn, const HardeningConfig& c, TransformStats* stats = nullptr);

enum class SlotOrigin : std::uint8_t { kCode, kPad, kFence };

struct PlannedBundle {
  std::vector<isa::Instruction> instrs;
  std::vector<SlotOrigin> origin;
  bool fence_reserved = false;  // one slot held back for pass_fence
};

struct FunctionPlan {
  std::string name;
  std::vector<PlannedBundle> bundles;
  std::map<std::string, std::size_t, std::less<>> label_bundle;
};

struct BundlePlan {
  HardeningConfig config;
  std::vector<FunctionPlan> functions;
};

/// Packs blocks into bundles: labelled blocks and function entries start a
/// bundle, glued groups never straddle a boundary, calls take the last slot,
/// and one slot is reserved in every load-carrying bundle when fences are on.
BundlePlan plan_bundles(const std::vector<cfg::FunctionCFG>& fns, const HardeningConfig& c);

/// Fills each reserved slot with a FENCE placed before the bundle's first load.
void pass_fence(BundlePlan& plan, const HardeningConfig& c, TransformStats* stats = nullptr);

/// Pads bundles, assigns addresses from code_lo and resolves branch targets.
LayoutImage finalize_layout(const BundlePlan& plan, const AddressMap& m, TransformStats* stats = nullptr);

/// plan_bundles + pass_fence (when enabled) + finalize_layout.
LayoutImage pass_bundle(const std::vector<cfg::FunctionCFG>& fns, const HardeningConfig& c,
                        const AddressMap& m = {}, TransformStats* stats = nullptr);

struct TransformOutput {
  LayoutImage image;
  HardeningConfig config;
  TransformStats stats;
  std::vector<std::string> exempt_functions;  // functions whose MTLR stays unmasked
};

/// Full pipeline over a parsed program.
TransformOutput transform_program(const AsmProgram& prog, const HardeningConfig& c, const AddressMap& m = {});

/// Serialises to the VKM1 container: magic "VKM1", u32 bundle_size,
/// u64 base_address, u32 bundle_count, u32 symbol_count, symbols as
/// (u32 name_len, name bytes, u64 address), then the bundle words.
/// All integers little-endian.
std::vector<std::uint8_t> emit_image(const LayoutImage& img);

}  // namespace venkman::transform
