//===- verifier.hpp - Static checker for laid-out images --------*- C++ -*-===//
//
// Checks a LayoutImage against the bundle and masking invariants. The
// verifier trusts nothing the transformer computed: it decodes the raw
// words itself and treats every bundle base as a possible speculative entry,
// so protection must be present inside each bundle.
//
// Rules:
//   R0  every word decodes
//   R1  every bundle lies inside [code_lo, code_hi]
//   R2  every bundle base is aligned to the expected bundle size
//   R3  every B/BC/BL target is a bundle base inside the code segment
//   R4  MTLR, and MTCTR reaching a BCTR/BCTRL, are preceded in-bundle by
//       CLRLO src,src,log2(bundle); CLRHI src,src,19 with no redefinition
//   R5  every BL/BCTRL is its bundle's last instruction
//   R6  every load-carrying bundle has a FENCE before its first load
//   R7  no ST_X; every ST_D is preceded in-bundle by SETBIT base,base,45;
//       CLRHI base,base,18 with no redefinition
//   R8  no LD_X; every LD_D is preceded in-bundle by CLRHI base,base,1
//   R9  every symbol address is a bundle base
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "venkman/image.hpp"

namespace venkman::verifier {

/// What the image is expected to satisfy. Mirrors the transformer's
/// configuration without depending on it.
struct Policy {
  std::uint32_t bundle_size = 32;
  bool align = true;
  bool cfi = false;
  bool sfi_store = false;
  bool sfi_load = false;
  bool fence = false;
  /// Functions allowed to load LR without masking.
  std::vector<std::string> exempt_functions;
};

struct Violation {
  std::string rule;  // "R0".."R9"
  std::uint64_t addr = 0;  // bundle base address
  std::int64_t offset = 0;  // instruction slot within the bundle
  std::string msg;
};

struct RuleStatus {
  std::string rule;
  bool enabled = false;
};

struct VerifierReport {
  bool pass = true;
  std::vector<Violation> violations;
  std::vector<RuleStatus> checked_rules;

  std::size_t count(const std::string& rule) const;
  /// JSON: {verdict, violations:[{rule, addr, offset, msg}], rules:[{rule, enabled}]}
  std::string to_json() const;
};

VerifierReport verify(const LayoutImage& img, const Policy& policy, const AddressMap& m = {});

class LoadError : public Error {
 public:
  using Error::Error;
};

/// Parses a VKM1 container.
LayoutImage load_image(std::span<const std::uint8_t> bytes);
LayoutImage load_image_file(const std::string& path);

}  // namespace venkman::verifier
