//===- presets.cpp - Named configurations and verifier policies ------------===//

#include "venkman/pipeline.hpp"

namespace venkman::pipeline {

using transform::HardeningConfig;

std::vector<Preset> standard_presets(std::uint32_t bundle_size) {
  HardeningConfig c;
  c.bundle_size_bytes = bundle_size;
  c.enable_align = false;
  std::vector<Preset> out;
  out.push_back({"baseline", c});
  c.enable_align = true;
  out.push_back({"align", c});
  c.enable_cfi = true;
  out.push_back({"align+cfi", c});
  c.enable_sfi_store = true;
  out.push_back({"+sfi-store", c});
  c.enable_fence = true;
  out.push_back({"+fence", c});
  c.enable_sfi_load = true;
  out.push_back({"+sfi-load", c});
  return out;
}

const Preset& find_preset(const std::vector<Preset>& presets, std::string_view name) {
  for (const auto& p : presets) {
    if (p.name == name) return p;
  }
  throw transform::ConfigError("unknown configuration '" + std::string(name) + "'");
}

HardeningConfig defended_config(std::uint32_t bundle_size) {
  HardeningConfig c;
  c.bundle_size_bytes = bundle_size;
  c.enable_cfi = true;
  c.enable_sfi_store = true;
  c.enable_fence = true;
  return c;
}

verifier::Policy policy_for(const HardeningConfig& c, std::vector<std::string> exempt) {
  verifier::Policy p;
  p.bundle_size = c.bundle_size_bytes;
  p.align = c.enable_align;
  p.cfi = c.enable_cfi;
  p.sfi_store = c.enable_sfi_store;
  p.sfi_load = c.enable_sfi_load;
  p.fence = c.enable_fence;
  p.exempt_functions = std::move(exempt);
  return p;
}

verifier::Policy policy_for(const transform::TransformOutput& out) {
  return policy_for(out.config, out.exempt_functions);
}

bool stats_conserved(const transform::TransformStats& s, const LayoutImage& img) {
  return s.original_instrs + s.inserted() == s.total_instrs && s.total_instrs * isa::kInstrBytes == s.code_bytes &&
         s.code_bytes == img.code_bytes();
}

}  // namespace venkman::pipeline
