//===- attack.cpp - Attack program and driver ------------------------------===//

#include "venkman/pipeline.hpp"

namespace venkman::pipeline {

std::string_view attack_program_source() {
  return R"(# Indirect call through a function pointer into a bounds-checked
# double load. r3 = x, r4 = target, r5 = array1, r6 = &array1_size,
# r10 = array2.
.func victim_function
  ld_d r7, r6, 0
  cmp r8, r3, r7
  bc r8, z, victim_done
  ld_x r9, r5, r3
  andi r9, r9, 255
  shl r9, r9, 9
  ld_x r9, r10, r9
victim_done:
  blr
.endfunc

.func benign_function
  blr
.endfunc

.func dispatcher
  mflr r0
  st_d r0, r1, -8
  addi r1, r1, -16
  mtctr r4
  bctrl
  addi r1, r1, 16
  ld_d r0, r1, -8
  mtlr r0
  blr
.endfunc
)";
}

AttackMode parse_attack_mode(std::string_view s) {
  if (s == "baseline") return AttackMode::kBaseline;
  if (s == "defended") return AttackMode::kDefended;
  throw Error("attack mode must be 'baseline' or 'defended', got '" + std::string(s) + "'");
}

AttackRun run_attack(AttackMode mode, const ScenarioConfig& cfg, std::string_view source, std::uint32_t bundle_size) {
  transform::HardeningConfig hc;
  if (mode == AttackMode::kDefended) {
    hc = defended_config(bundle_size);
  } else {
    hc.bundle_size_bytes = bundle_size;
    hc.enable_align = false;
  }
  const auto prog = parse_asm(source);
  const auto out = transform::transform_program(prog, hc);
  AttackRun r;
  r.verdict = verifier::verify(out.image, policy_for(out));
  r.bundle_size = out.image.bundle_size;
  specsim::SimConfig sim = cfg.sim;
  if (mode == AttackMode::kDefended) sim.monitor_bundle_size = out.image.bundle_size;
  r.result = specsim::spectre_v2_scenario(out.image, cfg.secret, sim);
  return r;
}

}  // namespace venkman::pipeline
