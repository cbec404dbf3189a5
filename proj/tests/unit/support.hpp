// Shared helpers for the unit tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "venkman/pipeline.hpp"

namespace vt {

using namespace venkman;

inline std::vector<pipeline::CorpusProgram> corpus() { return pipeline::load_corpus(VENKMAN_CORPUS_DIR); }

inline transform::TransformOutput build(std::string_view src, const transform::HardeningConfig& c) {
  return transform::transform_program(parse_asm(src), c);
}

inline transform::HardeningConfig aligned(bool cfi = false, bool st = false, bool ld = false, bool fence = false,
                                          std::uint32_t bs = 32) {
  transform::HardeningConfig c;
  c.bundle_size_bytes = bs;
  c.enable_cfi = cfi;
  c.enable_sfi_store = st;
  c.enable_sfi_load = ld;
  c.enable_fence = fence;
  return c;
}

inline transform::HardeningConfig baseline() {
  transform::HardeningConfig c;
  c.enable_align = false;
  return c;
}

// Every instruction in the image, with its address.
inline std::vector<std::pair<std::uint64_t, isa::Instruction>> decoded(const LayoutImage& img) {
  std::vector<std::pair<std::uint64_t, isa::Instruction>> out;
  for (const auto& b : img.bundles) {
    for (std::size_t k = 0; k < b.words.size(); ++k) out.emplace_back(b.base_addr + 4 * k, isa::decode(b.words[k]));
  }
  return out;
}

// Uniform random valid instruction, built field by field from the format.
inline isa::Instruction random_instruction(std::mt19937_64& rng) {
  using namespace isa;
  const auto op = static_cast<Opcode>(rng() % kNumOpcodes);
  const auto gpr = [&] { return Reg::gpr(static_cast<unsigned>(rng() % 32)); };
  const auto imm = [&] { return static_cast<std::int16_t>(static_cast<std::uint16_t>(rng())); };
  const auto disp = [&](unsigned bits) {
    const std::int64_t span = std::int64_t{1} << (bits - 1);
    return Disp{(static_cast<std::int64_t>(rng() % (2 * span)) - span) * 4};
  };
  switch (format_of(op)) {
    case Format::kR3: return make_r3(op, gpr(), gpr(), gpr());
    case Format::kRI: return make_ri(op, gpr(), gpr(), imm());
    case Format::kRN: return make_rn(op, gpr(), gpr(), static_cast<unsigned>(rng() % 64));
    case Format::kMT: {
      const unsigned k = rng() % 3;
      return make_move_to(op, k == 0 ? gpr() : k == 1 ? Reg::lr() : Reg::ctr());
    }
    case Format::kMF: return make_mflr(gpr(), rng() % 2 ? Reg::lr() : Reg::ctr());
    case Format::kJ: return make_jump(op, disp(26));
    case Format::kBC: return make_bc(gpr(), rng() % 2 != 0, disp(20));
    case Format::kN: return make_plain(op);
  }
  return make_plain(Opcode::kNop);
}

}  // namespace vt
