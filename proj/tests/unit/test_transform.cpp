#include <bit>

#include "doctest.h"
#include "support.hpp"

using namespace venkman;
using namespace venkman::isa;
using transform::HardeningConfig;

namespace {

std::vector<Instruction> pass_output(std::string_view src, const HardeningConfig& c, std::string_view fn_name = "f") {
  const auto prog = parse_asm(src);
  for (auto fn : cfg::build_cfg(prog)) {
    if (fn.name != fn_name) continue;
    fn = transform::pass_cfi(std::move(fn), c);
    fn = transform::pass_sfi_store(std::move(fn), c);
    fn = transform::pass_sfi_load(std::move(fn), c);
    return fn.linear();
  }
  FAIL("function not found");
  return {};
}

std::vector<Instruction> asm_list(std::string_view body) {
  return parse_asm(std::string(".func f\n") + std::string(body) + "\n.endfunc\n").functions[0].instrs;
}

// Independent check of the bundle invariants on decoded words.
std::vector<std::string> bundle_problems(const LayoutImage& img, const HardeningConfig& c,
                                         const std::vector<std::string>& exempt) {
  std::vector<std::string> out;
  // Owning function of an address: the last symbol at or below it.
  const auto owner = [&](std::uint64_t a) {
    std::string name;
    std::uint64_t best = 0;
    for (const auto& s : img.symbols) {
      if (s.address <= a && s.address >= best) {
        best = s.address;
        name = s.name;
      }
    }
    return name;
  };
  const std::uint32_t bs = c.enable_align ? c.bundle_size_bytes : 4;
  const unsigned lg = static_cast<unsigned>(std::countr_zero(bs));
  if (img.bundle_size != bs) out.push_back("bundle size");
  for (const auto& b : img.bundles) {
    if (b.base_addr % bs != 0) out.push_back("misaligned bundle");
    if (b.words.size() * 4 != bs) out.push_back("bundle length");
    std::vector<Instruction> in;
    for (auto w : b.words) in.push_back(decode(w));
    bool fence_seen = false;
    bool load_seen = false;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const auto& i = in[k];
      if (is_call(i.op) && k + 1 != in.size()) out.push_back("call not last");
      if (i.op == Opcode::kFence) fence_seen = true;
      if (is_load(i.op) && !load_seen) {
        load_seen = true;
        if (c.enable_fence && !fence_seen) out.push_back("load before fence");
      }
      const auto pair_before = [&](Reg r, Opcode a, unsigned na, Opcode b2, unsigned nb) {
        return k >= 2 && in[k - 2] == make_rn(a, r, r, na) && in[k - 1] == make_rn(b2, r, r, nb);
      };
      if (c.enable_cfi && i.op == Opcode::kMtlr && !pair_before(i.ra, Opcode::kClrlo, lg, Opcode::kClrhi, 19) &&
          std::find(exempt.begin(), exempt.end(), owner(b.base_addr)) == exempt.end()) {
        out.push_back("unmasked mtlr");
      }
      if (c.enable_sfi_store && i.op == Opcode::kStD &&
          !pair_before(i.ra, Opcode::kSetbit, 45, Opcode::kClrhi, 18)) {
        out.push_back("unmasked store");
      }
      if (c.enable_sfi_store && i.op == Opcode::kStX) out.push_back("x-form store");
      if (c.enable_sfi_load && i.op == Opcode::kLdD && !(k >= 1 && in[k - 1] == make_rn(Opcode::kClrhi, i.ra, i.ra, 1))) {
        out.push_back("unmasked load");
      }
      if (c.enable_sfi_load && i.op == Opcode::kLdX) out.push_back("x-form load");
    }
  }
  for (const auto& s : img.symbols) {
    if ((s.address - img.base_address) % bs != 0) out.push_back("symbol off bundle base");
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  HardeningConfig c;
  c.bundle_size_bytes = 24;
  CHECK_THROWS_AS(c.validate(), transform::ConfigError);
  c.bundle_size_bytes = 8;
  CHECK_THROWS_AS(c.validate(), transform::ConfigError);
  c.bundle_size_bytes = 0x10000;
  CHECK_THROWS_AS(c.validate(), transform::ConfigError);
  c = vt::baseline();
  c.enable_cfi = true;
  CHECK_THROWS_AS(c.validate(), transform::ConfigError);
  CHECK_NOTHROW(vt::aligned(true, true, true, true).validate());
  CHECK(vt::aligned().capacity() == 8);
  CHECK(vt::aligned().bundle_log2() == 5);
}

TEST_CASE("cfi masks a return-address load") {
  const auto out = pass_output(".func f\n  mtlr r1\n  blr\n.endfunc\n", vt::aligned(true));
  CHECK(out == asm_list("  clrlo r1, r1, 5\n  clrhi r1, r1, 19\n  mtlr r1\n  blr"));
}

TEST_CASE("cfi leaves a ctr loop counter alone") {
  const std::string src = ".func f\n  mtctr r3\n  mfctr r4\n  blr\n.endfunc\n";
  CHECK(pass_output(src, vt::aligned(true)) == parse_asm(src).functions[0].instrs);
}

TEST_CASE("cfi masks ctr feeding an indirect call") {
  const auto out = pass_output(".func f\n  mtctr r4\n  bctrl\n  blr\n.endfunc\n", vt::aligned(true, false, false, false, 64));
  CHECK(out == asm_list("  clrlo r4, r4, 6\n  clrhi r4, r4, 19\n  mtctr r4\n  bctrl\n  blr"));
}

TEST_CASE("cfi copies special-register sources through the scratch register") {
  const auto out = pass_output(".func f\n  mtlr ctr\n  blr\n.endfunc\n", vt::aligned(true));
  CHECK(out == asm_list("  mflr r31, ctr\n  clrlo r31, r31, 5\n  clrhi r31, r31, 19\n  mtlr r31\n  blr"));
}

TEST_CASE("cfi exempts main and externally called functions from return masking") {
  const std::string src = ".func main\n  mtlr r0\n  blr\n.endfunc\n.func g\n.extern_called\n  mtlr r0\n  blr\n.endfunc\n";
  CHECK(pass_output(src, vt::aligned(true), "main").size() == 2);
  CHECK(pass_output(src, vt::aligned(true), "g").size() == 2);
  const auto out = vt::build(src, vt::aligned(true));
  CHECK(out.exempt_functions == std::vector<std::string>{"main", "g"});
}

TEST_CASE("programs without indirect flow are unchanged by cfi") {
  for (const char* name : {"sum_array", "bubble_sort", "memcpy", "checksum", "bitops"}) {
    const auto progs = vt::corpus();
    const auto it = std::find_if(progs.begin(), progs.end(), [&](const auto& p) { return p.name == name; });
    REQUIRE(it != progs.end());
    CHECK(vt::build(it->source, vt::aligned(true)).image == vt::build(it->source, vt::aligned()).image);
  }
}

TEST_CASE("store sandboxing, d-form") {
  CHECK(pass_output(".func f\n  st_d r3, r1, 8\n  blr\n.endfunc\n", vt::aligned(false, true)) ==
        asm_list("  setbit r1, r1, 45\n  clrhi r1, r1, 18\n  st_d r3, r1, 8\n  blr"));
}

TEST_CASE("store sandboxing, x-form") {
  CHECK(pass_output(".func f\n  st_x r3, r1, r2\n  blr\n.endfunc\n", vt::aligned(false, true)) ==
        asm_list("  add r1, r1, r2\n  setbit r1, r1, 45\n  clrhi r1, r1, 18\n  st_d r3, r1, 0\n  sub r1, r1, r2\n  blr"));
}

TEST_CASE("store sandboxing, aliased x-form uses the scratch register") {
  CHECK(pass_output(".func f\n  st_x r1, r1, r2\n  blr\n.endfunc\n", vt::aligned(false, true)) ==
        asm_list("  add r31, r1, r2\n  setbit r31, r31, 45\n  clrhi r31, r31, 18\n  st_d r1, r31, 0\n  blr"));
  const auto out = vt::build(".func f\n  st_x r1, r1, r2\n  blr\n.endfunc\n", vt::aligned(false, true));
  CHECK(out.stats.scratch_sequences == 1);
}

TEST_CASE("load sandboxing") {
  CHECK(pass_output(".func f\n  ld_d r3, r1, 8\n  blr\n.endfunc\n", vt::aligned(false, false, true)) ==
        asm_list("  clrhi r1, r1, 1\n  ld_d r3, r1, 8\n  blr"));
  CHECK(pass_output(".func f\n  ld_x r3, r1, r2\n  blr\n.endfunc\n", vt::aligned(false, false, true)) ==
        asm_list("  add r1, r1, r2\n  clrhi r1, r1, 1\n  ld_d r3, r1, 0\n  sub r1, r1, r2\n  blr"));
  CHECK(pass_output(".func f\n  ld_x r2, r1, r2\n  blr\n.endfunc\n", vt::aligned(false, false, true)) ==
        asm_list("  add r31, r1, r2\n  clrhi r31, r31, 1\n  ld_d r2, r31, 0\n  blr"));
  const std::string no_loads = ".func f\n  addi r3, r3, 1\n  blr\n.endfunc\n";
  CHECK(pass_output(no_loads, vt::aligned(false, false, true)) == parse_asm(no_loads).functions[0].instrs);
}

TEST_CASE("fence goes before the first load of a bundle") {
  const auto out = vt::build(".func f\n  addi r3, r3, 1\n  ld_d r4, r5, 0\n  ld_d r6, r5, 8\n  blr\n.endfunc\n",
                             vt::aligned(false, false, false, true));
  REQUIRE(out.image.bundles.size() == 1);
  const auto d = vt::decoded(out.image);
  CHECK(d[0].second.op == Opcode::kAddi);
  CHECK(d[1].second.op == Opcode::kFence);
  CHECK(d[2].second.op == Opcode::kLdD);
  CHECK(d[3].second.op == Opcode::kLdD);
  CHECK(out.stats.fence_added == 1);
  const auto none = vt::build(".func f\n  addi r3, r3, 1\n  blr\n.endfunc\n", vt::aligned(false, false, false, true));
  CHECK(none.stats.fence_added == 0);
}

TEST_CASE("straight-line block split across bundles") {
  std::string src = ".func f\n";
  for (int k = 0; k < 9; ++k) src += "  addi r3, r3, 1\n";
  src += "  halt\n.endfunc\n";
  const auto out = vt::build(src, vt::aligned());
  REQUIRE(out.image.bundles.size() == 2);
  CHECK(out.stats.nop_padding == 6);
  const auto d = vt::decoded(out.image);
  for (std::size_t k = 10; k < 16; ++k) CHECK(d[k].second.op == Opcode::kNop);
}

TEST_CASE("calls take the last slot") {
  const auto out = vt::build(".func g\n  blr\n.endfunc\n.func f\n  addi r3, r3, 1\n  addi r3, r3, 1\n  addi r3, r3, 1\n"
                             "  bl g\n  halt\n.endfunc\n",
                             vt::aligned());
  const auto base = out.image.symbol("f")->address;
  const auto d = vt::decoded(out.image);
  for (const auto& [a, i] : d) {
    if (a >= base && a < base + 32) {
      const auto slot = (a - base) / 4;
      if (slot < 3) CHECK(i.op == Opcode::kAddi);
      if (slot >= 3 && slot < 7) CHECK(i.op == Opcode::kNop);
      if (slot == 7) CHECK(i.op == Opcode::kBl);
    }
    if (a == base + 32) CHECK(i.op == Opcode::kHalt);
  }
}

TEST_CASE("oversized atomic group is a hard error") {
  auto fns = cfg::build_cfg(parse_asm(".func f\n  addi r3, r3, 1\n  addi r3, r3, 1\n  addi r3, r3, 1\n"
                                      "  addi r3, r3, 1\n  addi r3, r3, 1\n  blr\n.endfunc\n"));
  auto& b = fns[0].blocks[0];
  std::fill(b.glue.begin(), b.glue.begin() + 4, 1);  // five glued instructions
  CHECK_THROWS_AS(transform::plan_bundles(fns, vt::aligned(false, false, false, false, 16)), transform::TransformError);
  CHECK_NOTHROW(transform::plan_bundles(fns, vt::aligned(false, false, false, false, 32)));
}

TEST_CASE("image past the end of the code segment is a hard error") {
  AddressMap m;
  m.code_hi = m.code_lo + 31;
  const auto prog = parse_asm(".func f\n  bl f\n  blr\n.endfunc\n");
  CHECK_THROWS_AS(transform::transform_program(prog, vt::aligned(), m), transform::TransformError);
}

TEST_CASE("reserved register is rejected") {
  CHECK_THROWS_AS(vt::build(".func f\n  addi r31, r31, 1\n  blr\n.endfunc\n", vt::aligned()), transform::TransformError);
}

TEST_CASE("emit is deterministic and round-trips") {
  for (const auto& p : vt::corpus()) {
    for (const auto& preset : pipeline::standard_presets()) {
      const auto out = vt::build(p.source, preset.config);
      const auto bytes = transform::emit_image(out.image);
      CHECK(bytes == transform::emit_image(out.image));
      CHECK(verifier::load_image(bytes) == out.image);
    }
  }
  const auto empty = transform::transform_program(parse_asm(""), vt::aligned());
  CHECK(empty.image.bundles.empty());
  CHECK(transform::emit_image(empty.image).size() == 24);
}

TEST_CASE("bundle invariants hold on every corpus program and configuration") {
  std::size_t bundles = 0;
  for (const auto& p : vt::corpus()) {
    for (const auto& preset : pipeline::standard_presets()) {
      const auto out = vt::build(p.source, preset.config);
      INFO(p.name << " / " << preset.name);
      CHECK(bundle_problems(out.image, preset.config, out.exempt_functions).empty());
      bundles += out.image.bundles.size();
    }
  }
  CHECK(bundles > 0);
}

TEST_CASE("fence count equals load-carrying bundles") {
  for (const auto& p : vt::corpus()) {
    const auto out = vt::build(p.source, vt::aligned(true, true, false, true));
    std::uint64_t loaded = 0;
    std::uint64_t fences = 0;
    for (const auto& b : out.image.bundles) {
      bool has = false;
      for (auto w : b.words) {
        const auto i = decode(w);
        has = has || is_load(i.op);
        fences += i.op == Opcode::kFence;
      }
      loaded += has;
    }
    CHECK(loaded == out.stats.fence_added);
    CHECK(fences == out.stats.fence_added);
  }
}

TEST_CASE("stats conservation and ratios") {
  for (const auto& p : vt::corpus()) {
    const auto base = vt::build(p.source, vt::baseline());
    CHECK(base.stats.ratio_vs_baseline == doctest::Approx(1.0));
    CHECK(base.stats.nop_padding == 0);
    for (const auto& preset : pipeline::standard_presets()) {
      const auto out = vt::build(p.source, preset.config);
      const auto& s = out.stats;
      INFO(p.name << " / " << preset.name);
      CHECK(s.original_instrs + s.cfi_added + s.sfi_store_added + s.sfi_load_added + s.fence_added + s.nop_padding ==
            s.total_instrs);
      CHECK(s.code_bytes == out.image.code_bytes());
      CHECK(s.ratio_vs_baseline >= 1.0);
      CHECK(s.ratio_vs_baseline == doctest::Approx(double(s.code_bytes) / double(base.image.code_bytes())));
      if (!preset.config.enable_cfi) CHECK(s.cfi_added == 0);
      if (!preset.config.enable_fence) CHECK(s.fence_added == 0);
    }
  }
}
