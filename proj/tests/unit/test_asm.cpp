#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace venkman;
using namespace venkman::isa;

TEST_CASE("d-form load") {
  CHECK(parse_instruction("ld_d r3, r1, 8") == make_ri(Opcode::kLdD, Reg::gpr(3), Reg::gpr(1), 8));
}

TEST_CASE("no-operand opcode") { CHECK(parse_instruction("nop") == make_plain(Opcode::kNop)); }

TEST_CASE("immediate out of range") {
  CHECK_THROWS_AS(parse_instruction("addi r1, r1, 70000"), ParseError);
  CHECK_NOTHROW(parse_instruction("addi r1, r1, -32768"));
  CHECK_THROWS_AS(parse_instruction("addi r1, r1, 32768"), ParseError);
}

TEST_CASE("malformed lines") {
  CHECK_THROWS_AS(parse_instruction("frob r1"), ParseError);
  CHECK_THROWS_AS(parse_instruction("add r1, r2"), ParseError);
  CHECK_THROWS_AS(parse_instruction("add r1, r2, r32"), ParseError);
  CHECK_THROWS_AS(parse_instruction("shl r1, r2, 64"), ParseError);
  CHECK_THROWS_AS(parse_instruction("bc r1, maybe, .+8"), ParseError);
  CHECK_THROWS_AS(parse_instruction("nop r1"), ParseError);
}

TEST_CASE("print then parse is the identity") {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 50000; ++n) {
    const auto i = vt::random_instruction(rng);
    CHECK(parse_instruction(print_instruction(i)) == i);
  }
}

TEST_CASE("program structure") {
  const auto p = parse_asm(R"(
# comment
.func helper
  addi r3, r3, 1   # trailing comment
  blr
.endfunc
.func main
.extern_called
top:
  bl helper
  bc r3, nz, top
  halt
.endfunc
)");
  REQUIRE(p.functions.size() == 2);
  CHECK(p.entry == "main");
  CHECK(p.functions[1].extern_called);
  CHECK(p.functions[1].labels.size() == 1);
  CHECK(p.functions[1].labels[0].index == 0);
  CHECK(p.instruction_count() == 5);
  CHECK(parse_asm(print_asm(p)) == p);
}

TEST_CASE("structural errors carry a line number") {
  try {
    parse_asm(".func f\n  b nowhere\n.endfunc\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_asm("addi r1, r1, 1\n"), ParseError);
  CHECK_THROWS_AS(parse_asm(".func f\n  blr\n"), ParseError);
  CHECK_THROWS_AS(parse_asm(".func f\nx:\nx:\n  blr\n.endfunc\n"), ParseError);
}

TEST_CASE("li expands to a sequence computing the value") {
  // Oracle: evaluate the expansion with plain integer arithmetic.
  std::mt19937_64 rng(5);
  std::vector<std::uint64_t> values{0, 1, 0x7FFF, 0x8000, 0xFFFF'FFFF'FFFF'FFFF, std::uint64_t{1} << 44};
  for (int n = 0; n < 2000; ++n) values.push_back(rng());
  for (std::uint64_t v : values) {
    std::uint64_t r = 0xDEAD;
    for (const auto& i : load_immediate(Reg::gpr(9), v)) {
      const auto sx = static_cast<std::uint64_t>(static_cast<std::int64_t>(i.imm));
      switch (i.op) {
        case Opcode::kXor: r = 0; break;
        case Opcode::kAddi: r += sx; break;
        case Opcode::kOri: r |= sx; break;
        case Opcode::kShl: r <<= i.nbits; break;
        default: FAIL("unexpected opcode in li expansion");
      }
    }
    CHECK(r == v);
  }
}
