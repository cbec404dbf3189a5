#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace venkman;
using namespace venkman::isa;

TEST_CASE("nop encodes to the designated word") {
  CHECK(encode(make_plain(Opcode::kNop)) == kNopWord);
  CHECK(decode(kNopWord) == make_plain(Opcode::kNop));
}

TEST_CASE("clrlo round trip") {
  const auto i = make_rn(Opcode::kClrlo, Reg::gpr(5), Reg::gpr(5), 5);
  CHECK(decode(encode(i)) == i);
}

TEST_CASE("words are four little-endian bytes") {
  const Word w = 0xA1B2C3D4;
  const auto b = to_bytes(w);
  CHECK(b[0] == 0xD4);
  CHECK(b[3] == 0xA1);
  CHECK(from_bytes(b) == w);
}

TEST_CASE("random instructions of every opcode round trip") {
  std::mt19937_64 rng(7);
  std::vector<int> seen(kNumOpcodes, 0);
  for (int n = 0; n < 200000; ++n) {
    const auto i = vt::random_instruction(rng);
    ++seen[static_cast<std::size_t>(i.op)];
    const Word w = encode(i);
    const auto d = try_decode(w);
    REQUIRE(d.instr.has_value());
    CHECK(*d.instr == i);
  }
  for (int c : seen) CHECK(c > 0);
}

TEST_CASE("encode rejects unencodable operands") {
  CHECK_THROWS_AS(encode(make_jump(Opcode::kB, Disp{6})), EncodeError);
  CHECK_THROWS_AS(encode(make_bc(Reg::gpr(1), false, Disp{std::int64_t{1} << 22})), EncodeError);
  CHECK_THROWS_AS(encode(make_jump(Opcode::kB, Label{"x"})), EncodeError);
  CHECK_THROWS_AS(encode(make_rn(Opcode::kShl, Reg::gpr(1), Reg::gpr(1), 64)), EncodeError);
  CHECK_THROWS_AS(encode(make_r3(Opcode::kAdd, Reg::gpr(1), Reg::lr(), Reg::gpr(2))), EncodeError);
}

TEST_CASE("undefined opcode field is an invalid encoding") {
  const Word all_ones = 0xFFFFFFFF;
  CHECK_FALSE(try_decode(all_ones));
  CHECK_FALSE(try_decode(all_ones).error.empty());
  CHECK_THROWS_AS(decode(all_ones), DecodeError);
  for (Word op = kNumOpcodes; op < 64; ++op) CHECK_FALSE(try_decode(op << 26));
}

TEST_CASE("decode is total and canonical over random words") {
  std::mt19937 rng(11);
  std::size_t valid = 0;
  for (int n = 0; n < 1000000; ++n) {
    const Word w = rng();
    Decoded d;
    REQUIRE_NOTHROW(d = try_decode(w));
    if (d) {
      ++valid;
      CHECK(encode(*d.instr) == w);
    }
  }
  CHECK(valid > 0);
}

TEST_CASE("opcode classification") {
  CHECK(is_load(Opcode::kLdD));
  CHECK(is_load(Opcode::kLdX));
  CHECK_FALSE(is_load(Opcode::kStD));
  CHECK(is_store(Opcode::kStX));
  CHECK(is_call(Opcode::kBl));
  CHECK(is_call(Opcode::kBctrl));
  CHECK_FALSE(is_call(Opcode::kBctr));
  CHECK(is_direct_branch(Opcode::kBc));
  CHECK_FALSE(is_direct_branch(Opcode::kBlr));
  CHECK(is_unconditional_exit(Opcode::kHalt));
  CHECK_FALSE(is_unconditional_exit(Opcode::kBl));
  for (std::size_t k = 0; k < kNumOpcodes; ++k) {
    const auto op = static_cast<Opcode>(k);
    CHECK(opcode_from_mnemonic(mnemonic(op)) == op);
  }
}

TEST_CASE("register effects of calls and moves") {
  const auto bctrl = make_plain(Opcode::kBctrl);
  CHECK(reads(bctrl, Reg::ctr()));
  CHECK(writes(bctrl, Reg::lr()));
  const auto mfctr = make_mflr(Reg::gpr(4), Reg::ctr());
  CHECK(reads(mfctr, Reg::ctr()));
  CHECK(writes(mfctr, Reg::gpr(4)));
  CHECK_FALSE(reads(mfctr, Reg::lr()));
  const auto st = make_ri(Opcode::kStD, Reg::gpr(3), Reg::gpr(1), 8);
  CHECK(reads(st, Reg::gpr(3)));
  CHECK(reads(st, Reg::gpr(1)));
  CHECK(defs(st).empty());
}
