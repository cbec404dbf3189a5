//===- asm.cpp - Assembly parser and printer ------------------------------===//

#include "venkman/asm.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <limits>
#include <set>
#include <sstream>

namespace venkman {

using isa::Instruction;
using isa::Opcode;
using isa::Reg;

ParseError::ParseError(int line, int column, const std::string& msg)
    : Error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
      line_(line),
      column_(column) {}

const AsmFunction* AsmProgram::find(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::size_t AsmProgram::instruction_count() const {
  std::size_t n = 0;
  for (const auto& f : functions) n += f.instrs.size();
  return n;
}

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

struct Token {
  std::string text;
  int column = 1;  // 1-based
};

// Cursor over one source line.
class LineLexer {
 public:
  LineLexer(std::string_view line, int lineno) : line_(line), lineno_(lineno) {}

  [[noreturn]] void fail(int column, const std::string& msg) const {
    throw ParseError(lineno_, column, msg);
  }

  void skip_ws() {
    while (pos_ < line_.size() && std::isspace(static_cast<unsigned char>(line_[pos_]))) ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= line_.size();
  }

  int column() const { return static_cast<int>(pos_) + 1; }

  // Operand token: everything up to the next comma or end of line.
  Token operand() {
    skip_ws();
    Token t{{}, column()};
    while (pos_ < line_.size() && line_[pos_] != ',') t.text.push_back(line_[pos_++]);
    while (!t.text.empty() && std::isspace(static_cast<unsigned char>(t.text.back()))) t.text.pop_back();
    if (t.text.empty()) fail(t.column, "expected operand");
    return t;
  }

  void comma() {
    skip_ws();
    if (pos_ >= line_.size() || line_[pos_] != ',') fail(column(), "expected ','");
    ++pos_;
  }

  Token word() {
    skip_ws();
    Token t{{}, column()};
    while (pos_ < line_.size() && !std::isspace(static_cast<unsigned char>(line_[pos_]))) {
      t.text.push_back(line_[pos_++]);
    }
    return t;
  }

  // Consumes `ident:` at the cursor if present.
  std::optional<Token> label_def() {
    skip_ws();
    std::size_t p = pos_;
    if (p >= line_.size() || !is_ident_start(line_[p]) || line_[p] == '.') return std::nullopt;
    while (p < line_.size() && is_ident_char(line_[p])) ++p;
    if (p < line_.size() && line_[p] == ':') {
      Token t{std::string(line_.substr(pos_, p - pos_)), column()};
      pos_ = p + 1;
      return t;
    }
    return std::nullopt;
  }

  int lineno() const { return lineno_; }

 private:
  std::string_view line_;
  int lineno_;
  std::size_t pos_ = 0;
};

std::optional<Reg> parse_reg(std::string_view s) {
  if (s == "lr") return Reg::lr();
  if (s == "ctr") return Reg::ctr();
  if (s.size() < 2 || s[0] != 'r') return std::nullopt;
  unsigned n = 0;
  auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), n);
  if (ec != std::errc() || p != s.data() + s.size() || n >= isa::kNumGprs) return std::nullopt;
  if (s.size() > 2 && s[1] == '0') return std::nullopt;
  return Reg::gpr(n);
}

std::optional<std::int64_t> parse_int(std::string_view s, bool* overflow = nullptr) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec == std::errc::result_out_of_range) {
    if (overflow) *overflow = true;
    return std::nullopt;
  }
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  if (v > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + (neg ? 1u : 0u)) {
    // Values in the upper half are allowed as raw 64-bit bit patterns.
    if (neg) {
      if (overflow) *overflow = true;
      return std::nullopt;
    }
    return static_cast<std::int64_t>(v);
  }
  return neg ? static_cast<std::int64_t>(0 - v) : static_cast<std::int64_t>(v);
}

Reg expect_gpr(LineLexer& lx, const Token& t) {
  auto r = parse_reg(t.text);
  if (!r) lx.fail(t.column, "expected register, got '" + t.text + "'");
  if (!r->is_gpr()) lx.fail(t.column, "'" + t.text + "' not allowed here; expected r0..r31");
  return *r;
}

std::int16_t expect_imm16(LineLexer& lx, const Token& t) {
  auto v = parse_int(t.text);
  if (!v) lx.fail(t.column, "expected integer immediate, got '" + t.text + "'");
  if (*v < std::numeric_limits<std::int16_t>::min() || *v > std::numeric_limits<std::int16_t>::max()) {
    lx.fail(t.column, "immediate " + t.text + " out of 16-bit signed range");
  }
  return static_cast<std::int16_t>(*v);
}

unsigned expect_nbits(LineLexer& lx, const Token& t) {
  auto v = parse_int(t.text);
  if (!v || *v < 0 || *v > 63) lx.fail(t.column, "expected bit count 0..63, got '" + t.text + "'");
  return static_cast<unsigned>(*v);
}

isa::Target expect_target(LineLexer& lx, const Token& t) {
  const std::string& s = t.text;
  if (s.size() >= 2 && s[0] == '.' && (s[1] == '+' || s[1] == '-')) {
    auto v = parse_int(std::string_view(s).substr(1));
    if (!v) lx.fail(t.column, "bad displacement '" + s + "'");
    return isa::Disp{*v};
  }
  if (s.empty() || !is_ident_start(s[0]) ||
      !std::all_of(s.begin(), s.end(), [](char c) { return is_ident_char(c); })) {
    lx.fail(t.column, "bad branch target '" + s + "'");
  }
  return isa::Label{s};
}

// Parses the mnemonic + operands on the rest of the line. `li` expands to
// several instructions.
std::vector<Instruction> parse_body(LineLexer& lx) {
  const Token mn = lx.word();
  std::string m = mn.text;
  std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return std::tolower(c); });

  auto done = [&](std::vector<Instruction> v) {
    if (!lx.at_end()) lx.fail(lx.column(), "unexpected trailing text");
    return v;
  };

  if (m == "li") {
    const Reg rd = expect_gpr(lx, lx.operand());
    lx.comma();
    const Token t = lx.operand();
    bool overflow = false;
    auto v = parse_int(t.text, &overflow);
    if (!v) lx.fail(t.column, "expected 64-bit integer, got '" + t.text + "'");
    return done(load_immediate(rd, static_cast<std::uint64_t>(*v)));
  }
  if (m == "mfctr") {
    const Reg rd = expect_gpr(lx, lx.operand());
    return done({isa::make_mflr(rd, Reg::ctr())});
  }

  auto op = isa::opcode_from_mnemonic(m);
  if (!op) lx.fail(mn.column, "unknown opcode '" + mn.text + "'");

  using isa::Format;
  switch (isa::format_of(*op)) {
    case Format::kR3: {
      const Reg a = expect_gpr(lx, lx.operand());
      lx.comma();
      const Reg b = expect_gpr(lx, lx.operand());
      lx.comma();
      const Reg c = expect_gpr(lx, lx.operand());
      return done({isa::make_r3(*op, a, b, c)});
    }
    case Format::kRI: {
      const Reg a = expect_gpr(lx, lx.operand());
      lx.comma();
      const Reg b = expect_gpr(lx, lx.operand());
      lx.comma();
      const auto imm = expect_imm16(lx, lx.operand());
      return done({isa::make_ri(*op, a, b, imm)});
    }
    case Format::kRN: {
      const Reg a = expect_gpr(lx, lx.operand());
      lx.comma();
      const Reg b = expect_gpr(lx, lx.operand());
      lx.comma();
      const unsigned n = expect_nbits(lx, lx.operand());
      return done({isa::make_rn(*op, a, b, n)});
    }
    case Format::kMT: {
      const Token t = lx.operand();
      auto r = parse_reg(t.text);
      if (!r) lx.fail(t.column, "expected register, got '" + t.text + "'");
      return done({isa::make_move_to(*op, *r)});
    }
    case Format::kMF: {
      const Reg rd = expect_gpr(lx, lx.operand());
      Reg src = Reg::lr();
      if (!lx.at_end()) {
        lx.comma();
        const Token t = lx.operand();
        auto r = parse_reg(t.text);
        if (!r || r->is_gpr()) lx.fail(t.column, "mflr source must be lr or ctr");
        src = *r;
      }
      return done({isa::make_mflr(rd, src)});
    }
    case Format::kJ: {
      auto t = expect_target(lx, lx.operand());
      return done({isa::make_jump(*op, std::move(t))});
    }
    case Format::kBC: {
      const Reg rs = expect_gpr(lx, lx.operand());
      lx.comma();
      const Token c = lx.operand();
      bool nz = false;
      if (c.text == "nz") {
        nz = true;
      } else if (c.text != "z") {
        lx.fail(c.column, "expected condition 'z' or 'nz'");
      }
      lx.comma();
      auto t = expect_target(lx, lx.operand());
      return done({isa::make_bc(rs, nz, std::move(t))});
    }
    case Format::kN:
      return done({isa::make_plain(*op)});
  }
  lx.fail(mn.column, "unhandled opcode");
}

std::string strip_comment(std::string_view line) {
  auto p = line.find('#');
  return std::string(p == std::string_view::npos ? line : line.substr(0, p));
}

}  // namespace

std::vector<Instruction> load_immediate(Reg rd, std::uint64_t value) {
  std::vector<Instruction> out;
  out.push_back(isa::make_r3(Opcode::kXor, rd, rd, rd));
  const auto as_signed = static_cast<std::int64_t>(value);
  if (as_signed >= std::numeric_limits<std::int16_t>::min() &&
      as_signed <= std::numeric_limits<std::int16_t>::max()) {
    if (value != 0) out.push_back(isa::make_ri(Opcode::kAddi, rd, rd, static_cast<std::int16_t>(as_signed)));
    return out;
  }
  // 15-bit chunks keep ORI's sign-extended immediate non-negative.
  std::vector<std::uint16_t> chunks;
  for (std::uint64_t v = value; v != 0; v >>= 15) chunks.push_back(static_cast<std::uint16_t>(v & 0x7FFF));
  bool first = true;
  for (auto it = chunks.rbegin(); it != chunks.rend(); ++it) {
    if (!first) out.push_back(isa::make_rn(Opcode::kShl, rd, rd, 15));
    if (*it != 0) out.push_back(isa::make_ri(Opcode::kOri, rd, rd, static_cast<std::int16_t>(*it)));
    first = false;
  }
  return out;
}

isa::Instruction parse_instruction(std::string_view line) {
  const std::string text = strip_comment(line);
  LineLexer lx(text, 1);
  if (lx.at_end()) lx.fail(1, "empty instruction");
  auto v = parse_body(lx);
  if (v.size() != 1) lx.fail(1, "pseudo-instruction expands to several instructions");
  return v.front();
}

AsmProgram parse_asm(std::string_view text) {
  AsmProgram prog;
  AsmFunction* cur = nullptr;
  std::string entry;
  int entry_line = 0;
  std::set<std::string> names;

  // Target uses to resolve once all functions are known: (function idx, instr idx).
  struct Use {
    std::size_t fn;
    std::size_t instr;
  };
  std::vector<Use> uses;

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = strip_comment(raw);
    LineLexer lx(line, lineno);
    if (lx.at_end()) continue;

    while (auto lab = lx.label_def()) {
      if (cur == nullptr) lx.fail(lab->column, "label '" + lab->text + "' outside .func");
      for (const auto& l : cur->labels) {
        if (l.name == lab->text) lx.fail(lab->column, "duplicate label '" + lab->text + "'");
      }
      cur->labels.push_back({lab->text, cur->instrs.size()});
    }
    if (lx.at_end()) continue;

    const int col = lx.column();
    if (line[static_cast<std::size_t>(col - 1)] == '.') {
      const Token d = lx.word();
      if (d.text == ".func") {
        const Token n = lx.word();
        if (cur != nullptr) lx.fail(d.column, ".func inside function '" + cur->name + "'");
        if (n.text.empty() || !is_ident_start(n.text[0])) lx.fail(n.column, "expected function name");
        if (!names.insert(n.text).second) lx.fail(n.column, "duplicate function '" + n.text + "'");
        prog.functions.push_back(AsmFunction{n.text, false, {}, {}, {}});
        cur = &prog.functions.back();
      } else if (d.text == ".endfunc") {
        if (cur == nullptr) lx.fail(d.column, ".endfunc without .func");
        cur = nullptr;
      } else if (d.text == ".extern_called") {
        if (cur == nullptr) lx.fail(d.column, ".extern_called outside .func");
        cur->extern_called = true;
      } else if (d.text == ".entry") {
        const Token n = lx.word();
        if (n.text.empty()) lx.fail(n.column, "expected function name");
        entry = n.text;
        entry_line = lineno;
      } else {
        lx.fail(d.column, "unknown directive '" + d.text + "'");
      }
      if (!lx.at_end()) lx.fail(lx.column(), "unexpected trailing text");
      continue;
    }

    if (cur == nullptr) lx.fail(col, "instruction outside .func");
    for (auto& ins : parse_body(lx)) {
      if (std::holds_alternative<isa::Label>(ins.target)) {
        uses.push_back({static_cast<std::size_t>(cur - prog.functions.data()), cur->instrs.size()});
      }
      cur->instrs.push_back(std::move(ins));
      cur->lines.push_back(lineno);
    }
  }
  if (cur != nullptr) throw ParseError(lineno, 1, "missing .endfunc for '" + cur->name + "'");

  for (const auto& u : uses) {
    const auto& fn = prog.functions[u.fn];
    const auto& name = std::get<isa::Label>(fn.instrs[u.instr].target).name;
    const bool local = std::any_of(fn.labels.begin(), fn.labels.end(),
                                   [&](const LabelDef& l) { return l.name == name; });
    if (!local && names.count(name) == 0) {
      throw ParseError(fn.lines[u.instr], 1, "unresolved label '" + name + "'");
    }
  }

  if (!entry.empty()) {
    if (names.count(entry) == 0) throw ParseError(entry_line, 1, "unknown entry function '" + entry + "'");
    prog.entry = entry;
  } else if (names.count("main") != 0) {
    prog.entry = "main";
  } else if (!prog.functions.empty()) {
    prog.entry = prog.functions.front().name;
  }
  return prog;
}

std::string print_instruction(const Instruction& i) {
  using isa::Format;
  std::ostringstream os;
  const auto target = [&]() -> std::string {
    if (const auto* l = std::get_if<isa::Label>(&i.target)) return l->name;
    if (const auto* d = std::get_if<isa::Disp>(&i.target)) {
      return d->bytes < 0 ? ".-" + std::to_string(-d->bytes) : ".+" + std::to_string(d->bytes);
    }
    return "?";
  };
  const auto r = [](Reg x) { return isa::to_string(x); };
  if (i.op == Opcode::kMflr && i.ra == Reg::ctr()) return "mfctr " + r(i.rd);
  os << isa::mnemonic(i.op);
  switch (isa::format_of(i.op)) {
    case Format::kR3:
      os << ' ' << r(i.rd) << ", " << r(i.ra) << ", " << r(i.rb);
      break;
    case Format::kRI:
      os << ' ' << r(i.rd) << ", " << r(i.ra) << ", " << i.imm;
      break;
    case Format::kRN:
      os << ' ' << r(i.rd) << ", " << r(i.ra) << ", " << static_cast<unsigned>(i.nbits);
      break;
    case Format::kMT:
      os << ' ' << r(i.ra);
      break;
    case Format::kMF:
      os << ' ' << r(i.rd);
      break;
    case Format::kJ:
      os << ' ' << target();
      break;
    case Format::kBC:
      os << ' ' << r(i.rd) << ", " << (i.nonzero ? "nz" : "z") << ", " << target();
      break;
    case Format::kN:
      break;
  }
  return os.str();
}

std::string print_asm(const AsmProgram& prog) {
  std::ostringstream os;
  if (!prog.entry.empty()) os << ".entry " << prog.entry << "\n";
  for (const auto& f : prog.functions) {
    os << ".func " << f.name << "\n";
    if (f.extern_called) os << ".extern_called\n";
    for (std::size_t k = 0; k <= f.instrs.size(); ++k) {
      for (const auto& l : f.labels) {
        if (l.index == k) os << l.name << ":\n";
      }
      if (k < f.instrs.size()) os << "    " << print_instruction(f.instrs[k]) << "\n";
    }
    os << ".endfunc\n";
  }
  return os.str();
}

}  // namespace venkman
