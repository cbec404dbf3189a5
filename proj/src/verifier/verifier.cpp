//===- verifier.cpp - Bundle and masking rule checks ----------------------===//
//
// Deliberately self-contained: shares the ISA decoder and nothing else with
// the transformer.
//
//===----------------------------------------------------------------------===//

#include "venkman/verifier.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <set>

#include "json.hpp"

namespace venkman::verifier {

using isa::Instruction;
using isa::Opcode;
using isa::Reg;

std::size_t VerifierReport::count(const std::string& rule) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.rule == rule; }));
}

std::string VerifierReport::to_json() const {
  nlohmann::ordered_json j;
  j["verdict"] = pass ? "pass" : "fail";
  j["violations"] = nlohmann::ordered_json::array();
  for (const auto& v : violations) {
    j["violations"].push_back({{"rule", v.rule}, {"addr", v.addr}, {"offset", v.offset}, {"msg", v.msg}});
  }
  j["rules"] = nlohmann::ordered_json::array();
  for (const auto& r : checked_rules) j["rules"].push_back({{"rule", r.rule}, {"enabled", r.enabled}});
  return j.dump(2);
}

namespace {

struct Step {
  Opcode op;
  unsigned nbits;
};

class Checker {
 public:
  Checker(const LayoutImage& img, const Policy& p, const AddressMap& m)
      : img_(img), policy_(p), map_(m), bs_(img.bundle_size) {
    decoded_.resize(img.bundles.size());
    for (std::size_t b = 0; b < img.bundles.size(); ++b) {
      for (isa::Word w : img.bundles[b].words) {
        auto d = isa::try_decode(w);
        decoded_[b].push_back(d.instr);
      }
    }
    for (const auto& s : img.symbols) starts_.insert(s.address);
  }

  VerifierReport run() {
    const std::uint32_t expected = policy_.align ? policy_.bundle_size : 4u;
    rules_ = {{"R0", true},
              {"R1", true},
              {"R2", true},
              {"R3", true},
              {"R4", policy_.cfi},
              {"R5", true},
              {"R6", policy_.fence},
              {"R7", policy_.sfi_store},
              {"R8", policy_.sfi_load},
              {"R9", true}};

    if (bs_ != expected) {
      add("R2", img_.base_address, 0,
          "bundle size " + std::to_string(bs_) + " differs from required " + std::to_string(expected));
    }
    const bool size_ok = bs_ >= 4 && std::has_single_bit(bs_);
    if (!size_ok) add("R2", img_.base_address, 0, "bundle size is not a power of two");

    for (std::size_t b = 0; b < img_.bundles.size(); ++b) {
      const auto& bundle = img_.bundles[b];
      const std::uint64_t base = bundle.base_addr;
      if (!map_.in_code(base) || !map_.in_code(base + bs_ - 1)) {
        add("R1", base, 0, "bundle outside the code segment");
      }
      if (size_ok && expected != 0 && base % expected != 0) add("R2", base, 0, "bundle base not aligned");
      if (bundle.words.size() * isa::kInstrBytes != bs_) add("R2", base, 0, "bundle length differs from bundle size");
      check_bundle(b);
    }

    for (const auto& s : img_.symbols) {
      if (!is_bundle_base(s.address)) add("R9", s.address, 0, "symbol '" + s.name + "' is not a bundle base");
    }

    VerifierReport r;
    std::stable_sort(violations_.begin(), violations_.end(), [](const Violation& a, const Violation& b) {
      return a.addr != b.addr ? a.addr < b.addr : a.offset < b.offset;
    });
    r.violations = std::move(violations_);
    r.pass = r.violations.empty();
    r.checked_rules = rules_;
    return r;
  }

 private:
  void add(const std::string& rule, std::uint64_t addr, std::int64_t off, std::string msg) {
    violations_.push_back({rule, addr, off, std::move(msg)});
  }

  bool is_bundle_base(std::uint64_t a) const {
    if (a < img_.base_address || a >= img_.end_address() || bs_ == 0) return false;
    return (a - img_.base_address) % bs_ == 0;
  }

  const std::optional<Instruction>* at(std::uint64_t pc) const {
    if (pc < img_.base_address || pc >= img_.end_address() || pc % 4 != 0) return nullptr;
    const std::uint64_t off = pc - img_.base_address;
    const auto b = static_cast<std::size_t>(off / bs_);
    const auto k = static_cast<std::size_t>((off % bs_) / 4);
    if (k >= decoded_[b].size()) return nullptr;
    return &decoded_[b][k];
  }

  // Function extent [lo, hi) containing pc, from the symbol table.
  std::pair<std::uint64_t, std::uint64_t> extent(std::uint64_t pc) const {
    std::uint64_t lo = img_.base_address;
    std::uint64_t hi = img_.end_address();
    auto it = starts_.upper_bound(pc);
    if (it != starts_.end()) hi = *it;
    if (it != starts_.begin()) lo = *std::prev(it);
    return {lo, hi};
  }

  std::string function_at(std::uint64_t pc) const {
    const auto lo = extent(pc).first;
    for (const auto& s : img_.symbols) {
      if (s.address == lo) return s.name;
    }
    return {};
  }

  // True if some path from the CTR write at `pc` reaches BCTR/BCTRL before
  // any other read or redefinition of CTR, staying inside the function.
  bool ctr_feeds_branch(std::uint64_t pc) const {
    const auto [lo, hi] = extent(pc);
    std::set<std::uint64_t> seen;
    std::vector<std::uint64_t> work{pc + 4};
    while (!work.empty()) {
      const std::uint64_t p = work.back();
      work.pop_back();
      if (p < lo || p >= hi || !seen.insert(p).second) continue;
      const auto* slot = at(p);
      if (slot == nullptr || !slot->has_value()) continue;
      const Instruction& i = **slot;
      if (isa::reads(i, Reg::ctr())) {
        if (i.op == Opcode::kBctr || i.op == Opcode::kBctrl) return true;
        continue;
      }
      if (isa::writes(i, Reg::ctr())) continue;
      const auto target = [&] { return p + static_cast<std::uint64_t>(std::get<isa::Disp>(i.target).bytes); };
      switch (i.op) {
        case Opcode::kB:
          work.push_back(target());
          break;
        case Opcode::kBc:
          work.push_back(target());
          work.push_back(p + 4);
          break;
        case Opcode::kBlr:
        case Opcode::kHalt:
          break;
        default:
          work.push_back(p + 4);
          break;
      }
    }
    return false;
  }

  // Walks back from slot `k` in bundle `b` and matches the writers of `r`
  // against `seq` (listed in program order).
  bool preceded_by(std::size_t b, std::size_t k, Reg r, const std::vector<Step>& seq) const {
    const auto& slots = decoded_[b];
    std::size_t pos = k;
    for (auto it = seq.rbegin(); it != seq.rend(); ++it) {
      std::optional<std::size_t> writer;
      while (pos > 0) {
        --pos;
        if (!slots[pos].has_value()) return false;
        if (isa::writes(*slots[pos], r)) {
          writer = pos;
          break;
        }
      }
      if (!writer) return false;
      const Instruction& w = *slots[*writer];
      if (w.op != it->op || w.rd != r || w.ra != r || w.nbits != it->nbits) return false;
    }
    return true;
  }

  void check_bundle(std::size_t b) {
    const auto& bundle = img_.bundles[b];
    const auto& slots = decoded_[b];
    const std::uint64_t base = bundle.base_addr;
    const std::size_t last = slots.empty() ? 0 : slots.size() - 1;
    const unsigned lg = bs_ ? static_cast<unsigned>(std::countr_zero(bs_)) : 0;
    const std::vector<Step> code_mask{{Opcode::kClrlo, lg}, {Opcode::kClrhi, 64 - map_.code_bit}};
    const unsigned user_bits = static_cast<unsigned>(std::bit_width(map_.data_hi));
    const std::vector<Step> store_mask{{Opcode::kSetbit, map_.code_bit}, {Opcode::kClrhi, 64 - user_bits}};
    const std::vector<Step> load_mask{{Opcode::kClrhi, 1}};

    std::optional<std::size_t> first_fence;
    bool load_seen = false;
    for (std::size_t k = 0; k < slots.size(); ++k) {
      const auto off = static_cast<std::int64_t>(k);
      if (!slots[k].has_value()) {
        auto d = isa::try_decode(bundle.words[k]);
        add("R0", base, off, d.error);
        continue;
      }
      const Instruction& i = *slots[k];
      const std::uint64_t pc = base + k * 4;

      if (isa::is_direct_branch(i.op)) {
        const std::uint64_t t = pc + static_cast<std::uint64_t>(std::get<isa::Disp>(i.target).bytes);
        if (!is_bundle_base(t) || !map_.in_code(t)) {
          add("R3", base, off, std::string(isa::mnemonic(i.op)) + " target is not a bundle base in the code segment");
        }
      }

      if (policy_.cfi && (i.op == Opcode::kMtlr || i.op == Opcode::kMtctr)) {
        bool needs_mask = i.op == Opcode::kMtctr ? ctr_feeds_branch(pc) : true;
        if (i.op == Opcode::kMtlr) {
          const auto fn = function_at(pc);
          const auto& ex = policy_.exempt_functions;
          if (!fn.empty() && std::find(ex.begin(), ex.end(), fn) != ex.end()) needs_mask = false;
        }
        if (needs_mask && (!i.ra.is_gpr() || !preceded_by(b, k, i.ra, code_mask))) {
          add("R4", base, off, std::string(isa::mnemonic(i.op)) + " source " + isa::to_string(i.ra) +
                                   " lacks the in-bundle code-pointer mask");
        }
      }

      if (isa::is_call(i.op) && k != last) add("R5", base, off, "call is not the last instruction of its bundle");

      if (i.op == Opcode::kFence && !first_fence) first_fence = k;
      if (isa::is_load(i.op) && !load_seen) {
        load_seen = true;
        if (policy_.fence && !first_fence) add("R6", base, off, "load without a preceding fence in its bundle");
      }

      if (policy_.sfi_store) {
        if (i.op == Opcode::kStX) add("R7", base, off, "x-form store under store sandboxing");
        if (i.op == Opcode::kStD && !preceded_by(b, k, i.ra, store_mask)) {
          add("R7", base, off, "store base " + isa::to_string(i.ra) + " lacks the in-bundle data-region mask");
        }
      }
      if (policy_.sfi_load) {
        if (i.op == Opcode::kLdX) add("R8", base, off, "x-form load under load sandboxing");
        if (i.op == Opcode::kLdD && !preceded_by(b, k, i.ra, load_mask)) {
          add("R8", base, off, "load base " + isa::to_string(i.ra) + " lacks the in-bundle user-space mask");
        }
      }
    }
  }

  const LayoutImage& img_;
  const Policy& policy_;
  const AddressMap& map_;
  std::uint32_t bs_;
  std::vector<std::vector<std::optional<Instruction>>> decoded_;
  std::set<std::uint64_t> starts_;
  std::vector<Violation> violations_;
  std::vector<RuleStatus> rules_;
};

}  // namespace

VerifierReport verify(const LayoutImage& img, const Policy& policy, const AddressMap& m) {
  return Checker(img, policy, m).run();
}

}  // namespace venkman::verifier
