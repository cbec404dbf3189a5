//===- bundle.cpp - Bundle planning, fences and address layout ------------===//

#include <algorithm>
#include <sstream>

#include "venkman/transform.hpp"

namespace venkman::transform {

using cfg::FunctionCFG;
using isa::Instruction;
using isa::Opcode;

namespace {

struct Unit {
  std::vector<Instruction> instrs;
  bool has_load = false;
  bool is_call = false;
};

std::vector<Unit> split_units(const cfg::BasicBlock& b) {
  std::vector<Unit> units;
  Unit cur;
  for (std::size_t k = 0; k < b.instrs.size(); ++k) {
    cur.instrs.push_back(b.instrs[k]);
    cur.has_load = cur.has_load || isa::is_load(b.instrs[k].op);
    if (b.glue[k] == 0 || k + 1 == b.instrs.size()) {
      cur.is_call = isa::is_call(cur.instrs.back().op);
      units.push_back(std::move(cur));
      cur = Unit{};
    }
  }
  return units;
}

std::string describe(const std::string& fn, const Unit& u) {
  std::ostringstream os;
  os << "in '" << fn << "': [";
  for (std::size_t k = 0; k < u.instrs.size(); ++k) os << (k ? "; " : "") << print_instruction(u.instrs[k]);
  os << "]";
  return os.str();
}

class Planner {
 public:
  Planner(FunctionPlan& out, const HardeningConfig& c) : out_(out), cap_(c.capacity()), fence_(c.enable_fence) {}

  void start_bundle() {
    if (!cur_.instrs.empty() || cur_.fence_reserved) out_.bundles.push_back(std::move(cur_));
    cur_ = PlannedBundle{};
  }

  std::size_t next_index() const { return out_.bundles.size(); }

  void place(const Unit& u) {
    auto need = [&] { return u.instrs.size() + (fence_ && u.has_load && !cur_.fence_reserved ? 1u : 0u); };
    if (need() > cap_) {
      throw TransformError("atomic group of " + std::to_string(need()) + " instructions exceeds bundle capacity " +
                           std::to_string(cap_) + " " + describe(out_.name, u));
    }
    if (used() + need() > cap_) start_bundle();
    if (fence_ && u.has_load) cur_.fence_reserved = true;
    if (u.is_call) {
      // The return address must be the next bundle's base.
      while (used() + u.instrs.size() < cap_) append(isa::make_plain(Opcode::kNop), SlotOrigin::kPad);
    }
    for (const auto& i : u.instrs) append(i, SlotOrigin::kCode);
    if (u.is_call) start_bundle();
  }

  void finish() { start_bundle(); }

 private:
  std::size_t used() const { return cur_.instrs.size() + (cur_.fence_reserved ? 1 : 0); }

  void append(const Instruction& i, SlotOrigin o) {
    cur_.instrs.push_back(i);
    cur_.origin.push_back(o);
  }

  FunctionPlan& out_;
  PlannedBundle cur_;
  std::size_t cap_;
  bool fence_;
};

void check_reserved_register(const FunctionCFG& fn) {
  for (const auto& b : fn.blocks) {
    for (const auto& i : b.instrs) {
      for (const auto& r : isa::uses(i)) {
        if (r == kScratch) throw TransformError("function '" + fn.name + "' uses reserved register r31");
      }
      for (const auto& r : isa::defs(i)) {
        if (r == kScratch) throw TransformError("function '" + fn.name + "' uses reserved register r31");
      }
    }
  }
}

}  // namespace

BundlePlan plan_bundles(const std::vector<FunctionCFG>& fns, const HardeningConfig& c) {
  c.validate();
  BundlePlan plan;
  plan.config = c;
  for (const auto& fn : fns) {
    FunctionPlan fp;
    fp.name = fn.name;
    Planner p(fp, c);
    for (const auto& b : fn.blocks) {
      if (b.id == fn.entry || !b.labels.empty()) p.start_bundle();
      for (const auto& l : b.labels) fp.label_bundle[l] = p.next_index();
      for (const auto& u : split_units(b)) p.place(u);
    }
    p.finish();
    plan.functions.push_back(std::move(fp));
  }
  return plan;
}

void pass_fence(BundlePlan& plan, const HardeningConfig& c, TransformStats* stats) {
  if (!c.enable_fence) return;
  for (auto& fp : plan.functions) {
    for (auto& b : fp.bundles) {
      if (!b.fence_reserved) continue;
      auto it = std::find_if(b.instrs.begin(), b.instrs.end(), [](const Instruction& i) { return isa::is_load(i.op); });
      auto at = it - b.instrs.begin();
      // Keep a load mask adjacent to its load.
      if (at > 0 && b.instrs[at - 1] == isa::make_rn(Opcode::kClrhi, it->ra, it->ra, 1)) --at;
      b.instrs.insert(b.instrs.begin() + at, isa::make_plain(Opcode::kFence));
      b.origin.insert(b.origin.begin() + at, SlotOrigin::kFence);
      b.fence_reserved = false;
      if (stats != nullptr) ++stats->fence_added;
    }
  }
}

LayoutImage finalize_layout(const BundlePlan& plan, const AddressMap& m, TransformStats* stats) {
  const HardeningConfig& c = plan.config;
  const std::uint32_t unit = c.unit_bytes();
  const std::size_t cap = c.capacity();

  LayoutImage img;
  img.bundle_size = unit;
  img.base_address = m.code_lo;

  // Addresses first; targets may point forward.
  std::map<std::string, std::uint64_t, std::less<>> fn_addr;
  std::vector<std::map<std::string, std::uint64_t, std::less<>>> label_addr(plan.functions.size());
  std::uint64_t cursor = m.code_lo;
  std::vector<std::uint64_t> fn_base;
  for (std::size_t f = 0; f < plan.functions.size(); ++f) {
    const auto& fp = plan.functions[f];
    fn_base.push_back(cursor);
    fn_addr[fp.name] = cursor;
    img.symbols.push_back({fp.name, cursor});
    for (const auto& [name, idx] : fp.label_bundle) label_addr[f][name] = cursor + idx * unit;
    cursor += fp.bundles.size() * unit;
  }
  if (cursor > m.code_hi + 1) {
    throw TransformError("image of " + std::to_string(cursor - m.code_lo) + " bytes exceeds the code segment");
  }

  std::uint64_t pads = 0;
  for (std::size_t f = 0; f < plan.functions.size(); ++f) {
    const auto& fp = plan.functions[f];
    for (std::size_t bi = 0; bi < fp.bundles.size(); ++bi) {
      const auto& pb = fp.bundles[bi];
      if (pb.fence_reserved) throw TransformError("fence slot reserved but never filled in '" + fp.name + "'");
      Bundle out;
      out.base_addr = fn_base[f] + bi * unit;
      for (std::size_t k = 0; k < pb.instrs.size(); ++k) {
        Instruction i = pb.instrs[k];
        if (pb.origin[k] == SlotOrigin::kPad) ++pads;
        if (const auto* lab = std::get_if<isa::Label>(&i.target)) {
          std::uint64_t target = 0;
          if (auto it = label_addr[f].find(lab->name); it != label_addr[f].end()) {
            target = it->second;
          } else if (auto jt = fn_addr.find(lab->name); jt != fn_addr.end()) {
            target = jt->second;
          } else {
            throw TransformError("unresolved branch target '" + lab->name + "' in '" + fp.name + "'");
          }
          const std::uint64_t pc = out.base_addr + k * isa::kInstrBytes;
          i.target = isa::Disp{static_cast<std::int64_t>(target - pc)};
        }
        out.words.push_back(isa::encode(i));
      }
      while (out.words.size() < cap) {
        out.words.push_back(isa::kNopWord);
        ++pads;
      }
      if (out.words.size() > cap) throw TransformError("bundle overflow in '" + fp.name + "'");
      img.bundles.push_back(std::move(out));
    }
  }

  if (stats != nullptr) {
    stats->nop_padding += pads;
    stats->total_instrs = img.bundles.size() * cap;
    stats->code_bytes = img.code_bytes();
    stats->ratio_vs_baseline = stats->original_instrs == 0
                                   ? 1.0
                                   : static_cast<double>(stats->code_bytes) /
                                         static_cast<double>(stats->original_instrs * isa::kInstrBytes);
  }
  return img;
}

LayoutImage pass_bundle(const std::vector<FunctionCFG>& fns, const HardeningConfig& c, const AddressMap& m,
                        TransformStats* stats) {
  BundlePlan plan = plan_bundles(fns, c);
  pass_fence(plan, c, stats);
  return finalize_layout(plan, m, stats);
}

TransformOutput transform_program(const AsmProgram& prog, const HardeningConfig& c, const AddressMap& m) {
  c.validate();
  TransformOutput out;
  out.config = c;
  out.stats.original_instrs = prog.instruction_count();

  auto fns = cfg::build_cfg(prog);
  for (auto& fn : fns) {
    check_reserved_register(fn);
    fn = pass_cfi(std::move(fn), c, m, &out.stats);
    fn = pass_sfi_store(std::move(fn), c, m, &out.stats);
    fn = pass_sfi_load(std::move(fn), c, &out.stats);
    if (c.enable_cfi && is_masking_exempt(fn)) out.exempt_functions.push_back(fn.name);
  }
  out.image = pass_bundle(fns, c, m, &out.stats);
  return out;
}

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

}  // namespace

std::vector<std::uint8_t> emit_image(const LayoutImage& img) {
  std::vector<std::uint8_t> out(std::begin(kImageMagic), std::end(kImageMagic));
  put_le<std::uint32_t>(out, img.bundle_size);
  put_le<std::uint64_t>(out, img.base_address);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.bundles.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.symbols.size()));
  for (const auto& s : img.symbols) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.insert(out.end(), s.name.begin(), s.name.end());
    put_le<std::uint64_t>(out, s.address);
  }
  for (const auto& b : img.bundles) {
    for (isa::Word w : b.words) put_le<std::uint32_t>(out, w);
  }
  return out;
}

}  // namespace venkman::transform
