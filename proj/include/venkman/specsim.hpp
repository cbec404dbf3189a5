//===- specsim.hpp - Speculative execution simulator ------------*- C++ -*-===//
//
// Deterministic interpreter for laid-out images with a branch target buffer,
// return stack buffer, 1-bit conditional branch history, a single
// speculation window and a membership-only data cache.
//
// A committed control transfer whose prediction differs from its resolved
// target opens a speculation episode: registers are checkpointed, execution
// follows the prediction for at most `spec_window` instructions, and then
// rolls back to the resolved target. Speculative stores go to a store buffer
// that is discarded on rollback; the data cache is never rolled back.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "venkman/image.hpp"

namespace venkman::specsim {

/// Return address the host installs in LR; reaching it ends a call.
inline constexpr std::uint64_t kHostReturn = 0;
/// Initial stack pointer (r1) near the top of the data region.
inline constexpr std::uint64_t kDefaultStackTop = 0x3FFF'FFFF'0000;
/// One past the highest user-space address.
inline constexpr std::uint64_t kUserLimit = std::uint64_t{1} << 46;

class SimError : public Error {
 public:
  using Error::Error;
};

struct SimConfig {
  std::uint32_t btb_slots = 64;
  std::uint32_t rsb_depth = 8;
  std::uint32_t line_size = 64;
  std::uint32_t spec_window = 32;
  std::uint32_t bht_slots = 64;
  bool direct_branch_btb = true;
  bool store_forwarding = false;
  /// When non-zero, every speculative fetch is checked to be a multiple of
  /// this size or the next slot after the previous fetch.
  std::uint32_t monitor_bundle_size = 0;

  void validate() const;
};

/// Sparse little-endian byte memory over the user address space.
class Memory {
 public:
  std::uint8_t read8(std::uint64_t a) const;
  void write8(std::uint64_t a, std::uint8_t v);
  std::uint64_t read64(std::uint64_t a) const;
  void write64(std::uint64_t a, std::uint64_t v);

  friend bool operator==(const Memory& a, const Memory& b);

 private:
  static constexpr std::uint64_t kPage = 4096;
  std::map<std::uint64_t, std::array<std::uint8_t, kPage>> pages_;
};

struct Registers {
  std::array<std::uint64_t, 32> gprs{};
  std::uint64_t lr = 0;
  std::uint64_t ctr = 0;
  std::uint64_t pc = 0;
  friend bool operator==(const Registers&, const Registers&) = default;
};

struct MachineState {
  Registers regs;
  Memory mem;
  bool halted = false;
  friend bool operator==(const MachineState&, const MachineState&) = default;
};

class Btb {
 public:
  explicit Btb(std::uint32_t slots = 64);
  std::size_t index(std::uint64_t pc) const { return static_cast<std::size_t>((pc / 4) % entries_.size()); }
  std::optional<std::uint64_t> predict(std::uint64_t pc) const { return entries_[index(pc)]; }
  /// Raw, unvalidated write.
  void update(std::uint64_t pc, std::uint64_t target) { entries_[index(pc)] = target; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::optional<std::uint64_t>> entries_;
};

class Rsb {
 public:
  explicit Rsb(std::uint32_t depth = 8) : depth_(depth) {}
  /// Drops the oldest entry when full.
  void push(std::uint64_t ret);
  std::optional<std::uint64_t> pop();
  std::size_t size() const { return stack_.size(); }
  std::uint32_t depth() const { return depth_; }
  friend bool operator==(const Rsb&, const Rsb&) = default;

 private:
  std::uint32_t depth_;
  std::vector<std::uint64_t> stack_;
};

/// One taken/not-taken bit per slot, initially not-taken.
class BranchHistory {
 public:
  explicit BranchHistory(std::uint32_t slots = 64) : taken_(slots, false) {}
  bool predict(std::uint64_t pc) const { return taken_[(pc / 4) % taken_.size()]; }
  void update(std::uint64_t pc, bool taken) { taken_[(pc / 4) % taken_.size()] = taken; }

 private:
  std::vector<bool> taken_;
};

class CacheModel {
 public:
  explicit CacheModel(std::uint32_t line_size = 64) : line_size_(line_size) {}
  std::uint64_t line_of(std::uint64_t a) const { return a & ~(std::uint64_t{line_size_} - 1); }
  /// Inserts every line overlapped by [a, a + len).
  void touch(std::uint64_t a, std::uint64_t len = 8);
  void flush(std::uint64_t a) { lines_.erase(line_of(a)); }
  bool contains(std::uint64_t a) const { return lines_.count(line_of(a)) != 0; }
  const std::set<std::uint64_t>& lines() const { return lines_; }
  std::uint32_t line_size() const { return line_size_; }

 private:
  std::uint32_t line_size_;
  std::set<std::uint64_t> lines_;
};

struct SpecContext {
  bool in_speculation = false;
  std::uint32_t window_remaining = 0;
  Registers checkpoint;
  Rsb rsb_checkpoint;
  std::uint64_t resolve_target = 0;
  std::map<std::uint64_t, std::uint8_t> store_buffer;
  std::uint64_t episode = 0;  // id of the current/last episode
};

struct ExecEvent {
  std::uint64_t pc = 0;
  isa::Instruction instr;
  bool speculative = false;
  std::uint64_t episode = 0;
};

enum class StepStatus : std::uint8_t { kRunning, kHalted, kReturned, kTrap };

struct Counters {
  std::uint64_t instret = 0;  // committed instructions
  std::uint64_t episodes = 0;
  std::uint64_t spec_instrs = 0;
  std::uint64_t fence_stalls = 0;
  std::uint64_t monitor_violations = 0;
};

class Machine {
 public:
  Machine(const LayoutImage& img, const SimConfig& cfg);

  /// Executes one instruction, committed or speculative.
  StepStatus step();

  /// Runs from the current pc until HALT, a return to the host, a trap or
  /// `limit` committed instructions. Returns the final status; timeouts
  /// report kRunning.
  StepStatus run_until_stop(std::uint64_t limit);

  /// Host call: pc = target, LR = kHostReturn, then run_until_stop.
  StepStatus call(std::uint64_t target, std::uint64_t limit);

  MachineState& state() { return state_; }
  const MachineState& state() const { return state_; }
  Btb& btb() { return btb_; }
  Rsb& rsb() { return rsb_; }
  BranchHistory& bht() { return bht_; }
  CacheModel& cache() { return cache_; }
  const CacheModel& cache() const { return cache_; }
  const SpecContext& spec() const { return spec_; }
  const Counters& counters() const { return counters_; }
  const std::string& trap_message() const { return trap_; }
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& store_trace() const { return stores_; }
  const std::vector<std::uint64_t>& monitor_log() const { return monitor_log_; }
  const LayoutImage& image() const { return img_; }

  std::function<void(const ExecEvent&)> on_exec;

 private:
  const isa::Instruction* fetch(std::uint64_t pc) const;
  void execute(const isa::Instruction& i, bool spec);
  void begin_speculation(std::uint64_t predicted, std::uint64_t resolved);
  void squash();
  bool mem_ok(std::uint64_t a) const { return a < kUserLimit && kUserLimit - a >= 8; }
  std::uint64_t load64(std::uint64_t a, bool spec) const;
  void transfer(const isa::Instruction& i, bool spec, std::uint64_t actual, std::optional<std::uint64_t> pred);

  const LayoutImage& img_;
  SimConfig cfg_;
  std::vector<std::optional<isa::Instruction>> code_;
  MachineState state_;
  Btb btb_;
  Rsb rsb_;
  BranchHistory bht_;
  CacheModel cache_;
  SpecContext spec_;
  Counters counters_;
  std::string trap_;
  bool fault_ = false;
  std::uint64_t last_fetch_ = ~std::uint64_t{0};
  std::vector<std::pair<std::uint64_t, std::uint64_t>> stores_;
  std::vector<std::uint64_t> monitor_log_;
};

// ---------------------------------------------------------------------------
// Whole-program runs.

/// A literal or a symbol reference resolved against the image.
using Value = std::variant<std::uint64_t, std::string>;

struct MemInit {
  std::uint64_t addr = 0;
  std::vector<Value> words;          // 64-bit little-endian words
  std::vector<std::uint8_t> bytes;   // written after `words`, at addr + 8 * words.size()
};

struct RunInputs {
  std::string entry;  // empty: `main`, else the first symbol
  std::vector<std::pair<unsigned, Value>> regs;
  std::vector<MemInit> mem;
  std::vector<unsigned> observe_regs{3};
  std::vector<std::pair<std::uint64_t, std::uint64_t>> observe_mem;  // (addr, len)
  std::uint64_t limit = 1'000'000;
};

struct RunResult {
  std::string status;  // halted | returned | trap | timeout
  std::string trap;
  std::vector<std::pair<unsigned, std::uint64_t>> regs;
  std::vector<std::pair<std::uint64_t, std::vector<std::uint8_t>>> mem;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> store_trace;
  std::vector<std::uint64_t> cache_final;
  Counters counters;

  /// Committed observations (status, registers, memory) only.
  bool same_outputs(const RunResult& o) const {
    return status == o.status && regs == o.regs && mem == o.mem;
  }
};

std::uint64_t resolve(const Value& v, const LayoutImage& img);

RunResult run(const LayoutImage& img, const RunInputs& inputs, const SimConfig& cfg = {});

// ---------------------------------------------------------------------------
// Branch-target-injection scenario.

class ScenarioError : public Error {
 public:
  using Error::Error;
};

struct ScenarioLayout {
  std::uint64_t array1_size_addr = 0x2000'0000'0000;
  std::uint64_t array1_addr = 0x2000'0000'1000;
  std::uint64_t array1_len = 16;
  std::uint64_t secret_addr = 0x2000'0000'2000;
  std::uint64_t array2_addr = 0x2000'0010'0000;
  std::uint64_t stride = 512;
  unsigned training_calls = 5;
};

struct AttackResult {
  std::vector<std::optional<std::uint8_t>> recovered;  // nullopt: no unique hit
  std::vector<std::vector<unsigned>> hit_map;           // probe hits per secret byte
  std::uint64_t secret_indexed_hits = 0;                // hits at the true byte value
  std::uint64_t monitor_violations = 0;
  std::uint64_t episodes = 0;

  std::size_t correct_bytes(std::span<const std::uint8_t> secret) const;
  bool leaked() const;
  std::string recovered_hex() const;
};

/// Probes the 256 stride-spaced array2 lines; returns the values that hit.
std::vector<unsigned> probe_cache(const CacheModel& cache, const ScenarioLayout& lay);

/// Runs training, flush, poisoned call and probe for each secret byte. The
/// image must define victim_function, benign_function and dispatcher.
AttackResult spectre_v2_scenario(const LayoutImage& img, std::span<const std::uint8_t> secret, const SimConfig& cfg,
                                 const ScenarioLayout& lay = {});

}  // namespace venkman::specsim
