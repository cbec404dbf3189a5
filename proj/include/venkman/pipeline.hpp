//===- pipeline.hpp - End-to-end driver used by the CLI and tests -*- C++ -*-===//
//
// Named hardening presets, JSON codecs, the attack driver and the corpus
// size report.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "venkman/asm.hpp"
#include "venkman/specsim.hpp"
#include "venkman/transform.hpp"
#include "venkman/verifier.hpp"

namespace venkman::pipeline {

using json = nlohmann::ordered_json;

struct Preset {
  std::string name;
  transform::HardeningConfig config;
};

/// baseline, align, align+cfi, +sfi-store, +fence, +sfi-load; each adds one
/// pass to the one before.
std::vector<Preset> standard_presets(std::uint32_t bundle_size = 32);
const Preset& find_preset(const std::vector<Preset>& presets, std::string_view name);

/// The configuration the attack runs against: alignment, CFI, store SFI and
/// fences.
transform::HardeningConfig defended_config(std::uint32_t bundle_size = 32);

verifier::Policy policy_for(const transform::HardeningConfig& c, std::vector<std::string> exempt = {});
verifier::Policy policy_for(const transform::TransformOutput& out);

/// True when the per-pass counts add up to the total and the byte size
/// matches the emitted image.
bool stats_conserved(const transform::TransformStats& s, const LayoutImage& img);

/// Reads a policy from transform stats JSON ({config, exempt_functions}) or
/// from a bare config object.
verifier::Policy policy_from_json(const nlohmann::ordered_json& j);

// ---------------------------------------------------------------------------
// JSON.

json stats_to_json(const transform::TransformStats& s);
json config_to_json(const transform::HardeningConfig& c);

/// Integers, "0x..." strings, or "@symbol" references.
specsim::Value value_from_json(const json& j);

/// {entry, regs:{"r3": v}, mem:[{addr, words, bytes}], observe_regs,
///  observe_mem:[[addr, len]], limit}
specsim::RunInputs run_inputs_from_json(const json& j);
json run_result_to_json(const specsim::RunResult& r);

/// Compares a result against an {status, regs:{"rN": v}, mem:[{addr, words}]}
/// document; returns one message per mismatch. Symbol values resolve against
/// `img`.
std::vector<std::string> check_expectations(const specsim::RunResult& r, const json& expect, const LayoutImage& img);

struct ScenarioConfig {
  specsim::SimConfig sim;
  std::vector<std::uint8_t> secret;
};

inline constexpr std::string_view kDefaultSecret = "The Magic Words";

/// {btb_slots, rsb_depth, line_size, spec_window, direct_branch_btb,
///  store_forwarding, secret}; missing keys keep their defaults.
ScenarioConfig scenario_config_from_json(const json& j);
json scenario_config_to_json(const ScenarioConfig& c);

/// {recovered_hex, per_byte_hits, leaked} plus diagnostics.
json attack_result_to_json(const specsim::AttackResult& r, std::span<const std::uint8_t> secret);

// ---------------------------------------------------------------------------
// Attack.

/// Assembly of the dispatcher/victim program the attack targets.
std::string_view attack_program_source();

enum class AttackMode { kBaseline, kDefended };

AttackMode parse_attack_mode(std::string_view s);

struct AttackRun {
  specsim::AttackResult result;
  verifier::VerifierReport verdict;  // of the attacked image
  std::uint32_t bundle_size = 0;
};

/// Transforms `source` (baseline layout or defended_config), verifies it,
/// and runs the scenario. The defended run enables the fetch monitor.
AttackRun run_attack(AttackMode mode, const ScenarioConfig& cfg, std::string_view source = attack_program_source(),
                     std::uint32_t bundle_size = 32);

// ---------------------------------------------------------------------------
// Corpus.

struct CorpusProgram {
  std::string name;
  std::string source;
  std::optional<json> inputs;  // contents of <name>.inputs.json, if present
};

/// Every *.s file in `dir`, sorted by name.
std::vector<CorpusProgram> load_corpus(const std::filesystem::path& dir);

struct ConfigRow {
  std::string config;
  std::uint64_t code_bytes = 0;
  double ratio = 1.0;
  bool verified = false;
  std::vector<std::string> violated_rules;
  bool stats_ok = false;
  std::optional<bool> outputs_match;  // absent when the program has no inputs
  std::optional<bool> stores_match;  // same store address sequence
  std::uint64_t monitor_violations = 0;
  transform::TransformStats stats;
};

struct ProgramRow {
  std::string name;
  std::uint64_t baseline_bytes = 0;
  std::vector<ConfigRow> configs;
  std::vector<std::string> expectation_failures;  // baseline vs documented outputs
};

struct AttackSummary {
  std::uint32_t spec_window = 0;
  bool baseline_leaked = false;
  std::size_t baseline_correct = 0;
  bool defended_leaked = false;
  std::uint64_t defended_secret_hits = 0;
  std::uint64_t defended_monitor_violations = 0;
};

struct CorpusReport {
  std::uint32_t bundle_size = 32;
  std::vector<std::string> configs;
  std::vector<ProgramRow> rows;
  std::vector<std::pair<std::string, double>> geomean;  // per config
  std::vector<AttackSummary> attacks;

  json to_json() const;
  std::string to_markdown() const;
};

/// Reference code-size ratios measured on large native benchmarks; shown
/// next to the corpus figures for comparison only.
inline constexpr double kReferenceAlignGeomean = 1.61;
inline constexpr double kReferenceFenceGeomean = 1.93;

struct ReportOptions {
  std::uint32_t bundle_size = 32;
  bool run_attack = true;
  std::vector<std::uint32_t> attack_windows{8, 32, 128};
};

CorpusReport build_report(const std::vector<CorpusProgram>& corpus, const ReportOptions& opt = {});

}  // namespace venkman::pipeline
