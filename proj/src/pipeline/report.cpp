//===- report.cpp - Corpus code-size report --------------------------------===//

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "venkman/pipeline.hpp"

namespace venkman::pipeline {

namespace fs = std::filesystem;

std::vector<CorpusProgram> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("corpus directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".s") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CorpusProgram> out;
  for (const auto& f : files) {
    CorpusProgram p;
    p.name = f.stem().string();
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    p.source = ss.str();
    fs::path inputs = f;
    inputs.replace_extension(".inputs.json");
    if (fs::exists(inputs)) {
      std::ifstream ij(inputs);
      try {
        p.inputs = json::parse(ij);
      } catch (const json::exception& e) {
        throw Error(inputs.string() + ": " + e.what());
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

ProgramRow report_program(const CorpusProgram& p, const std::vector<Preset>& presets) {
  ProgramRow row;
  row.name = p.name;
  const AsmProgram prog = parse_asm(p.source);
  std::optional<specsim::RunInputs> inputs;
  if (p.inputs) inputs = run_inputs_from_json(*p.inputs);

  std::optional<specsim::RunResult> base_run;
  for (const auto& preset : presets) {
    const auto out = transform::transform_program(prog, preset.config);
    ConfigRow c;
    c.config = preset.name;
    c.stats = out.stats;
    c.code_bytes = out.image.code_bytes();
    c.stats_ok = stats_conserved(out.stats, out.image);
    const auto verdict = verifier::verify(out.image, policy_for(out));
    c.verified = verdict.pass;
    for (const auto& v : verdict.violations) {
      if (std::find(c.violated_rules.begin(), c.violated_rules.end(), v.rule) == c.violated_rules.end()) {
        c.violated_rules.push_back(v.rule);
      }
    }
    if (!preset.config.enable_align) row.baseline_bytes = c.code_bytes;
    c.ratio = row.baseline_bytes == 0 ? 1.0 : static_cast<double>(c.code_bytes) / static_cast<double>(row.baseline_bytes);

    if (inputs) {
      specsim::SimConfig sim;
      if (preset.config.enable_align) sim.monitor_bundle_size = out.image.bundle_size;
      auto r = specsim::run(out.image, *inputs, sim);
      c.monitor_violations = r.counters.monitor_violations;
      if (!base_run) {
        base_run = r;
        if (p.inputs->contains("expect")) {
          row.expectation_failures = check_expectations(r, p.inputs->at("expect"), out.image);
        }
      }
      c.outputs_match = r.same_outputs(*base_run);
      // Saved return addresses differ between layouts; compare where, not what.
      c.stores_match = std::equal(r.store_trace.begin(), r.store_trace.end(), base_run->store_trace.begin(),
                                  base_run->store_trace.end(),
                                  [](const auto& a, const auto& b) { return a.first == b.first; });
    }
    row.configs.push_back(std::move(c));
  }
  return row;
}

}  // namespace

CorpusReport build_report(const std::vector<CorpusProgram>& corpus, const ReportOptions& opt) {
  const auto presets = standard_presets(opt.bundle_size);
  CorpusReport rep;
  rep.bundle_size = opt.bundle_size;
  for (const auto& p : presets) rep.configs.push_back(p.name);
  for (const auto& p : corpus) {
    try {
      rep.rows.push_back(report_program(p, presets));
    } catch (const Error& e) {
      throw Error(p.name + ": " + e.what());
    }
  }
  for (std::size_t k = 0; k < presets.size(); ++k) {
    double log_sum = 0;
    for (const auto& r : rep.rows) log_sum += std::log(r.configs[k].ratio);
    rep.geomean.emplace_back(presets[k].name, rep.rows.empty() ? 1.0 : std::exp(log_sum / rep.rows.size()));
  }
  if (opt.run_attack) {
    for (std::uint32_t w : opt.attack_windows) {
      ScenarioConfig sc;
      sc.sim.spec_window = w;
      sc.secret.assign(kDefaultSecret.begin(), kDefaultSecret.end());
      AttackSummary s;
      s.spec_window = w;
      const auto base = run_attack(AttackMode::kBaseline, sc, attack_program_source(), opt.bundle_size);
      s.baseline_leaked = base.result.leaked();
      s.baseline_correct = base.result.correct_bytes(sc.secret);
      const auto def = run_attack(AttackMode::kDefended, sc, attack_program_source(), opt.bundle_size);
      s.defended_leaked = def.result.leaked();
      s.defended_secret_hits = def.result.secret_indexed_hits;
      s.defended_monitor_violations = def.result.monitor_violations;
      rep.attacks.push_back(s);
    }
  }
  return rep;
}

json CorpusReport::to_json() const {
  json j;
  j["bundle_size"] = bundle_size;
  j["configs"] = configs;
  j["programs"] = json::array();
  for (const auto& r : rows) {
    json pr{{"name", r.name}, {"baseline_bytes", r.baseline_bytes}};
    if (!r.expectation_failures.empty()) pr["expectation_failures"] = r.expectation_failures;
    pr["configs"] = json::array();
    for (const auto& c : r.configs) {
      json cj{{"config", c.config},
              {"code_bytes", c.code_bytes},
              {"ratio", c.ratio},
              {"verified", c.verified},
              {"stats_conserved", c.stats_ok}};
      if (!c.violated_rules.empty()) cj["violated_rules"] = c.violated_rules;
      if (c.outputs_match) cj["outputs_match"] = *c.outputs_match;
      if (c.stores_match) cj["stores_match"] = *c.stores_match;
      cj["monitor_violations"] = c.monitor_violations;
      cj["stats"] = stats_to_json(c.stats);
      pr["configs"].push_back(std::move(cj));
    }
    j["programs"].push_back(std::move(pr));
  }
  j["geomean"] = json::object();
  for (const auto& [n, g] : geomean) j["geomean"][n] = g;
  j["reference_geomean"] = {{"align", kReferenceAlignGeomean}, {"+fence", kReferenceFenceGeomean}};
  j["attack"] = json::array();
  for (const auto& a : attacks) {
    j["attack"].push_back({{"spec_window", a.spec_window},
                           {"baseline_leaked", a.baseline_leaked},
                           {"baseline_correct_bytes", a.baseline_correct},
                           {"defended_leaked", a.defended_leaked},
                           {"defended_secret_hits", a.defended_secret_hits},
                           {"defended_monitor_violations", a.defended_monitor_violations}});
  }
  return j;
}

std::string CorpusReport::to_markdown() const {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << "| program | baseline bytes |";
  for (std::size_t k = 1; k < configs.size(); ++k) o << ' ' << configs[k] << " |";
  o << "\n|---|---:|";
  for (std::size_t k = 1; k < configs.size(); ++k) o << "---:|";
  o << '\n';
  for (const auto& r : rows) {
    o << "| " << r.name << " | " << r.baseline_bytes << " |";
    for (std::size_t k = 1; k < r.configs.size(); ++k) {
      const auto& c = r.configs[k];
      o << ' ' << c.ratio << 'x';
      if (!c.verified) o << " (verify fail)";
      if (c.outputs_match && !*c.outputs_match) o << " (output diff)";
      o << " |";
    }
    o << '\n';
  }
  o << "| geomean | |";
  for (std::size_t k = 1; k < geomean.size(); ++k) o << ' ' << geomean[k].second << "x |";
  o << "\n\nReference geomeans on large native benchmarks: align " << kReferenceAlignGeomean << "x, +fence "
    << kReferenceFenceGeomean << "x.\n";
  if (!attacks.empty()) {
    o << "\n| spec window | baseline leaked | baseline bytes recovered | defended leaked | defended secret hits |\n"
         "|---:|---|---:|---|---:|\n";
    for (const auto& a : attacks) {
      o << "| " << a.spec_window << " | " << (a.baseline_leaked ? "yes" : "no") << " | " << a.baseline_correct
        << " | " << (a.defended_leaked ? "yes" : "no") << " | " << a.defended_secret_hits << " |\n";
    }
  }
  return o.str();
}

}  // namespace venkman::pipeline
