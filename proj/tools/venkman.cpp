//===- venkman.cpp - Command-line driver -----------------------------------===//
//
//   venkman transform prog.s -o prog.vkm [--cfi] [--sfi-store] [--sfi-load]
//                                         [--fence] [--bundle-size N]
//   venkman verify prog.vkm [--json] ...        exit 0 pass, 1 fail, 2 bad file
//   venkman sim prog.vkm --input in.json
//   venkman attack --mode baseline|defended [--config scenario.json]
//   venkman report corpus/ [--json out.json] [--markdown out.md]
//
//===----------------------------------------------------------------------===//

#include <bit>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "venkman/pipeline.hpp"

namespace {

using namespace venkman;
using pipeline::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

const auto kBundleSize = CLI::Validator(
    [](std::string& s) -> std::string {
      unsigned long v = 0;
      try {
        v = std::stoul(s);
      } catch (...) {
        return "bundle size must be an integer";
      }
      if (v < 16 || v > 0x8000 || !std::has_single_bit(v)) return "bundle size must be a power of two in [16, 32768]";
      return {};
    },
    "POW2", "bundle size");

// Pass selection shared by transform, verify and sim.
struct PassFlags {
  std::uint32_t bundle_size = 32;
  bool baseline = false;
  bool cfi = false;
  bool sfi_store = false;
  bool sfi_load = false;
  bool fence = false;
  std::string preset;

  void add(CLI::App* app) {
    app->add_option("--bundle-size", bundle_size, "Bundle size in bytes")->check(kBundleSize);
    app->add_flag("--baseline,--no-align", baseline, "Unaligned baseline layout, no passes");
    app->add_flag("--cfi,!--no-cfi", cfi, "Mask code pointers moved into LR/CTR");
    app->add_flag("--sfi-store", sfi_store, "Sandbox stores into the data region");
    app->add_flag("--sfi-load", sfi_load, "Sandbox loads into user space");
    app->add_flag("--fence", fence, "Fence every load-carrying bundle");
    app->add_option("--preset", preset, "baseline, align, align+cfi, +sfi-store, +fence or +sfi-load");
  }

  transform::HardeningConfig config() const {
    transform::HardeningConfig c;
    if (!preset.empty()) c = pipeline::find_preset(pipeline::standard_presets(bundle_size), preset).config;
    c.bundle_size_bytes = bundle_size;
    if (baseline) c.enable_align = false;
    c.enable_cfi = c.enable_cfi || cfi;
    c.enable_sfi_store = c.enable_sfi_store || sfi_store;
    c.enable_sfi_load = c.enable_sfi_load || sfi_load;
    c.enable_fence = c.enable_fence || fence;
    c.validate();
    return c;
  }
};

int cmd_transform(const std::string& input, const std::string& output, const std::string& stats_path,
                  const std::string& dot_path, const PassFlags& flags) {
  const std::string text = read_file(input);
  AsmProgram prog;
  try {
    prog = parse_asm(text);
  } catch (const ParseError& e) {
    std::cerr << input << ':' << e.line() << ':' << e.column() << ": error: " << e.what() << '\n';
    return 1;
  }
  const auto cfgv = flags.config();
  transform::TransformOutput out;
  try {
    out = transform::transform_program(prog, cfgv);
  } catch (const Error& e) {
    std::cerr << input << ": error: " << e.what() << '\n';
    return 1;
  }
  if (!dot_path.empty()) write_file(dot_path, cfg::to_dot(cfg::build_cfg(prog)));
  const auto bytes = transform::emit_image(out.image);
  write_file(output, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  json st;
  st["config"] = pipeline::config_to_json(out.config);
  st["stats"] = pipeline::stats_to_json(out.stats);
  st["exempt_functions"] = out.exempt_functions;
  if (!stats_path.empty()) {
    write_file(stats_path, st.dump(2) + "\n");
  } else {
    std::cout << st.dump(2) << '\n';
  }
  return 0;
}

verifier::Policy policy_from_flags(const PassFlags& flags, const std::vector<std::string>& exempt,
                                   const std::string& policy_path) {
  if (!policy_path.empty()) {
    auto p = pipeline::policy_from_json(read_json(policy_path));
    p.exempt_functions.insert(p.exempt_functions.end(), exempt.begin(), exempt.end());
    return p;
  }
  return pipeline::policy_for(flags.config(), exempt);
}

int cmd_verify(const std::string& image, const PassFlags& flags, const std::vector<std::string>& exempt,
               const std::string& policy_path, bool as_json, const std::string& out_path) {
  LayoutImage img;
  try {
    img = verifier::load_image_file(image);
  } catch (const verifier::LoadError& e) {
    if (as_json) {
      std::cout << json{{"verdict", "error"}, {"error", e.what()}}.dump(2) << '\n';
    } else {
      std::cerr << image << ": " << e.what() << '\n';
    }
    return 2;
  }
  const auto report = verifier::verify(img, policy_from_flags(flags, exempt, policy_path));
  if (!out_path.empty()) write_file(out_path, report.to_json() + "\n");
  if (as_json) {
    std::cout << report.to_json() << '\n';
  } else {
    for (const auto& v : report.violations) {
      std::cout << v.rule << " at 0x" << std::hex << v.addr << std::dec << '+' << v.offset << ": " << v.msg << '\n';
    }
    std::cout << (report.pass ? "pass" : "fail") << '\n';
  }
  return report.pass ? 0 : 1;
}

int cmd_sim(const std::string& image, const std::string& input, std::uint64_t limit, bool unverified,
            const std::string& sim_config, const PassFlags& flags, const std::vector<std::string>& exempt,
            const std::string& policy_path) {
  LayoutImage img;
  try {
    img = verifier::load_image_file(image);
  } catch (const verifier::LoadError& e) {
    std::cerr << image << ": " << e.what() << '\n';
    return 2;
  }
  if (!unverified) {
    auto policy = policy_from_flags(flags, exempt, policy_path);
    if (policy_path.empty()) {
      policy.align = img.bundle_size != 4;
      policy.bundle_size = img.bundle_size;
    }
    const auto report = verifier::verify(img, policy);
    if (!report.pass) {
      std::cerr << image << ": verification failed (" << report.violations.front().rule << ": "
                << report.violations.front().msg << "); pass --unverified to run anyway\n";
      return 1;
    }
  }
  specsim::RunInputs in;
  if (!input.empty()) in = pipeline::run_inputs_from_json(read_json(input));
  if (limit != 0) in.limit = limit;
  specsim::SimConfig sc;
  if (!sim_config.empty()) sc = pipeline::scenario_config_from_json(read_json(sim_config)).sim;
  const auto r = specsim::run(img, in, sc);
  std::cout << pipeline::run_result_to_json(r).dump(2) << '\n';
  return r.status == "trap" ? 1 : 0;
}

int cmd_attack(const std::string& mode, const std::string& config, const std::string& program,
               std::uint32_t bundle_size) {
  pipeline::ScenarioConfig sc = pipeline::scenario_config_from_json(config.empty() ? json::object() : read_json(config));
  const std::string source = program.empty() ? std::string(pipeline::attack_program_source()) : read_file(program);
  const auto run = pipeline::run_attack(pipeline::parse_attack_mode(mode), sc, source, bundle_size);
  json j = pipeline::attack_result_to_json(run.result, sc.secret);
  j["mode"] = mode;
  j["verified"] = run.verdict.pass;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_report(const std::string& dir, const std::string& json_out, const std::string& md_out,
               std::uint32_t bundle_size, bool no_attack) {
  pipeline::ReportOptions opt;
  opt.bundle_size = bundle_size;
  opt.run_attack = !no_attack;
  const auto rep = pipeline::build_report(pipeline::load_corpus(dir), opt);
  const std::string js = rep.to_json().dump(2) + "\n";
  const std::string md = rep.to_markdown();
  if (!json_out.empty()) write_file(json_out, js);
  if (!md_out.empty()) write_file(md_out, md);
  std::cout << md;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bundle-alignment hardening toolchain for a toy ISA"};
  app.require_subcommand(1);

  PassFlags tflags;
  std::string t_in, t_out, t_stats, t_dot;
  auto* t = app.add_subcommand("transform", "Harden and lay out an assembly program");
  t->add_option("input", t_in, "Assembly source")->required()->check(CLI::ExistingFile);
  t->add_option("-o,--output", t_out, "Output image")->required();
  t->add_option("--stats", t_stats, "Write stats JSON here instead of stdout");
  t->add_option("--dot", t_dot, "Write the control-flow graphs as Graphviz");
  tflags.add(t);

  PassFlags vflags;
  std::string v_in, v_policy, v_out;
  std::vector<std::string> v_exempt;
  bool v_json = false;
  auto* v = app.add_subcommand("verify", "Check an image against the hardening rules");
  v->add_option("image", v_in, "VKM1 image")->required();
  v->add_flag("--json", v_json, "Print the JSON report");
  v->add_option("-o,--output", v_out, "Also write the JSON report to a file");
  v->add_option("--exempt", v_exempt, "Functions whose LR loads need no mask");
  v->add_option("--policy", v_policy, "Stats JSON from transform; supplies the configuration");
  vflags.add(v);

  PassFlags sflags;
  std::string s_in, s_input, s_config, s_policy;
  std::vector<std::string> s_exempt;
  std::uint64_t s_limit = 0;
  bool s_unverified = false;
  auto* s = app.add_subcommand("sim", "Run an image in the speculative simulator");
  s->add_option("image", s_in, "VKM1 image")->required();
  s->add_option("--input", s_input, "Run inputs JSON");
  s->add_option("--limit", s_limit, "Committed instruction limit");
  s->add_flag("--unverified", s_unverified, "Skip verification");
  s->add_option("--config", s_config, "Simulator configuration JSON");
  s->add_option("--exempt", s_exempt, "Functions whose LR loads need no mask");
  s->add_option("--policy", s_policy, "Stats JSON from transform; supplies the configuration");
  sflags.add(s);

  std::string a_mode = "baseline", a_config, a_program;
  std::uint32_t a_bundle = 32;
  auto* a = app.add_subcommand("attack", "Run the branch target injection scenario");
  a->add_option("--mode", a_mode, "baseline or defended")->check(CLI::IsMember({"baseline", "defended"}));
  a->add_option("--config", a_config, "Scenario configuration JSON");
  a->add_option("--program", a_program, "Alternative scenario program");
  a->add_option("--bundle-size", a_bundle, "Bundle size in bytes")->check(kBundleSize);

  std::string r_dir, r_json, r_md;
  std::uint32_t r_bundle = 32;
  bool r_no_attack = false;
  auto* r = app.add_subcommand("report", "Code-size report over a corpus directory");
  r->add_option("corpus", r_dir, "Directory of .s programs")->required()->check(CLI::ExistingDirectory);
  r->add_option("--json", r_json, "Write the JSON report here");
  r->add_option("--markdown", r_md, "Write the markdown table here");
  r->add_option("--bundle-size", r_bundle, "Bundle size in bytes")->check(kBundleSize);
  r->add_flag("--no-attack", r_no_attack, "Skip the attack runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*t) return cmd_transform(t_in, t_out, t_stats, t_dot, tflags);
    if (*v) return cmd_verify(v_in, vflags, v_exempt, v_policy, v_json, v_out);
    if (*s) return cmd_sim(s_in, s_input, s_limit, s_unverified, s_config, sflags, s_exempt, s_policy);
    if (*a) return cmd_attack(a_mode, a_config, a_program, a_bundle);
    if (*r) return cmd_report(r_dir, r_json, r_md, r_bundle, r_no_attack);
  } catch (const transform::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
