// Python bindings. Structured values cross the boundary as JSON text; the
// package __init__ turns them into dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "venkman/pipeline.hpp"

namespace py = pybind11;
using namespace venkman;
using pipeline::json;

namespace {

LayoutImage image_from(const py::bytes& b) {
  const std::string s = b;
  return verifier::load_image(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

transform::HardeningConfig config_for(const std::string& preset, std::uint32_t bundle_size) {
  auto c = pipeline::find_preset(pipeline::standard_presets(bundle_size), preset).config;
  c.validate();
  return c;
}

py::tuple transform_source(const std::string& source, const std::string& preset, std::uint32_t bundle_size) {
  const auto out = transform::transform_program(parse_asm(source), config_for(preset, bundle_size));
  const auto bytes = transform::emit_image(out.image);
  json meta{{"config", pipeline::config_to_json(out.config)},
            {"stats", pipeline::stats_to_json(out.stats)},
            {"exempt_functions", out.exempt_functions}};
  return py::make_tuple(py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size()), meta.dump());
}

std::string verify_image(const py::bytes& image, const std::string& policy_json) {
  const auto img = image_from(image);
  auto policy = pipeline::policy_from_json(json::parse(policy_json));
  if (!policy.align) policy.bundle_size = 4;
  return verifier::verify(img, policy).to_json();
}

std::string run_image(const py::bytes& image, const std::string& inputs_json, const std::string& sim_json) {
  const auto img = image_from(image);
  const auto in = pipeline::run_inputs_from_json(json::parse(inputs_json));
  const auto sc = pipeline::scenario_config_from_json(json::parse(sim_json)).sim;
  return pipeline::run_result_to_json(specsim::run(img, in, sc)).dump();
}

std::string attack(const std::string& mode, const std::string& config_json, std::uint32_t bundle_size) {
  const auto sc = pipeline::scenario_config_from_json(json::parse(config_json));
  const auto r = pipeline::run_attack(pipeline::parse_attack_mode(mode), sc, pipeline::attack_program_source(),
                                      bundle_size);
  auto j = pipeline::attack_result_to_json(r.result, sc.secret);
  j["mode"] = mode;
  j["verified"] = r.verdict.pass;
  return j.dump();
}

std::string report(const std::string& dir, std::uint32_t bundle_size, bool run_attack) {
  pipeline::ReportOptions opt;
  opt.bundle_size = bundle_size;
  opt.run_attack = run_attack;
  return pipeline::build_report(pipeline::load_corpus(dir), opt).to_json().dump();
}

}  // namespace

PYBIND11_MODULE(_venkman, m) {
  m.doc() = "Bundle-alignment hardening toolchain for a toy ISA";
  py::register_exception<Error>(m, "VenkmanError", PyExc_ValueError);

  m.def("presets", [] {
    std::vector<std::string> names;
    for (const auto& p : pipeline::standard_presets()) names.push_back(p.name);
    return names;
  });
  m.def("assemble", [](const std::string& line) { return isa::encode(parse_instruction(line)); }, py::arg("line"));
  m.def("disassemble", [](isa::Word w) { return print_instruction(isa::decode(w)); }, py::arg("word"));
  m.def("format_program", [](const std::string& src) { return print_asm(parse_asm(src)); }, py::arg("source"));
  m.def("attack_program", [] { return std::string(pipeline::attack_program_source()); });
  m.def("transform", &transform_source, py::arg("source"), py::arg("preset"), py::arg("bundle_size"));
  m.def("verify", &verify_image, py::arg("image"), py::arg("policy"));
  m.def("run", &run_image, py::arg("image"), py::arg("inputs"), py::arg("sim"));
  m.def("attack", &attack, py::arg("mode"), py::arg("config"), py::arg("bundle_size"));
  m.def("report", &report, py::arg("corpus"), py::arg("bundle_size"), py::arg("run_attack"));
}
