#include "sddectl/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "sddectl/car_following.hpp"
#include "sddectl/controllers.hpp"
#include "sddectl/io.hpp"
#include "sddectl/simulate.hpp"
#include "sddectl/verification.hpp"

namespace sddectl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json default_config() {
  return json{
      {"scenario",
       {{"model", "car_following"}, {"preset", nullptr}, {"index", 1},
        {"params", json::object()}}},
      {"functionals",
       {{"sclkf", "quadratic_tracking"}, {"scbkf", "headway_barrier"}}},
      {"controller", "sliding"},
      {"dt", 1e-3},
      {"horizon", 60.0},
      {"paths", 200},
      {"seed", 42},
      {"threads", 0},
      {"logs", json::array({"V", "B", "h", "U"})},
      {"identity_count", 1000},
      {"boundary_samples", 0},
      {"out_dir", "out"},
  };
}

json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("config_parse", std::string("configuration is not valid JSON: ") +
                                    e.what());
  }
}

void apply_override(json& config, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error("config_parse", "override '" + spec + "' is not of the form key=value");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // unquoted strings pass through
  }

  json* node = &config;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) {
      throw Error("config_parse", "override '" + spec + "' has an empty path segment");
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

double require_positive(const json& config, const std::string& field) {
  const double value = config.at(field).get<double>();
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error("invariant", "field '" + field + "' must be positive");
  }
  return value;
}

/// Scenario resolved against the registries plus everything a command needs.
struct Resolved {
  CarFollowingScenario scenario;
  Controller controller;
  std::string controller_name;
  double dt = 1e-3;
  double horizon = 60.0;
  std::int64_t paths = 200;
  std::uint64_t seed = 42;
  int threads = 0;
  std::int64_t identity_count = 1000;
  std::int64_t boundary_samples = 0;
  std::vector<LogSpec> logs;
  fs::path out_dir;
  json effective;
};

CarFollowingParams params_from_json(CarFollowingParams params, const json& p) {
  if (p.contains("mass")) params.mass = p.at("mass").get<double>();
  if (p.contains("drag_a0")) params.drag0 = p.at("drag_a0").get<double>();
  if (p.contains("drag_a1")) params.drag1 = p.at("drag_a1").get<double>();
  if (p.contains("drag_a2")) params.drag2 = p.at("drag_a2").get<double>();
  if (p.contains("v_d")) params.desired_velocity = p.at("v_d").get<double>();
  if (p.contains("varrho")) params.varrho = p.at("varrho").get<double>();
  if (p.contains("delta")) params.delay = p.at("delta").get<double>();
  if (p.contains("headway")) params.headway = p.at("headway").get<double>();
  if (p.contains("quad_coeff")) params.quad_coeff = p.at("quad_coeff").get<double>();
  if (p.contains("noise_scale")) params.noise_scale = p.at("noise_scale").get<double>();
  if (p.contains("gain")) params.gain = p.at("gain").get<double>();
  if (p.contains("smoothing")) params.smoothing = p.at("smoothing").get<double>();
  if (p.contains("transversality_tol")) {
    params.transversality_tol = p.at("transversality_tol").get<double>();
  }
  if (p.contains("sontag_lambda")) {
    params.sontag_lambda = p.at("sontag_lambda").get<double>();
  }
  if (p.contains("trace_weighting")) {
    const std::string mode = p.at("trace_weighting").get<std::string>();
    if (mode == "as_printed") {
      params.trace_weighting = TraceWeighting::AsPrinted;
    } else if (mode == "strict_ito") {
      params.trace_weighting = TraceWeighting::StrictIto;
    } else {
      throw Error("invariant",
                  "field 'trace_weighting' must be as_printed or strict_ito");
    }
  }
  if (p.contains("init")) {
    const auto values = p.at("init").get<std::vector<double>>();
    if (values.size() != 3) {
      throw Error("invariant", "field 'init' must hold exactly 3 values");
    }
    params.initial_state = (Vec(3) << values[0], values[1], values[2]).finished();
  }
  if (p.contains("lead_accel")) {
    const json& la = p.at("lead_accel");
    if (la.is_number()) {
      params.lead_accel = LeadAccelProfile::constant(la.get<double>());
    } else if (la.is_object()) {
      params.lead_accel = LeadAccelProfile(
          la.at("times").get<std::vector<double>>(),
          la.at("values").get<std::vector<double>>());
    } else {
      throw Error("invariant",
                  "field 'lead_accel' must be a number or {times, values}");
    }
  }
  return params;
}

std::vector<LogSpec> build_logs(const CarFollowingScenario& scenario,
                                const std::vector<std::string>& names) {
  std::vector<LogSpec> logs;
  const Sclkf sclkf = scenario.sclkf;
  const Scbkf scbkf = scenario.scbkf;
  const SlidingSurface surface = scenario.surface;
  for (const std::string& name : names) {
    if (name == "V") {
      logs.push_back({name, [sclkf](const HistorySegment& phi) {
                        return sclkf.functional->value(phi);
                      }});
    } else if (name == "B") {
      logs.push_back({name, [scbkf](const HistorySegment& phi) {
                        return scbkf.eval_barrier(phi);
                      }});
    } else if (name == "h") {
      logs.push_back({name, [scbkf](const HistorySegment& phi) {
                        return scbkf.eval_h(phi);
                      }});
    } else if (name == "U") {
      logs.push_back({name, [surface](const HistorySegment& phi) {
                        return surface.value(phi);
                      }});
    } else {
      throw Error("unknown_name", "unknown log functional '" + name +
                                      "' (known: V, B, h, U)");
    }
  }
  return logs;
}

Resolved resolve(const RunRequest& request, const json* preset_override_member = nullptr) {
  json config = default_config();
  config.merge_patch(parse_config_text(request.config_text));
  for (const std::string& item : request.overrides) {
    apply_override(config, item);
  }
  if (request.seed.has_value()) {
    config["seed"] = *request.seed;
  }
  if (request.paths.has_value()) {
    config["paths"] = *request.paths;
  }
  if (request.out_dir.has_value()) {
    config["out_dir"] = *request.out_dir;
  }
  if (preset_override_member != nullptr) {
    config["scenario"]["preset"] = (*preset_override_member)["preset"];
    config["scenario"]["index"] = (*preset_override_member)["index"];
  }

  Resolved resolved;

  const json& scenario_cfg = config.at("scenario");
  const std::string model_name = scenario_cfg.at("model").get<std::string>();
  if (model_name != "car_following") {
    throw Error("unknown_name", "unknown model '" + model_name +
                                    "' (registered: car_following)");
  }
  const std::string sclkf_name = config.at("functionals").at("sclkf").get<std::string>();
  if (sclkf_name != "quadratic_tracking") {
    throw Error("unknown_name", "unknown sclkf '" + sclkf_name +
                                    "' (registered: quadratic_tracking)");
  }
  const std::string scbkf_name = config.at("functionals").at("scbkf").get<std::string>();
  if (scbkf_name != "headway_barrier") {
    throw Error("unknown_name", "unknown scbkf '" + scbkf_name +
                                    "' (registered: headway_barrier)");
  }

  resolved.dt = require_positive(config, "dt");
  resolved.horizon = require_positive(config, "horizon");
  resolved.paths = config.at("paths").get<std::int64_t>();
  if (resolved.paths < 1) {
    throw Error("invariant", "field 'paths' must be >= 1");
  }
  resolved.seed = config.at("seed").get<std::uint64_t>();
  resolved.threads = config.at("threads").get<int>();
  resolved.identity_count = config.at("identity_count").get<std::int64_t>();
  if (resolved.identity_count < 0) {
    throw Error("invariant", "field 'identity_count' must be >= 0");
  }
  resolved.boundary_samples = config.at("boundary_samples").get<std::int64_t>();
  if (resolved.boundary_samples < 0) {
    throw Error("invariant", "field 'boundary_samples' must be >= 0");
  }

  CarFollowingParams params;
  std::string scenario_name = "car_following";
  if (!scenario_cfg.at("preset").is_null()) {
    const std::string preset_name = scenario_cfg.at("preset").get<std::string>();
    const int index = scenario_cfg.at("index").get<int>();
    CarFollowingScenario base = preset(preset_family_from_name(preset_name), index);
    params = base.params;
    scenario_name = base.name;
  }
  params = params_from_json(params, scenario_cfg.at("params"));
  params.dt = resolved.dt;
  params.horizon = resolved.horizon;
  try {
    params.validate();
  } catch (const ConfigError& e) {
    throw Error("invariant", e.what());
  }
  resolved.scenario = make_scenario(params, scenario_name);

  resolved.controller_name = config.at("controller").get<std::string>();
  if (resolved.controller_name == "sliding") {
    const SlidingController controller = resolved.scenario.controller;
    resolved.controller = [controller](const HistorySegment& phi) {
      return controller(phi);
    };
  } else if (resolved.controller_name == "sontag") {
    SontagController controller;
    controller.sclkf = resolved.scenario.sclkf;
    controller.lambda = params.sontag_lambda;
    const SddeModel model = resolved.scenario.model;
    resolved.controller = [controller, model](const HistorySegment& phi) {
      return stabilizing_control(controller, model, phi);
    };
  } else {
    throw Error("unknown_name", "unknown controller '" + resolved.controller_name +
                                    "' (registered: sliding, sontag)");
  }

  resolved.logs =
      build_logs(resolved.scenario, config.at("logs").get<std::vector<std::string>>());
  resolved.out_dir = fs::path(config.at("out_dir").get<std::string>());
  resolved.effective = config;
  return resolved;
}

// --- report rendering -------------------------------------------------------

std::string render_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string out;
  for (const auto& [key, value] : kv) {
    out += key + "=" + value + "\n";
  }
  return out;
}

void write_verify_outputs(const fs::path& dir, const Resolved& resolved,
                          const MonteCarloReport& report) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("scenario", resolved.scenario.name);
  kv.emplace_back("controller", resolved.controller_name);
  kv.emplace_back("paths", std::to_string(report.paths));
  kv.emplace_back("completed_paths", std::to_string(report.completed_paths));
  kv.emplace_back("failed_paths", std::to_string(report.failed_paths));
  kv.emplace_back("horizon", format_sig17(report.horizon));
  kv.emplace_back("dt", format_sig17(report.dt));
  kv.emplace_back("seed_base", std::to_string(report.seed_base));
  kv.emplace_back("safe_paths", std::to_string(report.safe_paths));
  kv.emplace_back("safety_probability", format_sig17(report.safety_probability));
  kv.emplace_back("safety_ci_lo", format_sig17(report.safety_ci.lo));
  kv.emplace_back("safety_ci_hi", format_sig17(report.safety_ci.hi));
  kv.emplace_back("margin_safe_paths", std::to_string(report.margin_safe_paths));
  kv.emplace_back("margin_safety_probability",
                  format_sig17(report.margin_safety_probability));
  kv.emplace_back("margin_ci_lo", format_sig17(report.margin_ci.lo));
  kv.emplace_back("margin_ci_hi", format_sig17(report.margin_ci.hi));
  kv.emplace_back("mean_terminal_error", format_sig17(report.mean_terminal_error));
  for (const auto& [category, count] : report.failure_reasons) {
    kv.emplace_back("failures." + category, std::to_string(count));
  }
  kv.emplace_back("config", resolved.effective.dump());

  std::ostringstream txt;
  txt << "sddectl verify report\n";
  txt << "scenario " << resolved.scenario.name << ", controller "
      << resolved.controller_name << "\n";
  txt << "paths " << report.paths << " (completed " << report.completed_paths
      << ", failed " << report.failed_paths << ")\n";
  txt << "safety  P[min h >= 0]      = " << format_sig17(report.safety_probability)
      << "  CI95 [" << format_sig17(report.safety_ci.lo) << ", "
      << format_sig17(report.safety_ci.hi) << "]\n";
  txt << "safety  P[min margin >= 0] = "
      << format_sig17(report.margin_safety_probability) << "  CI95 ["
      << format_sig17(report.margin_ci.lo) << ", "
      << format_sig17(report.margin_ci.hi) << "]\n";
  txt << "mean terminal velocity error = "
      << format_sig17(report.mean_terminal_error) << "\n";
  if (!report.failure_reasons.empty()) {
    txt << "failures:";
    for (const auto& [category, count] : report.failure_reasons) {
      txt << " " << category << "=" << count;
    }
    txt << "\n";
  }
  txt << "effective configuration:\n" << resolved.effective.dump(2) << "\n";

  atomic_write(dir / "verify_report.kv", render_kv(kv));
  atomic_write(dir / "verify_report.txt", txt.str());
  atomic_write(dir / "curves.csv",
               curves_to_csv(report.times, report.curve_names, report.mean_curves));
  atomic_write(dir / "min_h.csv", per_path_to_csv(report.per_path));
}

MonteCarloReport run_verify(const Resolved& resolved) {
  BatchOptions options;
  options.curves = resolved.logs;
  options.pointwise_margin = resolved.scenario.pointwise_margin();
  options.terminal_error = resolved.scenario.terminal_velocity_error();
  options.threads = resolved.threads;
  return estimate_safety(resolved.scenario.model, resolved.controller,
                         resolved.scenario.scbkf, resolved.scenario.initializer(),
                         resolved.scenario.params.delay, resolved.horizon,
                         resolved.dt, resolved.paths, resolved.seed, options);
}

int command_simulate(const Resolved& resolved) {
  SimulationTrace trace = simulate(
      resolved.scenario.model, resolved.controller, resolved.scenario.initializer(),
      resolved.scenario.params.delay, resolved.horizon, resolved.dt, resolved.seed,
      resolved.logs);
  atomic_write(resolved.out_dir / "trace.csv", trace_to_csv(trace));
  std::cout << "trace: " << (resolved.out_dir / "trace.csv").string() << " ("
            << trace.times.size() << " rows";
  if (trace.failure.has_value()) {
    std::cout << ", aborted at step " << trace.failure->step << ": "
              << trace.failure->category;
  }
  std::cout << ")\n";
  return kExitOk;
}

int command_verify(const Resolved& resolved) {
  const MonteCarloReport report = run_verify(resolved);
  write_verify_outputs(resolved.out_dir, resolved, report);
  std::cout << "safety probability " << format_sig17(report.safety_probability)
            << " [" << format_sig17(report.safety_ci.lo) << ", "
            << format_sig17(report.safety_ci.hi) << "], reports in "
            << resolved.out_dir.string() << "\n";
  return kExitOk;
}

int command_identities(const Resolved& resolved) {
  IdentityBundle bundle;
  bundle.model = resolved.scenario.model;
  bundle.sclkf = resolved.scenario.sclkf;
  bundle.sontag_lambda = resolved.scenario.params.sontag_lambda;
  bundle.sliding = resolved.scenario.controller;
  const auto sampler = interior_buffer_sampler(resolved.scenario, resolved.seed);

  const IdentityReport report =
      identity_suite(bundle, sampler, resolved.identity_count);
  const FeasibilityReport feasibility =
      feasibility_spot_check(resolved.scenario.model, resolved.scenario.sclkf,
                             resolved.scenario.scbkf, sampler,
                             resolved.identity_count);

  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("scenario", resolved.scenario.name);
  kv.emplace_back("buffers", std::to_string(report.buffers));
  kv.emplace_back("all_pass", report.all_pass ? "1" : "0");
  std::ostringstream txt;
  txt << "sddectl identity report\n";
  txt << "scenario " << resolved.scenario.name << ", " << report.buffers
      << " sampled interior buffers\n";
  for (const IdentityCheckResult& check : report.checks) {
    kv.emplace_back("check." + check.name + ".pass", check.pass ? "1" : "0");
    kv.emplace_back("check." + check.name + ".evaluated",
                    std::to_string(check.evaluated));
    kv.emplace_back("check." + check.name + ".skipped",
                    std::to_string(check.skipped));
    kv.emplace_back("check." + check.name + ".violations",
                    std::to_string(check.violations));
    kv.emplace_back("check." + check.name + ".worst_abs",
                    format_sig17(check.worst_abs));
    kv.emplace_back("check." + check.name + ".worst_rel",
                    format_sig17(check.worst_rel));
    txt << (check.pass ? "  pass " : "  FAIL ") << check.name << ": evaluated "
        << check.evaluated << ", skipped " << check.skipped << ", violations "
        << check.violations << ", worst |err| " << format_sig17(check.worst_abs)
        << " (" << format_sig17(check.worst_rel) << " of tolerance)\n";
  }
  kv.emplace_back("feasibility.sclkf_unconstrained",
                  std::to_string(feasibility.sclkf_unconstrained));
  kv.emplace_back("feasibility.sclkf_violations",
                  std::to_string(feasibility.sclkf_violations));
  kv.emplace_back("feasibility.sclkf_worst_margin",
                  format_sig17(feasibility.sclkf_worst_margin));
  kv.emplace_back("feasibility.scbkf_unconstrained",
                  std::to_string(feasibility.scbkf_unconstrained));
  kv.emplace_back("feasibility.scbkf_violations",
                  std::to_string(feasibility.scbkf_violations));
  kv.emplace_back("feasibility.scbkf_worst_margin",
                  format_sig17(feasibility.scbkf_worst_margin));
  txt << "  decrement/admissibility feasibility over the same buffers: "
      << feasibility.sclkf_unconstrained << "/" << feasibility.buffers
      << " sclkf-unconstrained, " << feasibility.scbkf_unconstrained << "/"
      << feasibility.buffers << " scbkf-unconstrained, worst constrained margins "
      << format_sig17(feasibility.sclkf_worst_margin) << " / "
      << format_sig17(feasibility.scbkf_worst_margin) << "\n";

  if (resolved.boundary_samples > 0) {
    const HistorySegment xi = HistorySegment::constant(
        resolved.scenario.params.delay, resolved.dt,
        resolved.scenario.params.initial_state);
    const BoundaryReport boundary =
        boundary_check(resolved.scenario.surface, resolved.scenario.scbkf, xi,
                       resolved.boundary_samples, resolved.seed);
    kv.emplace_back("boundary.samples", std::to_string(boundary.samples));
    kv.emplace_back("boundary.min_ratio", format_sig17(boundary.min_ratio));
    kv.emplace_back("boundary.pass", boundary.pass ? "1" : "0");
    txt << (boundary.pass ? "  pass" : "  WARN")
        << " boundary condition: min U^2(boundary)/U^2(xi) = "
        << format_sig17(boundary.min_ratio) << " over " << boundary.samples
        << " projected buffers\n";
  }
  kv.emplace_back("config", resolved.effective.dump());
  txt << "effective configuration:\n" << resolved.effective.dump(2) << "\n";

  atomic_write(resolved.out_dir / "identities_report.kv", render_kv(kv));
  atomic_write(resolved.out_dir / "identities_report.txt", txt.str());
  std::cout << (report.all_pass ? "identities pass" : "identities FAIL")
            << ", reports in " << resolved.out_dir.string() << "\n";
  return kExitOk;
}

int command_sweep(const RunRequest& request) {
  // Resolve once to find the family; member scenarios re-resolve with the
  // preset index pinned so per-member parameters come from the preset.
  Resolved probe = resolve(request);
  const json& preset_cfg = probe.effective.at("scenario").at("preset");
  if (preset_cfg.is_null()) {
    throw Error("invariant", "sweep requires scenario.preset (fig1_l or fig2_ell)");
  }
  const std::string family_name = preset_cfg.get<std::string>();
  const PresetFamily family = preset_family_from_name(family_name);
  const int members = preset_family_size(family);

  std::string summary = "member,safety_prob,ci_lo,ci_hi,mean_terminal_velocity_error\n";
  for (int index = 1; index <= members; ++index) {
    const json member{{"preset", family_name}, {"index", index}};
    Resolved resolved = resolve(request, &member);
    const MonteCarloReport report = run_verify(resolved);
    const fs::path member_dir = resolved.out_dir / resolved.scenario.name;
    Resolved member_resolved = resolved;
    member_resolved.out_dir = member_dir;
    write_verify_outputs(member_dir, member_resolved, report);
    summary += resolved.scenario.name + "," +
               format_sig17(report.safety_probability) + "," +
               format_sig17(report.safety_ci.lo) + "," +
               format_sig17(report.safety_ci.hi) + "," +
               format_sig17(report.mean_terminal_error) + "\n";
    std::cout << resolved.scenario.name << ": safety "
              << format_sig17(report.safety_probability) << ", terminal error "
              << format_sig17(report.mean_terminal_error) << "\n";
  }
  atomic_write(probe.out_dir / "sweep_summary.csv", summary);
  std::cout << "summary: " << (probe.out_dir / "sweep_summary.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

std::vector<std::string> registered_models() { return {"car_following"}; }
std::vector<std::string> registered_controllers() { return {"sliding", "sontag"}; }
std::vector<std::string> registered_sclkfs() { return {"quadratic_tracking"}; }
std::vector<std::string> registered_scbkfs() { return {"headway_barrier"}; }

int run(const RunRequest& request) {
  try {
    if (request.command == "sweep") {
      return command_sweep(request);
    }
    Resolved resolved = resolve(request);
    if (request.command == "simulate") {
      return command_simulate(resolved);
    }
    if (request.command == "verify") {
      return command_verify(resolved);
    }
    if (request.command == "identities") {
      return command_identities(resolved);
    }
    throw Error("config_parse", "unknown command '" + request.command + "'");
  } catch (const Error& e) {
    std::cerr << "error category=" << e.category() << ": " << e.what() << "\n";
    if (e.category() == "config_parse") {
      return kExitConfigParse;
    }
    if (e.category() == "unknown_name") {
      return kExitUnknownName;
    }
    if (e.category() == "invariant" || e.category() == "config") {
      return kExitInvariant;
    }
    return kExitRuntime;
  } catch (const json::exception& e) {
    // wrong value types and similar structural mistakes
    std::cerr << "error category=config_parse: " << e.what() << "\n";
    return kExitConfigParse;
  } catch (const std::exception& e) {
    std::cerr << "error category=internal: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace sddectl
