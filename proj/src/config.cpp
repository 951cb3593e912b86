#include "rareyield/config.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "rareyield/error.hpp"
#include "rareyield/external_evaluator.hpp"

namespace rareyield {
namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  fail(ErrorCode::kConfig, "config key '" + key + "': " + why);
}

std::uint64_t get_count(const json& v, const std::string& key) {
  if (!v.is_number_unsigned()) bad_key(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double get_real(const json& v, const std::string& key) {
  if (!v.is_number()) bad_key(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad_key(key, "expected a finite number");
  return d;
}

double get_positive(const json& v, const std::string& key) {
  const double d = get_real(v, key);
  if (!(d > 0.0)) bad_key(key, "must be positive");
  return d;
}

std::string get_string(const json& v, const std::string& key) {
  if (!v.is_string()) bad_key(key, "expected a string");
  return v.get<std::string>();
}

PresamplerKind parse_presampler(const std::string& s) {
  if (s == "hypersphere") return PresamplerKind::kHypersphere;
  if (s == "ray_bisection") return PresamplerKind::kRayBisection;
  bad_key("presampler", "expected \"hypersphere\" or \"ray_bisection\", got \"" + s + "\"");
}

}  // namespace

std::vector<Method> parse_method_list(const std::string& name) {
  if (name == "all") return {std::begin(kAllMethods), std::end(kAllMethods)};
  return {parse_method(name)};
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  require(root.is_object(), ErrorCode::kConfig, "config must be a JSON object");
  ExperimentConfig c;
  MethodConfig& m = c.method;
  for (const auto& [key, v] : root.items()) {
    if (key == "method") {
      const std::string s = get_string(v, key);
      try {
        c.methods = parse_method_list(s);
      } catch (const Error&) {
        bad_key(key, "unknown method \"" + s + "\"");
      }
      m.method = c.methods.front();
    } else if (key == "presample_budget") {
      m.presample_budget = get_count(v, key);
    } else if (key == "batch_size") {
      m.batch_size = get_count(v, key);
    } else if (key == "max_rounds") {
      m.max_rounds = get_count(v, key);
    } else if (key == "k_clusters") {
      m.k_clusters = get_count(v, key);
    } else if (key == "patience") {
      m.patience = get_count(v, key);
    } else if (key == "refine_rounds") {
      m.refine_rounds = get_count(v, key);
    } else if (key == "fom_threshold") {
      m.fom_threshold = get_positive(v, key);
    } else if (key == "sigma") {
      m.sigma = get_positive(v, key);
    } else if (key == "presampler") {
      m.presampler = parse_presampler(get_string(v, key));
    } else if (key == "bench") {
      c.bench = get_string(v, key);
    } else if (key == "threshold") {
      c.threshold = get_real(v, key);
    } else if (key == "fail_direction") {
      const std::string s = get_string(v, key);
      if (s == "greater") {
        c.fail_direction = FailDirection::kGreater;
      } else if (s == "less") {
        c.fail_direction = FailDirection::kLess;
      } else {
        bad_key(key, "expected \"greater\" or \"less\"");
      }
    } else if (key == "dim") {
      c.dim = get_count(v, key);
    } else if (key == "timeout_s") {
      c.timeout_s = get_positive(v, key);
    } else if (key == "golden") {
      c.golden = get_positive(v, key);
    } else if (key == "mc_sims") {
      c.mc_sims = get_positive(v, key);
    } else if (key == "runs") {
      c.runs = get_count(v, key);
    } else if (key == "seed") {
      c.seed = get_count(v, key);
    } else if (key == "max_rel_err") {
      c.max_rel_err = get_positive(v, key);
    } else if (key == "ablation_ais_budget") {
      c.ablation_ais_budget = get_count(v, key);
    } else if (key == "ablation_acs_budget") {
      c.ablation_acs_budget = get_count(v, key);
    } else if (key == "ablation_bench") {
      c.ablation_bench = get_string(v, key);
    } else {
      fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
  require(c.runs >= 1, ErrorCode::kConfig, "config key 'runs': must be at least 1");
  m.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Testbench make_bench(const std::string& spec, ExperimentConfig& cfg) {
  static const std::string kExternal = "external:";
  if (spec.rfind(kExternal, 0) == 0) {
    const std::string command = spec.substr(kExternal.size());
    require(!command.empty(), ErrorCode::kConfig, "external bench needs a command");
    require(cfg.dim.has_value() && *cfg.dim >= 1, ErrorCode::kConfig,
            "external bench needs 'dim' in the config");
    require(cfg.threshold.has_value(), ErrorCode::kConfig,
            "external bench needs 'threshold' in the config");
    FailureSpec fs{*cfg.threshold, cfg.fail_direction.value_or(FailDirection::kGreater)};
    const auto timeout = std::chrono::milliseconds(
        static_cast<std::int64_t>(std::llround(cfg.timeout_s * 1000.0)));
    return make_external_bench(command, *cfg.dim, fs, timeout);
  }
  require(is_preset(spec), ErrorCode::kConfig, "unknown bench '" + spec + "'");
  require(!cfg.fail_direction || *cfg.fail_direction == FailDirection::kGreater,
          ErrorCode::kConfig, "presets fail when the metric is greater");
  require(!cfg.dim || *cfg.dim == dims_preset(spec).dim(), ErrorCode::kConfig,
          "'dim' does not match preset " + spec);
  if (!cfg.mc_sims) cfg.mc_sims = static_cast<double>(preset_mc_sims(spec));
  Testbench bench = dims_preset(spec);
  if (cfg.threshold) {
    const auto& lin = dynamic_cast<const LinearEvaluator&>(bench.evaluator());
    bench = make_linear_bench(lin.w(), *cfg.threshold, spec);
  }
  if (!cfg.golden) cfg.golden = bench.analytic_pf();
  return bench;
}

}  // namespace rareyield
