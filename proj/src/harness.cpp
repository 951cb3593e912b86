#include "rareyield/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "rareyield/error.hpp"

namespace rareyield {
namespace {

std::optional<double> parse_field(std::string_view s, bool allow_empty,
                                  std::size_t line) {
  if (s.empty()) {
    require(allow_empty, ErrorCode::kIo,
            "trace line " + std::to_string(line) + ": empty field");
    return std::nullopt;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorCode::kIo,
          "trace line " + std::to_string(line) + ": bad number '" +
              std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Plot geometry.
constexpr double kWidth = 760.0;
constexpr double kPanelHeight = 300.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 150.0;
constexpr double kTop = 30.0;
constexpr double kGap = 60.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

struct LogAxis {
  double lo = 0.0;  // log10 bounds
  double hi = 1.0;
};

LogAxis log_axis(std::vector<double> values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : values) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  }
  if (!std::isfinite(lo)) return {};
  lo = std::floor(lo);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

void panel(std::ostringstream& os, std::span<const LabeledTrace> traces,
           double top, const std::string& title, double ref, const char* ref_label,
           bool use_fom, double x_max) {
  std::vector<double> ys{ref};
  for (const auto& t : traces) {
    for (const auto& r : t.rounds) {
      ys.push_back(use_fom ? r.fom.value_or(0.0) : r.pf);
    }
  }
  const LogAxis ax = log_axis(ys);
  const double plot_w = kWidth - kLeft - kRight;
  auto px = [&](double x) { return kLeft + plot_w * x / x_max; };
  auto py = [&](double y) {
    return top + kPanelHeight * (ax.hi - std::log10(y)) / (ax.hi - ax.lo);
  };
  os << "<g class=\"panel\">\n";
  os << "<text x=\"" << kLeft << "\" y=\"" << top - 8 << "\" font-size=\"14\">"
     << xml_escape(title) << "</text>\n";
  os << "<rect x=\"" << kLeft << "\" y=\"" << top << "\" width=\"" << plot_w
     << "\" height=\"" << kPanelHeight
     << "\" fill=\"none\" stroke=\"#000\" stroke-width=\"1\"/>\n";
  for (double e = ax.lo; e <= ax.hi + 1e-9; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    os << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + plot_w
       << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4
       << "\" font-size=\"11\" text-anchor=\"end\">1e" << static_cast<int>(e)
       << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_max * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + kPanelHeight + 16
       << "\" font-size=\"11\" text-anchor=\"middle\">"
       << static_cast<long long>(std::llround(xv)) << "</text>\n";
  }
  if (ref > 0.0) {
    const double y = py(ref);
    os << "<line class=\"reference\" x1=\"" << kLeft << "\" y1=\"" << y
       << "\" x2=\"" << kLeft + plot_w << "\" y2=\"" << y
       << "\" stroke=\"#000\" stroke-dasharray=\"6 4\" data-value=\""
       << format_double(ref) << "\"/>\n";
    os << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << y + 4
       << "\" font-size=\"11\">" << ref_label << "</text>\n";
  }
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\" data-label=\"" << xml_escape(traces[i].label)
       << "\" points=\"";
    bool first = true;
    for (const auto& r : traces[i].rounds) {
      const double y = use_fom ? r.fom.value_or(0.0) : r.pf;
      if (!(y > 0.0)) continue;
      os << (first ? "" : " ") << px(static_cast<double>(r.cumulative_sims)) << ','
         << py(y);
      first = false;
    }
    os << "\"/>\n";
    os << "<text x=\"" << kLeft + plot_w + 6 << "\" y=\"" << top + 30 + 16 * i
       << "\" font-size=\"11\" fill=\"" << color << "\">"
       << xml_escape(traces[i].label) << "</text>\n";
  }
  os << "</g>\n";
}

}  // namespace

double relative_error(double pf, double golden) {
  require(golden > 0.0, ErrorCode::kInvalidArgument, "golden must be positive");
  return std::abs(pf - golden) / golden;
}

double speedup(double mc_sims, double method_sims) {
  require(method_sims > 0.0, ErrorCode::kInvalidArgument,
          "method sim count must be positive");
  return mc_sims / method_sims;
}

std::string verdict_name(RunVerdict v) {
  switch (v) {
    case RunVerdict::kOk: return "ok";
    case RunVerdict::kNoSeeds: return "no_seeds";
    case RunVerdict::kNotConverged: return "not_converged";
    case RunVerdict::kInaccurate: return "inaccurate";
  }
  return "unknown";
}

RunResult classify_run(std::uint64_t seed, RunRecord record,
                       std::optional<double> golden, double max_rel_err) {
  RunResult r;
  r.seed = seed;
  if (golden && !record.rounds.empty()) {
    r.rel_err = relative_error(record.final_pf(), *golden);
  }
  if (record.status == RunStatus::kNoSeeds) {
    r.verdict = RunVerdict::kNoSeeds;
  } else if (!record.converged) {
    r.verdict = RunVerdict::kNotConverged;
  } else if (r.rel_err && *r.rel_err > max_rel_err) {
    r.verdict = RunVerdict::kInaccurate;
  }
  r.record = std::move(record);
  return r;
}

MethodSummary summarize_runs(Method method, std::vector<RunResult> runs,
                             std::optional<double> mc_sims) {
  MethodSummary s;
  s.method = method;
  s.n_runs = runs.size();
  double sum_pf = 0.0;
  double sum_err = 0.0;
  double sum_sims = 0.0;
  std::size_t ok = 0;
  bool all_errs = true;
  const RunResult* best = nullptr;
  for (const auto& r : runs) {
    if (r.failed()) {
      ++s.failed;
      continue;
    }
    ++ok;
    sum_pf += r.record.final_pf();
    sum_sims += static_cast<double>(r.record.total_sims);
    if (r.rel_err) {
      sum_err += *r.rel_err;
    } else {
      all_errs = false;
    }
    if (!best) {
      best = &r;
      continue;
    }
    const double e = r.rel_err.value_or(0.0);
    const double be = best->rel_err.value_or(0.0);
    if (e < be || (e == be && r.record.total_sims < best->record.total_sims)) {
      best = &r;
    }
  }
  if (ok > 0) {
    const double n = static_cast<double>(ok);
    s.mean_pf = sum_pf / n;
    s.mean_sims = sum_sims / n;
    if (all_errs) s.mean_rel_err = sum_err / n;
    if (mc_sims) s.mean_speedup = speedup(*mc_sims, *s.mean_sims);
    s.best = *best;
  }
  s.runs = std::move(runs);
  return s;
}

MethodSummary run_experiment(Testbench& bench, const MethodConfig& cfg,
                             const ExperimentOptions& opts) {
  require(opts.n_runs >= 1, ErrorCode::kConfig, "n_runs must be at least 1");
  cfg.validate();
  const std::optional<double> golden = opts.golden ? opts.golden : bench.analytic_pf();
  std::vector<RunResult> runs;
  runs.reserve(opts.n_runs);
  for (std::size_t i = 0; i < opts.n_runs; ++i) {
    const std::uint64_t seed = opts.seed0 + i;
    RngStream rng(seed);
    runs.push_back(classify_run(seed, run_method(bench, cfg, rng), golden,
                                opts.max_rel_err));
  }
  return summarize_runs(cfg.method, std::move(runs), opts.mc_sims);
}

AblationResult run_ablation(Testbench& bench, Method base, const AblationArms& arms,
                            const MethodConfig& base_cfg, std::size_t n_runs,
                            std::uint64_t seed0) {
  require(base == Method::kAis || base == Method::kAcs, ErrorCode::kConfig,
          "ablation base method must be ais or acs");
  require(arms.budget_origin == arms.budget_ours, ErrorCode::kConfig,
          "ablation arms need equal presample budgets (" +
              std::to_string(arms.budget_origin) + " vs " +
              std::to_string(arms.budget_ours) + ")");
  AblationResult out;
  out.base = base;
  out.budget = arms.budget_origin;
  MethodConfig cfg = base_cfg;
  cfg.method = base;
  cfg.presample_budget = arms.budget_origin;
  for (std::size_t i = 0; i < n_runs; ++i) {
    AblationRow row;
    row.seed = seed0 + i;
    for (int arm = 0; arm < 2; ++arm) {
      cfg.presampler = arm == 0 ? arms.origin : arms.ours;
      RngStream rng(row.seed);
      const RunRecord r = run_method(bench, cfg, rng);
      const std::uint64_t is_sims = r.total_sims - r.presample_sims;
      if (arm == 0) {
        row.pf_origin = r.final_pf();
        row.is_sims_origin = is_sims;
        row.converged_origin = r.converged;
      } else {
        row.pf_ours = r.final_pf();
        row.is_sims_ours = is_sims;
        row.converged_ours = r.converged;
      }
    }
    out.rows.push_back(row);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  require(ec == std::errc(), ErrorCode::kNumeric, "cannot format number");
  return std::string(buf, ptr);
}

std::string format_trace_csv(const RunRecord& record) {
  require(!record.rounds.empty(), ErrorCode::kInvalidArgument,
          "cannot write a trace with no rounds");
  std::string out = "round,cumulative_sims,pf,fom\n";
  for (std::size_t i = 0; i < record.rounds.size(); ++i) {
    const auto& r = record.rounds[i];
    out += std::to_string(i + 1) + ',' + std::to_string(r.cumulative_sims) + ',' +
           format_double(r.pf) + ',' + opt_field(r.fom) + '\n';
  }
  return out;
}

std::vector<RoundRecord> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) &&
              line == "round,cumulative_sims,pf,fom",
          ErrorCode::kIo, "trace CSV header missing");
  std::vector<RoundRecord> rounds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    require(f.size() == 4, ErrorCode::kIo,
            "trace line " + std::to_string(line_no) + ": expected 4 fields");
    RoundRecord r;
    std::uint64_t sims = 0;
    const auto [ptr, ec] =
        std::from_chars(f[1].data(), f[1].data() + f[1].size(), sims);
    require(ec == std::errc() && ptr == f[1].data() + f[1].size(), ErrorCode::kIo,
            "trace line " + std::to_string(line_no) + ": bad sim count");
    r.cumulative_sims = sims;
    r.pf = *parse_field(f[2], false, line_no);
    r.fom = parse_field(f[3], true, line_no);
    rounds.push_back(r);
  }
  return rounds;
}

void emit_trace_csv(const RunRecord& record, const std::filesystem::path& path) {
  write_text_file(path, format_trace_csv(record));
}

std::vector<RoundRecord> read_trace_csv(const std::filesystem::path& path) {
  return parse_trace_csv(read_text_file(path));
}

std::string format_runs_csv(std::span<const MethodSummary> summaries) {
  std::string out =
      "method,seed,verdict,converged,total_sims,presample_sims,rounds,final_pf,"
      "final_fom,rel_err\n";
  for (const auto& s : summaries) {
    for (const auto& r : s.runs) {
      out += method_name(s.method) + ',' + std::to_string(r.seed) + ',' +
             verdict_name(r.verdict) + ',' + (r.record.converged ? "1" : "0") + ',' +
             std::to_string(r.record.total_sims) + ',' +
             std::to_string(r.record.presample_sims) + ',' +
             std::to_string(r.record.rounds.size()) + ',' +
             format_double(r.record.final_pf()) + ',' +
             opt_field(r.record.final_fom()) + ',' + opt_field(r.rel_err) + '\n';
    }
  }
  return out;
}

std::string format_summary_csv(std::span<const MethodSummary> summaries) {
  std::string out =
      "method,mean_pf,mean_rel_err,mean_sims,mean_speedup,failed,n_runs,best_seed\n";
  for (const auto& s : summaries) {
    out += method_name(s.method) + ',' + opt_field(s.mean_pf) + ',' +
           opt_field(s.mean_rel_err) + ',' + opt_field(s.mean_sims) + ',' +
           opt_field(s.mean_speedup) + ',' + std::to_string(s.failed) + ',' +
           std::to_string(s.n_runs) + ',' +
           (s.best ? std::to_string(s.best->seed) : std::string()) + '\n';
  }
  return out;
}

std::string format_ablation_csv(std::span<const AblationResult> results) {
  std::string out =
      "method,presample_budget,seed,pf_origin,is_sims_origin,converged_origin,"
      "pf_ours,is_sims_ours,converged_ours\n";
  for (const auto& res : results) {
    for (const auto& r : res.rows) {
      out += method_name(res.base) + ',' + std::to_string(res.budget) + ',' +
             std::to_string(r.seed) + ',' + format_double(r.pf_origin) + ',' +
             std::to_string(r.is_sims_origin) + ',' +
             (r.converged_origin ? "1" : "0") + ',' + format_double(r.pf_ours) +
             ',' + std::to_string(r.is_sims_ours) + ',' +
             (r.converged_ours ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::string render_convergence_svg(std::span<const LabeledTrace> traces,
                                   double golden, double fom_threshold) {
  require(!traces.empty(), ErrorCode::kInvalidArgument, "nothing to plot");
  double x_max = 1.0;
  for (const auto& t : traces) {
    for (const auto& r : t.rounds) {
      x_max = std::max(x_max, static_cast<double>(r.cumulative_sims));
    }
  }
  const double height = kTop + 2 * kPanelHeight + kGap + 40.0;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << kWidth << ' ' << height
     << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  panel(os, traces, kTop, "P_f vs # of simulations", golden, "golden", false, x_max);
  panel(os, traces, kTop + kPanelHeight + kGap, "FOM vs # of simulations",
        fom_threshold, "FOM target", true, x_max);
  os << "</svg>\n";
  return os.str();
}

void emit_convergence_svg(std::span<const LabeledTrace> traces, double golden,
                          const std::filesystem::path& path, double fom_threshold) {
  write_text_file(path, render_convergence_svg(traces, golden, fom_threshold));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo,
          "cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  require(!out.fail(), ErrorCode::kIo, "write to " + path.string() + " failed");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rareyield
