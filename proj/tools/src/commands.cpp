#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "ltm/checkpoint.hpp"
#include "ltm/corpus_io.hpp"
#include "ltm/series.hpp"
#include "ltmcli/cli.hpp"
#include "yaml_util.hpp"

namespace ltm::cli {

namespace fs = std::filesystem;

Forecast forecast_series(const Model& model, std::span<const double> context, int horizon, int n_samples,
                         std::uint64_t seed) {
  if (context.empty()) throw UsageError("forecast needs at least one context value");
  const double n = static_cast<double>(context.size());
  double mean = 0.0;
  for (double v : context) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : context) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / n);
  const auto scaled = normalize(context);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) sd = 1.0;  // constant context normalizes to zeros

  Forecast f = forecast_rollout(model, scaled, horizon, n_samples, seed);
  auto back = [&](std::vector<double>& xs) {
    for (double& x : xs) x = x * sd + mean;
  };
  for (auto& t : f.trajectories) back(t);
  back(f.mean);
  back(f.lower);
  back(f.upper);
  return f;
}

std::string forecast_csv(const Forecast& f, int horizon, int n_samples, std::uint64_t seed) {
  std::string out = "# ltm-forecast/1 horizon=" + std::to_string(horizon) + " samples=" + std::to_string(n_samples) +
                    " seed=" + std::to_string(seed) + "\n";
  out += "step,mean,p16,p84";
  for (int s = 0; s < n_samples; ++s) out += ",sample_" + std::to_string(s);
  out += "\n";
  char buf[40];
  for (std::size_t t = 0; t < f.mean.size(); ++t) {
    out += std::to_string(t + 1);
    for (double v : {f.mean[t], f.lower[t], f.upper[t]}) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    for (const auto& traj : f.trajectories) {
      std::snprintf(buf, sizeof(buf), ",%.17g", traj[t]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

int cmd_ingest(const std::string& manifest_path, std::string out_path, std::ostream& out, std::ostream& err) {
  CorpusManifest manifest;
  try {
    manifest = load_manifest(manifest_path);
  } catch (const ManifestError& e) {
    throw UsageError(e.what());
  }
  IngestResult r;
  try {
    r = ingest(manifest);
  } catch (const ManifestError& e) {
    throw UsageError(e.what());
  }
  fs::path path = out_path.empty() ? cache_root() / (manifest.name + ".ltmc") : fs::path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_corpus_cache(path, {manifest.name, manifest.seed, r.corpus});

  char buf[200];
  out << "source                          series      points  fraction\n";
  for (const auto& s : r.balance.sources) {
    std::snprintf(buf, sizeof(buf), "%-28s %9llu %11llu  %7.4f\n", s.source.c_str(),
                  static_cast<unsigned long long>(s.series), static_cast<unsigned long long>(s.points), s.fraction);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "train %llu points in %zu series, test %llu points in %zu series\n",
                static_cast<unsigned long long>(total_points(r.corpus.train)), r.corpus.train.size(),
                static_cast<unsigned long long>(total_points(r.corpus.test)), r.corpus.test.size());
  out << buf;
  for (const auto& w : r.balance.warnings) err << "warning: " << w << "\n";
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";
  out << "cache written to " << path.string() << "\n";
  return kExitOk;
}

std::string summary_line(const RunSummary& s) {
  char buf[400];
  std::snprintf(buf, sizeof(buf),
                "status=%s n_params=%llu steps=%d min_mse=%.6g min_crps=%.6g min_nll=%.6g min_loglik=%.6g "
                "final_compute=%s",
                s.status.c_str(), static_cast<unsigned long long>(s.n_params), s.steps_run, s.min_metrics.mse,
                s.min_metrics.crps, s.min_metrics.nll, s.min_metrics.reported_loglik(),
                compute_to_string(s.final_compute).c_str());
  return buf;
}

int cmd_train(const std::string& config, const std::string& out_dir, bool quiet, std::ostream& out) {
  if (out_dir.empty()) throw UsageError("train needs --out <run dir>");
  auto spec = load_run_spec(config);
  auto s = execute_run(spec, fs::path(config).parent_path(), out_dir, quiet ? nullptr : &out);
  out << summary_line(s) << "\n";
  if (!s.note.empty()) out << "note: " << s.note << "\n";
  return s.status == "DIVERGED" ? kExitRunFailure : kExitOk;
}

int cmd_sweep(const std::string& plan_path, const std::string& out_dir, int parallel, std::ostream& out) {
  if (out_dir.empty()) throw UsageError("sweep needs --out <campaign dir>");
  auto plan = load_plan(plan_path);
  auto index = run_campaign(plan, fs::path(plan_path).parent_path(), out_dir, parallel, &out);
  bool failed = false;
  for (const auto& c : index.cells) {
    if (c.status == "FAILED") failed = true;
    if (c.status == "DIVERGED" && plan.kind != CampaignKind::kLrSweep) failed = true;
  }
  if (plan.kind == CampaignKind::kLrSweep) {
    for (const auto& c : index.cells) {
      if (c.selected) out << "best lr_max for N_p=" << c.n_params << ": " << c.lr_used << " (" << c.id << ")\n";
    }
  }
  out << index.cells.size() << " cells, index written to " << (fs::path(out_dir) / "index.json").string() << "\n";
  return failed ? kExitRunFailure : kExitOk;
}

void emit_power_law(YAML::Emitter& e, const PowerLawFit& f) {
  e << YAML::BeginMap;
  e << YAML::Key << "B0" << YAML::Value << f.B0;
  e << YAML::Key << "log10_A0" << YAML::Value << f.log10_A0;
  e << YAML::Key << "rss" << YAML::Value << f.rss;
  e << YAML::Key << "n" << YAML::Value << f.n_points;
  e << YAML::EndMap;
}

std::string axis_label(FitAxis axis) {
  switch (axis) {
    case FitAxis::kParams:
      return "parameters N_p";
    case FitAxis::kCompute:
      return "compute C (FLOPs)";
    case FitAxis::kData:
      return "training data points";
    case FitAxis::kLr:
      return "parameters N_p";
  }
  return "";
}

int cmd_fit(const std::string& campaign, const std::string& axis_text, const std::string& metric_text,
            std::string out_dir, std::ostream& out) {
  const auto axis = parse_fit_axis(axis_text);
  Metric metric = Metric::kCrps;
  try {
    metric = parse_metric(metric_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto index = load_index(campaign);
  auto points = fit_points(campaign, index, axis, metric);
  if (out_dir.empty()) out_dir = campaign;
  fs::create_directories(out_dir);
  const std::string stem = "fit-" + to_string(axis) + (axis == FitAxis::kLr ? "" : "-" + to_string(metric));

  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "format" << YAML::Value << "ltm-fit/1";
  e << YAML::Key << "campaign" << YAML::Value << index.name;
  e << YAML::Key << "axis" << YAML::Value << to_string(axis);
  e << YAML::Key << "metric" << YAML::Value << (axis == FitAxis::kLr ? "lr_max" : to_string(metric));
  e << YAML::Key << "n_points" << YAML::Value << points.size();
  e << YAML::Key << "points" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : points) e << YAML::Flow << YAML::BeginSeq << p.x << p.y << YAML::EndSeq;
  e << YAML::EndSeq;

  Plot plot;
  plot.title = index.name + ": " + (axis == FitAxis::kLr ? "best lr_max" : to_string(metric)) + " vs " +
               to_string(axis);
  plot.x_label = axis_label(axis);
  plot.y_label = axis == FitAxis::kLr ? "best lr_max" : "min test " + to_string(metric);
  plot.log_x = plot.log_y = true;
  PlotSeries data{"runs", {}, {}, false, true};
  for (const auto& p : points) {
    data.x.push_back(p.x);
    data.y.push_back(p.y);
  }
  plot.series.push_back(data);

  auto fit_curve = [&](const std::string& name, auto&& f, double lo, double hi) {
    PlotSeries s{name, {}, {}, true, false};
    for (int i = 0; i <= 40; ++i) {
      double x = std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / 40.0);
      s.x.push_back(x);
      s.y.push_back(f(x));
    }
    plot.series.push_back(s);
  };

  const double lo = points.empty() ? 1.0 : points.front().x;
  const double hi = points.empty() ? 10.0 : points.back().x;
  std::string headline;
  if (axis == FitAxis::kLr) {
    if (points.size() < 4) throw UsageError("optimal-lr fit needs at least 4 model sizes with a usable run");
    OffsetPowerLawFit fit;
    std::string status = "CONVERGED";
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : points) xy.emplace_back(p.x, p.y);
    try {
      fit = fit_optimal_lr(xy);
    } catch (const FitConvergenceError& ex) {
      fit = ex.best_so_far();
      status = ex.what();
    }
    e << YAML::Key << "offset_fit" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "status" << YAML::Value << status;
    e << YAML::Key << "a" << YAML::Value << fit.a;
    e << YAML::Key << "b" << YAML::Value << fit.b;
    e << YAML::Key << "c" << YAML::Value << fit.c;
    e << YAML::Key << "objective" << YAML::Value << fit.objective;
    e << YAML::EndMap;
    fit_curve("a N^-b + c", [&](double x) { return fit.predict(x); }, lo, hi);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "lr*(N) = %.4g * N^-%.4g + %.4g", fit.a, fit.b, fit.c);
    headline = buf;
  } else {
    if (points.size() < 2) throw UsageError("fit needs at least 2 completed runs on this axis");
    auto broken = fit_broken_power_law(points);
    e << YAML::Key << "single" << YAML::Value;
    emit_power_law(e, broken.single);
    e << YAML::Key << "broken" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "status" << YAML::Value << to_string(broken.status);
    if (broken.status != BreakStatus::kFallbackSingle) {
      e << YAML::Key << "A_break" << YAML::Value << broken.A_break;
      e << YAML::Key << "improvement" << YAML::Value << broken.improvement;
      e << YAML::Key << "rss" << YAML::Value << broken.rss;
      e << YAML::Key << "pre" << YAML::Value;
      emit_power_law(e, broken.pre);
      e << YAML::Key << "post" << YAML::Value;
      emit_power_law(e, broken.post);
    }
    e << YAML::EndMap;
    const auto& h = broken.headline();
    e << YAML::Key << "headline" << YAML::Value;
    emit_power_law(e, h);
    fit_curve("single fit", [&](double x) { return broken.single.predict(x); }, lo, hi);
    if (broken.status == BreakStatus::kBreak) {
      fit_curve("post-break fit", [&](double x) { return broken.post.predict(x); }, broken.A_break, hi);
      plot.vlines.push_back(broken.A_break);
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s: B0=%.6g log10_A0=%.6g (%s, %zu points)", to_string(metric).c_str(), h.B0,
                  h.log10_A0, to_string(broken.status).c_str(), points.size());
    headline = buf;
  }
  e << YAML::EndMap;
  write_text(fs::path(out_dir) / (stem + ".yaml"), std::string(e.c_str()) + "\n");
  write_text(fs::path(out_dir) / (stem + ".svg"), render_svg(plot));
  out << headline << "\n";
  out << "wrote " << (fs::path(out_dir) / (stem + ".yaml")).string() << " and .svg\n";
  return kExitOk;
}

std::vector<double> read_values(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("series file " + path + " not found");
  auto series = read_csv_series(path, "wide", "input");
  if (series.empty() || series.front().values.empty()) throw UsageError("series file " + path + " has no values");
  return series.front().values;
}

int cmd_forecast(const std::string& ckpt, const std::string& series_path, int horizon, int samples,
                 std::uint64_t seed, const std::string& truth_path, std::string prefix, std::ostream& out) {
  if (horizon < 0) throw UsageError("--horizon must be >= 0");
  if (samples < 1) throw UsageError("--samples must be >= 1");
  if (!fs::exists(ckpt)) throw UsageError("checkpoint " + ckpt + " not found");
  Model model = load_checkpoint(ckpt);
  auto context = read_values(series_path);
  auto f = forecast_series(model, context, horizon, samples, seed);
  if (prefix.empty()) prefix = "forecast";
  write_text(prefix + ".csv", forecast_csv(f, horizon, samples, seed));

  Plot plot;
  plot.title = "forecast (mean and 16-84% band)";
  plot.x_label = "step";
  plot.y_label = "value";
  const auto shown = std::min<std::size_t>(context.size(), static_cast<std::size_t>(model.config().seq_len));
  PlotSeries ctx{"context", {}, {}, true, false};
  for (std::size_t i = context.size() - shown; i < context.size(); ++i) {
    ctx.x.push_back(static_cast<double>(i) - static_cast<double>(context.size()) + 1.0);
    ctx.y.push_back(context[i]);
  }
  plot.series.push_back(ctx);
  PlotSeries mean{"forecast mean", {}, f.mean, true, false};
  PlotBand band;
  for (int t = 1; t <= horizon; ++t) mean.x.push_back(t);
  band.x = mean.x;
  band.lower = f.lower;
  band.upper = f.upper;
  if (horizon > 0) plot.bands.push_back(band);
  plot.series.push_back(mean);
  if (!truth_path.empty()) {
    auto truth = read_values(truth_path);
    PlotSeries tr{"truth", {}, {}, true, false};
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < truth.size() && t < f.mean.size(); ++t) {
      tr.x.push_back(static_cast<double>(t + 1));
      tr.y.push_back(truth[t]);
      se += (truth[t] - f.mean[t]) * (truth[t] - f.mean[t]);
      ++n;
    }
    plot.series.push_back(tr);
    if (n > 0) out << "forecast mse vs truth over " << n << " steps: " << se / static_cast<double>(n) << "\n";
  }
  write_text(prefix + ".svg", render_svg(plot));
  out << "wrote " << prefix << ".csv and " << prefix << ".svg\n";
  return kExitOk;
}

int cmd_report(const std::string& campaign, const std::string& metric_text, std::string out_dir, std::ostream& out) {
  Metric metric = Metric::kCrps;
  try {
    metric = parse_metric(metric_text);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto index = load_index(campaign);
  if (out_dir.empty()) out_dir = campaign;
  fs::create_directories(out_dir);

  std::string csv =
      "id,status,n_params,d_model,n_heads,n_layers,aspect_ratio,lr_max,lr_used,f_d,data_points,attempts,min_mse,"
      "min_crps,min_nll,min_loglik,final_compute,selected\n";
  Plot plot;
  plot.title = index.name + ": test " + to_string(metric) + " during training";
  plot.x_label = "compute C (FLOPs)";
  plot.y_label = "test " + to_string(metric);
  plot.log_x = plot.log_y = true;

  char buf[512];
  out << "id                                        status         N_p  heads  aspect   lr_used  f_d    min_"
      << to_string(metric) << "\n";
  for (const auto& c : index.cells) {
    const double aspect = c.model.n_layers > 0 ? aspect_ratio(c.model).value() : std::nan("");
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%llu,%d,%.17g,%.17g,%.17g,%.17g,%s,%d\n",
                  c.id.c_str(), c.status.c_str(), static_cast<unsigned long long>(c.n_params), c.model.d_model,
                  c.model.n_heads, c.model.n_layers, aspect, c.lr_max, c.lr_used, c.f_d,
                  static_cast<unsigned long long>(c.data_points), c.attempts, c.min_metrics.mse, c.min_metrics.crps,
                  c.min_metrics.nll, c.min_metrics.reported_loglik(), compute_to_string(c.final_compute).c_str(),
                  c.selected ? 1 : 0);
    csv += buf;
    double shown = metric == Metric::kMse    ? c.min_metrics.mse
                   : metric == Metric::kCrps ? c.min_metrics.crps
                   : metric == Metric::kNll  ? c.min_metrics.nll
                                             : c.min_metrics.reported_loglik();
    std::snprintf(buf, sizeof(buf), "%-41s %-13s %6llu %5d %7.2f %9.3g %5.3g %10.5f%s\n", c.id.c_str(),
                  c.status.c_str(), static_cast<unsigned long long>(c.n_params), c.model.n_heads, aspect, c.lr_used,
                  c.f_d, shown, c.selected ? "  *" : "");
    out << buf;

    const auto log_path = fs::path(campaign) / c.dir / "log.jsonl";
    if (!fs::exists(log_path)) continue;
    PlotSeries s{c.id, {}, {}, true, false};
    for (const auto& e : read_run_log(log_path)) {
      s.x.push_back(compute_to_double(e.compute));
      s.y.push_back(metric_value(e, metric));
    }
    plot.series.push_back(s);
  }
  write_text(fs::path(out_dir) / "report.csv", csv);
  write_text(fs::path(out_dir) / ("curves-" + to_string(metric) + ".svg"), render_svg(plot));
  out << "wrote report.csv and curves-" << to_string(metric) << ".svg to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ltm: train probabilistic time-series transformers and fit scaling laws"};
  app.require_subcommand(1);

  std::string manifest, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Build a normalized, split corpus cache from a manifest");
  ingest->add_option("manifest", manifest, "Corpus manifest (YAML)")->required();
  ingest->add_option("--out", ingest_out, "Cache file (default: $LTM_CACHE_ROOT/<name>.ltmc)");

  std::string config, train_out;
  bool quiet = false;
  bool print_defaults = false;
  auto* train = app.add_subcommand("train", "Run one training job");
  train->add_option("config", config, "Run config (YAML)");
  train->add_option("--out", train_out, "Run directory");
  train->add_flag("--quiet", quiet, "Only print the summary line");
  train->add_flag("--print-defaults", print_defaults, "Print a config with every default filled in");

  std::string plan, sweep_out;
  int parallel = 1;
  auto* sweep = app.add_subcommand("sweep", "Run every cell of an experiment plan");
  sweep->add_option("plan", plan, "Experiment plan (YAML)")->required();
  sweep->add_option("--out", sweep_out, "Campaign directory")->required();
  sweep->add_option("--parallel", parallel, "Concurrent training processes")->default_val(1);

  std::string fit_campaign, axis = "params", metric = "crps", fit_out;
  auto* fit = app.add_subcommand("fit", "Fit power laws to a campaign");
  fit->add_option("campaign", fit_campaign, "Campaign directory")->required();
  fit->add_option("--axis", axis, "params, compute, data or lr")->default_val("params");
  fit->add_option("--metric", metric, "mse, crps, nll or loglik")->default_val("crps");
  fit->add_option("--out", fit_out, "Output directory (default: the campaign directory)");

  std::string ckpt, series, truth, prefix;
  int horizon = 64;
  int samples = 100;
  std::uint64_t seed = 0;
  auto* forecast = app.add_subcommand("forecast", "Autoregressive forecast with a 1-sigma band");
  forecast->add_option("checkpoint", ckpt, "Model checkpoint")->required();
  forecast->add_option("series", series, "CSV with the context values (first column)")->required();
  forecast->add_option("--horizon", horizon, "Steps to forecast")->default_val(64);
  forecast->add_option("--samples", samples, "Sampled trajectories")->default_val(100);
  forecast->add_option("--seed", seed, "Sampling seed")->default_val(0);
  forecast->add_option("--truth", truth, "CSV with the true continuation, overlaid and scored");
  forecast->add_option("--out", prefix, "Output prefix for .csv and .svg")->default_val("forecast");

  std::string report_campaign, report_metric = "crps", report_out;
  auto* report = app.add_subcommand("report", "Tabulate a campaign and plot its training curves");
  report->add_option("campaign", report_campaign, "Campaign directory")->required();
  report->add_option("--metric", report_metric, "mse, crps, nll or loglik")->default_val("crps");
  report->add_option("--out", report_out, "Output directory (default: the campaign directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(manifest, ingest_out, out, err);
    if (*train) {
      if (print_defaults) {
        out << emit_run_spec(RunSpec{});
        return kExitOk;
      }
      if (config.empty()) throw UsageError("train needs a config file");
      return cmd_train(config, train_out, quiet, out);
    }
    if (*sweep) return cmd_sweep(plan, sweep_out, parallel, out);
    if (*fit) return cmd_fit(fit_campaign, axis, metric, fit_out, out);
    if (*forecast) return cmd_forecast(ckpt, series, horizon, samples, seed, truth, prefix, out);
    if (*report) return cmd_report(report_campaign, report_metric, report_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return kExitUsage;
}

}  // namespace ltm::cli
