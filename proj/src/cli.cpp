#include "kwslab/cli.hpp"

#include <CLI11.hpp>
#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>

#include "kwslab/checkpoint.hpp"
#include "kwslab/svg.hpp"

extern char** environ;

namespace kws {

namespace fs = std::filesystem;

namespace {

std::string g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void require_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw DataError(std::string(what) + " not found: " + dir.string());
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream out;
  out << "epoch,train_loss,dev_loss,dev_acc,wall_ms\n";
  for (const auto& m : metrics)
    out << m.epoch << ',' << g9(m.train_loss) << ',' << g9(m.dev_loss) << ',' << g9(m.dev_acc) << ',' << m.wall_ms
        << '\n';
  return out.str();
}

Checkpoint make_checkpoint(const ModelParams<float>& params, const RunConfig& cfg, std::uint64_t data_sum, int epoch) {
  Checkpoint ck;
  ck.params = params.cast<double>();
  ck.metadata["config_checksum"] = hex64(fnv1a(run_config_text(cfg)));
  ck.metadata["dataset_checksum"] = hex64(data_sum);
  ck.metadata["epoch"] = std::to_string(epoch);
  ck.metadata["loss"] = loss_kind_name(cfg.train.loss.kind);
  ck.metadata["dist"] = cfg.train.loss.dist.to_string();
  ck.metadata["seed"] = std::to_string(cfg.train.seed);
  ck.metadata["tool_version"] = kToolVersion;
  return ck;
}

std::string format_epoch_line(const EpochMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "epoch %3d  train_loss %.5f  dev_loss %.5f  dev_acc %.4f  skipped %d  floored %d",
                m.epoch, m.train_loss, m.dev_loss, m.dev_acc, m.skipped, m.floored);
  return buf;
}

/// Resolved checkpoint file plus the run directory it belongs to, if any.
struct CheckpointLocation {
  fs::path file;
  fs::path run_dir;
};

fs::path clean_dir(const fs::path& p) {
  auto d = fs::absolute(p).lexically_normal();
  return d.has_filename() ? d : d.parent_path();
}

CheckpointLocation locate_checkpoint(const fs::path& p) {
  if (fs::is_directory(p)) {
    const auto file = p / "checkpoint.ckpt";
    if (!fs::exists(file)) throw DataError("no checkpoint.ckpt in " + p.string());
    return {file, clean_dir(p)};
  }
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string());
  // per-epoch checkpoints live in <run>/checkpoints/
  const auto parent = clean_dir(p).parent_path();
  return {p, parent.filename() == "checkpoints" ? parent.parent_path() : parent};
}

// ---- CSV reading for `report` ----

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  if (!std::getline(in, line)) throw DataError("empty CSV: " + path.string());
  header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw DataError("ragged row in " + path.string());
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double cell(const std::map<std::string, std::string>& row, const std::string& key, const fs::path& path) {
  auto it = row.find(key);
  if (it == row.end()) throw DataError("column " + key + " missing in " + path.string());
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw DataError("bad number '" + it->second + "' in " + path.string());
  }
}

Series det_series(const fs::path& csv, const std::string& label) {
  Series s;
  s.label = label;
  for (const auto& row : read_csv(csv)) {
    s.x.push_back(cell(row, "fa_rate", csv));
    s.y.push_back(cell(row, "fr_rate", csv));
  }
  return s;
}

// ---- sweep ----

struct GridPoint {
  std::string loss;
  std::string param;
  std::string value;
  std::string name;
  std::vector<std::string> overrides;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string override_for(const std::string& param, const std::string& value) {
  if (param == "b") return "loss.dist=bernoulli:" + value;
  if (param == "lambda") return "loss.dist=poisson:" + value;
  if (param == "k") return "loss.dist=constant:" + value;
  if (param == "f") return "loss.f=" + value;
  if (param.find('.') != std::string::npos) return param + "=" + value;
  throw UsageError("unknown grid parameter '" + param + "' (use b, lambda, k, f or section.key)");
}

std::vector<GridPoint> expand_grid(const std::vector<std::string>& losses, const std::vector<std::string>& grid) {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& g : grid) {
    const auto eq = g.find('=');
    if (eq == std::string::npos) throw UsageError("grid must look like name=v1,v2,...; got '" + g + "'");
    auto values = split_list(g.substr(eq + 1));
    if (values.empty()) throw UsageError("grid '" + g + "' has no values");
    axes.emplace_back(g.substr(0, eq), std::move(values));
  }
  if (axes.size() > 1) throw UsageError("sweep takes one grid parameter");
  std::vector<GridPoint> points;
  for (const auto& loss : losses) {
    parse_loss_kind(loss);
    if (axes.empty()) {
      points.push_back({loss, "", "", loss, {"loss.type=" + loss}});
      continue;
    }
    const auto& [param, values] = axes.front();
    for (const auto& v : values)
      points.push_back({loss, param, v, loss + "_" + param + "_" + v, {"loss.type=" + loss, override_for(param, v)}});
  }
  return points;
}

void wait_all(std::vector<std::pair<pid_t, std::string>>& running) {
  for (auto& [pid, name] : running) {
    int status = 0;
    if (waitpid(pid, &status, 0) < 0) throw Error("waitpid failed for " + name);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      if (code == exit_numeric) throw NumericError("grid point " + name + " failed with a numeric error");
      throw DataError("grid point " + name + " failed (exit " + std::to_string(code) + ")");
    }
  }
  running.clear();
}

void spawn_train(const fs::path& run_dir, const fs::path& data, std::vector<std::pair<pid_t, std::string>>& running,
                 const std::string& name) {
  const std::string self = fs::read_symlink("/proc/self/exe").string();
  const std::string cfg = (run_dir / "config.cfg").string(), d = data.string(), o = run_dir.string();
  std::vector<std::string> args = {self, "train", "--config", cfg, "--data", d, "--out", o, "--force"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  const std::string log = (run_dir / "train.log").string();
  posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, 1, 2);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, self.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error("could not start a training process for " + name);
  running.emplace_back(pid, name);
}

// ---- usage-error suggestions ----

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggestion(const CLI::App& app, int argc, const char* const* argv) {
  const CLI::App* scope = &app;
  std::vector<std::string> subcommands;
  for (const auto* sub : app.get_subcommands({})) subcommands.push_back(sub->get_name());
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (scope == &app && !arg.empty() && arg[0] != '-') {
      try {
        scope = app.get_subcommand(arg);
        continue;
      } catch (const CLI::OptionNotFound&) {
        std::string best;
        std::size_t best_d = 3;
        for (const auto& s : subcommands)
          if (auto d = edit_distance(arg, s); d < best_d) best_d = d, best = s;
        if (!best.empty()) return "did you mean '" + best + "'?";
        return "";
      }
    }
    if (arg.rfind("--", 0) != 0) continue;
    const std::string flag = arg.substr(2, arg.find('=') == std::string::npos ? std::string::npos : arg.find('=') - 2);
    std::string best;
    std::size_t best_d = std::max<std::size_t>(3, flag.size() / 3 + 1);
    bool known = false;
    for (const auto* opt : scope->get_options()) {
      for (const auto& name : opt->get_lnames()) {
        if (name == flag) known = true;
        if (auto d = edit_distance(flag, name); d < best_d) best_d = d, best = name;
      }
    }
    if (!known && !best.empty()) return "did you mean '--" + best + "'?";
  }
  return "";
}

}  // namespace

void apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("KWSLAB_SEED");
  if (!env || !*env) return;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    cfg.train.seed = v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("KWSLAB_SEED is not an unsigned integer: '") + env + "'");
  }
}

TrainResult train_run(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, bool force,
                      std::ostream& log) {
  require_dir(data_dir, "dataset directory");
  if (fs::exists(out_dir / "checkpoint.ckpt") && !force)
    throw UsageError(out_dir.string() + " already holds a run; pass --force to overwrite");
  const auto train_set = load_dataset(data_dir, Split::train);
  const auto dev_set = load_dataset(data_dir, Split::dev);
  const auto data_sum = dataset_checksum(data_dir);
  make_dirs(out_dir / "checkpoints");
  const std::string cfg_text = run_config_text(cfg);
  write_text_file(out_dir / "config.cfg", cfg_text);

  log << "training " << loss_kind_name(cfg.train.loss.kind) << " (" << cfg.train.loss.dist.to_string() << ") on "
      << train_set.size() << " examples, " << dev_set.size() << " dev\n";
  auto result = train(cfg.train, train_set, dev_set, [&](const EpochMetrics& m, const ModelParams<float>& params) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03d.ckpt", m.epoch);
    save_checkpoint(out_dir / "checkpoints" / name, make_checkpoint(params, cfg, data_sum, m.epoch));
    log << format_epoch_line(m) << std::endl;
  });
  save_checkpoint(out_dir / "checkpoint.ckpt", make_checkpoint(result.params, cfg, data_sum, cfg.train.epochs));
  write_text_file(out_dir / "metrics.csv", metrics_csv(result.metrics));

  std::ostringstream manifest;
  manifest << "run_id=" << fs::absolute(out_dir).lexically_normal().filename().string() << "\n"
           << "tool_version=" << kToolVersion << "\n"
           << "dataset=" << fs::absolute(data_dir).lexically_normal().string() << "\n"
           << "dataset_checksum=" << hex64(data_sum) << "\n"
           << "config_checksum=" << hex64(fnv1a(cfg_text)) << "\n"
           << "checkpoint=checkpoint.ckpt\n"
           << "metrics=metrics.csv\n"
           << "config:\n"
           << cfg_text;
  write_text_file(out_dir / "run_manifest.txt", manifest.str());
  return result;
}

EvalReport eval_run(const fs::path& checkpoint, const fs::path& data_dir, const EvalConfig& cfg,
                    const fs::path& report_dir) {
  require_dir(data_dir, "dataset directory");
  const auto loc = locate_checkpoint(checkpoint);
  const auto params = load_checkpoint(loc.file).params.cast<float>();
  const auto examples = load_dataset(data_dir, Split::eval);
  if (examples.empty()) throw DataError("eval split of " + data_dir.string() + " is empty");
  auto report = evaluate(params, examples, cfg);
  write_report(report, report_dir);
  return report;
}

namespace {

int cmd_synth(const std::string& config, const std::vector<std::string>& sets, const fs::path& out_dir,
              std::ostream& out) {
  const auto cfg = config.empty() ? parse_corpus_config("", sets) : load_corpus_config(config, sets);
  const auto summary = build_corpus(cfg, out_dir);
  out << "wrote " << out_dir.string() << ": train " << summary.split_sizes.at(Split::train) << ", dev "
      << summary.split_sizes.at(Split::dev) << ", eval " << summary.split_sizes.at(Split::eval)
      << ", manifest checksum " << hex64(summary.manifest_checksum) << "\n";
  return exit_ok;
}

RunConfig load_run(const std::string& config, const std::vector<std::string>& sets) {
  auto cfg = config.empty() ? parse_run_config("", sets) : load_run_config(config, sets);
  apply_seed_env(cfg);
  return cfg;
}

void print_report(const EvalReport& r, std::ostream& out) {
  out << "threshold " << g9(r.op.threshold) << "  FRR " << g9(r.op.achieved_frr) << " (" << r.op.fr_count << "/"
      << r.curve.n_pos << ")  FA " << r.op.fa_count << "/" << r.curve.n_neg << "  mean latency "
      << g9(r.latency.mean) << " ms  median " << g9(r.latency.median) << " ms\n";
}

void write_det_svg(const fs::path& report_dir, const std::string& label) {
  const auto svg = line_plot_svg({det_series(report_dir / "det_curve.csv", label)},
                                 {"DET curve", "false accept rate", "false reject rate", true, true});
  write_text_file(report_dir / "det.svg", svg);
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data, double frr, const std::string& out_dir,
             std::ostream& out) {
  const auto loc = locate_checkpoint(checkpoint);
  EvalConfig cfg;
  if (fs::exists(loc.run_dir / "config.cfg")) cfg = load_run_config(loc.run_dir / "config.cfg").eval;
  if (frr > 0.0) cfg.target_frr = frr;
  const fs::path report_dir = out_dir.empty() ? loc.run_dir / "report" : fs::path(out_dir);
  const auto report = eval_run(loc.file, data, cfg, report_dir);
  write_det_svg(report_dir, loc.run_dir.filename().string());
  print_report(report, out);
  return exit_ok;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& sets, const std::vector<std::string>& grid,
              const std::vector<std::string>& losses, const fs::path& data, const fs::path& out_dir, int jobs,
              double frr, std::ostream& out, std::ostream& err) {
  if (jobs < 1) throw UsageError("--jobs must be >= 1");
  require_dir(data, "dataset directory");
  auto points = expand_grid(losses, grid);
  std::vector<RunConfig> cfgs;
  for (const auto& p : points) {
    auto overrides = sets;
    overrides.insert(overrides.end(), p.overrides.begin(), p.overrides.end());
    cfgs.push_back(load_run(config, overrides));
    if (frr > 0.0) cfgs.back().eval.target_frr = frr;
  }
  make_dirs(out_dir);

  if (jobs == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      err << "== " << points[i].name << "\n";
      train_run(cfgs[i], data, out_dir / points[i].name, true, err);
    }
  } else {
    std::vector<std::pair<pid_t, std::string>> running;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto run_dir = out_dir / points[i].name;
      make_dirs(run_dir);
      write_text_file(run_dir / "config.cfg", run_config_text(cfgs[i]));
      err << "== " << points[i].name << " (background, log in " << (run_dir / "train.log").string() << ")\n";
      spawn_train(run_dir, data, running, points[i].name);
      if (int(running.size()) >= jobs) wait_all(running);
    }
    wait_all(running);
  }

  std::ostringstream table;
  table << "loss,param,value,run,threshold,fa_count,fa_rate,fr_count,achieved_frr,mean_latency_ms,"
           "median_latency_ms,latency_reduction_ms,fa_change\n";
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto run_dir = out_dir / points[i].name;
    reports.push_back(eval_run(run_dir, data, cfgs[i].eval, run_dir / "report"));
    const auto& r = reports.back();
    const auto& base = reports.front();
    const double fa_change =
        base.op.fa_count ? double(r.op.fa_count - base.op.fa_count) / double(base.op.fa_count) : 0.0;
    table << points[i].loss << ',' << points[i].param << ',' << points[i].value << ',' << points[i].name << ','
          << g9(r.op.threshold) << ',' << r.op.fa_count << ',' << g9(r.op.fa_rate) << ',' << r.op.fr_count << ','
          << g9(r.op.achieved_frr) << ',' << g9(r.latency.mean) << ',' << g9(r.latency.median) << ','
          << g9(latency_reduction_ms(r.latency, base.latency)) << ',' << g9(fa_change) << '\n';
    out << points[i].name << ": ";
    print_report(r, out);
  }
  write_text_file(out_dir / "tradeoff.csv", table.str());
  return exit_ok;
}

int cmd_report(const std::string& run, const std::string& sweep, std::ostream& out) {
  if (run.empty() == sweep.empty()) throw UsageError("report needs exactly one of --run or --sweep");
  if (!run.empty()) {
    const fs::path dir = fs::path(run) / "report";
    if (!fs::exists(dir / "det_curve.csv"))
      throw DataError("no report found: " + (dir / "det_curve.csv").string() + " (run eval first)");
    write_det_svg(dir, fs::path(run).filename().string());
    out << "wrote " << (dir / "det.svg").string() << "\n";
    return exit_ok;
  }
  const fs::path dir(sweep);
  const auto table_path = dir / "tradeoff.csv";
  if (!fs::exists(table_path)) throw DataError("no tradeoff.csv in " + dir.string());
  const auto rows = read_csv(table_path);
  std::map<std::string, Series> by_loss;
  std::vector<Series> det;
  for (const auto& row : rows) {
    auto& s = by_loss[row.at("loss")];
    s.label = row.at("loss");
    s.markers = true;
    s.x.push_back(cell(row, "latency_reduction_ms", table_path));
    s.y.push_back(cell(row, "fa_count", table_path));
    const auto det_csv = dir / row.at("run") / "report" / "det_curve.csv";
    if (fs::exists(det_csv)) det.push_back(det_series(det_csv, row.at("run")));
  }
  std::vector<Series> tradeoff;
  for (auto& [_, s] : by_loss) tradeoff.push_back(std::move(s));
  write_text_file(dir / "tradeoff.svg", line_plot_svg(tradeoff, {"False accepts vs latency reduction",
                                                                 "latency reduction (ms)", "false accepts at target FRR",
                                                                 false, false}));
  write_text_file(dir / "det_overlay.svg",
                  line_plot_svg(det, {"DET curves", "false accept rate", "false reject rate", true, true}));
  out << "wrote " << (dir / "tradeoff.svg").string() << " and " << (dir / "det_overlay.svg").string() << "\n";
  return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keyword-spotting latency/accuracy lab", "kwslab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config, out_dir, data, checkpoint, run, sweep_dir;
  std::vector<std::string> sets, grid, losses;
  bool force = false;
  double frr = 0.0;
  int jobs = 1;

  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
  synth->add_option("--config", config, "corpus config file")->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  synth->add_option("--set", sets, "override a config key (section.key=value)");

  auto* train_cmd = app.add_subcommand("train", "train one model");
  train_cmd->add_option("--config", config, "training config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--data", data, "dataset directory")->required();
  train_cmd->add_option("--out", out_dir, "run directory")->required();
  train_cmd->add_option("--set", sets, "override a config key (section.key=value)");
  train_cmd->add_flag("--force", force, "overwrite an existing run");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file or run directory")->required();
  eval_cmd->add_option("--data", data, "dataset directory")->required();
  eval_cmd->add_option("--frr", frr, "target false-reject rate")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--out", out_dir, "report directory (default <run>/report)");

  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate a grid of runs");
  sweep_cmd->add_option("--config", config, "base training config file")->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", data, "dataset directory")->required();
  sweep_cmd->add_option("--out", out_dir, "sweep directory")->required();
  sweep_cmd->add_option("--grid", grid, "parameter grid, e.g. b=0.0,0.5,1.0");
  sweep_cmd->add_option("--loss", losses, "loss variants")->delimiter(',');
  sweep_cmd->add_option("--set", sets, "override a config key (section.key=value)");
  sweep_cmd->add_option("--frr", frr, "target false-reject rate")->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--jobs", jobs, "training processes to run at once");

  auto* report_cmd = app.add_subcommand("report", "render report CSVs to SVG");
  report_cmd->add_option("--run", run, "run directory");
  report_cmd->add_option("--sweep", sweep_dir, "sweep directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (const auto hint = suggestion(app, argc, argv); !hint.empty()) err << hint << "\n";
    err << "run with --help for usage\n";
    return exit_usage;
  }

  try {
    if (app.got_subcommand(synth)) return cmd_synth(config, sets, out_dir, out);
    if (app.got_subcommand(train_cmd)) {
      const auto result = train_run(load_run(config, sets), data, out_dir, force, err);
      out << "wrote " << out_dir << " (" << result.metrics.size() << " epochs)\n";
      return exit_ok;
    }
    if (app.got_subcommand(eval_cmd)) return cmd_eval(checkpoint, data, frr, out_dir, out);
    if (app.got_subcommand(sweep_cmd)) {
      if (losses.empty()) losses.push_back("latency_mp");
      return cmd_sweep(config, sets, grid, losses, data, out_dir, jobs, frr, out, err);
    }
    if (app.got_subcommand(report_cmd)) return cmd_report(run, sweep_dir, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_data;
  }
  return exit_usage;
}

}  // namespace kws
