#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "kwslab/config.hpp"
#include "kwslab/evaluator.hpp"
#include "kwslab/trainer.hpp"

namespace kws {

inline constexpr const char* kToolVersion = "kwslab 1.0.0";

/// Exit codes of the command-line tool.
enum ExitCode { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numeric = 3 };

/// Entry point of the `kwslab` tool: synth, train, eval, sweep, report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Trains one run into `out_dir`: config.cfg, checkpoint.ckpt,
/// checkpoints/epoch_NNN.ckpt, metrics.csv, run_manifest.txt.
TrainResult train_run(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, bool force, std::ostream& log);

/// Evaluates a checkpoint (file or run directory) on the eval split and
/// writes the report CSVs into `report_dir`.
EvalReport eval_run(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                    const EvalConfig& cfg, const std::filesystem::path& report_dir);

/// Applies the KWSLAB_SEED environment variable, when set, to the training seed.
void apply_seed_env(RunConfig& cfg);

}  // namespace kws
