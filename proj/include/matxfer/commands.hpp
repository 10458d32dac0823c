#pragma once

#include <string>

#include "matxfer/config.hpp"

namespace matxfer {

// Runs one subcommand: pretrain, finetune, infer, render, preview-augment,
// or metrics. Artifacts land in cfg.output_dir along with an echo of the
// effective config. Throws ConfigError / DataError / NumericError; the
// caller maps those to exit codes.
void execute(const std::string& command, const RunConfig& cfg);

} // namespace matxfer
