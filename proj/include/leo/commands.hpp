#pragma once

#include "leo/pipeline.hpp"
#include "leo/run_config.hpp"

namespace leo {

/// CLI entry point (subcommand parsing + exit-code mapping):
/// 0 success, 1 config validation failure, 2 missing stage dependency,
/// 3 runtime failure.
int cli_main(int argc, char** argv);

void cmd_make_data(const RunConfig& cfg);
void cmd_train_animator(const RunConfig& cfg);
void cmd_encode_codes(const RunConfig& cfg);
void cmd_train_lmdm(const RunConfig& cfg, LmdmVariant variant);
void cmd_train_simple_dm(const RunConfig& cfg);
void cmd_train_cddpm(const RunConfig& cfg);
void cmd_sample(const RunConfig& cfg, bool conditional);
void cmd_rollout(const RunConfig& cfg, bool with_transitions);
void cmd_edit(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);

}  // namespace leo
