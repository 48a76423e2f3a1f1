#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tubalnet/training.hpp"

namespace tubalnet::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kInputError = 2,
    kDiverged = 3,
};

/// Runs the command line `tubalnet <subcommand> ...`; args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Per-epoch CSV: epoch,train_loss,val_rmse,test_rmse (empty cells where not available).
std::string report_csv(const RunReport& report);
/// Deterministic key/value metadata (no timing).
std::string report_json(const RunReport& report);

}  // namespace tubalnet::cli
