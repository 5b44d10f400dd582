#pragma once

#include <filesystem>
#include <string>

#include "pclmatch/config.hpp"
#include "pclmatch/trainer.hpp"

namespace pclmatch {

// Entry point behind main(). Returns the process exit status: 0 on success,
// 1 on validation/runtime failure (one-line diagnostic on stderr), 2 on
// usage errors.
int run_cli(int argc, const char* const* argv);

// Report writers shared by the subcommands and the test suites.
void write_metrics_report(const MetricsReport& report, const std::filesystem::path& out_dir);
void write_ablation_report(const AblationResult& result, const std::string& baseline_tag,
                           const std::filesystem::path& out_dir);

}  // namespace pclmatch
