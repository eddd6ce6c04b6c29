#pragma once

// certify | simulate | analyze | all. Each command returns its exit code:
// 0 success (certify: all Certified), 1 parse error or missing file,
// 2 some condition Refuted, 3 only Inconclusive failures, 4 digest mismatch.

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace cocycle::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 1,
  kExitRefuted = 2,
  kExitInconclusive = 3,
  kExitDigestMismatch = 4,
};

class DigestMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string tool_version();

CertificateReport run_certification(const CertificationRequest& request, const ExperimentConfig& config,
                                    std::size_t workers);

/// 0 if every report is Certified, 2 if any is Refuted, else 3.
int certification_exit_code(const std::vector<CertificateReport>& reports);

int cmd_certify(const std::filesystem::path& config_path, std::ostream& log);
int cmd_simulate(const std::filesystem::path& config_path, std::ostream& log);
/// stats_path defaults to <output_dir>/stats.csv; samples.csv and
/// manifest.json are read from the same directory.
int cmd_analyze(const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& stats_path, std::ostream& log);
/// certify, simulate and analyze in order; stops at the first stage that
/// fails with exit code 1 or 4 and otherwise returns the certify code.
int cmd_all(const std::filesystem::path& config_path, std::ostream& log);

}  // namespace cocycle::cli
