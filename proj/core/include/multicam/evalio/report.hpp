#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multicam/evalio/evaluation.hpp"

namespace multicam {

enum class ReportFormat { kCsv, kMarkdown, kSvg };

ReportFormat report_format_from_string(std::string_view s);  // csv | md | svg

struct EmitOptions {
  // Wall-clock numbers differ run to run; they are written only on request
  // so the default tables stay byte-reproducible.
  bool with_timing = false;
};

// One row block per report (method), in the given order.
std::string cameras_csv(std::span<const EvaluationReport> reports);
std::string objects_csv(std::span<const EvaluationReport> reports);
std::string drift_csv(std::span<const EvaluationReport> reports);
std::string summary_csv(std::span<const EvaluationReport> reports);
std::string runtime_csv(std::span<const EvaluationReport> reports);
std::string report_markdown(std::span<const EvaluationReport> reports, const EmitOptions &options = {});
std::string drift_svg(const EvaluationReport &report);

/// Writes the files for `format` into `dir` (created if missing) and
/// returns their paths. Throws IoError.
std::vector<std::filesystem::path> emit_report(std::span<const EvaluationReport> reports,
                                               ReportFormat format,
                                               const std::filesystem::path &dir,
                                               const EmitOptions &options = {});

}  // namespace multicam
