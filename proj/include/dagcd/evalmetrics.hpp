#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dagcd/graph.hpp"

namespace dagcd {

enum class EvalMode { dag, skeleton };

/**
 * Structural comparison of an estimate against the true DAG.
 *
 * DAG mode: E counts estimated edges in the true skeleton with the true
 * direction, R those with the reversed direction, FP the rest.
 * Skeleton mode: R is always 0 and direction is ignored.
 */
struct EvalReport {
  EvalMode mode = EvalMode::dag;
  std::size_t T = 0;  ///< true edges
  std::size_t P = 0;  ///< predicted edges
  std::size_t E = 0;
  std::size_t R = 0;
  std::size_t M = 0;
  std::size_t FP = 0;
  double TPR = 0.0;
  double FDR = 0.0;  ///< 0 when nothing is predicted
};

EvalReport score_dag(const DagStructure& truth, const DagStructure& est);
EvalReport score_skeleton(const DagStructure& truth, const DagStructure& est);

struct FieldSummary {
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation, 0 for a single report
};

struct AggregateReport {
  EvalMode mode = EvalMode::dag;
  std::size_t count = 0;
  FieldSummary T, P, E, R, M, FP, TPR, FDR;
};

AggregateReport aggregate(std::span<const EvalReport> reports);

std::string to_string(EvalMode mode);

/// Header line for report CSVs.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const std::string& label, const EvalReport& report);
/// Summary row; every count and rate is written as mean(sd).
void write_aggregate_row(std::ostream& out, const std::string& label, const AggregateReport& summary);

}  // namespace dagcd
