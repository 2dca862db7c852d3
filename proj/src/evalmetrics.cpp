#include "dagcd/evalmetrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dagcd {

namespace {

void check_sizes(const DagStructure& truth, const DagStructure& est) {
  if (truth.p() != est.p()) throw std::invalid_argument("graphs have different node counts");
}

void finish(EvalReport& r) {
  r.TPR = r.T ? static_cast<double>(r.E) / static_cast<double>(r.T) : 0.0;
  r.FDR = r.P ? static_cast<double>(r.R + r.FP) / static_cast<double>(r.P) : 0.0;
}

FieldSummary summarize(std::span<const EvalReport> reports, double (*field)(const EvalReport&)) {
  FieldSummary s;
  const double n = static_cast<double>(reports.size());
  // Shifted by the first value so identical inputs give an exact zero SD.
  const double ref = field(reports.front());
  double shift = 0.0;
  for (const auto& r : reports) shift += field(r) - ref;
  shift /= n;
  s.mean = ref + shift;
  if (reports.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reports) ss += (field(r) - ref - shift) * (field(r) - ref - shift);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::string mean_sd(const FieldSummary& s) {
  std::ostringstream out;
  out << std::setprecision(6) << s.mean << '(' << s.sd << ')';
  return out.str();
}

}  // namespace

EvalReport score_dag(const DagStructure& truth, const DagStructure& est) {
  check_sizes(truth, est);
  EvalReport r;
  r.mode = EvalMode::dag;
  r.T = truth.edge_count();
  r.P = est.edge_count();
  for (auto [a, b] : est.edges()) {
    if (truth.has_edge(a, b))
      ++r.E;
    else if (truth.has_edge(b, a))
      ++r.R;
    else
      ++r.FP;
  }
  r.M = r.T - r.E - r.R;
  finish(r);
  return r;
}

EvalReport score_skeleton(const DagStructure& truth, const DagStructure& est) {
  check_sizes(truth, est);
  EvalReport r;
  r.mode = EvalMode::skeleton;
  r.T = truth.edge_count();
  r.P = est.edge_count();
  for (auto [a, b] : est.edges()) {
    if (truth.adjacent(a, b))
      ++r.E;
    else
      ++r.FP;
  }
  r.M = r.T - r.E;
  finish(r);
  return r;
}

AggregateReport aggregate(std::span<const EvalReport> reports) {
  if (reports.empty()) throw std::invalid_argument("nothing to aggregate");
  AggregateReport a;
  a.mode = reports.front().mode;
  for (const auto& r : reports)
    if (r.mode != a.mode) throw std::invalid_argument("cannot aggregate DAG and skeleton reports together");
  a.count = reports.size();
  a.T = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.T); });
  a.P = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.P); });
  a.E = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.E); });
  a.R = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.R); });
  a.M = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.M); });
  a.FP = summarize(reports, [](const EvalReport& r) { return static_cast<double>(r.FP); });
  a.TPR = summarize(reports, [](const EvalReport& r) { return r.TPR; });
  a.FDR = summarize(reports, [](const EvalReport& r) { return r.FDR; });
  return a;
}

std::string to_string(EvalMode mode) { return mode == EvalMode::dag ? "dag" : "skeleton"; }

void write_report_header(std::ostream& out) { out << "label,mode,T,P,E,R,M,FP,TPR,FDR\n"; }

void write_report_row(std::ostream& out, const std::string& label, const EvalReport& r) {
  out << label << ',' << to_string(r.mode) << ',' << r.T << ',' << r.P << ',' << r.E << ',' << r.R << ',' << r.M << ','
      << r.FP << ',' << std::setprecision(6) << r.TPR << ',' << r.FDR << '\n';
}

void write_aggregate_row(std::ostream& out, const std::string& label, const AggregateReport& a) {
  out << label << ',' << to_string(a.mode) << ',' << mean_sd(a.T) << ',' << mean_sd(a.P) << ',' << mean_sd(a.E) << ','
      << mean_sd(a.R) << ',' << mean_sd(a.M) << ',' << mean_sd(a.FP) << ',' << mean_sd(a.TPR) << ',' << mean_sd(a.FDR)
      << '\n';
}

}  // namespace dagcd
