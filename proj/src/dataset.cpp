#include "dagcd/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dagcd {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

long parse_integer(const std::string& field, const std::string& where) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
    throw DataError("non-integer cell '" + field + "' at " + where);
  return v;
}

}  // namespace

CategoricalDataset::CategoricalDataset(int n, int p, std::vector<int> values, std::vector<int> levels,
                                       std::vector<int> intervened)
    : n_(n), p_(p), levels_(std::move(levels)) {
  if (n < 0 || p < 1) throw DataError("dataset needs n >= 0 and p >= 1");
  if (static_cast<long>(values.size()) != static_cast<long>(n) * p)
    throw DataError("value matrix is not n x p");
  if (static_cast<int>(levels_.size()) != p) throw DataError("need one level count per column");
  for (int r : levels_)
    if (r < 2 || r > 255) throw DataError("level counts must lie in 2..255");

  columns_.assign(p, std::vector<std::uint8_t>(n));
  for (int h = 0; h < n; ++h) {
    for (int j = 0; j < p; ++j) {
      int v = values[static_cast<std::size_t>(h) * p + j];
      if (v < 1 || v > levels_[j])
        throw DataError("level out of range at row " + std::to_string(h + 1) + ", column " +
                        std::to_string(j + 1));
      columns_[j][h] = static_cast<std::uint8_t>(v);
    }
  }

  if (intervened.empty()) intervened.assign(n, kNoIntervention);
  if (static_cast<int>(intervened.size()) != n) throw DataError("intervention vector must have n entries");
  intervened_ = std::move(intervened);

  intervention_rows_.assign(p, {});
  observational_rows_.assign(p, {});
  for (int h = 0; h < n; ++h) {
    int node = intervened_[h];
    if (node != kNoIntervention && (node < 0 || node >= p))
      throw DataError("intervened node out of range at row " + std::to_string(h + 1));
    for (int j = 0; j < p; ++j) (j == node ? intervention_rows_ : observational_rows_)[j].push_back(h);
  }

  dummy_offsets_.resize(p);
  int offset = 1;
  for (int j = 0; j < p; ++j) {
    dummy_offsets_[j] = offset;
    offset += levels_[j] - 1;
  }
}

bool CategoricalDataset::has_interventions() const {
  return std::any_of(intervened_.begin(), intervened_.end(), [](int v) { return v != kNoIntervention; });
}

int CategoricalDataset::dummy_dimension() const {
  int d = 1;
  for (int r : levels_) d += r - 1;
  return d;
}

std::vector<DummyRow> encode(const CategoricalDataset& ds) {
  std::vector<DummyRow> rows(ds.n());
  const int d = ds.dummy_dimension();
  for (int h = 0; h < ds.n(); ++h) {
    auto& bits = rows[h].bits;
    bits.assign(d, 0);
    bits[0] = 1;
    for (int i = 0; i < ds.p(); ++i) {
      int level = ds.value(h, i);
      if (level >= 2) bits[ds.dummy_offset(i) + level - 2] = 1;
    }
  }
  return rows;
}

int decode_segment(std::span<const std::uint8_t> segment) {
  for (std::size_t k = 0; k < segment.size(); ++k)
    if (segment[k]) return static_cast<int>(k) + 2;
  return 1;
}

CategoricalDataset load_csv(const std::filesystem::path& path,
                            const std::optional<std::filesystem::path>& intervention_spec) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<int> declared;
  std::vector<int> values;
  int p = -1;
  int n = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto colon = t.find(':');
      if (trim(t.substr(1, colon == std::string::npos ? 0 : colon - 1)) == "levels" && colon != std::string::npos) {
        for (auto& f : split(trim(t.substr(colon + 1)), ','))
          declared.push_back(static_cast<int>(parse_integer(f, "levels header")));
      }
      continue;
    }
    auto fields = split(t, ',');
    if (p < 0) p = static_cast<int>(fields.size());
    if (static_cast<int>(fields.size()) != p)
      throw DataError("ragged row at line " + std::to_string(line_no) + " of " + path.string());
    for (std::size_t k = 0; k < fields.size(); ++k) {
      long v = parse_integer(fields[k], "line " + std::to_string(line_no) + ", column " + std::to_string(k + 1));
      if (v < 1) throw DataError("level out of range at line " + std::to_string(line_no));
      values.push_back(static_cast<int>(v));
    }
    ++n;
  }
  if (p < 1) throw DataError("no data rows in " + path.string());

  std::vector<int> levels(p, 2);
  if (!declared.empty()) {
    if (static_cast<int>(declared.size()) != p) throw DataError("levels header does not match column count");
    levels = declared;
  } else {
    for (int h = 0; h < n; ++h)
      for (int j = 0; j < p; ++j) levels[j] = std::max(levels[j], values[static_cast<std::size_t>(h) * p + j]);
  }

  std::vector<int> intervened(n, CategoricalDataset::kNoIntervention);
  if (intervention_spec) {
    std::ifstream spec(*intervention_spec);
    if (!spec) throw DataError("cannot open " + intervention_spec->string());
    int spec_line = 0;
    while (std::getline(spec, line)) {
      ++spec_line;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto fields = split(t, ',');
      if (spec_line == 1 && !fields.empty() && !fields[0].empty() && !std::isdigit(static_cast<unsigned char>(fields[0][0])))
        continue;
      if (fields.size() != 2) throw DataError("intervention spec needs row,node pairs");
      std::string where = "intervention line " + std::to_string(spec_line);
      long row = parse_integer(fields[0], where);
      long node = parse_integer(fields[1], where);
      if (row < 1 || row > n) throw DataError("intervention row out of range at " + where);
      if (node < 1 || node > p) throw DataError("intervention node out of range at " + where);
      int& slot = intervened[row - 1];
      if (slot != CategoricalDataset::kNoIntervention && slot != node - 1)
        throw DataError("overlapping intervention assignments for row " + std::to_string(row));
      slot = static_cast<int>(node - 1);
    }
  }

  return CategoricalDataset(n, p, std::move(values), std::move(levels), std::move(intervened));
}

void write_csv(const CategoricalDataset& ds, const std::filesystem::path& path, bool declare_levels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  if (declare_levels) {
    out << "#levels: ";
    for (int j = 0; j < ds.p(); ++j) out << (j ? "," : "") << ds.levels(j);
    out << '\n';
  }
  for (int h = 0; h < ds.n(); ++h) {
    for (int j = 0; j < ds.p(); ++j) out << (j ? "," : "") << ds.value(h, j);
    out << '\n';
  }
}

void write_interventions_csv(const CategoricalDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "row_index,node_index\n";
  for (int h = 0; h < ds.n(); ++h)
    if (ds.intervened_node(h) != CategoricalDataset::kNoIntervention)
      out << h + 1 << ',' << ds.intervened_node(h) + 1 << '\n';
}

}  // namespace dagcd
