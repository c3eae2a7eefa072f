#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "attack.hpp"
#include "errors.hpp"

namespace zol {

inline constexpr const char* kTraceHeader = "epoch,adv_acc,match_clean,match_adv,sub_train_acc,queries";

namespace detail {

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_rate(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError("trace line " + std::to_string(line_no) + ": rate outside [0,1]");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("trace line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

inline std::uint64_t parse_count(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("trace line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

}  // namespace detail

/// One header line, then one row per epoch. Rates use six decimals; the
/// substitute columns are empty on the epoch-0 row.
inline std::string trace_to_csv(const AttackTrace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.epoch) + "," + detail::fixed6(r.adv_acc) + "," + detail::fixed6(r.match_clean) + "," +
           detail::fixed6(r.match_adv) + "," + detail::fixed6(r.sub_train_acc) + "," + std::to_string(r.queries) +
           "\n";
  }
  return out;
}

inline std::vector<AttackEpoch> trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw FormatError("trace CSV header mismatch");
  std::vector<AttackEpoch> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw FormatError("trace line " + std::to_string(line_no) + ": expected 6 fields");
    AttackEpoch r;
    r.epoch = detail::parse_count(f[0], line_no);
    r.adv_acc = detail::parse_rate(f[1], line_no);
    if (!f[2].empty()) r.match_clean = detail::parse_rate(f[2], line_no);
    if (!f[3].empty()) r.match_adv = detail::parse_rate(f[3], line_no);
    if (!f[4].empty()) r.sub_train_acc = detail::parse_rate(f[4], line_no);
    r.queries = detail::parse_count(f[5], line_no);
    if (r.epoch != rows.size()) throw FormatError("trace line " + std::to_string(line_no) + ": epochs out of order");
    rows.push_back(r);
  }
  if (rows.empty()) throw FormatError("trace CSV has no rows");
  return rows;
}

struct NamedTrace {
  std::string name;
  std::vector<AttackEpoch> rows;
};

struct TraceReport {
  std::string merged_csv;   // epoch, then adv_acc per trace
  std::string summary_csv;  // model, clean_acc, final_adv_acc, epochs
};

/// Aligns traces by epoch. All traces must cover the same epochs.
inline TraceReport merge_traces(const std::vector<NamedTrace>& traces) {
  if (traces.empty()) throw ConfigError("report needs at least one trace");
  const std::size_t rows = traces.front().rows.size();
  for (const auto& t : traces)
    if (t.rows.size() != rows)
      throw FormatError("trace '" + t.name + "' has " + std::to_string(t.rows.size()) + " rows, expected " +
                        std::to_string(rows));
  TraceReport rep;
  rep.merged_csv = "epoch";
  for (const auto& t : traces) rep.merged_csv += "," + t.name;
  rep.merged_csv += "\n";
  for (std::size_t e = 0; e < rows; ++e) {
    rep.merged_csv += std::to_string(e);
    for (const auto& t : traces) rep.merged_csv += "," + detail::fixed6(t.rows[e].adv_acc);
    rep.merged_csv += "\n";
  }
  rep.summary_csv = "model,clean_acc,final_adv_acc,epochs\n";
  for (const auto& t : traces)
    rep.summary_csv += t.name + "," + detail::fixed6(t.rows.front().adv_acc) + "," +
                       detail::fixed6(t.rows.back().adv_acc) + "," + std::to_string(rows - 1) + "\n";
  return rep;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace zol
