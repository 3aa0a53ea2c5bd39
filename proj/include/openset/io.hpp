#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "openset/active_learning.hpp"
#include "openset/embedding.hpp"
#include "openset/error.hpp"

namespace openset {

enum class FileFormat { csv, jsonl };

inline FileFormat parse_file_format(std::string_view s) {
  if (s == "csv") return FileFormat::csv;
  if (s == "jsonl") return FileFormat::jsonl;
  throw ConfigError("unknown file format '" + std::string(s) + "'");
}

enum class SplitTag { train, observed, test, none };

inline std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::observed: return "observed";
    case SplitTag::test: return "test";
    case SplitTag::none: return "-";
  }
  throw InternalError("unreachable split tag");
}

inline SplitTag parse_split_tag(std::string_view s) {
  if (s == "train") return SplitTag::train;
  if (s == "observed") return SplitTag::observed;
  if (s == "test") return SplitTag::test;
  if (s == "-") return SplitTag::none;
  throw DataError("unknown split tag '" + std::string(s) + "'");
}

struct EmbeddingRecord {
  std::string id;
  std::optional<int> label;  // nullopt = '?'
  SplitTag split = SplitTag::none;
  Vec vector;
};

// Shortest round-trip decimal form of a double (what every emitted file uses,
// so re-parsing reproduces the exact value).
inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require_data(res.ec == std::errc() && res.ptr == s.data() + s.size(),
               "bad numeric value '" + std::string(s) + "' in " + context);
  return v;
}

inline int parse_int(std::string_view s, const std::string& context) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require_data(res.ec == std::errc() && res.ptr == s.data() + s.size(),
               "bad integer '" + std::string(s) + "' in " + context);
  return v;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

// Content lines: stripped of '\r', comments ('#') and blanks dropped.
inline std::vector<std::string> content_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

inline void validate_record(const EmbeddingRecord& r, std::size_t expected_dim) {
  require_data(!r.id.empty(), "record with empty id");
  require_data(r.vector.size() == expected_dim,
               "dimension mismatch at record '" + r.id + "': expected " +
                   std::to_string(expected_dim) + ", got " +
                   std::to_string(r.vector.size()));
  require_data(all_finite(r.vector),
               "non-finite value at record '" + r.id + "'");
}

}  // namespace detail

// CSV grammar: header `id,label,split,v0,...,v{dim-1}`, one record per line,
// label an integer or '?', split one of train/observed/test/-. JSONL: one
// object per line with fields id, label (int or null), vector. Lines starting
// with '#' are comments in both formats.
inline std::vector<EmbeddingRecord> parse_records(std::istream& in,
                                                  FileFormat format) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty(), "empty file");
  std::vector<EmbeddingRecord> records;
  std::set<std::string> seen_ids;

  if (format == FileFormat::csv) {
    const auto header = detail::split_csv_line(lines[0]);
    require_data(header.size() >= 4 && header[0] == "id" &&
                     header[1] == "label" && header[2] == "split",
                 "bad CSV header: expected id,label,split,v0,...");
    const std::size_t dim = header.size() - 3;
    for (std::size_t c = 0; c < dim; ++c) {
      require_data(header[3 + c] == "v" + std::to_string(c),
                   "bad CSV header coordinate column " + std::to_string(c));
    }
    require_data(lines.size() > 1, "empty file");
    records.reserve(lines.size() - 1);
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
      const auto fields = detail::split_csv_line(lines[ln]);
      require_data(fields.size() >= 3, "short CSV record on line " +
                                           std::to_string(ln + 1));
      EmbeddingRecord r;
      r.id = std::string(fields[0]);
      if (fields[1] != "?") {
        r.label = parse_int(fields[1], "label of '" + r.id + "'");
      }
      r.split = parse_split_tag(fields[2]);
      r.vector.reserve(fields.size() - 3);
      for (std::size_t c = 3; c < fields.size(); ++c) {
        r.vector.push_back(parse_double(fields[c], "record '" + r.id + "'"));
      }
      detail::validate_record(r, dim);
      require_data(seen_ids.insert(r.id).second, "duplicate id '" + r.id + "'");
      records.push_back(std::move(r));
    }
  } else {
    std::size_t dim = 0;
    records.reserve(lines.size());
    for (const auto& line : lines) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad JSONL line: ") + e.what());
      }
      require_data(j.is_object() && j.contains("id") && j["id"].is_string(),
                   "JSONL record missing string id");
      EmbeddingRecord r;
      r.id = j["id"].get<std::string>();
      if (j.contains("label") && !j["label"].is_null()) {
        require_data(j["label"].is_number_integer(),
                     "non-integer label at record '" + r.id + "'");
        r.label = j["label"].get<int>();
      }
      if (j.contains("split") && j["split"].is_string()) {
        r.split = parse_split_tag(j["split"].get<std::string>());
      }
      require_data(j.contains("vector") && j["vector"].is_array(),
                   "JSONL record '" + r.id + "' missing vector array");
      for (const auto& v : j["vector"]) {
        require_data(v.is_number(),
                     "non-numeric coordinate at record '" + r.id + "'");
        r.vector.push_back(v.get<double>());
      }
      if (records.empty()) dim = r.vector.size();
      detail::validate_record(r, dim);
      require_data(seen_ids.insert(r.id).second, "duplicate id '" + r.id + "'");
      records.push_back(std::move(r));
    }
  }
  return records;
}

inline std::vector<EmbeddingRecord> parse_records(const std::string& content,
                                                  FileFormat format) {
  std::istringstream in(content);
  return parse_records(in, format);
}

inline LabeledSet to_labeled_set(const std::vector<EmbeddingRecord>& records) {
  LabeledSet set;
  for (const auto& r : records) {
    require_data(r.label.has_value(),
                 "record '" + r.id + "' lacks the label a labeled set needs");
    set.append({{r.id, r.vector}, *r.label});
  }
  return set;
}

inline UnlabeledPool to_pool(const std::vector<EmbeddingRecord>& records) {
  std::vector<Embedding> members;
  std::vector<std::optional<int>> truth;
  members.reserve(records.size());
  truth.reserve(records.size());
  for (const auto& r : records) {
    members.push_back({r.id, r.vector});
    truth.push_back(r.label);
  }
  return UnlabeledPool(std::move(members), std::move(truth));
}

// Assembles a DatasetSplit from one tagged record stream: known classes are
// the train labels, novel classes everything else seen in the pools.
inline DatasetSplit split_from_records(const std::vector<EmbeddingRecord>& records) {
  std::vector<EmbeddingRecord> train, observed, test;
  for (const auto& r : records) {
    switch (r.split) {
      case SplitTag::train: train.push_back(r); break;
      case SplitTag::observed: observed.push_back(r); break;
      case SplitTag::test: test.push_back(r); break;
      case SplitTag::none:
        throw DataError("record '" + r.id + "' has no split tag");
    }
  }
  require_data(!train.empty(), "no train records");
  DatasetSplit split;
  split.train = to_labeled_set(train);
  split.known_classes = split.train.classes();
  split.observed = to_pool(observed);
  split.test = to_pool(test);
  const auto collect_novel = [&split](const std::vector<EmbeddingRecord>& rs) {
    for (const auto& r : rs) {
      if (r.label && split.known_classes.count(*r.label) == 0) {
        split.novel_classes.insert(*r.label);
      }
    }
  };
  collect_novel(observed);
  collect_novel(test);
  split.validate();
  return split;
}

inline void write_records(std::ostream& out,
                          const std::vector<EmbeddingRecord>& records,
                          FileFormat format,
                          const std::string& manifest = std::string()) {
  require_data(!records.empty(), "refusing to write an empty record set");
  if (!manifest.empty()) out << "# manifest=" << manifest << "\n";
  if (format == FileFormat::csv) {
    const std::size_t dim = records[0].vector.size();
    out << "id,label,split";
    for (std::size_t c = 0; c < dim; ++c) out << ",v" << c;
    out << "\n";
    for (const auto& r : records) {
      out << r.id << ',';
      if (r.label) {
        out << *r.label;
      } else {
        out << '?';
      }
      out << ',' << to_string(r.split);
      for (double v : r.vector) out << ',' << format_double(v);
      out << "\n";
    }
  } else {
    for (const auto& r : records) {
      nlohmann::json j;
      j["id"] = r.id;
      if (r.label) {
        j["label"] = *r.label;
      } else {
        j["label"] = nullptr;
      }
      if (r.split != SplitTag::none) j["split"] = to_string(r.split);
      j["vector"] = nlohmann::json::array();
      for (double v : r.vector) j["vector"].push_back(v);
      out << j.dump() << "\n";
    }
  }
}

inline std::vector<EmbeddingRecord> records_of(const LabeledSet& set, SplitTag tag) {
  std::vector<EmbeddingRecord> out;
  out.reserve(set.size());
  for (const auto& m : set.members()) {
    out.push_back({m.embedding.id, m.label, tag, m.embedding.vector});
  }
  return out;
}

inline std::vector<EmbeddingRecord> records_of(const UnlabeledPool& pool,
                                               SplitTag tag) {
  std::vector<EmbeddingRecord> out;
  out.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out.push_back({pool[i].id, pool.truth_label(i), tag, pool[i].vector});
  }
  return out;
}

// ---- score dumps: id,score,is_novel ----

struct ScoreRow {
  std::string id;
  double score = 0.0;
  bool is_novel = false;
};

inline void write_score_csv(std::ostream& out, const std::vector<ScoreRow>& rows,
                            const std::string& manifest = std::string()) {
  if (!manifest.empty()) out << "# manifest=" << manifest << "\n";
  out << "id,score,is_novel\n";
  for (const auto& r : rows) {
    out << r.id << ',' << format_double(r.score) << ',' << (r.is_novel ? 1 : 0)
        << "\n";
  }
}

inline std::vector<ScoreRow> read_score_csv(std::istream& in) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty() && lines[0] == "id,score,is_novel",
               "bad score CSV header");
  std::vector<ScoreRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = detail::split_csv_line(lines[ln]);
    require_data(fields.size() == 3, "bad score CSV record");
    rows.push_back({std::string(fields[0]),
                    parse_double(fields[1], "score CSV"),
                    parse_int(fields[2], "score CSV") != 0});
  }
  return rows;
}

// ---- curve points: x,y ----

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& pts,
                            const std::string& manifest = std::string()) {
  if (!manifest.empty()) out << "# manifest=" << manifest << "\n";
  out << "x,y\n";
  for (const auto& p : pts) {
    out << format_double(p.x) << ',' << format_double(p.y) << "\n";
  }
}

inline std::vector<CurvePoint> read_curve_csv(std::istream& in) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty() && lines[0] == "x,y", "bad curve CSV header");
  std::vector<CurvePoint> pts;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = detail::split_csv_line(lines[ln]);
    require_data(fields.size() == 2, "bad curve CSV record");
    pts.push_back({parse_double(fields[0], "curve CSV"),
                   parse_double(fields[1], "curve CSV")});
  }
  return pts;
}

// ---- pseudo-label dump: id,pseudo_label ----

inline void write_pseudo_csv(std::ostream& out, const UnlabeledPool& pool,
                             const std::vector<int>& labels,
                             const std::string& manifest = std::string()) {
  require_data(labels.size() == pool.size(), "pseudo-label count mismatch");
  if (!manifest.empty()) out << "# manifest=" << manifest << "\n";
  out << "id,pseudo_label\n";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out << pool[i].id << ',' << labels[i] << "\n";
  }
}

inline std::vector<std::pair<std::string, int>> read_pseudo_csv(std::istream& in) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty() && lines[0] == "id,pseudo_label",
               "bad pseudo-label CSV header");
  std::vector<std::pair<std::string, int>> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = detail::split_csv_line(lines[ln]);
    require_data(fields.size() == 2, "bad pseudo-label CSV record");
    rows.emplace_back(std::string(fields[0]),
                      parse_int(fields[1], "pseudo-label CSV"));
  }
  return rows;
}

// JSON has no literal for infinities, so non-finite doubles travel as
// strings ("inf"/"-inf"/"nan") and come back as the same values.
inline nlohmann::json json_double(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double double_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  require_data(j.is_string(), "expected a number or numeric string");
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw DataError("bad numeric string '" + s + "'");
}

// ---- accuracy-vs-budget curves: strategy,budget,b,means ----

struct ALCurveRow {
  std::string strategy;
  double budget = 0.0;
  std::size_t b = 0;
  double novel_acc_mean = 0.0;
  double combined_acc_mean = 0.0;
};

inline std::vector<ALCurveRow> read_al_curves_csv(std::istream& in) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty() &&
                   lines[0] == "strategy,budget,b,novel_acc_mean,combined_acc_mean",
               "bad al-curves CSV header");
  std::vector<ALCurveRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const auto fields = detail::split_csv_line(lines[ln]);
    require_data(fields.size() == 5, "bad al-curves CSV record");
    rows.push_back({std::string(fields[0]),
                    parse_double(fields[1], "al-curves CSV"),
                    static_cast<std::size_t>(parse_int(fields[2], "al-curves CSV")),
                    parse_double(fields[3], "al-curves CSV"),
                    parse_double(fields[4], "al-curves CSV")});
  }
  return rows;
}

// ---- active-learning traces: JSONL ----
// First line is a meta record carrying the manifest hash; step records are
// {step,id,score,label,was_novel}; snapshot records {step,novel_acc,combined_acc}.

inline void write_trace_jsonl(std::ostream& out, const ALTrace& trace,
                              const std::string& manifest) {
  nlohmann::json meta;
  meta["manifest"] = manifest;
  out << meta.dump() << "\n";
  std::size_t si = 0;
  const auto emit_snapshots_through = [&](std::size_t step) {
    while (si < trace.snapshots.size() && trace.snapshots[si].step <= step) {
      nlohmann::json j;
      j["step"] = trace.snapshots[si].step;
      j["novel_acc"] = trace.snapshots[si].novel_acc;
      j["combined_acc"] = trace.snapshots[si].combined_acc;
      out << j.dump() << "\n";
      ++si;
    }
  };
  emit_snapshots_through(0);
  for (const auto& s : trace.steps) {
    nlohmann::json j;
    j["step"] = s.step;
    j["id"] = s.id;
    j["score"] = json_double(s.score);
    j["label"] = s.label;
    j["was_novel"] = s.was_novel;
    out << j.dump() << "\n";
    emit_snapshots_through(s.step);
  }
  emit_snapshots_through(static_cast<std::size_t>(-1));
}

struct TraceFile {
  std::string manifest;
  ALTrace trace;
};

inline TraceFile read_trace_jsonl(std::istream& in) {
  const auto lines = detail::content_lines(in);
  require_data(!lines.empty(), "empty trace file");
  TraceFile out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad trace line: ") + e.what());
    }
    if (j.contains("manifest")) {
      out.manifest = j["manifest"].get<std::string>();
    } else if (j.contains("id")) {
      out.trace.steps.push_back({j.at("step").get<std::size_t>(),
                                 j.at("id").get<std::string>(),
                                 double_from_json(j.at("score")),
                                 j.at("label").get<int>(),
                                 j.at("was_novel").get<bool>()});
    } else {
      out.trace.snapshots.push_back({j.at("step").get<std::size_t>(),
                                     j.at("novel_acc").get<double>(),
                                     j.at("combined_acc").get<double>(), false,
                                     false});
    }
  }
  return out;
}

// ---- file helpers ----

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require_data(in.good(), "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require_data(out.good(), "cannot write '" + path + "'");
  out << content;
  require_data(out.good(), "write failed for '" + path + "'");
}

inline std::vector<EmbeddingRecord> load_records(const std::string& path,
                                                 FileFormat format) {
  std::ifstream in(path, std::ios::binary);
  require_data(in.good(), "cannot open '" + path + "'");
  return parse_records(in, format);
}

}  // namespace openset
