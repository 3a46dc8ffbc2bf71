#pragma once

// Data ingestion and result serialization for the command-line tool.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <cstdlib>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rlrt/covariance.hpp"
#include "rlrt/errors.hpp"

namespace rlrt::io {

inline constexpr const char* kToolName = "rlrt";
inline constexpr const char* kToolVersion = "1.0.0";

/// Round-trip formatting: 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// 64-bit FNV-1a, used to fingerprint the canonical configuration text.
inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Splits on `delim`; a space delimiter means any run of blanks.
inline std::vector<std::pair<std::string, std::size_t>> split_fields(const std::string& line, char delim) {
  std::vector<std::pair<std::string, std::size_t>> out;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      out.emplace_back(line.substr(start, i - start), start + 1);
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    const std::string raw = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    out.emplace_back(trim(raw), start + 1);
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(const std::string& field, double& value) {
  if (field.empty()) return false;
  const char* begin = field.c_str();
  char* end = nullptr;
  value = std::strtod(begin, &end);
  return end == begin + field.size();
}

inline char sniff_delimiter(const std::string& line) {
  for (char c : {',', '\t', ';'})
    if (line.find(c) != std::string::npos) return c;
  return ' ';
}

}  // namespace detail

/// Reads a delimited numeric table (comma, tab, semicolon or blanks; sniffed
/// from the first data line). Lines starting with '#' and blank lines are
/// skipped. A first row with any non-numeric field is treated as a header.
/// Rows are observations unless `transpose` is set.
inline Matrix read_matrix(std::istream& in, const std::string& source = "<stream>", bool transpose = false) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  char delim = 0;
  bool header_checked = false;
  std::size_t width = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (delim == 0) delim = detail::sniff_delimiter(line);
    const auto fields = detail::split_fields(line, delim);

    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    std::size_t bad_column = 0;
    for (const auto& [text, column] : fields) {
      double v = 0.0;
      if (!detail::parse_number(text, v)) {
        numeric = false;
        bad_column = column;
        break;
      }
      row.push_back(v);
    }
    if (!header_checked) {
      header_checked = true;
      if (!numeric) {
        width = fields.size();
        continue;
      }
    }
    if (!numeric) throw ParseError(source, line_no, bad_column, "non-numeric field");
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw ParseError(source, line_no, 1,
                       "expected " + std::to_string(width) + " fields, found " + std::to_string(row.size()));
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row[j])) throw ParseError(source, line_no, fields[j].second, "non-finite value");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source, line_no == 0 ? 1 : line_no, 1, "no numeric rows");

  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  if (transpose) return m.transpose();
  return m;
}

inline DataMatrix read_data_file(const std::filesystem::path& path, bool transpose = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open input file '" + path.string() + "'");
  return DataMatrix(read_matrix(in, path.string(), transpose));
}

inline void write_matrix(std::ostream& out, const Matrix& m, char delim = ',') {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << delim;
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

/// A flat record: ordered named fields holding text, integers or reals.
class Record {
 public:
  using Value = std::variant<std::string, std::int64_t, double, bool>;

  Record& set(std::string key, Value value) {
    for (auto& [k, v] : fields_) {
      if (k == key) {
        v = std::move(value);
        return *this;
      }
    }
    fields_.emplace_back(std::move(key), std::move(value));
    return *this;
  }

  const std::vector<std::pair<std::string, Value>>& fields() const noexcept { return fields_; }

  const Value& at(const std::string& key) const {
    for (const auto& [k, v] : fields_)
      if (k == key) return v;
    throw std::out_of_range("record has no field '" + key + "'");
  }

  static std::string to_text(const Value& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
    return std::get<bool>(v) ? "true" : "false";
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : fields_) {
      std::visit([&](const auto& x) { j[k] = x; }, v);
    }
    return j;
  }

  static Record from_json(const nlohmann::ordered_json& j) {
    Record r;
    for (const auto& [k, v] : j.items()) {
      if (v.is_string()) r.set(k, v.get<std::string>());
      else if (v.is_boolean()) r.set(k, v.get<bool>());
      else if (v.is_number_integer()) r.set(k, v.get<std::int64_t>());
      else if (v.is_number()) r.set(k, v.get<double>());
      else if (v.is_null()) r.set(k, std::string{});
      else throw std::runtime_error("record field '" + k + "' is not a scalar");
    }
    return r;
  }

  bool operator==(const Record&) const = default;

 private:
  std::vector<std::pair<std::string, Value>> fields_;
};

/// Tool version, seed and config fingerprint embedded in every output.
struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::string config;  // canonical "key=value;..." text
  std::string timestamp;  // empty for outputs that must be reproducible byte-for-byte

  std::string config_hash() const { return hex64(fnv1a64(config)); }
};

enum class Format { Csv, Json };

inline Format parse_format(const std::string& text) {
  if (text == "csv") return Format::Csv;
  if (text == "json") return Format::Json;
  throw DomainError("format must be csv or json, got '" + text + "'");
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// CSV with '#'-prefixed provenance lines, a header row taken from the first
/// record, then one line per record.
inline std::string to_csv(const std::vector<Record>& records, const Provenance& prov) {
  std::ostringstream out;
  out << "# tool=" << kToolName << ' ' << kToolVersion << '\n';
  out << "# command=" << prov.command << '\n';
  out << "# seed=" << prov.seed << '\n';
  out << "# config_hash=" << prov.config_hash() << '\n';
  out << "# config=" << prov.config << '\n';
  if (!prov.timestamp.empty()) out << "# timestamp=" << prov.timestamp << '\n';
  if (records.empty()) return out.str();
  const auto& head = records.front().fields();
  for (std::size_t i = 0; i < head.size(); ++i) out << (i ? "," : "") << detail::csv_escape(head[i].first);
  out << '\n';
  for (const auto& r : records) {
    const auto& f = r.fields();
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << detail::csv_escape(Record::to_text(f[i].second));
    out << '\n';
  }
  return out.str();
}

inline std::string to_json(const std::vector<Record>& records, const Provenance& prov) {
  nlohmann::ordered_json doc;
  doc["provenance"] = {{"tool", kToolName},
                       {"version", kToolVersion},
                       {"command", prov.command},
                       {"seed", prov.seed},
                       {"config_hash", prov.config_hash()},
                       {"config", prov.config}};
  if (!prov.timestamp.empty()) doc["provenance"]["timestamp"] = prov.timestamp;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) doc["records"].push_back(r.to_json());
  // Doubles are dumped in shortest round-trip form, which is lossless.
  return doc.dump(2) + "\n";
}

inline std::string serialize(const std::vector<Record>& records, const Provenance& prov, Format format) {
  return format == Format::Csv ? to_csv(records, prov) : to_json(records, prov);
}

inline std::vector<Record> records_from_json(const std::string& text) {
  const auto doc = nlohmann::ordered_json::parse(text);
  std::vector<Record> out;
  for (const auto& r : doc.at("records")) out.push_back(Record::from_json(r));
  return out;
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial output behind.
inline void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write output file '" + path.string() + "'");
    out << contents;
    if (!out) throw std::runtime_error("failed writing output file '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rlrt::io
