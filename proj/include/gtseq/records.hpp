#pragma once

// Result rows and their CSV / JSON-lines serialization.

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gtseq {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One estimator evaluation, expectation check, or Monte Carlo summary.
/// Vector-valued parameters (two-disease prevalences, per-disease error
/// rates, multinomial sample points) are ';'-joined strings.
struct EstimateRecord {
  std::string estimator;
  std::string component;
  std::string p;
  std::optional<int> k;
  std::optional<int> c;
  std::string pi0;
  std::string pi1;
  std::string sample;
  std::optional<long> replicates;
  std::optional<double> estimate;
  std::optional<double> target;
  std::optional<double> tail;
  std::optional<double> bias;  // Monte Carlo rows only
  std::optional<double> mse;   // Monte Carlo rows only
  std::optional<double> se;
  std::vector<std::string> flags;

  bool has_flag(const std::string& f) const {
    for (const auto& x : flags) {
      if (x == f || x.rfind(f + ":", 0) == 0) return true;
    }
    return false;
  }
};

inline constexpr std::array<const char*, 16> kRecordFields = {
    "estimator", "component", "p",    "k",    "c",   "pi0", "pi1", "sample",
    "replicates", "estimate", "target", "tail", "bias", "mse", "se",  "flags"};

enum class OutputFormat { Csv, Jsonl };

/// 17 significant digits, so every double round-trips.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // no negative zero: JSON readers drop its sign
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class It>
std::string join(It first, It last, const std::string& sep) {
  std::string out;
  for (It it = first; it != last; ++it) {
    if (it != first) out += sep;
    out += *it;
  }
  return out;
}

/// Fewest significant digits that still round-trip; used for parameter labels
/// so that a configured 0.98 prints as 0.98.
inline std::string format_label(double v) {
  if (!std::isfinite(v)) return format_number(v);
  char buf[40];
  for (int digits = 1; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string join_numbers(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double x : v) parts.push_back(format_label(x));
  return join(parts.begin(), parts.end(), ";");
}

inline std::string join_ints(const std::vector<int>& v) {
  std::vector<std::string> parts;
  for (int x : v) parts.push_back(std::to_string(x));
  return join(parts.begin(), parts.end(), ";");
}

namespace detail {

enum class FieldKind { Text, Number, Missing };

struct Field {
  FieldKind kind;
  std::string text;
};

inline std::array<Field, 16> record_fields(const EstimateRecord& r) {
  auto text = [](const std::string& s) { return Field{FieldKind::Text, s}; };
  auto integer = [](const auto& v) {
    return v ? Field{FieldKind::Number, std::to_string(*v)} : Field{FieldKind::Missing, ""};
  };
  auto real = [](const std::optional<double>& v) {
    if (!v) return Field{FieldKind::Missing, ""};
    // non-finite values are not JSON numbers
    return Field{std::isfinite(*v) ? FieldKind::Number : FieldKind::Text, format_number(*v)};
  };
  return {text(r.estimator), text(r.component), text(r.p),        integer(r.k),  integer(r.c),
          text(r.pi0),       text(r.pi1),       text(r.sample),   integer(r.replicates),
          real(r.estimate),  real(r.target),    real(r.tail),     real(r.bias),  real(r.mse),
          real(r.se),        text(join(r.flags.begin(), r.flags.end(), "|"))};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string csv_header() {
  return join(kRecordFields.begin(), kRecordFields.end(), ",");
}

inline std::string to_csv_row(const EstimateRecord& r) {
  auto fields = detail::record_fields(r);
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += detail::csv_escape(fields[i].text);
  }
  return out;
}

inline std::string to_json_line(const EstimateRecord& r) {
  auto fields = detail::record_fields(r);
  std::string out = "{";
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += nlohmann::json(kRecordFields[i]).dump();
    out += ':';
    switch (fields[i].kind) {
      case detail::FieldKind::Missing: out += "null"; break;
      case detail::FieldKind::Number: out += fields[i].text; break;
      case detail::FieldKind::Text: out += nlohmann::json(fields[i].text).dump(); break;
    }
  }
  return out + "}";
}

/// CSV writes the header even for an empty stream; JSON lines writes nothing.
inline void write_records(const std::vector<EstimateRecord>& records, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::Csv) {
    out << csv_header() << '\n';
    for (const auto& r : records) out << to_csv_row(r) << '\n';
  } else {
    for (const auto& r : records) out << to_json_line(r) << '\n';
  }
}

inline std::string records_to_string(const std::vector<EstimateRecord>& records, OutputFormat format) {
  std::ostringstream out;
  write_records(records, format, out);
  return out.str();
}

inline void write_records(const std::vector<EstimateRecord>& records, OutputFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_records(records, format, out);
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace gtseq
