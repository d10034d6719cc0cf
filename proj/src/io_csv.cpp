#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "wetpred/error.hpp"
#include "wetpred/io.hpp"

namespace wetpred::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in || fs::is_directory(path)) throw FileNotReadable("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out.flush()) throw Error("cannot write '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

namespace {

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

// RFC 4180 style: quoted fields may hold commas, doubled quotes and newlines.
std::vector<Record> split_records(std::string_view text) {
  std::vector<Record> out;
  std::size_t line = 1;
  std::size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  while (i < text.size()) {
    Record rec;
    rec.line = line;
    std::string field;
    bool any = false;
    for (;;) {
      if (i < text.size() && text[i] == '"') {
        const std::size_t start_line = line;
        ++i;
        for (;;) {
          if (i >= text.size()) throw MalformedRow(start_line, "unterminated quoted field");
          if (text[i] == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              field += '"';
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          field += text[i++];
        }
        any = true;
      }
      while (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        field += text[i++];
        any = true;
      }
      if (i < text.size() && text[i] == ',') {
        rec.fields.push_back(std::move(field));
        field.clear();
        any = true;
        ++i;
        continue;
      }
      break;
    }
    if (i < text.size() && text[i] == '\r') ++i;
    if (i < text.size() && text[i] == '\n') ++i;
    if (any) {
      rec.fields.push_back(std::move(field));
      out.push_back(std::move(rec));
    }
    ++line;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

} // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options) {
  const auto records = split_records(text);
  if (records.empty()) throw EmptyFile("no header row");
  const auto& header = records.front().fields;

  std::optional<std::size_t> id_col;
  std::optional<std::size_t> target_col;
  std::vector<std::size_t> feature_cols;
  Dataset data;
  data.id_name = options.id_name;
  data.target_name = options.target_name;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name{trim(header[c])};
    if (name == options.id_name && !id_col) {
      id_col = c;
    } else if (name == options.target_name && !target_col) {
      target_col = c;
    } else {
      if (name.empty()) throw MalformedRow(records.front().line, "empty column name");
      feature_cols.push_back(c);
      data.columns.push_back(name);
    }
  }
  if (!target_col && options.require_target)
    throw MissingTarget("no '" + options.target_name + "' column");

  const std::size_t n = records.size() - 1;
  if (n == 0) throw EmptyData("no data rows");
  data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_cols.size()));
  if (target_col) data.target.resize(static_cast<Eigen::Index>(n));
  data.ids.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& rec = records[r + 1];
    if (rec.fields.size() != header.size())
      throw MalformedRow(rec.line, "expected " + std::to_string(header.size()) + " fields, got " +
                                       std::to_string(rec.fields.size()));
    const auto row = static_cast<Eigen::Index>(r);
    data.ids.push_back(id_col ? std::string(trim(rec.fields[*id_col])) : std::to_string(r + 1));
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto& cell = rec.fields[feature_cols[j]];
      const auto v = parse_number(cell);
      if (!v)
        throw MalformedRow(rec.line, "column '" + data.columns[j] + "': '" + cell +
                                         "' is not a finite number");
      data.features(row, static_cast<Eigen::Index>(j)) = *v;
    }
    if (target_col) {
      const auto& cell = rec.fields[*target_col];
      const auto v = parse_number(cell);
      if (!v)
        throw MalformedRow(rec.line, "target '" + cell + "' is not a finite number");
      if (*v < 0.0 || *v > 180.0)
        throw MalformedRow(rec.line, "target " + cell + " outside [0, 180] degrees");
      data.target(row) = *v;
    }
  }
  data.validate();
  return data;
}

Dataset load_csv(const fs::path& path, const CsvOptions& options) {
  return parse_csv(read_file(path), options);
}

std::string format_csv(const Dataset& data) {
  data.validate();
  std::ostringstream out;
  out << quote(data.id_name);
  for (const auto& c : data.columns) out << ',' << quote(c);
  if (data.has_target()) out << ',' << quote(data.target_name);
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out << quote(data.ids[r]);
    for (Eigen::Index j = 0; j < data.features.cols(); ++j)
      out << ',' << format_double(data.features(row, j));
    if (data.has_target()) out << ',' << format_double(data.target(row));
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& data, const fs::path& path) { write_file_atomic(path, format_csv(data)); }

} // namespace wetpred::io
