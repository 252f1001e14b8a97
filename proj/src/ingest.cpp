#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "kdstr/geometry.hpp"

namespace kdstr {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool parse_number(std::string_view text, double& out) {
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

int read_int(std::string_view s, std::size_t pos, std::size_t len) {
  if (pos + len > s.size()) throw Error(ErrorCode::ParseError, "truncated time '" + std::string(s) + "'");
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
  if (ec != std::errc() || ptr != s.data() + pos + len)
    throw Error(ErrorCode::ParseError, "bad time '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_row(const std::string& line) {
  using Sep = boost::escaped_list_separator<char>;
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  std::vector<std::string> out;
  for (const auto& field : tok) out.push_back(trim(field));
  return out;
}

}  // namespace

double parse_time(std::string_view text) {
  double numeric = 0.0;
  if (parse_number(text, numeric)) return numeric;

  // YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH:MM]
  using namespace std::chrono;
  const int y = read_int(text, 0, 4);
  if (text.size() < 10 || text[4] != '-' || text[7] != '-')
    throw Error(ErrorCode::ParseError, "bad time '" + std::string(text) + "'");
  const int mo = read_int(text, 5, 2);
  const int da = read_int(text, 8, 2);
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(da)}};
  if (!ymd.ok()) throw Error(ErrorCode::ParseError, "invalid date '" + std::string(text) + "'");
  double seconds = static_cast<double>(sys_days{ymd}.time_since_epoch().count()) * 86400.0;

  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    const int hh = read_int(text, pos + 1, 2);
    if (pos + 3 >= text.size() || text[pos + 3] != ':')
      throw Error(ErrorCode::ParseError, "bad time '" + std::string(text) + "'");
    const int mm = read_int(text, pos + 4, 2);
    pos += 6;
    double ss = 0.0;
    if (pos < text.size() && text[pos] == ':') {
      std::size_t end = pos + 1;
      while (end < text.size() && (std::isdigit(static_cast<unsigned char>(text[end])) || text[end] == '.')) ++end;
      if (!parse_number(text.substr(pos + 1, end - pos - 1), ss))
        throw Error(ErrorCode::ParseError, "bad seconds in '" + std::string(text) + "'");
      pos = end;
    }
    if (hh > 23 || mm > 59 || ss >= 61.0) throw Error(ErrorCode::ParseError, "bad clock time '" + std::string(text) + "'");
    seconds += hh * 3600.0 + mm * 60.0 + ss;
  }
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) return seconds;
    if ((text[pos] == '+' || text[pos] == '-') && pos + 6 == text.size() && text[pos + 3] == ':') {
      const int sign = text[pos] == '+' ? 1 : -1;
      const int oh = read_int(text, pos + 1, 2);
      const int om = read_int(text, pos + 4, 2);
      return seconds - sign * (oh * 3600.0 + om * 60.0);
    }
    throw Error(ErrorCode::ParseError, "trailing characters in time '" + std::string(text) + "'");
  }
  return seconds;
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::ParseError, "empty input: no header row");
  if (!header.empty() && header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
    header[0] = header[0].substr(3);

  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::ParseError, "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  if (schema.coord_columns.empty()) throw Error(ErrorCode::ParseError, "no coordinate columns mapped");
  const std::size_t time_col = column(schema.time_column);
  std::vector<std::size_t> coord_cols;
  for (const auto& c : schema.coord_columns) coord_cols.push_back(column(c));
  std::vector<std::string> feature_names = schema.feature_columns;
  if (feature_names.empty()) {
    for (const auto& h : header) {
      const bool used = h == schema.time_column ||
                        std::find(schema.coord_columns.begin(), schema.coord_columns.end(), h) !=
                            schema.coord_columns.end() ||
                        std::find(schema.ignore_columns.begin(), schema.ignore_columns.end(), h) !=
                            schema.ignore_columns.end();
      if (!used) feature_names.push_back(h);
    }
  }
  if (feature_names.empty()) throw Error(ErrorCode::ParseError, "no feature columns");
  std::vector<std::size_t> feature_cols;
  for (const auto& f : feature_names) feature_cols.push_back(column(f));

  struct Row {
    double time;
    std::vector<double> coords;
    std::vector<double> values;
    std::size_t line;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = split_row(line);
    } catch (const boost::escaped_list_error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (fields.size() != header.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    Row row;
    row.line = line_no;
    try {
      row.time = parse_time(fields[time_col]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.detail());
    }
    auto number = [&](std::size_t col) {
      double v = 0.0;
      if (!parse_number(fields[col], v))
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": '" + fields[col] +
                                               "' in column '" + header[col] + "' is not a number");
      if (!std::isfinite(v))
        throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ": non-finite value in column '" +
                                                   header[col] + "'");
      return v;
    };
    for (auto c : coord_cols) row.coords.push_back(number(c));
    for (auto c : feature_cols) row.values.push_back(number(c));
    if (!std::isfinite(row.time))
      throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ": non-finite time");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::ParseError, "no data rows");

  std::vector<double> times;
  for (const auto& r : rows) times.push_back(r.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::map<std::vector<double>, int> sensor_ids;
  std::vector<std::vector<double>> sensor_coords;
  std::vector<InstanceKey> keys;
  std::vector<double> values;
  std::map<InstanceKey, std::size_t> seen;
  for (const auto& r : rows) {
    auto [it, inserted] = sensor_ids.emplace(r.coords, static_cast<int>(sensor_coords.size()));
    if (inserted) sensor_coords.push_back(r.coords);
    const int t = static_cast<int>(std::lower_bound(times.begin(), times.end(), r.time) - times.begin());
    const InstanceKey key{t, it->second};
    if (auto [prev, fresh] = seen.emplace(key, r.line); !fresh)
      throw Error(ErrorCode::DuplicateInstance, "lines " + std::to_string(prev->second) + " and " +
                                                    std::to_string(r.line) + " share a sensor and time");
    keys.push_back(key);
    values.insert(values.end(), r.values.begin(), r.values.end());
  }
  return Dataset(std::move(sensor_coords), std::move(times), std::move(feature_names), std::move(keys),
                 std::move(values));
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& d) {
  auto quoted = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\\\"") : std::string(1, c);
    return q + "\"";
  };
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  out << "sensor,time,x";
  if (d.spatial_dims() > 1) out << ",y";
  for (const auto& f : d.feature_names()) out << ',' << quoted(f);
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto key = d.key(i);
    out << 's' << key.sensor << ',' << num(d.times()[key.timestep]);
    for (double c : d.coords(key.sensor)) out << ',' << num(c);
    for (double v : d.values(i)) out << ',' << num(v);
    out << '\n';
  }
}

std::vector<double> discretize_time(const std::vector<double>& times) {
  if (times.empty()) return {};
  std::vector<double> b;
  b.reserve(times.size() + 1);
  if (times.size() == 1) return {times[0] - 0.5, times[0] + 0.5};
  std::vector<double> gaps;
  for (std::size_t i = 1; i < times.size(); ++i) gaps.push_back(times[i] - times[i - 1]);
  std::nth_element(gaps.begin(), gaps.begin() + (gaps.size() - 1) / 2, gaps.end());
  const double half = 0.5 * gaps[(gaps.size() - 1) / 2];
  b.push_back(times.front() - half);
  for (std::size_t i = 1; i < times.size(); ++i) b.push_back(0.5 * (times[i - 1] + times[i]));
  b.push_back(times.back() + half);
  return b;
}

}  // namespace kdstr
