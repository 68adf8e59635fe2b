#include "eic/report.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <system_error>

#include "eic/errors.hpp"

namespace eic {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string join_row(const std::vector<std::string>& row) {
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += csv_field(row[i]);
  }
  return line;
}

std::string utc_now() {
  std::time_t tt =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
#if defined(_WIN32)
  gmtime_s(&tm, &tt);
#else
  gmtime_r(&tt, &tm);
#endif
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::InvalidConfig, "cannot open '" + path + "' for writing");
  out << text;
  out.close();
  require(out.good(), Errc::InvalidConfig, "failed writing '" + path + "'");
}

}  // namespace

std::string Table::to_csv() const {
  std::string text = join_row(header);
  text += '\n';
  for (const auto& row : rows) {
    text += join_row(row);
    text += '\n';
  }
  return text;
}

void Report::write(const std::string& path, const std::string& format,
                   double elapsed_seconds) const {
  if (format == "csv") {
    write_text(path, table.to_csv());
  } else if (format == "json") {
    write_text(path, body.dump(2) + "\n");
  } else {
    fail(Errc::InvalidConfig, "unknown report format '" + format + "'");
  }
  Json meta;
  meta["written_at"] = utc_now();
  meta["elapsed_seconds"] = elapsed_seconds;
  write_text(path + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace eic
