#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace eic {

using Json = nlohmann::ordered_json;

// shortest round-trip decimal form; deterministic across runs
std::string fmt_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string to_csv() const;
};

struct Report {
  Json body;    // command, resolved config, values, verdicts
  Table table;  // flat view of the main values, for csv output

  // Writes the report (json or csv).  The body never contains timestamps;
  // wall-clock metadata goes to <path>.meta.json so that reruns with the
  // same config and seed are byte-identical.
  void write(const std::string& path, const std::string& format,
             double elapsed_seconds) const;
};

}  // namespace eic
