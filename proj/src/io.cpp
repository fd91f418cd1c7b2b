#include "mbf/io.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mbf {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string histogram_to_csv(const std::vector<double>& h) {
  std::string out = "state,fraction\n";
  for (std::size_t i = 0; i < h.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(h[i]);
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

static double parse_double(const std::string& s) {
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument("bad numeric field: \"" + s + "\"");
  return v;
}

std::vector<double> histogram_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "state,fraction")
    throw std::invalid_argument("histogram CSV: missing header");
  std::vector<double> h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 2) throw std::invalid_argument("histogram CSV: bad row");
    if (std::stoul(fields[0]) != h.size())
      throw std::invalid_argument("histogram CSV: states out of order");
    h.push_back(parse_double(fields[1]));
  }
  return h;
}

std::string histogram_to_json(const std::vector<double>& h) {
  return nlohmann::json(h).dump();
}

std::vector<double> histogram_from_json(const std::string& text) {
  return nlohmann::json::parse(text).get<std::vector<double>>();
}

std::string occupancy_comparison_to_csv(
    const std::vector<double>& empirical,
    const std::optional<std::vector<double>>& analytic) {
  if (analytic && analytic->size() != empirical.size())
    throw std::invalid_argument("occupancy CSV: length mismatch");
  std::string out = "state,empirical_fraction,analytic_pi\n";
  for (std::size_t i = 0; i < empirical.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(empirical[i]);
    out += ',';
    if (analytic) out += format_double((*analytic)[i]);
    out += '\n';
  }
  return out;
}

}  // namespace mbf
