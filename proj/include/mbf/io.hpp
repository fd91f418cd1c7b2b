#ifndef MBF_IO_HPP
#define MBF_IO_HPP

#include <optional>
#include <string>
#include <vector>

namespace mbf {

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);

/// Histogram CSV, schema: header "state,fraction", one row per state.
std::string histogram_to_csv(const std::vector<double>& h);
std::vector<double> histogram_from_csv(const std::string& text);

/// Histogram JSON: a plain array of per-state fractions.
std::string histogram_to_json(const std::vector<double>& h);
std::vector<double> histogram_from_json(const std::string& text);

/// Side-by-side occupancy CSV, schema: "state,empirical_fraction,analytic_pi".
/// The analytic column is empty when no stationary distribution exists.
std::string occupancy_comparison_to_csv(
    const std::vector<double>& empirical,
    const std::optional<std::vector<double>>& analytic);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mbf

#endif  // MBF_IO_HPP
