#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lab {

// One long-format result line.
struct ResultRow {
  std::string config_hash;
  std::string variant;
  std::optional<long long> N;
  std::optional<long long> n;
  std::optional<long long> T;
  std::optional<std::uint64_t> seed;
  std::optional<int> epoch;
  std::string metric;
  double value = 0.0;
  std::optional<double> stderr_;
};

inline constexpr const char* kResultsHeader = "config_hash,variant,N,n,T,seed,epoch,metric,value,stderr";

std::string format_row(const ResultRow& row);
void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

double median(std::vector<double> values);

// Rows sharing (variant, N, n, T, epoch, metric), aggregated over seeds.
struct SummaryPoint {
  std::string variant;
  std::optional<long long> N, n, T;
  std::optional<int> epoch;
  std::string metric;
  std::vector<std::uint64_t> seeds;
  std::vector<double> values;
  double center = 0.0;
};

std::vector<SummaryPoint> summarize(const std::vector<ResultRow>& rows, bool use_median);
void write_summary_json(const std::vector<SummaryPoint>& points, const std::string& config_hash, bool use_median,
                        const std::filesystem::path& path);

// results.csv and summary.json under dir.
void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& dir, bool use_median = true);

}  // namespace lab
