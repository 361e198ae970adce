#include "report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "icl/format.hpp"

namespace lab {

namespace {

template <typename T>
std::string opt(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return icl::format_double(*v);
  } else {
    return std::to_string(*v);
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
std::optional<T> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>) {
    return icl::parse_double(s);
  } else {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      throw std::runtime_error("results csv: bad integer '" + s + "'");
    }
    return v;
  }
}

}  // namespace

std::string format_row(const ResultRow& r) {
  std::string out = r.config_hash;
  for (const std::string& cell : {r.variant, opt(r.N), opt(r.n), opt(r.T), opt(r.seed), opt(r.epoch), r.metric,
                                  icl::format_double(r.value), opt(r.stderr_)}) {
    out += ',';
    out += cell;
  }
  return out;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing input CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) {
    throw std::runtime_error(path.string() + ": header does not match the results schema");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 10) throw std::runtime_error(path.string() + ": expected 10 columns in '" + line + "'");
    ResultRow r;
    r.config_hash = c[0];
    r.variant = c[1];
    r.N = parse_opt<long long>(c[2]);
    r.n = parse_opt<long long>(c[3]);
    r.T = parse_opt<long long>(c[4]);
    r.seed = parse_opt<std::uint64_t>(c[5]);
    r.epoch = parse_opt<int>(c[6]);
    r.metric = c[7];
    r.value = icl::parse_double(c[8]);
    r.stderr_ = parse_opt<double>(c[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<SummaryPoint> summarize(const std::vector<ResultRow>& rows, bool use_median) {
  using Key = std::tuple<std::string, std::optional<long long>, std::optional<long long>, std::optional<long long>,
                         std::optional<int>, std::string>;
  std::map<Key, SummaryPoint> groups;
  for (const auto& r : rows) {
    SummaryPoint& p = groups[Key{r.variant, r.N, r.n, r.T, r.epoch, r.metric}];
    p.variant = r.variant;
    p.N = r.N;
    p.n = r.n;
    p.T = r.T;
    p.epoch = r.epoch;
    p.metric = r.metric;
    if (r.seed) p.seeds.push_back(*r.seed);
    p.values.push_back(r.value);
  }
  std::vector<SummaryPoint> out;
  for (auto& [key, p] : groups) {
    p.center = use_median ? median(p.values)
                          : std::accumulate(p.values.begin(), p.values.end(), 0.0) / static_cast<double>(p.values.size());
    out.push_back(std::move(p));
  }
  return out;
}

void write_summary_json(const std::vector<SummaryPoint>& points, const std::string& config_hash, bool use_median,
                        const std::filesystem::path& path) {
  using json = nlohmann::json;
  json j;
  j["config_hash"] = config_hash;
  j["aggregate"] = use_median ? "median" : "mean";
  j["points"] = json::array();
  for (const auto& p : points) {
    json e;
    e["variant"] = p.variant;
    const auto put = [&](const char* k, const auto& v) { e[k] = v ? json(*v) : json(nullptr); };
    put("N", p.N);
    put("n", p.n);
    put("T", p.T);
    put("epoch", p.epoch);
    e["metric"] = p.metric;
    e["seeds"] = p.seeds;
    e["values"] = p.values;
    e["value"] = p.center;
    j["points"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void emit_report(const std::vector<ResultRow>& rows, const std::filesystem::path& dir, bool use_median) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no result rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  write_results_csv(rows, dir / "results.csv");
  write_summary_json(summarize(rows, use_median), rows.front().config_hash, use_median, dir / "summary.json");
}

}  // namespace lab
