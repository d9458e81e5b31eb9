#pragma once

// Line-oriented text format for trajectory datasets:
//
//   # pbrl-dataset v1
//   # horizon=<H>
//   # behavior_policy=<id>
//   traj_id,step,reward,terminal,s0..s{d-1},a0..a{k-1},ns0..ns{d-1},behavior_logp
//   0,0,0.25,0,...
//
// Values are printed with 17 significant digits so a write/read cycle is exact.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pbrl/core/error.hpp"
#include "pbrl/mdp/trajectory.hpp"

namespace pbrl::mdp {

namespace detail {

inline std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) throw ValidationError("malformed number '" + s + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const TrajectoryDataset& ds) {
  if (ds.empty()) throw UsageError("cannot write an empty dataset");
  const auto& first = ds.trajectories.front();
  const std::size_t d = first.state_dim(), k = first.action_dim();
  os << "# pbrl-dataset v1\n# horizon=" << first.horizon() << "\n# behavior_policy=" << ds.behavior_policy_id << "\n";
  os << "traj_id,step,reward,terminal";
  for (std::size_t i = 0; i < d; ++i) os << ",s" << i;
  for (std::size_t i = 0; i < k; ++i) os << ",a" << i;
  for (std::size_t i = 0; i < d; ++i) os << ",ns" << i;
  os << ",behavior_logp\n";
  for (std::size_t j = 0; j < ds.count(); ++j) {
    const auto& tr = ds.trajectories[j];
    for (std::size_t t = 0; t < tr.size(); ++t) {
      auto x = tr[t];
      os << j << ',' << t << ',' << detail::fmt17(x.reward) << ',' << (x.terminal ? 1 : 0);
      for (double v : x.state) os << ',' << detail::fmt17(v);
      for (double v : x.action) os << ',' << detail::fmt17(v);
      for (double v : x.next_state) os << ',' << detail::fmt17(v);
      os << ',' << detail::fmt17(x.behavior_log_prob) << '\n';
    }
  }
}

inline TrajectoryDataset read_dataset(std::istream& is) {
  TrajectoryDataset ds;
  std::size_t horizon = 0;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      std::string val = line.substr(eq + 1);
      if (key == "horizon") horizon = std::stoul(val);
      if (key == "behavior_policy") ds.behavior_policy_id = val;
      continue;
    }
    header = detail::split_csv(line);
    break;
  }
  if (header.size() < 5 || header[0] != "traj_id" || header[1] != "step" || header[2] != "reward" ||
      header[3] != "terminal")
    throw ValidationError("dataset header must start with traj_id,step,reward,terminal");
  std::size_t d = 0, k = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 's' && std::isdigit(static_cast<unsigned char>(h[1]))) ++d;
    if (h.size() > 1 && h[0] == 'a' && std::isdigit(static_cast<unsigned char>(h[1]))) ++k;
  }
  const std::size_t ncols = 4 + 2 * d + k + 1;
  if (header.size() != ncols) throw ValidationError("dataset header has an unexpected column layout");

  struct Row {
    std::size_t traj, step;
    std::vector<double> f;
  };
  std::vector<Row> rows;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != ncols) throw ValidationError("row " + std::to_string(lineno) + " has " + std::to_string(cells.size()) + " columns");
    Row r{std::stoul(cells[0]), std::stoul(cells[1]), {}};
    for (std::size_t c = 2; c < ncols; ++c) r.f.push_back(detail::parse_double(cells[c]));
    rows.push_back(std::move(r));
  }
  std::size_t max_step = 0;
  for (const auto& r : rows) max_step = std::max(max_step, r.step + 1);
  if (horizon == 0) horizon = std::max<std::size_t>(max_step, 1);

  for (const auto& r : rows) {
    if (r.traj > ds.trajectories.size()) throw ValidationError("trajectory ids must be contiguous from 0");
    if (r.traj == ds.trajectories.size()) ds.trajectories.emplace_back(d, k, horizon);
    auto& tr = ds.trajectories[r.traj];
    if (r.step != tr.size()) throw ValidationError("steps of trajectory " + std::to_string(r.traj) + " are out of order");
    const double* f = r.f.data();
    const double reward = f[0];
    const bool terminal = f[1] != 0.0;
    std::span<const double> s(f + 2, d), a(f + 2 + d, k), ns(f + 2 + d + k, d);
    tr.push(s, a, reward, ns, terminal, f[2 + 2 * d + k]);
  }
  return ds;
}

inline void save_dataset(const std::string& path, const TrajectoryDataset& ds) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot open '" + path + "' for writing");
  write_dataset(os, ds);
}

inline TrajectoryDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open dataset '" + path + "'");
  return read_dataset(is);
}

}  // namespace pbrl::mdp
