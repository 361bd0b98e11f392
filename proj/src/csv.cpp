// Copyright 2026 the condest authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "condest/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace condest {

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const GateTable& gates) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ConfigError("cannot open for writing: " + path);

  std::string header = "t";
  const int n_v = traj.n_v();
  for (int i = 0; i < n_v; ++i) header += ",v_" + std::to_string(i);
  for (int k = 0; k < gates.n_w(); ++k)
    header += ",w_" + gates.gate(k).label + "_" +
              std::to_string(gates.gate(k).neuron);
  for (int i = 0; i < n_v; ++i) header += ",u_" + std::to_string(i);
  for (int i = 0; i < n_v; ++i) header += ",y_" + std::to_string(i);
  if (traj.observer)
    for (const std::string& c : traj.observer->columns) header += "," + c;
  std::fprintf(f, "%s\n", header.c_str());

  for (int r = 0; r < traj.samples(); ++r) {
    std::fprintf(f, "%.9g", traj.t[r]);
    for (int i = 0; i < n_v; ++i) std::fprintf(f, ",%.9g", traj.v(r, i));
    for (int k = 0; k < traj.w.cols(); ++k)
      std::fprintf(f, ",%.9g", traj.w(r, k));
    for (int i = 0; i < n_v; ++i) std::fprintf(f, ",%.9g", traj.u(r, i));
    for (int i = 0; i < n_v; ++i) std::fprintf(f, ",%.9g", traj.y(r, i));
    if (traj.observer)
      for (int k = 0; k < traj.observer->data.cols(); ++k)
        std::fprintf(f, ",%.9g", traj.observer->data(r, k));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

VectorXd CsvTable::col(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw ConfigError("csv: missing column '" + name + "'");
  return data.col(c);
}

std::vector<int> CsvTable::columns_with_prefix(
    const std::string& prefix) const {
  std::vector<int> out;
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i].size() >= prefix.size() &&
        header[i].compare(0, prefix.size(), prefix) == 0)
      out.push_back(static_cast<int>(i));
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty csv: " + path);
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.header.size());
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.header.size())
      throw ConfigError("csv: ragged row in " + path);
    rows.push_back(std::move(row));
  }
  table.data.resize(static_cast<int>(rows.size()),
                    static_cast<int>(table.header.size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c)
      table.data(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return table;
}

Trajectory trajectory_from_csv(const CsvTable& table, int n_v, int n_w) {
  const int fixed = 1 + n_v + n_w + n_v + n_v;
  if (static_cast<int>(table.header.size()) < fixed)
    throw ConfigError("trajectory csv has too few columns");
  if (table.data.rows() < 2)
    throw ConfigError("trajectory csv has too few rows");
  Trajectory traj;
  const int n = static_cast<int>(table.data.rows());
  traj.t.assign(table.data.col(0).data(), table.data.col(0).data() + n);
  traj.dt = traj.t[1] - traj.t[0];
  traj.stride = 1;
  traj.v = table.data.middleCols(1, n_v);
  traj.w = table.data.middleCols(1 + n_v, n_w);
  traj.u = table.data.middleCols(1 + n_v + n_w, n_v);
  traj.y = table.data.middleCols(1 + n_v + n_w + n_v, n_v);
  const int n_obs = static_cast<int>(table.header.size()) - fixed;
  if (n_obs > 0) {
    traj.observer.emplace();
    traj.observer->columns.assign(table.header.begin() + fixed,
                                  table.header.end());
    traj.observer->data = table.data.rightCols(n_obs);
  }
  return traj;
}

}  // namespace condest
