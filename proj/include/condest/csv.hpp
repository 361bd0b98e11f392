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
//
// Trajectory CSV: one header row, then one row per retained sample with
// columns t, v_i..., w_<gate>..., u_i..., y_i..., then the observer columns
// in the observer's state order. Floats carry 9 significant digits.

#ifndef CONDEST_CSV_HPP_
#define CONDEST_CSV_HPP_

#include <string>
#include <vector>

#include "condest/integrator.hpp"

namespace condest {

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const GateTable& gates);

/// Columns by name; throws ConfigError on malformed files.
struct CsvTable {
  std::vector<std::string> header;
  MatrixXd data;  // rows x columns

  int column(const std::string& name) const;  // -1 if absent
  VectorXd col(const std::string& name) const;
  /// All columns whose name starts with `prefix`, in header order.
  std::vector<int> columns_with_prefix(const std::string& prefix) const;
};

CsvTable read_csv(const std::string& path);

/// Rebuilds a Trajectory from a trajectory CSV. The column split needs the
/// model dimensions; everything after the y block is treated as the observer
/// trace.
Trajectory trajectory_from_csv(const CsvTable& table, int n_v, int n_w);

}  // namespace condest

#endif  // CONDEST_CSV_HPP_
