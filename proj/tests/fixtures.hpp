/*
 * Copyright 2026 The psoformer Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PSOFORMER_TESTS_FIXTURES_HPP_
#define PSOFORMER_TESTS_FIXTURES_HPP_

#include <string>
#include <vector>

#include "psoformer/data.hpp"

namespace fixtures {

// Twelve reference sample rows (seven features plus target).
inline const char* kTable1Csv =
    "age,sex,trestbps,chol,fbs,thalachh,oldpeak,target\n"
    "63,1,145,233,1,150,2.3,1\n"
    "37,1,130,250,0,187,3.5,1\n"
    "41,0,130,204,0,172,1.4,1\n"
    "56,1,120,236,0,178,0.8,1\n"
    "57,0,120,354,0,163,0.6,1\n"
    "57,1,140,192,0,148,0.4,1\n"
    "56,0,140,294,0,153,1.3,1\n"
    "44,1,120,263,0,173,0,1\n"
    "52,1,172,199,1,162,0.5,1\n"
    "57,1,150,168,0,174,1.6,1\n"
    "54,1,140,239,0,160,1.2,1\n"
    "48,0,130,275,0,139,0.2,1\n";

inline std::vector<std::string> table1_schema() {
  return {"age", "sex", "trestbps", "chol", "fbs", "thalachh", "oldpeak"};
}

// Small dataset from explicit columns.
inline psoformer::Dataset make(std::vector<std::vector<double>> rows, std::vector<int> targets) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < rows.front().size(); ++c) names.push_back("x" + std::to_string(c));
  std::vector<double> values;
  for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
  return psoformer::Dataset(std::move(names), std::move(values), std::move(targets));
}

}  // namespace fixtures

#endif  // PSOFORMER_TESTS_FIXTURES_HPP_
