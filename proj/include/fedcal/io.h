// Copyright 2026 The Fedcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats: the score,label data CSV, the JSON-lines result stream and
// the key = value sweep configuration.

#ifndef FEDCAL_IO_H_
#define FEDCAL_IO_H_

#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"
#include "fedcal/calibration.h"
#include "fedcal/harness.h"
#include "fedcal/types.h"
#include "json.hpp"

namespace fedcal {

inline constexpr char kResultSchema[] = "fedcal.results/v1";

// Parses a data file: a `score,label` header, then one row per example with
// a decimal score in [0, 1] and a label of 1 or 0. Blank lines and a trailing
// carriage return are tolerated. Errors name the offending line.
absl::StatusOr<std::vector<LabeledScore>> ParseDataCsv(absl::string_view text);

// NotFound when the file cannot be opened, otherwise as ParseDataCsv.
absl::StatusOr<std::vector<LabeledScore>> ReadDataCsv(const std::string& path);

// Scores are written with 17 significant digits, so reading the file back
// reproduces them exactly.
void WriteDataCsv(absl::Span<const LabeledScore> examples, std::ostream& out);

// The leading {"schema": ...} object of a result stream.
std::string ResultHeaderLine();

// One result object; `threshold` and `degenerate` appear only when set.
nlohmann::ordered_json RowToJson(const SweepResultRow& row);
std::string RowToJsonLine(const SweepResultRow& row);

nlohmann::ordered_json CalibrationMapToJson(const CalibrationMap& map);
nlohmann::ordered_json EceReportToJson(const EceReport& report);

// Parses the sweep configuration format: one `key = value` per line, `#`
// starts a comment, grid values are comma separated and may be empty.
// Errors name the offending key or line.
absl::StatusOr<SweepConfig> ParseSweepConfig(absl::string_view text);

// Spike list "location:positive_mass:negative_mass,...".
absl::StatusOr<std::vector<Spike>> ParseSpikes(absl::string_view text);

}  // namespace fedcal

#endif  // FEDCAL_IO_H_
