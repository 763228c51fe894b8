// Copyright 2026 The Curry Authors
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

#pragma once

// On-disk formats: checkpoints, world files and the metrics CSV.
//
// Checkpoint layout (all integers little-endian):
//   "CURRYCKP" u32 version u32 entry_count
//   entry_count x { u32 name_len, name, u8 dtype, u64 rows, u64 cols, u64 offset }
//   blob
// dtype 0 = f64, 1 = u64, 2 = raw bytes (rows = length). Offsets are relative
// to the start of the blob.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "curry/numcore.hpp"
#include "curry/synthdata.hpp"
#include "curry/trainer.hpp"

namespace curry {

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kWorldFileVersion = 1;

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::string& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::string& path, const std::string& text);

Bytes encode_checkpoint(const Trainer& trainer);
// Rebuilds a trainer from the configuration stored in the checkpoint and
// restores every piece of mutable state.
std::unique_ptr<Trainer> decode_checkpoint(std::span<const std::uint8_t> data);

void save_checkpoint(const std::string& path, const Trainer& trainer);
std::unique_ptr<Trainer> load_checkpoint(const std::string& path);

Bytes encode_world(const SpeakerWorld& world);
SpeakerWorld decode_world(std::span<const std::uint8_t> data);
void save_world(const std::string& path, const SpeakerWorld& world);
SpeakerWorld load_world(const std::string& path);

// Column order is fixed; the header row is always present.
std::string metrics_header();
std::string format_metric_row(const MetricRecord& r);
std::string render_metrics_csv(std::span<const MetricRecord> records);

}  // namespace curry
