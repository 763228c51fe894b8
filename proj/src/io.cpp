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

#include "curry/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "curry/config.hpp"

namespace curry {

namespace {

constexpr char kCheckpointMagic[] = "CURRYCKP";
constexpr char kWorldMagic[] = "CURRYWLD";

enum class DType : std::uint8_t { kF64 = 0, kU64 = 1, kBytes = 2 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void raw(std::span<const std::uint8_t> s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::size_t size() const { return out_.size(); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}
  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    const auto b = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto b = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    const auto b = need(n);
    return std::string(b.begin(), b.end());
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) {
    if (p > data_.size()) throw FormatError(fmt::format("{}: offset out of range", what_));
    pos_ = p;
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  // Reads one '\n'-terminated line (without the terminator).
  std::string line() {
    const std::size_t start = pos_;
    while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
    if (pos_ == data_.size()) throw FormatError(fmt::format("{}: truncated header", what_));
    std::string out(data_.begin() + static_cast<std::ptrdiff_t>(start),
                    data_.begin() + static_cast<std::ptrdiff_t>(pos_));
    ++pos_;
    return out;
  }

 private:
  std::span<const std::uint8_t> need(std::size_t n) {
    if (remaining() < n) throw FormatError(fmt::format("{}: truncated data", what_));
    const auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

// Checkpoint entries are collected first, then laid out behind the manifest.
struct Entry {
  std::string name;
  DType dtype;
  std::uint64_t rows;
  std::uint64_t cols;
  Bytes payload;
};

class EntryList {
 public:
  void f64(std::string name, const DenseMatrix& m) {
    Writer w;
    for (double v : m.data()) w.f64(v);
    entries_.push_back({std::move(name), DType::kF64, m.rows(), m.cols(), w.take()});
  }
  void f64(std::string name, std::span<const double> v) {
    Writer w;
    for (double x : v) w.f64(x);
    entries_.push_back({std::move(name), DType::kF64, 1, v.size(), w.take()});
  }
  void u64(std::string name, std::span<const std::uint64_t> v) {
    Writer w;
    for (std::uint64_t x : v) w.u64(x);
    entries_.push_back({std::move(name), DType::kU64, 1, v.size(), w.take()});
  }
  void bytes(std::string name, std::string_view s) {
    entries_.push_back({std::move(name), DType::kBytes, s.size(), 1, Bytes(s.begin(), s.end())});
  }

  Bytes encode(const char* magic, std::uint32_t version) const {
    Writer w;
    w.raw(std::string_view(magic, 8));
    w.u32(version);
    w.u32(static_cast<std::uint32_t>(entries_.size()));
    std::uint64_t offset = 0;
    for (const Entry& e : entries_) {
      w.u32(static_cast<std::uint32_t>(e.name.size()));
      w.raw(e.name);
      w.u8(static_cast<std::uint8_t>(e.dtype));
      w.u64(e.rows);
      w.u64(e.cols);
      w.u64(offset);
      offset += e.payload.size();
    }
    for (const Entry& e : entries_) w.raw(e.payload);
    return w.take();
  }

 private:
  std::vector<Entry> entries_;
};

struct ManifestEntry {
  DType dtype;
  std::uint64_t rows;
  std::uint64_t cols;
  std::uint64_t offset;
};

std::size_t element_size(DType d) { return d == DType::kBytes ? 1 : 8; }

class Manifest {
 public:
  explicit Manifest(std::span<const std::uint8_t> data) : reader_(data, "checkpoint"), data_(data) {
    const std::string magic = reader_.str(8);
    if (magic != std::string_view(kCheckpointMagic, 8)) {
      throw FormatError("checkpoint: bad magic (not a checkpoint file)");
    }
    const std::uint32_t version = reader_.u32();
    if (version != kCheckpointVersion) {
      throw FormatError(fmt::format("checkpoint: format version {} is not supported (expected {})",
                                    version, kCheckpointVersion));
    }
    const std::uint32_t count = reader_.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string name = reader_.str(reader_.u32());
      const std::uint8_t dtype = reader_.u8();
      if (dtype > 2) throw FormatError(fmt::format("checkpoint: entry '{}' has bad dtype", name));
      ManifestEntry e{static_cast<DType>(dtype), reader_.u64(), reader_.u64(), reader_.u64()};
      if (!entries_.emplace(name, e).second) {
        throw FormatError(fmt::format("checkpoint: duplicate entry '{}'", name));
      }
    }
    blob_start_ = reader_.pos();
    for (const auto& [name, e] : entries_) {
      const std::uint64_t bytes = e.rows * e.cols * element_size(e.dtype);
      if (e.offset + bytes > data_.size() - blob_start_) {
        throw FormatError(fmt::format("checkpoint: entry '{}' extends past end of file", name));
      }
    }
  }

  const ManifestEntry& find(const std::string& name, DType dtype) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw FormatError(fmt::format("checkpoint: missing entry '{}'", name));
    if (it->second.dtype != dtype) {
      throw FormatError(fmt::format("checkpoint: entry '{}' has unexpected dtype", name));
    }
    return it->second;
  }

  void read_f64(const std::string& name, DenseMatrix& into) {
    const ManifestEntry& e = find(name, DType::kF64);
    if (e.rows != into.rows() || e.cols != into.cols()) {
      throw FormatError(fmt::format("checkpoint: entry '{}' is {}x{}, model expects {}x{}", name,
                                    e.rows, e.cols, into.rows(), into.cols()));
    }
    reader_.seek(blob_start_ + e.offset);
    for (double& v : into.data()) v = reader_.f64();
  }

  std::vector<double> read_f64(const std::string& name, std::size_t expected) {
    DenseMatrix m(1, expected);
    read_f64(name, m);
    return m.data();
  }

  std::vector<std::uint64_t> read_u64(const std::string& name, std::size_t expected) {
    const ManifestEntry& e = find(name, DType::kU64);
    if (e.rows * e.cols != expected) {
      throw FormatError(fmt::format("checkpoint: entry '{}' has {} values, expected {}", name,
                                    e.rows * e.cols, expected));
    }
    reader_.seek(blob_start_ + e.offset);
    std::vector<std::uint64_t> out(expected);
    for (auto& v : out) v = reader_.u64();
    return out;
  }

  std::string read_bytes(const std::string& name) {
    const ManifestEntry& e = find(name, DType::kBytes);
    reader_.seek(blob_start_ + e.offset);
    return reader_.str(e.rows);
  }

 private:
  Reader reader_;
  std::span<const std::uint8_t> data_;
  std::map<std::string, ManifestEntry> entries_;
  std::size_t blob_start_ = 0;
};

}  // namespace

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> data) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError(fmt::format("short write to '{}'", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path, ec.message()));
}

void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes encode_checkpoint(const Trainer& trainer) {
  // The encoder and bank accessors are non-const; nothing here mutates them.
  Trainer& t = const_cast<Trainer&>(trainer);
  Model& model = t.model();
  EntryList list;
  list.bytes("config", render_config(trainer.config()));

  const std::vector<Parameter*> params = model.parameters();
  const auto& moments = trainer.optimizer().moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    list.f64("param/" + p.name, p.value);
    list.f64("adam/" + p.name + "/m", moments[i].first);
    list.f64("adam/" + p.name + "/v", moments[i].second);
    const std::uint64_t steps[] = {moments[i].steps};
    list.u64("adam/" + p.name + "/steps", steps);
  }

  const BatchNorm& bn = model.encoder.bn();
  list.f64("bn/running_mean", bn.running_mean);
  list.f64("bn/running_var", bn.running_var);
  const std::uint64_t tracked[] = {bn.batches_tracked};
  list.u64("bn/batches_tracked", tracked);

  const double stats[] = {model.stats.mu_hat, model.stats.sigma_hat, model.stats.momentum};
  list.f64("stats", stats);
  const std::uint64_t curriculum[] = {static_cast<std::uint64_t>(model.curriculum.phase()),
                                      model.curriculum.learnable() ? 1u : 0u};
  list.u64("curriculum", curriculum);

  // Every random stream is derived from these seeds plus (epoch, index), so
  // they and the step counters are the complete RNG state.
  const TrainerProgress& pr = trainer.progress();
  const std::uint64_t progress[] = {pr.global_step, pr.epochs_done, pr.seed, pr.world_seed};
  list.u64("progress", progress);
  return list.encode(kCheckpointMagic, kCheckpointVersion);
}

std::unique_ptr<Trainer> decode_checkpoint(std::span<const std::uint8_t> data) {
  Manifest m(data);
  const RunConfig cfg = parse_config(m.read_bytes("config"), "checkpoint config");
  auto trainer = std::make_unique<Trainer>(cfg);
  Model& model = trainer->model();

  const std::vector<Parameter*> params = model.parameters();
  auto& moments = trainer->optimizer().moments();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    m.read_f64("param/" + p.name, p.value);
    m.read_f64("adam/" + p.name + "/m", moments[i].first);
    m.read_f64("adam/" + p.name + "/v", moments[i].second);
    moments[i].steps = m.read_u64("adam/" + p.name + "/steps", 1)[0];
  }

  BatchNorm& bn = model.encoder.bn();
  const std::size_t d = bn.running_mean.size();
  bn.running_mean = m.read_f64("bn/running_mean", d);
  bn.running_var = m.read_f64("bn/running_var", d);
  bn.batches_tracked = m.read_u64("bn/batches_tracked", 1)[0];

  const auto stats = m.read_f64("stats", 3);
  model.stats.mu_hat = stats[0];
  model.stats.sigma_hat = stats[1];
  model.stats.momentum = stats[2];
  const auto curriculum = m.read_u64("curriculum", 2);
  if (curriculum[0] > 3 || curriculum[1] > 1) throw FormatError("checkpoint: bad curriculum state");
  model.curriculum.set_phase(static_cast<Phase>(curriculum[0]));
  model.curriculum.set_learnable(curriculum[1] == 1);

  const auto progress = m.read_u64("progress", 4);
  trainer->progress() = {progress[0], progress[1], progress[2], progress[3]};
  return trainer;
}

void save_checkpoint(const std::string& path, const Trainer& trainer) {
  write_file_atomic(path, encode_checkpoint(trainer));
}

std::unique_ptr<Trainer> load_checkpoint(const std::string& path) {
  const Bytes data = read_file(path);
  try {
    return decode_checkpoint(data);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path, e.what()));
  }
}

// World file: a text header followed by every frame as little-endian f64,
// training utterances first.
//   CURRYWLD <version>
//   world.* = ... (one key per line)
//   end-config
//   utterances <n_train> <n_heldout>
//   <label>,<true_label>,<condition>,<mislabeled>,<degraded>   (one per utterance)
//   groups <g_0> <g_1> ...
//   frames <T> <F>
Bytes encode_world(const SpeakerWorld& world) {
  Writer w;
  w.raw(fmt::format("{} {}\n", std::string_view(kWorldMagic, 8), kWorldFileVersion));
  w.raw(render_world_config(world.config));
  w.raw("end-config\n");
  w.raw(fmt::format("utterances {} {}\n", world.train.size(), world.heldout.size()));
  auto row = [&](const Utterance& u) {
    w.raw(fmt::format("{},{},{},{},{}\n", u.label, u.true_label, u.condition,
                      u.mislabeled ? 1 : 0, u.degraded ? 1 : 0));
  };
  for (const auto& u : world.train) row(u);
  for (const auto& u : world.heldout) row(u);
  w.raw("groups");
  for (std::size_t g : world.heldout_group) w.raw(fmt::format(" {}", g));
  w.raw("\n");
  w.raw(fmt::format("frames {} {}\n", world.config.frames_per_utt, world.config.frame_dim));
  for (const auto* pool : {&world.train, &world.heldout}) {
    for (const auto& u : *pool) {
      for (double v : u.frames.data()) w.f64(v);
    }
  }
  return w.take();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

std::size_t to_size(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError(fmt::format("world file: bad {} '{}'", what, s));
  }
}

}  // namespace

SpeakerWorld decode_world(std::span<const std::uint8_t> data) {
  Reader r(data, "world file");
  const auto magic = split(r.line(), ' ');
  if (magic.size() != 2 || magic[0] != std::string_view(kWorldMagic, 8)) {
    throw FormatError("world file: bad magic (not a world file)");
  }
  if (to_size(magic[1], "version") != kWorldFileVersion) {
    throw FormatError(fmt::format("world file: format version {} is not supported (expected {})",
                                  magic[1], kWorldFileVersion));
  }
  std::string config_text;
  for (std::string line = r.line(); line != "end-config"; line = r.line()) config_text += line + "\n";

  SpeakerWorld world;
  world.config = parse_world_config(config_text, "world file");
  const auto counts = split(r.line(), ' ');
  if (counts.size() != 3 || counts[0] != "utterances") {
    throw FormatError("world file: expected 'utterances <train> <heldout>'");
  }
  const std::size_t n_train = to_size(counts[1], "count");
  const std::size_t n_heldout = to_size(counts[2], "count");
  const std::size_t t = world.config.frames_per_utt;
  const std::size_t f = world.config.frame_dim;
  auto read_rows = [&](std::size_t n, std::vector<Utterance>& into) {
    into.resize(n);
    for (auto& u : into) {
      const auto cols = split(r.line(), ',');
      if (cols.size() != 5) throw FormatError("world file: utterance row needs 5 columns");
      u.label = to_size(cols[0], "label");
      u.true_label = to_size(cols[1], "true label");
      u.condition = to_size(cols[2], "condition");
      u.mislabeled = to_size(cols[3], "flag") != 0;
      u.degraded = to_size(cols[4], "flag") != 0;
      u.frames = DenseMatrix(t, f);
    }
  };
  read_rows(n_train, world.train);
  read_rows(n_heldout, world.heldout);

  const auto groups = split(r.line(), ' ');
  if (groups.empty() || groups[0] != "groups") throw FormatError("world file: expected 'groups'");
  for (std::size_t i = 1; i < groups.size(); ++i) world.heldout_group.push_back(to_size(groups[i], "group"));

  const auto frames = split(r.line(), ' ');
  if (frames.size() != 3 || frames[0] != "frames" || to_size(frames[1], "T") != t ||
      to_size(frames[2], "F") != f) {
    throw FormatError("world file: frame header does not match the world config");
  }
  if (r.remaining() != (n_train + n_heldout) * t * f * 8) {
    throw FormatError("world file: frame blob has the wrong size");
  }
  for (auto* pool : {&world.train, &world.heldout}) {
    for (auto& u : *pool) {
      for (double& v : u.frames.data()) v = r.f64();
    }
  }
  return world;
}

void save_world(const std::string& path, const SpeakerWorld& world) {
  write_file_atomic(path, encode_world(world));
}

SpeakerWorld load_world(const std::string& path) {
  const Bytes data = read_file(path);
  try {
    return decode_world(data);
  } catch (const Error& e) {
    throw FormatError(fmt::format("{}: {}", path, e.what()));
  }
}

std::string metrics_header() {
  return "kind,epoch,step,phase,loss,frac_easy,frac_medium,frac_hard,mu_hat,sigma_hat,"
         "w_easy,w_medium,w_hard,margin,lr_backend,eer,min_dcf,gamma_grad_norm\n";
}

std::string format_metric_row(const MetricRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.kind, r.epoch,
                     r.step, to_string(r.phase), r.loss, r.frac_easy, r.frac_medium, r.frac_hard,
                     r.mu_hat, r.sigma_hat, r.w_easy, r.w_medium, r.w_hard, r.margin,
                     r.lr_backend, opt(r.eer), opt(r.min_dcf), r.gamma_grad_norm);
}

std::string render_metrics_csv(std::span<const MetricRecord> records) {
  std::string out = metrics_header();
  for (const auto& r : records) out += format_metric_row(r);
  return out;
}

}  // namespace curry
