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

#include <filesystem>

#include <gtest/gtest.h>

#include "curry/io.hpp"

namespace curry {
namespace {

namespace fs = std::filesystem;

RunConfig tiny(std::vector<std::string> extra = {}) {
  std::vector<std::string> o = {"world.num_speakers=6",   "world.heldout_speakers=4",
                                "world.utts_per_speaker=8", "world.frames_per_utt=4",
                                "world.frame_dim=6",        "encoder.num_layers=2",
                                "encoder.hidden_dim=6",     "encoder.attention_dim=4",
                                "encoder.embed_dim=8",      "schedule.batch_size=8",
                                "schedule.epochs=3",        "schedule.phase1_end=1",
                                "schedule.phase2_end=2",    "schedule.warmup_epochs=1",
                                "eval.pairs_per_speaker=6", "world.mislabel_rate=0.2",
                                "world.degrade_rate=0.1"};
  o.insert(o.end(), extra.begin(), extra.end());
  return load_config(CURRY_SOURCE_DIR "/configs/smoke.cfg", o);
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("curry_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const RunConfig cfg = tiny();
  const SpeakerWorld w = generate_world(cfg.world);
  Trainer t(cfg);
  run_training(t, w);
  const Bytes first = encode_checkpoint(t);
  const auto loaded = decode_checkpoint(first);
  EXPECT_EQ(encode_checkpoint(*loaded), first);

  const fs::path dir = temp_dir("ckpt");
  save_checkpoint((dir / "a.bin").string(), t);
  const auto from_disk = load_checkpoint((dir / "a.bin").string());
  save_checkpoint((dir / "b.bin").string(), *from_disk);
  EXPECT_EQ(read_file((dir / "a.bin").string()), read_file((dir / "b.bin").string()));
  EXPECT_FALSE(fs::exists(dir / "a.bin.tmp"));
}

TEST(Checkpoint, RestoresModelState) {
  const RunConfig cfg = tiny();
  const SpeakerWorld w = generate_world(cfg.world);
  Trainer t(cfg);
  run_training(t, w);
  const auto loaded = decode_checkpoint(encode_checkpoint(t));
  const auto a = t.model().parameters();
  const auto b = loaded->model().parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  EXPECT_EQ(loaded->model().stats.mu_hat, t.model().stats.mu_hat);
  EXPECT_EQ(loaded->model().stats.sigma_hat, t.model().stats.sigma_hat);
  EXPECT_EQ(loaded->model().curriculum.phase(), Phase::kIII);
  EXPECT_TRUE(loaded->model().curriculum.learnable());
  EXPECT_EQ(loaded->model().encoder.bn().running_mean, t.model().encoder.bn().running_mean);
  EXPECT_EQ(loaded->progress().global_step, t.progress().global_step);
  EXPECT_EQ(loaded->progress().epochs_done, 3u);
  EXPECT_EQ(render_config(loaded->config()), render_config(cfg));

  // Identical eval-mode embeddings from the restored model.
  const DenseMatrix ea = embed_utterances(t.model().encoder, w.heldout);
  const DenseMatrix eb = embed_utterances(loaded->model().encoder, w.heldout);
  EXPECT_EQ(ea, eb);
}

TEST(Checkpoint, VersionMismatchIsFormatError) {
  Trainer t(tiny());
  Bytes data = encode_checkpoint(t);
  ASSERT_GT(data.size(), 12u);
  EXPECT_EQ(std::string(data.begin(), data.begin() + 8), "CURRYCKP");
  data[8] = 2;  // little-endian u32 version follows the magic
  try {
    decode_checkpoint(data);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, CorruptInputsRejected) {
  Trainer t(tiny());
  const Bytes data = encode_checkpoint(t);
  const Bytes truncated(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(data.size() / 2));
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  Bytes bad_magic = data;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), IoError);
}

TEST(WorldFile, RoundTripPreservesEverything) {
  const RunConfig cfg = tiny({"world.num_groups=2"});
  const SpeakerWorld w = generate_world(cfg.world);
  const Bytes bytes = encode_world(w);
  const SpeakerWorld back = decode_world(bytes);
  EXPECT_EQ(encode_world(back), bytes);
  ASSERT_EQ(back.train.size(), w.train.size());
  ASSERT_EQ(back.heldout.size(), w.heldout.size());
  for (std::size_t i = 0; i < w.train.size(); ++i) {
    EXPECT_EQ(back.train[i].frames, w.train[i].frames);
    EXPECT_EQ(back.train[i].label, w.train[i].label);
    EXPECT_EQ(back.train[i].true_label, w.train[i].true_label);
    EXPECT_EQ(back.train[i].condition, w.train[i].condition);
    EXPECT_EQ(back.train[i].mislabeled, w.train[i].mislabeled);
    EXPECT_EQ(back.train[i].degraded, w.train[i].degraded);
  }
  EXPECT_EQ(back.heldout_group, w.heldout_group);
  EXPECT_EQ(render_world_config(back.config), render_world_config(w.config));
}

TEST(WorldFile, RegenerationIsByteIdentical) {
  const RunConfig cfg = tiny();
  const fs::path dir = temp_dir("world");
  save_world((dir / "a.wld").string(), generate_world(cfg.world));
  save_world((dir / "b.wld").string(), generate_world(cfg.world));
  EXPECT_EQ(read_file((dir / "a.wld").string()), read_file((dir / "b.wld").string()));
}

TEST(WorldFile, VersionAndSizeChecked) {
  const SpeakerWorld w = generate_world(tiny().world);
  Bytes bytes = encode_world(w);
  Bytes wrong_version = bytes;
  wrong_version[9] = '9';  // "CURRYWLD 1" -> "CURRYWLD 9"
  EXPECT_THROW(decode_world(wrong_version), FormatError);
  bytes.pop_back();
  EXPECT_THROW(decode_world(bytes), FormatError);
}

TEST(MetricsCsv, HeaderAndRowShape) {
  const std::string header = metrics_header();
  EXPECT_EQ(header,
            "kind,epoch,step,phase,loss,frac_easy,frac_medium,frac_hard,mu_hat,sigma_hat,"
            "w_easy,w_medium,w_hard,margin,lr_backend,eer,min_dcf,gamma_grad_norm\n");
  MetricRecord r;
  r.phase = Phase::kII;
  const std::string row = format_metric_row(r);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
  r.eer = 0.25;
  EXPECT_NE(format_metric_row(r).find(",0.25,"), std::string::npos);
}

}  // namespace
}  // namespace curry
