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

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "curry/config.hpp"

namespace curry {
namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmokePath = CURRY_SOURCE_DIR "/configs/smoke.cfg";

std::string error_of(const std::string& text, std::vector<std::string> overrides = {}) {
  try {
    parse_config(text, "test.cfg", overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string replace_line(const std::string& text, const std::string& key,
                         const std::string& replacement) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind(key + " =", 0) == 0) {
      out += replacement.empty() ? std::string() : replacement + "\n";
    } else {
      out += line + "\n";
    }
  }
  return out;
}

TEST(Config, ShippedConfigsParse) {
  const RunConfig smoke = load_config(kSmokePath);
  EXPECT_EQ(smoke.world.num_speakers, 20u);
  EXPECT_EQ(smoke.schedule.epochs, 2u);
  EXPECT_EQ(smoke.loss.subcenters, 3u);
  EXPECT_DOUBLE_EQ(smoke.loss.scale, 32.0);
  EXPECT_DOUBLE_EQ(smoke.loss.ema_momentum, 0.01);
  EXPECT_TRUE(smoke.loss.curriculum);
  EXPECT_EQ(smoke.loss.gamma_phase1, (std::array<double, 3>{4, -4, -4}));
  EXPECT_EQ(smoke.encoder.frame_dim, smoke.world.frame_dim);
  const RunConfig acc = load_config(CURRY_SOURCE_DIR "/configs/acceptance.cfg");
  EXPECT_EQ(acc.world.num_speakers, 200u);
}

TEST(Config, RenderRoundTrips) {
  const RunConfig a = load_config(kSmokePath, {"loss.curriculum=off", "loss.scale=12.5"});
  const std::string text = render_config(a);
  const RunConfig b = parse_config(text, "rendered");
  EXPECT_EQ(render_config(b), text);
  EXPECT_FALSE(b.loss.curriculum);
  EXPECT_DOUBLE_EQ(b.loss.scale, 12.5);
}

TEST(Config, EveryKeyIsRendered) {
  const std::string text = render_config(load_config(kSmokePath));
  for (const std::string& k : config_keys()) {
    EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
  }
}

TEST(Config, UnknownKeyRejectedWithLine) {
  const std::string text = read_text(kSmokePath) + "loss.temperature = 3\n";
  const std::string err = error_of(text);
  EXPECT_NE(err.find("unknown key 'loss.temperature'"), std::string::npos) << err;
  EXPECT_NE(err.find("test.cfg:"), std::string::npos) << err;
}

TEST(Config, MissingKeyRejected) {
  const std::string text = replace_line(read_text(kSmokePath), "loss.K", "");
  const std::string err = error_of(text);
  EXPECT_NE(err.find("missing required key 'loss.K'"), std::string::npos) << err;
}

TEST(Config, DuplicateKeyRejectedWithBothLines) {
  const std::string text = "seed = 3\n" + read_text(kSmokePath);
  const std::string err = error_of(text);
  EXPECT_NE(err.find("duplicate key 'seed'"), std::string::npos) << err;
  EXPECT_NE(err.find("test.cfg:1"), std::string::npos) << err;
}

TEST(Config, MalformedLineReportsLineNumber) {
  const std::string text = "# header\n\nthis line has no separator\n";
  const std::string err = error_of(text);
  EXPECT_NE(err.find("test.cfg:3"), std::string::npos) << err;
}

TEST(Config, BadValueNamesKeyAndLine) {
  const std::string text = replace_line(read_text(kSmokePath), "loss.K", "loss.K = three");
  const std::string err = error_of(text);
  EXPECT_NE(err.find("loss.K"), std::string::npos) << err;
  EXPECT_NE(err.find("three"), std::string::npos) << err;
  EXPECT_NE(err.find("test.cfg:"), std::string::npos) << err;
}

TEST(Config, InvalidRateNamesKey) {
  const std::string err = error_of(read_text(kSmokePath), {"world.mislabel_rate=1.5"});
  EXPECT_NE(err.find("world.mislabel_rate"), std::string::npos) << err;
}

TEST(Config, OverridesReplaceFileValues) {
  const RunConfig cfg = load_config(kSmokePath, {"schedule.epochs=7", "loss.gamma_phase2=1,2,3"});
  EXPECT_EQ(cfg.schedule.epochs, 7u);
  EXPECT_EQ(cfg.loss.gamma_phase2, (std::array<double, 3>{1, 2, 3}));
}

TEST(Config, UnknownOverrideRejected) {
  const std::string err = error_of(read_text(kSmokePath), {"bogus.key=1"});
  EXPECT_NE(err.find("unknown key 'bogus.key'"), std::string::npos) << err;
  EXPECT_NE(err.find("--set"), std::string::npos) << err;
}

TEST(Config, CrossFieldValidation) {
  EXPECT_NE(error_of(read_text(kSmokePath), {"schedule.phase1_end=5"}).find("phase1_end"),
            std::string::npos);
  EXPECT_NE(error_of(read_text(kSmokePath), {"loss.margin_phase2=2.0"}).find("margin_phase2"),
            std::string::npos);
  EXPECT_NE(error_of(read_text(kSmokePath), {"loss.gamma_phase1=1,2"}).find("gamma_phase1"),
            std::string::npos);
}

TEST(Config, MissingFileIsAnError) {
  EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError);
}

TEST(Config, WorldConfigRoundTrips) {
  const RunConfig cfg = load_config(kSmokePath);
  const std::string text = render_world_config(cfg.world);
  const WorldConfig back = parse_world_config(text);
  EXPECT_EQ(render_world_config(back), text);
  EXPECT_EQ(text.find("loss."), std::string::npos);
}

}  // namespace
}  // namespace curry
