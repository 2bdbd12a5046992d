#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfpinn/config.hpp"
#include "mfpinn/csv.hpp"
#include "mfpinn/errors.hpp"
#include "mfpinn/heat.hpp"
#include "mfpinn/rng.hpp"

using namespace mfpinn;
namespace fs = std::filesystem;

TEST_CASE("toml subset parser") {
  const std::string text = R"(
# comment
top = 1
[train]
epochs = 250        # trailing comment
learning_rate = 5e-4
adapt_data_weight = true
name = "hello # not a comment"
[data]
sweep_sizes = [10, 50, 100]
)";
  auto kv = config::parse_toml(text);
  CHECK(std::get<double>(kv.at("top")) == 1.0);
  CHECK(std::get<double>(kv.at("train.epochs")) == 250.0);
  CHECK(std::get<double>(kv.at("train.learning_rate")) == doctest::Approx(5e-4));
  CHECK(std::get<bool>(kv.at("train.adapt_data_weight")) == true);
  CHECK(std::get<std::string>(kv.at("train.name")) == "hello # not a comment");
  const auto arr = std::get<std::vector<double>>(kv.at("data.sweep_sizes"));
  REQUIRE(arr.size() == 3);
  CHECK(arr[1] == 50.0);

  CHECK_THROWS_AS(config::parse_toml("a = \n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("[sec\na = 1\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("a = [1, 2\n"), ConfigError);
  CHECK_THROWS_AS(config::parse_toml("a = zzz\n"), ConfigError);
}

TEST_CASE("config: defaults carry the shipped study values") {
  const auto cfg = config::default_config();
  CHECK(cfg.composite1.material.density == doctest::Approx(1573.0));
  CHECK(cfg.composite2.material.density == doctest::Approx(1581.26));
  CHECK(cfg.composite2.material.conductivity == doctest::Approx(0.702));
  CHECK(cfg.composite2.material.specific_heat == doctest::Approx(1080.22));
  CHECK(cfg.composite2.htc_top == 100.0);
  CHECK(cfg.composite2.htc_bottom == 50.0);
  CHECK(cfg.composite2.thickness == doctest::Approx(0.02));
  CHECK(cfg.oracle_n_elements == 40);
  CHECK(cfg.oracle_dt == doctest::Approx(0.0015));
  CHECK(cfg.oracle_max_step_change == 1.0);
  CHECK(cfg.hidden_layers == 5);
  CHECK(cfg.hidden_width == 30);
  CHECK(cfg.train.epochs == 200);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.train.learning_rate == doctest::Approx(1e-3));
  CHECK(cfg.train.lr_decay_factor == 0.5);
  CHECK(cfg.train.lr_patience_epochs == 20);
  CHECK(cfg.n_collocation == 1600);
  CHECK(cfg.n_boundary == 80);
  CHECK(cfg.n_initial == 20);
  CHECK(cfg.sweep_sizes == std::vector<int>{10, 50, 100, 200, 400});
  cfg.validate();
}

TEST_CASE("config round-trips through its canonical text") {
  const auto cfg = config::default_config();
  const auto again = config::config_from_text(cfg.to_toml());
  CHECK(again.hash() == cfg.hash());
  CHECK(again.to_toml() == cfg.to_toml());
}

TEST_CASE("config: duplicate keys are rejected") {
  const auto base = config::default_config().to_toml();
  CHECK_THROWS_AS(config::config_from_text(base + "\n[train]\nepochs = 7\n"),
                  ConfigError);
}

TEST_CASE("config: unknown keys are rejected") {
  CHECK_THROWS_AS(config::config_from_text("[train]\nnot_a_key = 1\n"),
                  ConfigError);
}

TEST_CASE("config: partial files override defaults") {
  const auto cfg = config::config_from_text(
      "[train]\nepochs = 3\n[points]\ncollocation = 128\n"
      "[experiment]\nseeds = [5]\n");
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.n_collocation == 128);
  REQUIRE(cfg.seeds.size() == 1);
  CHECK(cfg.seeds[0] == 5);
  CHECK(cfg.train.batch_size == 64);  // untouched default
  CHECK(cfg.hash() != config::default_config().hash());
}

TEST_CASE("config validation rejects bad values") {
  CHECK_THROWS_AS(config::config_from_text("[points]\nboundary = 7\n"),
                  ConfigError);
  CHECK_THROWS_AS(config::config_from_text("[data]\nsweep_sizes = [50, 10]\n"),
                  ConfigError);
  CHECK_THROWS_AS(config::config_from_text("[experiment]\nseeds = []\n"),
                  ConfigError);
  CHECK_THROWS_AS(config::config_from_text("[oracle]\ndt = -1\n"), ConfigError);
}

TEST_CASE("csv: shortest round-trip formatting") {
  Xoshiro256ss rng(17);
  for (int i = 0; i < 2000; ++i) {
    double v = rng.uniform(-1e6, 1e6);
    if (i % 7 == 0) v = rng.uniform(-1e-6, 1e-6);
    if (i % 11 == 0) v *= 1e12;
    CHECK(csv::parse_double(csv::fmt(v)) == v);
  }
  CHECK(csv::fmt(0.1) == "0.1");
  CHECK(csv::parse_double(csv::fmt(std::numeric_limits<double>::max())) ==
        std::numeric_limits<double>::max());
  CHECK_THROWS_AS(csv::parse_double("12a"), IoError);
  CHECK_THROWS_AS(csv::parse_double(""), IoError);
}

TEST_CASE("csv files read back and rewrite byte-identically") {
  const std::string path =
      (fs::temp_directory_path() / "mfpinn_csv_roundtrip.csv").string();
  csv::Table t;
  t.comments = {"# config_hash=0xdeadbeef", "# seed=42"};
  t.header = "x_m,t_s,temp_C";
  Xoshiro256ss rng(5);
  for (int i = 0; i < 200; ++i) {
    t.rows.push_back({csv::fmt(rng.uniform(0, 0.02)),
                      csv::fmt(rng.uniform(0, 2500)),
                      csv::fmt(rng.uniform(-10, 200))});
  }
  csv::write(path, t);
  std::ifstream f1(path, std::ios::binary);
  std::stringstream buf1;
  buf1 << f1.rdbuf();

  const csv::Table read_back = csv::read(path);
  CHECK(read_back.comments == t.comments);
  CHECK(read_back.header == t.header);
  CHECK(read_back.rows == t.rows);
  csv::write(path, read_back);
  std::ifstream f2(path, std::ios::binary);
  std::stringstream buf2;
  buf2 << f2.rdbuf();
  CHECK(buf1.str() == buf2.str());
  fs::remove(path);
}

TEST_CASE("labeled csv io") {
  const std::string path =
      (fs::temp_directory_path() / "mfpinn_labeled.csv").string();
  heat::LabeledSet set;
  set.points = {{0.01, 100.0, 55.5}, {0.0, 0.0, 0.0}, {0.02, 2500.0, 140.0}};
  heat::write_labeled_csv(path, set, {"# seed=1"});
  const auto back = heat::read_labeled_csv(path);
  REQUIRE(back.points.size() == 3);
  CHECK(back.points[0].x == 0.01);
  CHECK(back.points[2].temperature == 140.0);
  fs::remove(path);
}
