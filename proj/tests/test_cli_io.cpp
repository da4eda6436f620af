#include <gtest/gtest.h>

#include <sys/wait.h>

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "exoplore/io.hpp"

using namespace exoplore;
namespace fs = std::filesystem;

namespace {
fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("exoplore_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<DatasetRow> random_rows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DatasetRow> rows(n);
  for (auto& r : rows) {
    r.step_length = 0.134 + 0.804 * u(rng);
    r.step_frequency = 1.27 + 1.28 * u(rng);
    r.kappa = 21.0 * u(rng);
    r.delta_t = 0.5 * u(rng);
    r.severity = u(rng);
    r.pathology = all_pathologies[rng() % all_pathologies.size()];
    r.seed = rng();
    r.cot = std::exp(10.0 * u(rng) - 5.0);
  }
  return rows;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(EXOPLORE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_small_config(const fs::path& dir, std::size_t samples) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.samples = samples;
  cfg.generator.mode = GeneratorMode::planted_bowl;
  cfg.gaits = {{0.6, 2.0}};
  cfg.surrogate.hidden = {8};
  cfg.surrogate.epochs = 5;
  cfg.output_dir = (dir / "out").string();
  const fs::path p = dir / "config.json";
  write_text(p.string(), dump_json(config_to_json(cfg)));
  return p;
}
}  // namespace

TEST(DatasetCsv, RoundTripIsExact) {
  const auto rows = random_rows(1000, 1);
  EXPECT_EQ(dataset_from_csv(dataset_to_csv(rows)), rows);
  const fs::path dir = scratch_dir("dataset");
  write_dataset(rows, (dir / "d.csv").string());
  EXPECT_EQ(read_dataset((dir / "d.csv").string()), rows);
}

TEST(DatasetCsv, FormatDoubleRoundTrips) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::bit_cast<double>(rng() & 0x7fefffffffffffffULL);
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(DatasetCsv, MissingColumnNamed) {
  std::string text = dataset_to_csv(random_rows(3, 3));
  text.replace(text.find("seed,"), 5, "");
  try {
    dataset_from_csv(text);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("seed"), std::string::npos) << e.what();
  }
}

TEST(DatasetCsv, ExtraColumnRejected) {
  std::string text = dataset_to_csv(random_rows(2, 4));
  text.insert(text.find('\n'), ",extra");
  try {
    dataset_from_csv(text);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("extra"), std::string::npos) << e.what();
  }
}

TEST(DatasetCsv, BadNumberRejected) {
  std::string text = dataset_to_csv(random_rows(2, 5));
  const auto second_line = text.find('\n') + 1;
  text.replace(second_line, text.find(',', second_line) - second_line, "abc");
  EXPECT_THROW(dataset_from_csv(text), SchemaError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Dataset d;
  d.bounds = {{0.0, 1.0}, {0.0, 2.0}};
  d.x = lhs_sample(d.bounds, 64, 1);
  d.y = d.x.col(0).array().sin() + d.x.col(1).array();
  SurrogateConfig cfg;
  cfg.hidden = {6, 5};
  cfg.epochs = 5;
  const SurrogateNet net = train(d, cfg, 3).net;
  const fs::path dir = scratch_dir("ckpt");
  write_checkpoint(net, (dir / "c.json").string());
  const SurrogateNet back = read_checkpoint((dir / "c.json").string());
  ASSERT_EQ(back.mlp.layers.size(), net.mlp.layers.size());
  for (std::size_t k = 0; k < net.mlp.layers.size(); ++k) {
    EXPECT_EQ(back.mlp.layers[k].weight, net.mlp.layers[k].weight);
    EXPECT_EQ(back.mlp.layers[k].bias, net.mlp.layers[k].bias);
    EXPECT_EQ(back.mlp.layers[k].activation, net.mlp.layers[k].activation);
  }
  EXPECT_EQ(back.norm.y_mean, net.norm.y_mean);
  EXPECT_EQ(back.norm.y_std, net.norm.y_std);
  EXPECT_EQ(back.seed, net.seed);
  EXPECT_EQ(back.final_loss, net.final_loss);
  EXPECT_EQ(dump_json(checkpoint_to_json(back)), dump_json(checkpoint_to_json(net)));
  EXPECT_EQ(predict(back, d.x), predict(net, d.x));
}

TEST(Checkpoint, WrongFormatRejected) {
  json j = {{"format", "something-else"}};
  EXPECT_THROW(checkpoint_from_json(j), SchemaError);
}

TEST(Config, RoundTripThroughJson) {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.pathology = PathologyKind::waddling;
  cfg.gaits = {{0.5, 1.9}};
  cfg.surrogate.hidden = {12, 7};
  cfg.space.severity = {0.0, 1.0};
  const json j = config_to_json(cfg);
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(j["pathology"], "waddling");
}

TEST(Config, SeedIsRequired) {
  json j = config_to_json(RunConfig{});
  j.erase("seed");
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, UnknownKeyRejectedWithPath) {
  json j = config_to_json(RunConfig{});
  j["surrogate"]["hiden"] = json::array({4});
  try {
    config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("surrogate.hiden"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidValuesRejected) {
  json j = config_to_json(RunConfig{});
  j["gaits"] = json::array({{{"step_length", 5.0}, {"step_frequency", 2.0}}});
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = config_to_json(RunConfig{});
  j["pathology"] = "limp";
  EXPECT_THROW(config_from_json(j), ConfigError);
  const fs::path dir = scratch_dir("badjson");
  write_text((dir / "c.json").string(), "{ not json");
  EXPECT_THROW(load_config((dir / "c.json").string()), ConfigError);
}

TEST(Compare, IdenticalSeriesGiveIdentityMetrics) {
  const std::vector<double> s{0.0, 1.0, 0.5, -0.2, 0.8};
  const json c = compare_series(s, s);
  EXPECT_EQ(c["nrmse"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(c["r"].get<double>(), 1.0);
  EXPECT_EQ(c["ndtw"].get<double>(), 0.0);
}

TEST(Compare, DegenerateSeriesReportErrors) {
  const std::vector<double> flat{1.0, 1.0, 1.0}, s{0.0, 1.0, 2.0};
  const json c = compare_series(s, flat);
  EXPECT_EQ(c["nrmse"]["error"], "zero range");
  EXPECT_EQ(c["r"]["error"], "zero variance");
}

TEST(Compare, SeriesFileHeaderSkipped) {
  const fs::path dir = scratch_dir("series");
  write_text((dir / "s.csv").string(), "angle,time\n0.5,0\n1.5,1\n");
  EXPECT_EQ(read_series((dir / "s.csv").string()), (std::vector<double>{0.5, 1.5}));
  write_text((dir / "bad.csv").string(), "1\nx\n");
  EXPECT_THROW(read_series((dir / "bad.csv").string()), SchemaError);
}

TEST(Cli, GenDataWritesRequestedRows) {
  const fs::path dir = scratch_dir("cli_gen");
  const fs::path cfg = write_small_config(dir, 10);
  ASSERT_EQ(run_cli("gen-data -q -c " + cfg.string(), dir / "log.txt"), 0) << read_text((dir / "log.txt").string());
  const auto rows = read_dataset((dir / "out" / "dataset.csv").string());
  EXPECT_EQ(rows.size(), 10u);
}

TEST(Cli, PipelineRerunIsByteIdentical) {
  const fs::path dir = scratch_dir("cli_pipe");
  const fs::path cfg = write_small_config(dir, 40);
  ASSERT_EQ(run_cli("pipeline -q -c " + cfg.string() + " -o " + (dir / "a").string(), dir / "a.txt"), 0);
  ASSERT_EQ(run_cli("pipeline -q -c " + cfg.string() + " -o " + (dir / "b").string(), dir / "b.txt"), 0);
  for (const char* f : {"dataset.csv", "surrogate.json", "loss_curve.csv", "optimization.json"})
    EXPECT_EQ(read_text((dir / "a" / f).string()), read_text((dir / "b" / f).string())) << f;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli_codes");
  EXPECT_EQ(run_cli("print-config", dir / "p.txt"), 0);
  EXPECT_NO_THROW(config_from_json(json::parse(read_text((dir / "p.txt").string()))));
  EXPECT_EQ(run_cli("no-such-command", dir / "x.txt"), 2);
  EXPECT_EQ(run_cli("gen-data -q", dir / "y.txt"), 2);
  write_text((dir / "bad.json").string(), "{\"seed\": 1, \"bogus\": 3}");
  EXPECT_EQ(run_cli("gen-data -q -c " + (dir / "bad.json").string(), dir / "z.txt"), 2);
  const fs::path cfg = write_small_config(dir, 0);
  EXPECT_EQ(run_cli("pipeline -q -c " + cfg.string(), dir / "s.txt"), 3);
  EXPECT_NE(read_text((dir / "s.txt").string()).find("sampling"), std::string::npos);
}
