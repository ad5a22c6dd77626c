#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dbell/campaign.hpp"
#include "dbell/instances.hpp"

using namespace dbell;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dbell_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DBELL_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string quick_config() { return std::string(DBELL_CONFIG_DIR) + "/quick.json"; }

}  // namespace

TEST(Io, WeightRoundTrip) {
  const LeafWeight w = random_lognormal_weight(4, 2);
  const LeafWeight back = io::parse_weight(io::weight_to_json(w), "w");
  EXPECT_EQ(back.values(), w.values());
  EXPECT_THROW(io::parse_weight(json{{"depth", 1}, {"values", {1.0}}}, "w"), InputError);
  EXPECT_THROW(io::parse_weight(json{{"depth", 1}, {"values", {1.0, -2.0}}}, "w"), InputError);
  EXPECT_THROW(io::parse_weight(json{{"depth", 30}, {"values", json::array()}}, "w"), ResourceError);
  EXPECT_THROW(io::parse_weight(json{{"depth", 0}, {"values", {1.0}}, {"extra", 1}}, "w"), InputError);
}

TEST(Io, CarlesonRoundTrip) {
  const CarlesonSequence a = random_carleson(4, 5);
  const CarlesonSequence b = io::parse_carleson(io::carleson_to_json(a), "a");
  EXPECT_EQ(a.entries(), b.entries());
  const json dup = {{"bound", 1.0},
                    {"entries", {{{"level", 1}, {"pos", 0}, {"a", 0.1}}, {{"level", 1}, {"pos", 0}, {"a", 0.2}}}}};
  EXPECT_THROW(io::parse_carleson(dup, "a"), InputError);
  const json bad = {{"entries", {{{"level", 1}, {"pos", 2}, {"a", 0.1}}}}};
  EXPECT_THROW(io::parse_carleson(bad, "a"), InputError);
}

TEST(Io, PartitionRoundTrip) {
  const PartitionWeight u = build_u(8);
  const PartitionWeight back = io::parse_partition_weight(io::partition_to_json(u), "u");
  ASSERT_EQ(back.cell_count(), u.cell_count());
  EXPECT_DOUBLE_EQ(back.integral(), u.integral());
}

TEST(Io, FamilyDescriptors) {
  const BumpPairing p = io::parse_family(json{{"tag", "log"}, {"sigma", 1.0}}, "f");
  EXPECT_EQ(p.eps.kind(), GapKind::Power);
  EXPECT_DOUBLE_EQ(p.eps.beta(), 0.25);
  EXPECT_DOUBLE_EQ(p.phi0.sigma(), 0.5);
  const BumpPairing back = io::parse_family(io::pairing_to_json(p), "f");
  EXPECT_EQ(back.phi.name(), p.phi.name());
  EXPECT_EQ(back.eps.name(), p.eps.name());
  EXPECT_THROW(io::parse_family(json{{"tag", "power"}, {"p", 2.0}}, "f"), InputError);
  EXPECT_THROW(io::parse_family(json{{"tag", "cubic"}}, "f"), InputError);
  EXPECT_THROW(io::parse_family(json{{"tag", "log"}, {"sigma", 1.0}, {"epsilon", {{"kind", "unit"}}}}, "f"), InputError);
  const BumpPairing custom = io::parse_family(
      json{{"tag", "power"}, {"p", 2.0}, {"epsilon", {{"kind", "unit"}}}, {"family0", {{"tag", "power"}, {"p", 1.5}}}},
      "f");
  EXPECT_EQ(custom.eps.kind(), GapKind::Unit);
}

TEST(Io, LoadJsonErrors) {
  const fs::path d = scratch("loadjson");
  EXPECT_THROW(io::load_json(d / "missing.json"), InputError);
  write_text(d / "bad.json", "{ not json");
  EXPECT_THROW(io::load_json(d / "bad.json"), InputError);
}

TEST(Config, DefaultsAndOverrides) {
  const CampaignConfig c = parse_config(json::object(), "cfg");
  EXPECT_DOUBLE_EQ(c.budget.delta, 1e-5);
  EXPECT_EQ(c.seed, 1u);
  CliOverrides cli;
  cli.seed = 42;
  cli.depth = 7;
  const CampaignConfig o = parse_config(json::object(), "cfg", cli);
  EXPECT_EQ(o.seed, 42u);
  EXPECT_EQ(o.obstruction_depths, std::vector<int>{7});
  EXPECT_EQ(o.generator.depth_max, 7);
  EXPECT_NE(config_hash(c), config_hash(o));
  EXPECT_EQ(config_hash(c), config_hash(parse_config(json::object(), "cfg")));
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config(json{{"colour", 1}}, "cfg"), InputError);
  EXPECT_THROW(parse_config(json{{"budget", {{"delta", -1.0}}}}, "cfg"), InputError);
  EXPECT_THROW(parse_config(json{{"refinement", {{"coarse", 9}, {"fine", 8}}}}, "cfg"), InputError);
  EXPECT_THROW(parse_config(json{{"instances", {{"paths", {"/nonexistent/bundle"}}}}}, "cfg"), InputError);
  CliOverrides deep;
  deep.depth = 30;
  EXPECT_THROW(parse_config(json::object(), "cfg", deep), ResourceError);
}

TEST(Config, BundleLoading) {
  const fs::path d = scratch("bundle");
  const Instance in = random_instance(3, 9);
  io::write_json(d / "u.json", io::weight_to_json(in.u));
  io::write_json(d / "v.json", io::weight_to_json(in.v));
  io::write_json(d / "carleson.json", io::carleson_to_json(in.a));
  const CampaignConfig c = parse_config(json{{"instances", {{"paths", {d.string()}}}}}, "cfg");
  ASSERT_EQ(c.bundles.size(), 1u);
  EXPECT_EQ(c.bundles[0].u.values(), in.u.values());
  // Carleson bound over 2 is rejected.
  CarlesonSequence big(4.0);
  big.set(DyadicIndex::root(), 1.0);
  big.set({1, 0}, 1.0);
  big.set({1, 1}, 1.0);
  big.set({2, 0}, 1.0);
  io::write_json(d / "carleson.json", io::carleson_to_json(big));
  EXPECT_THROW(parse_config(json{{"instances", {{"paths", {d.string()}}}}}, "cfg"), InputError);
}

TEST(Cli, VersionAndUsage) {
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("nonsense --config " + quick_config()), 2);
  EXPECT_EQ(run_cli("bellman-b2"), 2);
}

TEST(Cli, MissingWeightFileWritesNothing) {
  const fs::path d = scratch("missing");
  write_text(d / "cfg.json", R"({"instances": {"paths": [")" + (d / "nope").string() + R"("]}})");
  EXPECT_EQ(run_cli("glav --config " + (d / "cfg.json").string() + " --out " + (d / "out").string()), 2);
  EXPECT_FALSE(fs::exists(d / "out" / "report.json"));
}

TEST(Cli, MalformedInputs) {
  const fs::path d = scratch("malformed");
  write_text(d / "cfg.json", "{\"seed\": ");
  EXPECT_EQ(run_cli("orlicz --config " + (d / "cfg.json").string() + " --out " + (d / "out").string()), 2);
  EXPECT_FALSE(fs::exists(d / "out"));
  EXPECT_EQ(run_cli("orlicz --config " + (d / "absent.json").string()), 2);
  write_text(d / "fam.json", R"({"tag": "power", "p": 2})");
  EXPECT_EQ(run_cli("bump-check --config " + quick_config() + " --family " + (d / "fam.json").string() + " --out " +
                    (d / "out2").string()),
            2);
}

TEST(Cli, DepthOverCapIsResourceError) {
  const fs::path d = scratch("cap");
  EXPECT_EQ(run_cli("glav --config " + quick_config() + " --depth 30 --out " + (d / "out").string()), 2);
  EXPECT_FALSE(fs::exists(d / "out" / "report.json"));
}

TEST(Cli, BellmanB2PassesAndReportsCombinedDrop) {
  const fs::path d = scratch("b2");
  ASSERT_EQ(run_cli("bellman-b2 --config " + quick_config() + " --out " + (d / "out").string()), 0);
  const json r = io::load_json(d / "out" / "report.json");
  EXPECT_EQ(r["schema_version"], 1);
  EXPECT_TRUE(r["pass"].get<bool>());
  bool found = false;
  for (auto& rep : r["reports"])
    for (auto& c : rep["checks"])
      if (c["name"] == "combined_drop") found = true;
  EXPECT_TRUE(found);
  EXPECT_TRUE(fs::exists(d / "out" / "summary.csv"));
  const std::string g = read_text(d / "out" / "g_positivity__g.csv");
  EXPECT_EQ(g.substr(0, g.find('\n')), "s,g");
}

TEST(Cli, LargeDeltaFailsChecks) {
  const fs::path d = scratch("b2fail");
  write_text(d / "cfg.json", R"({"budget": {"delta": 0.001},
    "gradients": {"points": 50}, "aux_T": {"points": 100}})");
  EXPECT_EQ(run_cli("bellman-b2 --config " + (d / "cfg.json").string() + " --out " + (d / "out").string()), 1);
  EXPECT_TRUE(fs::exists(d / "out" / "report.json"));
}

TEST(Cli, ObstructionGrowthTable) {
  const fs::path d = scratch("obstruction");
  ASSERT_EQ(run_cli("obstruction --config " + quick_config() + " --depth 20 --out " + (d / "out").string()), 0);
  const std::string growth = read_text(d / "out" / "obstruction_d20__growth.csv");
  EXPECT_EQ(growth.substr(0, growth.find('\n')), "n,S,S_over_mass,trunc_maximal");
  for (const char* f : {"u.json", "v.json", "carleson.json"}) EXPECT_TRUE(fs::exists(d / "out" / "obstruction_bundle" / f));
}

TEST(Cli, DeterministicReports) {
  const fs::path d = scratch("determinism");
  ASSERT_EQ(run_cli("testing --config " + quick_config() + " --out " + (d / "a").string()), 0);
  ASSERT_EQ(run_cli("testing --config " + quick_config() + " --out " + (d / "b").string()), 0);
  EXPECT_EQ(read_text(d / "a" / "report.json"), read_text(d / "b" / "report.json"));
  EXPECT_EQ(read_text(d / "a" / "summary.csv"), read_text(d / "b" / "summary.csv"));
  ASSERT_EQ(run_cli("testing --config " + quick_config() + " --seed 99 --out " + (d / "c").string()), 0);
  EXPECT_NE(read_text(d / "a" / "summary.csv"), read_text(d / "c" / "summary.csv"));
}
