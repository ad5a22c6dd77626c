#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dbell/campaign.hpp"

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kInputError = 2 };

void print_summary(const dbell::CampaignResult& res) {
  for (const auto& r : res.reports) {
    std::size_t failed = 0;
    for (const auto& c : r.checks)
      if (!c.informational && !c.pass()) ++failed;
    std::cout << (r.pass() ? "PASS " : "FAIL ") << r.name << " (" << r.checks.size() << " checks";
    if (failed) std::cout << ", " << failed << " failed";
    std::cout << ")\n";
    for (const auto& c : r.checks)
      if (!c.informational && !c.pass())
        std::cout << "    " << c.name << ": " << c.violations << "/" << c.count
                  << " violations, worst margin " << dbell::format_number(c.worst_margin) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dyadic Bellman-function verification campaigns"};
  app.set_version_flag("--version", std::string(dbell::kToolVersion));
  std::string campaign, config, out, family;
  std::uint64_t seed = 0;
  int depth = 0;
  app.add_option("campaign", campaign, "Campaign to run")
      ->required()
      ->check(CLI::IsMember(dbell::campaign_names()));
  app.add_option("--config", config, "Campaign configuration (JSON)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* depth_opt = app.add_option("--depth", depth, "Obstruction depth, or maximal generated instance depth")
                        ->check(CLI::Range(1, 58));
  auto* family_opt = app.add_option("--family", family, "Family descriptor (JSON), overrides the config");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInputError;
  }

  dbell::CliOverrides cli;
  if (*seed_opt) cli.seed = seed;
  if (*out_opt) cli.out = out;
  if (*depth_opt) cli.depth = depth;
  if (*family_opt) cli.family_path = family;

  dbell::CampaignConfig cfg;
  dbell::CampaignResult res;
  try {
    cfg = dbell::load_config(config, cli);
    res = dbell::run_campaign(campaign, cfg);
  } catch (const dbell::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const dbell::ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return kInputError;
  } catch (const dbell::DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    dbell::write_campaign(res, cfg);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return kInputError;
  }
  print_summary(res);
  std::cout << "report: " << (std::filesystem::path(cfg.out) / "report.json").string() << "\n";
  return res.pass() ? kPass : kCheckFailure;
}
