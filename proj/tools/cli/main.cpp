#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "olinear/error.hpp"

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

int exit_code(olinear::ErrorKind k) {
  using olinear::ErrorKind;
  switch (k) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::data:
    case ErrorKind::io: return kData;
    case ErrorKind::numerical:
    case ErrorKind::convergence: return kNumerical;
    default: return kOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = olinear::cli;

  CLI::App app{"OLinear forecaster: prepare bases, train, evaluate, ablate and inspect"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string split = "test";
  std::string axis;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config,-c", config_path, "key = value run configuration file");
    sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
  };
  auto* prepare = app.add_subcommand("prepare", "estimate correlations and write the orthogonal bases");
  auto* train = app.add_subcommand("train", "train a model and write model.olck and history.csv");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  auto* ablate = app.add_subcommand("ablate", "train once per setting of one design axis");
  auto* inspect = app.add_subcommand("inspect", "rank, decorrelation and FLOPs diagnostics");
  for (auto* s : {prepare, train, eval, ablate, inspect}) common(s);
  for (auto* s : {eval, inspect}) s->add_option("--checkpoint", checkpoint, "default: <output_dir>/model.olck");
  eval->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ablate->add_option("--axis", axis, "basis, normlin, csl or variant")
      ->required()
      ->check(CLI::IsMember({"basis", "normlin", "csl", "variant"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const cli::RunConfig rc = cli::load_run_config(config_path, overrides);
    if (prepare->parsed()) cli::cmd_prepare(rc, std::cout);
    if (train->parsed()) cli::cmd_train(rc, std::cout);
    if (eval->parsed()) cli::cmd_eval(rc, checkpoint, olinear::parse_split(split), std::cout);
    if (ablate->parsed()) cli::cmd_ablate(rc, axis, std::cout);
    if (inspect->parsed()) cli::cmd_inspect(rc, checkpoint, std::cout);
  } catch (const olinear::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
