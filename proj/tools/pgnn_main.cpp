// Command-line experiment runner.
//
//   pgnn <kind> --config <path> [--out <dir>] [--seed <n> ...] [--no-svg] [--resume]
//
// The kind argument selects which experiment the process runs and overrides
// experiment.kind from the config file; --out and --seed likewise override
// their config counterparts. The effective configuration is always echoed to
// <out>/config.echo. Exit codes: 0 success (training divergence is recorded
// as data, not failure), 1 config or validation problems, 2 I/O problems.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pgnn/config.hpp"
#include "pgnn/experiment.hpp"
#include "pgnn/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"structured-network experiment runner"};
  app.footer("Default output root: $" + std::string(pgnn::exp::kOutRootEnv) +
             "/<kind>, else runs/<kind>.");

  std::string kind, config_path, out_dir;
  std::vector<std::uint64_t> seeds;
  bool no_svg = false, resume = false;

  app.add_option("kind", kind, "experiment kind")
      ->required()
      ->check(CLI::IsMember(pgnn::config::experiment_kinds()));
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--out", out_dir, "output directory (overrides experiment.out)");
  app.add_option("--seed", seeds, "run seed, repeatable (overrides experiment.seeds)");
  app.add_flag("--no-svg", no_svg, "write CSV reports only, skip figures");
  app.add_flag("--resume", resume, "train kind: continue from seed<N>/checkpoint.bin");

  CLI11_PARSE(app, argc, argv);

  try {
    pgnn::config::ExperimentConfig cfg =
        pgnn::config::parse_config(pgnn::io::read_file(config_path));
    cfg.kind = kind;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (!seeds.empty()) cfg.seeds = seeds;

    pgnn::exp::RunOptions opts;
    opts.no_svg = no_svg;
    opts.resume = resume;
    pgnn::exp::run(cfg, opts);
    return 0;
  } catch (const pgnn::ConfigError& e) {
    std::fprintf(stderr, "%s: config error at line %zu, key '%s': %s\n", argv[0],
                 e.line(), e.key().c_str(), e.what());
    return 1;
  } catch (const pgnn::IoError& e) {
    std::fprintf(stderr, "%s: io error: %s\n", argv[0], e.what());
    return 2;
  } catch (const pgnn::Error& e) {
    std::fprintf(stderr, "%s: error: %s\n", argv[0], e.what());
    return 1;
  }
}
