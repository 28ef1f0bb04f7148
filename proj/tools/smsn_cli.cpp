#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "smsn/cli.hpp"

namespace {

// Layering: defaults < --config JSON < command-line flags.
void apply_config_file(const std::string& path, smsn::RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  nlohmann::json j;
  in >> j;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
  };
  get("input", cfg.input);
  get("model", cfg.model);
  get("family", cfg.family);
  get("nu", cfg.nu);
  get("tol", cfg.tol);
  get("max_iter", cfg.max_iter);
  get("seed", cfg.seed);
  get("fix_nu", cfg.fix_nu);
  get("holdout", cfg.holdout);
  get("threads", cfg.threads);
  get("out", cfg.out_dir);
  get("replicates", cfg.replicates);
  get("n_subjects", cfg.n_subjects);
  get("scenario", cfg.scenario);
}

void add_common(CLI::App* cmd, smsn::RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  cmd->add_option("--model", cfg.model, "model name (logistic3|oral1cpt|linear2)");
  cmd->add_option("--family", cfg.family, "family (normal|sn|st|ssl|scn)");
  cmd->add_option("--nu", cfg.nu, "mixing parameter(s)");
  cmd->add_option("--tol", cfg.tol, "relative log-likelihood tolerance");
  cmd->add_option("--max-iter", cfg.max_iter, "iteration cap");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_flag("--fix-nu", cfg.fix_nu, "hold nu at its initial value");
  cmd->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", cfg.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SMSN nonlinear mixed-effects fitting"};
  app.require_subcommand(1);
  smsn::RunConfig cfg;
  std::string config_path;

  CLI::App* fit = app.add_subcommand("fit", "fit one family to a CSV dataset");
  fit->add_option("input", cfg.input, "long-format CSV")->check(CLI::ExistingFile);
  add_common(fit, cfg, config_path);

  CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo study");
  add_common(sim, cfg, config_path);
  sim->add_option("--replicates", cfg.replicates, "Monte Carlo replicates");
  sim->add_option("--subjects", cfg.n_subjects, "subjects per replicate");
  sim->add_option("--scenario", cfg.scenario,
                  "st-small | st-medium | st-large | sn");

  CLI::App* pred = app.add_subcommand("predict", "holdout forecast study");
  pred->add_option("input", cfg.input, "long-format CSV")->check(CLI::ExistingFile);
  add_common(pred, cfg, config_path);
  pred->add_option("--holdout", cfg.holdout, "max deleted points per subject");

  CLI::App* diag = app.add_subcommand("diagnose", "Healy and Q-Q plot data");
  diag->add_option("input", cfg.input, "long-format CSV")->check(CLI::ExistingFile);
  add_common(diag, cfg, config_path);

  // two passes so JSON values sit between defaults and explicit flags
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (!config_path.empty()) {
    smsn::RunConfig layered;
    try {
      apply_config_file(config_path, layered);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    // re-parse so command-line flags win over the file
    cfg = layered;
    app.clear();
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
  }
  cfg.command = app.get_subcommands().front()->get_name();
  return smsn::run(cfg);
}
