// Copyright 2026 The gatekit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gatekit/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gatekit/harness.hpp"

namespace gatekit
{

namespace
{

namespace fs = std::filesystem;

/// Bad command-line values that parse but make no sense.
struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

void write_text(const std::string & path, const std::string & text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DataError("cannot write " + path);
  }
  out << text;
}

std::string read_text(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now()
{
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Globals
{
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::optional<std::string> preset;
  std::string supervisor{"off"};
};

HarnessConfig resolve_config(const Globals & g)
{
  HarnessConfig c;
  if (!g.config_path.empty()) {
    c = load_config(g.config_path, g.preset);
  } else if (g.preset) {
    c.train = TrainConfig::from_preset(*g.preset);
  }
  return c;
}

/// Scenes from a JSONL file; rejected lines are reported and count as
/// failures against the 10% budget.
std::vector<Scene> load_scenes(const std::string & path, const Horizons & hz, std::ostream & err)
{
  auto file = read_scenes(path, hz);
  for (const auto & r : file.rejected) {
    err << path << ":" << r.line << ": rejected: " << r.reason << "\n";
  }
  const auto total = file.scenes.size() + file.rejected.size();
  if (total == 0) {
    throw DataError(path + " contains no scenes");
  }
  if (static_cast<double>(file.rejected.size()) > 0.1 * static_cast<double>(total)) {
    throw DataError(std::to_string(file.rejected.size()) + " of " + std::to_string(total) +
      " scene lines rejected");
  }
  return std::move(file.scenes);
}

std::uint64_t feature_seed(const Globals & g)
{
  return g.seed.value_or(42);
}

}  // namespace

int run_cli(const std::vector<std::string> & args, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Per-scene trajectory expert selection benchmark", "gatekit"};
  app.require_subcommand(1);
  // Global flags may follow the subcommand.
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Seed for generation, training, or feature extraction");
  app.add_option("--config", g.config_path, "JSON config with generator/train/trigger/endpoint sections");
  app.add_option("--preset", g.preset, "Training hyperparameter preset")
  ->check(CLI::IsMember({"appendix-a", "main-text"}));
  app.add_option("--supervisor", g.supervisor, "Supervisor mode for eval")
  ->check(CLI::IsMember({"off", "rule", "llm"}));

  std::string out_path;
  auto * gen = app.add_subcommand("gen", "Generate scenes as JSONL");
  gen->add_option("--out", out_path, "Output JSONL")->required();

  std::string scenes_path;
  std::string features_path;
  std::string fde_path;
  auto * features = app.add_subcommand("features", "Meta-feature and per-expert FDE tables");
  features->add_option("--scenes", scenes_path, "Scene JSONL")->required();
  features->add_option("--features-out", features_path, "36-column feature CSV")->required();
  features->add_option("--fde-out", fde_path, "Per-expert FDE CSV")->required();

  std::string strategy_name;
  std::string checkpoint_path;
  auto * train_cmd = app.add_subcommand("train", "Train a gate from feature tables");
  train_cmd->add_option("--features", features_path, "Feature CSV")->required();
  train_cmd->add_option("--fde", fde_path, "Per-expert FDE CSV")->required();
  train_cmd->add_option("--strategy", strategy_name, "Gating strategy (default from config, else ranking)");
  train_cmd->add_option("--out", checkpoint_path, "Checkpoint JSON")->required();

  std::string report_path;
  std::string plots_dir;
  std::string audit_path;
  auto * eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on scenes");
  eval_cmd->add_option("--scenes", scenes_path, "Scene JSONL")->required();
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
  eval_cmd->add_option("--out", report_path, "Report JSON")->required();
  eval_cmd->add_option("--plots", plots_dir, "Directory for plot CSVs (default: next to the report)");
  eval_cmd->add_option("--audit", audit_path, "Supervisor audit JSONL (llm mode)");

  std::string csv_path;
  std::string md_path;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> arm_names;
  auto * ablate_cmd = app.add_subcommand("ablate", "Cross-fitted strategy comparison over seeds");
  ablate_cmd->add_option("--scenes", scenes_path, "Scene JSONL")->required();
  ablate_cmd->add_option("--csv", csv_path, "Ablation CSV")->required();
  ablate_cmd->add_option("--md", md_path, "Ablation markdown")->required();
  ablate_cmd->add_option("--seeds", seeds, "Training seeds (default from config: 42..46)")
  ->delimiter(',');
  ablate_cmd->add_option("--arms", arm_names, "Arms such as ranking, ranking+rule")->delimiter(',');

  std::string md_out;
  auto * report_cmd = app.add_subcommand("report", "Render a report JSON as markdown");
  report_cmd->add_option("--report", report_path, "Report JSON")->required();
  report_cmd->add_option("--out", md_out, "Markdown output (default: stdout)");

  std::vector<const char *> argv{"gatekit"};
  for (const auto & a : args) {
    argv.push_back(a.c_str());
  }
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError & e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const HarnessConfig config = resolve_config(g);
    const ExpertPool pool = ExpertPool::standard();

    if (gen->parsed()) {
      auto gc = config.generator;
      if (g.seed) {
        gc.seed = *g.seed;
      }
      const auto scenes = generate(gc);
      write_scenes(out_path, scenes);
      out << "wrote " << scenes.size() << " scenes to " << out_path << "\n";
      return kExitOk;
    }

    if (features->parsed()) {
      const auto scenes = load_scenes(scenes_path, config.features.horizons, err);
      std::vector<LineError> failures;
      const auto samples = compute_samples(scenes, pool, feature_seed(g), config.features,
          &failures);
      for (const auto & f : failures) {
        err << "quarantined scene " << f.line << ": " << f.reason << "\n";
      }
      if (static_cast<double>(failures.size()) > 0.1 * static_cast<double>(scenes.size())) {
        throw DataError(std::to_string(failures.size()) + " scenes failed feature extraction");
      }
      write_features_csv(features_path, samples);
      write_fde_csv(fde_path, samples);
      out << "wrote " << samples.size() << " rows to " << features_path << " and " << fde_path
          << "\n";
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      Strategy strategy = config.strategy;
      if (!strategy_name.empty()) {
        try {
          strategy = parse_strategy(strategy_name);
        } catch (const ContractError & e) {
          throw UsageError(e.what());
        }
      }
      auto tc = config.train;
      if (g.seed) {
        tc.seed = *g.seed;
      }
      const auto samples = read_feature_tables(features_path, fde_path);
      const auto model = train(strategy, training_samples(samples), tc);
      save_checkpoint(model, checkpoint_path);
      out << "trained " << to_string(strategy) << " on " << samples.size() << " rows";
      if (model.log.best_epoch >= 0) {
        out << " (" << model.log.best_epoch + 1 << " epochs)";
      }
      out << ", wrote " << checkpoint_path << "\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const auto model = load_checkpoint(checkpoint_path);
      const auto scenes = load_scenes(scenes_path, config.features.horizons, err);
      EvalOptions opts;
      opts.supervisor = parse_supervisor_mode(g.supervisor);
      opts.trigger = config.trigger;
      opts.endpoint = config.endpoint;
      opts.features = config.features;
      opts.seed = feature_seed(g);
      std::optional<AuditLog> audit;
      if (opts.supervisor == SupervisorMode::Llm) {
        if (config.endpoint.base_url.empty()) {
          throw UsageError("--supervisor llm needs endpoint.base_url in --config");
        }
        audit.emplace(audit_path.empty() ? report_path + ".audit.jsonl" : audit_path);
        opts.audit = &*audit;
      }
      auto report = evaluate(scenes, pool, model, opts);
      report.metadata["generated_at"] = utc_now();
      write_text(report_path, report_to_json(report));
      const fs::path dir = plots_dir.empty() ?
        fs::absolute(report_path).parent_path() : fs::path(plots_dir);
      fs::create_directories(dir);
      const auto stem = fs::path(report_path).stem().string();
      write_text((dir / (stem + "_slices.csv")).string(), slice_csv(slice_report(report)));
      write_text((dir / (stem + "_utilization.csv")).string(), utilization_csv(report));
      out << summary_table(report);
      return kExitOk;
    }

    if (ablate_cmd->parsed()) {
      const auto scenes = load_scenes(scenes_path, config.features.horizons, err);
      std::vector<LineError> failures;
      const auto samples = compute_samples(scenes, pool, feature_seed(g), config.features,
          &failures);
      if (!failures.empty()) {
        throw DataError(std::to_string(failures.size()) +
          " scenes failed feature extraction; ablation needs every scene");
      }
      AblationOptions opts;
      opts.train = config.train;
      opts.trigger = config.trigger;
      opts.seeds = seeds.empty() ? config.ablation_seeds : seeds;
      std::vector<AblationArm> arms = config.ablation_arms;
      if (!arm_names.empty()) {
        arms.clear();
        for (const auto & name : arm_names) {
          AblationArm arm;
          const auto plus = name.find('+');
          try {
            arm.strategy = parse_strategy(name.substr(0, plus));
            if (plus != std::string::npos) {
              arm.supervisor = parse_supervisor_mode(name.substr(plus + 1));
            }
          } catch (const ContractError & e) {
            throw UsageError(e.what());
          }
          if (arm.supervisor == SupervisorMode::Llm) {
            throw UsageError("ablation arms support the rule supervisor only");
          }
          arms.push_back(arm);
        }
      }
      if (arms.size() < 2) {
        throw UsageError("ablate needs at least 2 arms");
      }
      const auto rows = ablate(scenes, samples, arms, opts);
      write_text(csv_path, ablation_csv(rows));
      const auto md = ablation_markdown(rows);
      write_text(md_path, md);
      out << md;
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      const auto report = report_from_json(read_text(report_path));
      const auto md = report_markdown(report);
      if (md_out.empty()) {
        out << md;
      } else {
        write_text(md_out, md);
      }
      return kExitOk;
    }
  } catch (const UsageError & e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception & e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace gatekit
