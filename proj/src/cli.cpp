#include "qflow/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "qflow/checkpoint.hpp"
#include "qflow/config.hpp"
#include "qflow/errors.hpp"
#include "qflow/report_io.hpp"

namespace qflow {

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

struct LoadedRun {
  RunConfig config;
  std::unique_ptr<TwinCritic> critic;
  std::unique_ptr<GaussianSourcePolicy> source;
  std::unique_ptr<VelocityField> field;
  long step = 0;
};

LoadedRun load_run_from_checkpoint(const std::string& dir) {
  CheckpointContents contents = load_checkpoint(dir);
  if (contents.config_text.empty())
    throw IoError("checkpoint " + dir + " carries no config snapshot");

  LoadedRun run;
  run.step = contents.step;
  run.config = parse_config_text(contents.config_text);
  run.config.finalize();

  auto need = [&contents, &dir](const char* key) -> MlpNetwork& {
    auto it = contents.fragments.find(key);
    if (it == contents.fragments.end())
      throw IoError("checkpoint " + dir + " is missing fragment '" + std::string(key) + "'");
    return it->second;
  };

  const TrainConfig& t = run.config.train;
  auto probe = make_env(t.env);
  const int state_dim = probe->observation_dim();
  const int action_dim = probe->action_dim();

  TwinCritic::Options critic_opt;
  critic_opt.hidden = t.critic_hidden;
  critic_opt.hidden_layers = t.critic_layers;
  critic_opt.discount = t.discount;
  critic_opt.learning_rate = t.learning_rate;
  critic_opt.bn_decay = t.bn_decay;
  critic_opt.bn_epsilon = t.bn_epsilon;
  run.critic = std::make_unique<TwinCritic>(std::move(need("critic.q1")), std::move(need("critic.q2")),
                                            state_dim, action_dim, critic_opt);

  GaussianSourcePolicy::Options policy_opt;
  policy_opt.hidden = t.policy_hidden;
  policy_opt.hidden_layers = t.policy_layers;
  policy_opt.learning_rate = t.learning_rate;
  run.source = std::make_unique<GaussianSourcePolicy>(std::move(need("policy.source")), action_dim,
                                                      policy_opt);

  VelocityField::Options field_opt;
  field_opt.hidden = t.flow_hidden;
  field_opt.hidden_layers = t.flow_layers;
  field_opt.learning_rate = t.learning_rate;
  run.field = std::make_unique<VelocityField>(std::move(need("policy.flow")), state_dim, action_dim,
                                              field_opt);
  return run;
}

void write_analysis_csv(const std::string& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

int analyze_variance(const RunConfig& config, const std::string& outdir) {
  const AnalysisConfig& a = config.analysis;
  const VarianceScalingResult result = variance_scaling_experiment(
      a.dims, a.sigma, a.chain_length, a.samples, config.train.seed, a.perturbation);

  std::vector<std::vector<double>> rows;
  double max_rel_error = 0.0;
  for (std::size_t i = 0; i < result.dims.size(); ++i) {
    const double rel =
        std::abs(result.empirical_variance[i] - result.theoretical[i]) / result.theoretical[i];
    max_rel_error = std::max(max_rel_error, rel);
    rows.push_back({static_cast<double>(result.dims[i]), result.empirical_variance[i],
                    result.theoretical[i], result.loglog_slope});
  }
  write_analysis_csv(outdir + "/variance.csv",
                     {"dim", "empirical_variance", "theoretical", "loglog_slope"}, rows);

  const bool slope_ok = result.loglog_slope >= -1.2 && result.loglog_slope <= -0.8;
  const bool error_ok = max_rel_error <= 0.20;
  nlohmann::json summary;
  summary["dims"] = result.dims;
  summary["empirical_variance"] = result.empirical_variance;
  summary["theoretical"] = result.theoretical;
  summary["loglog_slope"] = result.loglog_slope;
  summary["max_relative_error"] = max_rel_error;
  summary["slope_in_band"] = slope_ok;
  summary["within_20_percent"] = error_ok;
  summary["pass"] = slope_ok && error_ok;
  write_text_file(outdir + "/variance_summary.json", summary.dump(2) + "\n");

  std::cout << "variance: slope=" << format_double(result.loglog_slope)
            << " max_rel_error=" << format_double(max_rel_error)
            << (slope_ok && error_ok ? " pass" : " FAIL") << "\n";
  return 0;
}

int analyze_monotonicity(const RunConfig& config, const std::string& outdir,
                         const std::string& checkpoint_dir) {
  const AnalysisConfig& a = config.analysis;
  MonotonicityOptions options;
  options.grid_points = a.grid_points;
  options.states = a.states;
  options.samples_per_state = a.action_samples;
  options.ascent_steps = a.ascent_steps;
  options.eta = a.eta;
  options.critic_hidden = a.critic_hidden;
  options.critic_layers = a.critic_layers;

  MonotonicityResult result;
  if (a.monotonicity_mode == "quadratic") {
    result = monotonicity_quadratic(options, a.action_dim, a.quad_target, config.train.seed);
  } else if (a.monotonicity_mode == "random-net") {
    result = monotonicity_random_net(options, a.state_dim, a.action_dim, config.train.seed);
  } else {  // checkpoint
    if (checkpoint_dir.empty())
      throw ConfigError("analyze monotonicity: checkpoint mode requires --checkpoint");
    LoadedRun run = load_run_from_checkpoint(checkpoint_dir);
    const DenseArray probes =
        collect_probe_states(*run.source, *run.field, run.config.train.env, run.config.train.flow,
                             options.states, config.train.seed);
    Rng rng(Rng::derive(config.train.seed, 0xad7a));
    std::vector<double> grid(options.grid_points);
    for (int i = 0; i < options.grid_points; ++i)
      grid[i] = static_cast<double>(i) / (options.grid_points - 1);
    result.mode = "checkpoint";
    result.curve = advantage_curve(*run.critic, *run.source, probes, grid,
                                   options.samples_per_state, options.ascent_steps, options.eta, rng);
    result.tolerance.assign(grid.size(), 0.0);
    result.pass = true;
    for (std::size_t k = 1; k < grid.size(); ++k) {
      result.tolerance[k] = 2.0 * result.curve.increment_se[k];
      if (result.curve.f[k] < result.curve.f[k - 1] - result.tolerance[k]) result.pass = false;
    }
  }

  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < result.curve.t_grid.size(); ++k)
    rows.push_back({result.curve.t_grid[k], result.curve.f[k], result.tolerance[k]});
  write_analysis_csv(outdir + "/monotonicity.csv", {"t", "advantage", "tolerance"}, rows);

  nlohmann::json summary;
  summary["mode"] = result.mode;
  summary["t"] = result.curve.t_grid;
  summary["advantage"] = result.curve.f;
  summary["tolerance"] = result.tolerance;
  summary["pass"] = result.pass;
  write_text_file(outdir + "/monotonicity_summary.json", summary.dump(2) + "\n");

  if (config.train.emit_svg) {
    SvgSeries series;
    series.label = "F(t)";
    for (std::size_t k = 0; k < result.curve.t_grid.size(); ++k)
      series.points.emplace_back(result.curve.t_grid[k], result.curve.f[k]);
    write_svg_line_chart(outdir + "/monotonicity.svg", "advantage of the transported policy", "t",
                         "F(t)", {series});
  }

  std::cout << "monotonicity (" << result.mode << "): " << (result.pass ? "pass" : "FAIL") << "\n";
  return 0;
}

int analyze_correlation(const RunConfig& config, const std::string& outdir,
                        const std::string& checkpoint_dir) {
  if (checkpoint_dir.empty())
    throw ConfigError("analyze correlation requires --checkpoint <dir>");
  LoadedRun run = load_run_from_checkpoint(checkpoint_dir);

  const AnalysisConfig& a = config.analysis;
  const DenseArray probes =
      collect_probe_states(*run.source, *run.field, run.config.train.env, run.config.train.flow,
                           a.states_per_point, config.train.seed);
  const CorrelationResult result =
      correlation_experiment(*run.source, *run.field, run.config.train.flow, probes,
                             a.samples_per_state, config.train.seed);

  const int dim = result.correlation.rows();
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < dim; ++i) {
    std::vector<double> row;
    for (int j = 0; j < dim; ++j) row.push_back(result.correlation.at(i, j));
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header;
  for (int j = 0; j < dim; ++j) header.push_back("a" + std::to_string(j));
  write_analysis_csv(outdir + "/correlation.csv", header, rows);

  nlohmann::json summary;
  summary["per_dimension_std"] = result.per_dimension_std;
  summary["degenerate_dims"] = result.degenerate_dims;
  summary["min_eigenvalue"] = result.min_eigenvalue;
  summary["psd_within_tolerance"] = result.min_eigenvalue >= -1e-8;
  summary["pass"] = result.min_eigenvalue >= -1e-8;
  write_text_file(outdir + "/correlation_summary.json", summary.dump(2) + "\n");

  std::cout << "correlation: dims=" << dim
            << " min_eigenvalue=" << format_double(result.min_eigenvalue) << "\n";
  return 0;
}

}  // namespace

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides) {
  RunConfig config = load_run_config(config_path, overrides);
  const std::string snapshot = snapshot_text(config);

  std::filesystem::create_directories(config.train.outdir);
  write_text_file(config.train.outdir + "/config_resolved.txt", snapshot);
  config.train.resolved_config_text = snapshot;

  Trainer trainer(config.train);
  const TrainReport report = trainer.run();
  std::cout << "train: " << report.env_steps << " env steps, " << report.critic_updates
            << " updates";
  if (!report.records.empty())
    std::cout << ", final mean return " << format_double(report.records.back().mean_return);
  std::cout << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_dir, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("eval: episodes must be >= 1");
  LoadedRun run = load_run_from_checkpoint(checkpoint_dir);
  const EvalStats stats = evaluate(*run.source, *run.field, run.config.train.env,
                                   run.config.train.flow, episodes, seed);

  nlohmann::json summary;
  summary["checkpoint"] = checkpoint_dir;
  summary["step"] = run.step;
  summary["episodes"] = stats.episodes;
  summary["seed"] = seed;
  summary["mean_return"] = stats.mean;
  summary["std_return"] = stats.stddev;
  summary["min_return"] = stats.min;
  summary["max_return"] = stats.max;
  const std::string text = summary.dump(2) + "\n";
  write_text_file(checkpoint_dir + "/eval_ep" + std::to_string(episodes) + "_seed" +
                      std::to_string(seed) + ".json",
                  text);
  std::cout << text;
  return 0;
}

int cmd_analyze(const std::string& kind, const std::string& config_path,
                const std::vector<std::string>& overrides, const std::string& checkpoint_dir) {
  RunConfig config = load_run_config(config_path, overrides);
  const std::string outdir = config.train.outdir + "/analysis";
  std::filesystem::create_directories(outdir);
  write_text_file(config.train.outdir + "/config_resolved.txt", snapshot_text(config));

  if (kind == "variance") return analyze_variance(config, outdir);
  if (kind == "monotonicity") return analyze_monotonicity(config, outdir, checkpoint_dir);
  if (kind == "correlation") return analyze_correlation(config, outdir, checkpoint_dir);
  throw ConfigError("unknown analyze kind '" + kind + "' (valid: variance, monotonicity, correlation)");
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"flow-exploration reinforcement learning workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string checkpoint_dir;
  int episodes = 10;
  std::uint64_t seed = 0;
  std::string analyze_kind;

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--override", overrides, "key=value config overrides");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
  eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
  eval_cmd->add_option("--seed", seed, "evaluation seed");

  CLI::App* analyze = app.add_subcommand("analyze", "run an analysis experiment");
  analyze->add_option("kind", analyze_kind, "variance | monotonicity | correlation")->required();
  analyze->add_option("--config", config_path, "config file")->required();
  analyze->add_option("--override", overrides, "key=value config overrides");
  analyze->add_option("--checkpoint", checkpoint_dir, "checkpoint directory (correlation, monotonicity)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, overrides);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_dir, episodes, seed);
    if (analyze->parsed()) return cmd_analyze(analyze_kind, config_path, overrides, checkpoint_dir);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qflow
