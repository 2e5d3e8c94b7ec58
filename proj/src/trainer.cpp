#include "qflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "qflow/checkpoint.hpp"
#include "qflow/errors.hpp"
#include "qflow/report_io.hpp"

namespace qflow {

void TrainConfig::validate() const {
  if (parallel_envs < 1) throw ConfigError("train config: parallel_envs must be >= 1");
  if (total_env_steps < 1) throw ConfigError("train config: total_env_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (buffer_capacity < 1) throw ConfigError("train config: buffer_capacity must be >= 1");
  if (discount <= 0.0 || discount >= 1.0) throw ConfigError("train config: discount must lie in (0,1)");
  if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be positive");
  if (eval_every < 1) throw ConfigError("train config: eval_every must be >= 1");
  if (eval_episodes < 1) throw ConfigError("train config: eval_episodes must be >= 1");
  if (critic_hidden < 1 || policy_hidden < 1 || flow_hidden < 1 ||
      critic_layers < 1 || policy_layers < 1 || flow_layers < 1)
    throw ConfigError("train config: network sizes must be positive");
  flow.validate();
}

EvalStats evaluate(const GaussianSourcePolicy& source, const VelocityField& field,
                   const EnvConfig& env_config, const FlowConfig& flow_config, int episodes,
                   std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  auto env = make_env(env_config);
  Rng unused_rng(0);  // deterministic sampling never consumes randomness

  std::vector<double> returns;
  returns.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> obs = env->reset(Rng::derive(seed, static_cast<std::uint64_t>(ep)));
    double episode_return = 0.0;
    bool terminal = false;
    while (!terminal) {
      const DenseArray states = DenseArray::row_vector(obs);
      const DenseArray action =
          sample_flow_actions(field, source, states, flow_config, unused_rng, /*deterministic=*/true);
      StepResult result = env->step(action.row(0));
      episode_return += result.reward;
      obs = std::move(result.next_observation);
      terminal = result.terminal;
    }
    returns.push_back(episode_return);
  }

  EvalStats stats;
  stats.episodes = episodes;
  stats.min = returns[0];
  stats.max = returns[0];
  double sum = 0.0;
  for (double r : returns) {
    sum += r;
    stats.min = std::min(stats.min, r);
    stats.max = std::max(stats.max, r);
  }
  stats.mean = sum / episodes;
  double var = 0.0;
  for (double r : returns) var += (r - stats.mean) * (r - stats.mean);
  stats.stddev = std::sqrt(var / episodes);
  return stats;
}

double flow_superiority_ratio(const QFunction& critic, const GaussianSourcePolicy& source,
                              const VelocityField& field, const FlowConfig& flow_config,
                              const DenseArray& states, Rng& rng, bool shared_source) {
  if (states.rows() < 1) throw std::invalid_argument("flow_superiority_ratio: empty state batch");

  DenseArray source_actions;
  DenseArray flow_actions;
  if (shared_source) {
    source_actions = source.sample(states, rng);
    const VelocityFn fn = [&field](double t, const DenseArray& s, const DenseArray& a) {
      return field.evaluate(t, s, a);
    };
    flow_actions =
        integrate_flow(fn, states, source_actions, flow_config.ode_steps, flow_config.ode_dt);
  } else {
    source_actions = source.sample(states, rng);
    flow_actions = sample_flow_actions(field, source, states, flow_config, rng, /*deterministic=*/false);
  }

  const std::vector<double> q_flow = critic.q_values(states, flow_actions);
  const std::vector<double> q_source = critic.q_values(states, source_actions);
  int wins = 0;
  for (std::size_t i = 0; i < q_flow.size(); ++i)
    if (q_flow[i] > q_source[i]) ++wins;
  return static_cast<double>(wins) / static_cast<double>(states.rows());
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  auto probe = make_env(config_.env);
  state_dim_ = probe->observation_dim();
  action_dim_ = probe->action_dim();

  Rng init_rng(Rng::derive(config_.seed, 0));
  TwinCritic::Options critic_opt;
  critic_opt.hidden = config_.critic_hidden;
  critic_opt.hidden_layers = config_.critic_layers;
  critic_opt.discount = config_.discount;
  critic_opt.learning_rate = config_.learning_rate;
  critic_opt.bn_decay = config_.bn_decay;
  critic_opt.bn_epsilon = config_.bn_epsilon;
  critic_ = std::make_unique<TwinCritic>(state_dim_, action_dim_, critic_opt, init_rng);

  GaussianSourcePolicy::Options policy_opt;
  policy_opt.hidden = config_.policy_hidden;
  policy_opt.hidden_layers = config_.policy_layers;
  policy_opt.learning_rate = config_.learning_rate;
  source_ = std::make_unique<GaussianSourcePolicy>(state_dim_, action_dim_, policy_opt, init_rng);

  VelocityField::Options field_opt;
  field_opt.hidden = config_.flow_hidden;
  field_opt.hidden_layers = config_.flow_layers;
  field_opt.learning_rate = config_.learning_rate;
  field_ = std::make_unique<VelocityField>(state_dim_, action_dim_, field_opt, init_rng);
}

void Trainer::write_checkpoint(long step) const {
  if (config_.outdir.empty()) return;
  const std::string dir = config_.outdir + "/ckpt_" + std::to_string(step);
  save_checkpoint(dir, step,
                  {{"critic.q1", &critic_->q1()},
                   {"critic.q2", &critic_->q2()},
                   {"policy.source", &source_->trunk()},
                   {"policy.flow", &field_->net()}},
                  config_.resolved_config_text);
}

TrainReport Trainer::run() {
  const int parallel = config_.parallel_envs;
  const bool flow_mode = config_.exploration_mode == ExplorationMode::kFlow;

  std::vector<std::unique_ptr<Env>> envs;
  std::vector<long> episode_counts(parallel, 0);
  DenseArray states(parallel, state_dim_);
  for (int i = 0; i < parallel; ++i) {
    envs.push_back(make_env(config_.env));
    const auto obs =
        envs.back()->reset(Rng::derive(Rng::derive(config_.seed, 100 + i), 0));
    std::copy(obs.begin(), obs.end(), states.row(i).begin());
  }

  ReplayBuffer buffer(state_dim_, action_dim_, config_.buffer_capacity, config_.warmup_transitions);
  Rng rollout_rng(Rng::derive(config_.seed, 1));
  Rng update_rng(Rng::derive(config_.seed, 2));
  Rng ratio_rng(Rng::derive(config_.seed, 3));
  const std::uint64_t eval_seed = Rng::derive(config_.seed, 7);

  MetricsCsvWriter csv;
  if (!config_.outdir.empty()) {
    std::filesystem::create_directories(config_.outdir);
    csv.open(config_.outdir + "/metrics.csv");
  }

  TrainReport report;
  ClampStats clamp_window;
  double critic_loss_sum = 0.0, actor_loss_sum = 0.0, flow_loss_sum = 0.0;
  long loss_count = 0;
  long next_log_at = config_.eval_every;
  double pending_value_gain = 0.0;
  bool pending_value_gain_valid = false;

  const auto wall_start = std::chrono::steady_clock::now();

  while (report.env_steps < config_.total_env_steps) {
    const bool log_this_iteration = report.env_steps + parallel >= next_log_at ||
                                    report.env_steps + parallel >= config_.total_env_steps;

    // --- synchronous rollout over all envs ---
    DenseArray actions;
    if (flow_mode) {
      actions = sample_flow_actions(*field_, *source_, states, config_.flow, rollout_rng,
                                    /*deterministic=*/false, &clamp_window);
      report.actions_flow += parallel;
    } else {
      actions = source_->sample(states, rollout_rng);
      report.actions_gaussian += parallel;
    }

    for (int i = 0; i < parallel; ++i) {
      StepResult result = envs[i]->step(actions.row(i));
      Transition t;
      const auto srow = states.row(i);
      t.state.assign(srow.begin(), srow.end());
      const auto arow = actions.row(i);
      t.action.assign(arow.begin(), arow.end());
      t.reward = result.reward;
      t.next_state = result.next_observation;
      t.terminal = result.terminal;
      buffer.push(t);
      report.transitions_pushed += 1;

      if (result.terminal) {
        episode_counts[i] += 1;
        const auto obs = envs[i]->reset(
            Rng::derive(Rng::derive(config_.seed, 100 + i), static_cast<std::uint64_t>(episode_counts[i])));
        std::copy(obs.begin(), obs.end(), states.row(i).begin());
      } else {
        std::copy(result.next_observation.begin(), result.next_observation.end(),
                  states.row(i).begin());
      }
    }
    report.env_steps += parallel;

    // --- one update triple per parallel sampling step once warm ---
    if (buffer.warmup_met()) {
      try {
        TransitionBatch batch = buffer.sample(config_.batch_size, update_rng);

        DenseArray next_actions;
        if (flow_mode) {
          next_actions = sample_flow_actions(*field_, *source_, batch.next_states, config_.flow,
                                             update_rng, /*deterministic=*/false);
        } else {
          next_actions = source_->sample(batch.next_states, update_rng);
        }
        const double critic_loss = critic_->update(batch, next_actions);
        report.critic_updates += 1;

        const double actor_loss = source_->update(*critic_, batch.states, update_rng);
        report.actor_updates += 1;

        double flow_loss = 0.0;
        if (flow_mode) {
          AscentTargets targets = construct_targets(*critic_, *source_, batch.states,
                                                    config_.flow.ascent_steps, config_.flow.eta,
                                                    update_rng,
                                                    /*compute_value_gain=*/log_this_iteration);
          flow_loss = field_->cfm_update(batch.states, targets.a0, targets.a1, update_rng);
          report.flow_updates += 1;
          if (targets.value_gain_valid) {
            pending_value_gain = targets.value_gain;
            pending_value_gain_valid = true;
          }
        }

        critic_loss_sum += critic_loss;
        actor_loss_sum += actor_loss;
        flow_loss_sum += flow_loss;
        loss_count += 1;
      } catch (const NumericError&) {
        // halt with a diagnostic snapshot of the networks at the failure
        if (!config_.outdir.empty()) {
          const std::string dir =
              config_.outdir + "/ckpt_diagnostic_" + std::to_string(report.env_steps);
          save_checkpoint(dir, report.env_steps,
                          {{"critic.q1", &critic_->q1()},
                           {"critic.q2", &critic_->q2()},
                           {"policy.source", &source_->trunk()},
                           {"policy.flow", &field_->net()}},
                          config_.resolved_config_text);
        }
        throw;
      }
    }

    // --- logging, evaluation, checkpoint ---
    if (log_this_iteration) {
      TrainRecord record;
      record.env_steps = report.env_steps;

      const EvalStats eval = evaluate(*source_, *field_, config_.env, config_.flow,
                                      config_.eval_episodes, eval_seed);
      record.mean_return = eval.mean;
      record.std_return = eval.stddev;

      if (loss_count > 0) {
        record.critic_loss = critic_loss_sum / loss_count;
        record.actor_loss = actor_loss_sum / loss_count;
        record.flow_loss = flow_loss_sum / loss_count;
      }
      critic_loss_sum = actor_loss_sum = flow_loss_sum = 0.0;
      loss_count = 0;

      if (buffer.size() >= static_cast<std::size_t>(config_.batch_size) && buffer.warmup_met()) {
        TransitionBatch ratio_batch = buffer.sample(config_.batch_size, ratio_rng);
        record.superiority_ratio =
            flow_superiority_ratio(*critic_, *source_, *field_, config_.flow, ratio_batch.states,
                                   ratio_rng, config_.superiority_shared_source);
      } else {
        record.superiority_ratio = flow_superiority_ratio(*critic_, *source_, *field_, config_.flow,
                                                          states, ratio_rng,
                                                          config_.superiority_shared_source);
      }

      record.clamp_rate = clamp_window.rate();
      clamp_window = ClampStats{};

      record.value_gain = pending_value_gain;
      record.value_gain_valid = pending_value_gain_valid;
      pending_value_gain = 0.0;
      pending_value_gain_valid = false;

      record.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

      report.records.push_back(record);
      if (csv.is_open()) csv.append(record);
      write_checkpoint(report.env_steps);
      while (next_log_at <= report.env_steps) next_log_at += config_.eval_every;
    }
  }

  if (!config_.outdir.empty()) {
    write_train_summary_json(config_.outdir + "/train_summary.json", report, config_);
    if (config_.emit_svg) {
      SvgSeries series;
      series.label = "mean_return";
      for (const auto& r : report.records)
        series.points.emplace_back(static_cast<double>(r.env_steps), r.mean_return);
      write_svg_line_chart(config_.outdir + "/learning_curve.svg", "evaluation return", "env_steps",
                           "mean_return", {series});
    }
  }
  return report;
}

}  // namespace qflow
