#include "pcflow/rl_nft.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace pcflow {

std::vector<VideoTensor> rollout_group(const GeneratorNet& net, const GeneratorParams& reference,
                                       const ConditionSequence& cond, int n,
                                       std::uint64_t base_seed, int sample_steps) {
  if (n < 2) throw std::invalid_argument("rollout_group: N must be >= 2");
  std::vector<VideoTensor> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[std::size_t(i)] = sample_video(net, reference, cond, base_seed + std::uint64_t(i),
                                       sample_steps);
  return out;
}

LossAndGrad nft_loss_and_grad(const GeneratorNet& net, const GeneratorParams& current,
                              const GeneratorParams& reference,
                              const std::vector<NftSample>& samples, double beta, Rng& stream) {
  if (samples.empty()) throw std::invalid_argument("nft_loss_and_grad: empty batch");
  LossAndGrad out;
  out.grad.assign(current.values.size(), 0.0);
  const double inv_b = 1.0 / double(samples.size());

  for (const NftSample& s : samples) {
    if (!(s.reward >= 0.0 && s.reward <= 1.0))
      throw std::invalid_argument("nft_loss_and_grad: reward outside [0,1]");
    const double t = stream.uniform(0.05, 0.95);
    nn::Batch noise = draw_noise(net.config(), stream);
    const nn::Batch x0 = net.video_to_batch(*s.x0);
    nn::Batch x_t(x0.n, x0.shape);
    for (std::size_t i = 0; i < x0.v.size(); ++i)
      x_t.v[i] = (1.0 - t) * noise.v[i] + t * x0.v[i];

    nn::Sequential::Trace trace;
    const nn::Batch v_cur = net.forward_trace(current, x_t, t, *s.cond, trace);
    const nn::Batch v_ref = net.forward(reference, x_t, t, *s.cond);

    // loss_i = r*||v_cur - v||^2 + (1-r)*||v_neg - v||^2,
    // v_neg = (1+beta)*v_ref - beta*v_cur  =>  d v_neg / d v_cur = -beta.
    const double r = s.reward;
    nn::Batch seed(v_cur.n, v_cur.shape);
    double item_loss = 0.0;
    for (std::size_t i = 0; i < v_cur.v.size(); ++i) {
      const double v = x0.v[i] - noise.v[i];
      const double d_pos = v_cur.v[i] - v;
      const double v_neg = (1.0 + beta) * v_ref.v[i] - beta * v_cur.v[i];
      const double d_neg = v_neg - v;
      item_loss += r * d_pos * d_pos + (1.0 - r) * d_neg * d_neg;
      seed.v[i] = inv_b * (2.0 * r * d_pos - 2.0 * beta * (1.0 - r) * d_neg);
    }
    out.loss += item_loss * inv_b;
    net.backward(current, trace, seed, out.grad.data());
  }
  return out;
}

void ema_update(GeneratorParams& reference, const GeneratorParams& current, double alpha) {
  if (reference.values.size() != current.values.size())
    throw std::invalid_argument("ema_update: shape mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ema_update: alpha must be in [0,1]");
  for (std::size_t i = 0; i < reference.values.size(); ++i)
    reference.values[i] =
        float(alpha * double(reference.values[i]) + (1.0 - alpha) * double(current.values[i]));
}

RlResult rl_train(const GeneratorNet& net, const GeneratorParams& sft,
                  const std::vector<OODCondition>& conditions, const PairwiseModel& pref_model,
                  const PreferenceParams& prefs, const RlConfig& config,
                  const std::filesystem::path& out_dir) {
  if (conditions.empty()) throw std::invalid_argument("rl_train: no conditions");
  std::filesystem::create_directories(out_dir);
  if (config.dump_rewards) std::filesystem::create_directories(out_dir / "rewards");

  RlResult result;
  std::vector<const OODCondition*> active;
  for (const OODCondition& c : conditions) {
    if (c.units.empty()) {
      result.dropped_conditions.push_back(c.name + ": reward-free condition (no units)");
      continue;
    }
    active.push_back(&c);
  }
  if (active.empty()) throw std::invalid_argument("rl_train: every condition is reward-free");

  // Frozen SFT baseline videos at the shared eval seed, one per condition.
  std::vector<VideoTensor> baselines(active.size());
  for (std::size_t ci = 0; ci < active.size(); ++ci)
    baselines[ci] = sample_video(net, sft, active[ci]->cond, config.eval_seed,
                                 config.sample_steps);

  PolicyPair policy{sft, sft, config.ema_alpha, config.beta};
  nn::AdamConfig ac;
  ac.lr = config.lr;
  nn::Adam adam(policy.current.values.size(), ac);

  Rng master = Rng(config.seed).fork("rl");
  Rng pick_rng = master.fork("conditions");
  Rng noise_rng = master.fork("nft-noise");

  auto evaluate = [&](int step) {
    std::vector<double> row;
    row.push_back(double(step));
    double sum = 0.0;
    for (std::size_t ci = 0; ci < active.size(); ++ci) {
      const VideoTensor rl_video = sample_video(net, policy.current, active[ci]->cond,
                                                config.eval_seed, config.sample_steps);
      const double e = eval_score(rl_video, baselines[ci], active[ci]->units,
                                  active[ci]->first_frame, pref_model, prefs);
      row.push_back(e);
      sum += e;
    }
    row.push_back(sum / double(active.size()));
    result.eval_rows.push_back(std::move(row));
  };

  for (int step = 0; step < config.steps; ++step) {
    if (step % config.eval_every == 0) evaluate(step);

    const std::size_t ci = pick_rng.below(std::uint32_t(active.size()));
    const OODCondition& cond = *active[ci];
    // Rollout seeds never collide with the eval seed.
    const std::uint64_t base_seed =
        config.eval_seed + 1 + std::uint64_t(step) * std::uint64_t(config.group_size);
    const std::vector<VideoTensor> group =
        rollout_group(net, policy.reference, cond.cond, config.group_size, base_seed,
                      config.sample_steps);

    RewardBreakdown breakdown;
    const std::vector<double> rewards =
        video_rewards(group, cond.units, cond.first_frame, pref_model, prefs, config.tau,
                      config.dump_rewards ? &breakdown : nullptr);

    std::vector<NftSample> samples(group.size());
    for (std::size_t i = 0; i < group.size(); ++i)
      samples[i] = {&group[i], &cond.cond, rewards[i]};
    const LossAndGrad lg =
        nft_loss_and_grad(net, policy.current, policy.reference, samples, policy.beta, noise_rng);
    if (!std::isfinite(lg.loss)) throw std::runtime_error("rl_train: non-finite loss");
    adam.step(policy.current.values, lg.grad);
    ema_update(policy.reference, policy.current, policy.ema_alpha);

    if (config.dump_rewards) {
      nlohmann::json j = reward_dump_json(breakdown);
      j["step"] = step;
      j["condition"] = cond.name;
      j["loss"] = lg.loss;
      char name[64];
      std::snprintf(name, sizeof name, "step_%05d.json", step);
      std::ofstream out(out_dir / "rewards" / name);
      out << j.dump() << "\n";
    }
  }
  evaluate(config.steps);
  result.params = std::move(policy.current);
  return result;
}

void write_eval_csv(const std::filesystem::path& path, const std::vector<OODCondition>& conditions,
                    const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << "step";
  for (const OODCondition& c : conditions)
    if (!c.units.empty()) out << ",E_" << c.name;
  out << ",overall\n";
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == 0) {
        std::snprintf(buf, sizeof buf, "%d", int(row[0]));
      } else {
        std::snprintf(buf, sizeof buf, ",%.17g", row[i]);
      }
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace pcflow
