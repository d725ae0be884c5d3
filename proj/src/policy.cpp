#include "dualmc/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>

#include "dualmc/error.hpp"

namespace dualmc {

std::vector<double> ObservationState::features() const {
  std::vector<double> x;
  x.reserve(input_size());
  for (auto v : symptoms) x.push_back(static_cast<double>(v));
  x.insert(x.end(), confidence.begin(), confidence.end());
  return x;
}

std::size_t ActionMask::enabled_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

std::vector<double> masked_distribution(std::span<const double> logits, const ActionMask& mask) {
  if (logits.size() != mask.size()) throw LengthMismatch("logits and mask lengths differ");
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask.bits[i]) hi = std::max(hi, logits[i]);
  if (hi == -std::numeric_limits<double>::infinity()) throw AllMasked("no enabled action");
  std::vector<double> p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask.bits[i]) total += (p[i] = std::exp(logits[i] - hi));
  for (double& x : p) x /= total;
  return p;
}

std::size_t sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  if (last == probs.size()) throw AllMasked("sampling from an all-zero distribution");
  return last;
}

PolicyNet::PolicyNet(std::size_t m, std::size_t n, const PolicyConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> actor_sizes{m + n};
  actor_sizes.insert(actor_sizes.end(), config.actor_hidden.begin(), config.actor_hidden.end());
  actor_sizes.push_back(m + 1);
  std::vector<std::size_t> critic_sizes{m + n};
  critic_sizes.insert(critic_sizes.end(), config.critic_hidden.begin(), config.critic_hidden.end());
  critic_sizes.push_back(1);
  actor_ = Mlp(actor_sizes, 0.01, rng);
  critic_ = Mlp(critic_sizes, 1.0, rng);
}

PolicyNet::PolicyNet(Mlp actor, Mlp critic) : actor_(std::move(actor)), critic_(std::move(critic)) {
  if (actor_.input_size() != critic_.input_size() || critic_.output_size() != 1 ||
      actor_.output_size() < 1)
    throw ComponentShapeMismatch("actor and critic shapes are inconsistent");
}

namespace {

RowMatrix as_row(const ObservationState& s) {
  const auto x = s.features();
  return Eigen::Map<const RowMatrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
}

}  // namespace

std::vector<double> PolicyNet::logits(const ObservationState& s) const {
  const RowMatrix out = actor_.forward(as_row(s));
  return {out.data(), out.data() + out.size()};
}

double PolicyNet::value(const ObservationState& s) const { return critic_.forward(as_row(s))(0, 0); }

std::vector<double> PolicyNet::action_probs(const ObservationState& s, const ActionMask& mask) const {
  return masked_distribution(logits(s), mask);
}

namespace {

void write_mlp(std::ostream& out, const Mlp& mlp) {
  out << mlp.sizes().size();
  for (auto s : mlp.sizes()) out << ' ' << s;
  out << '\n';
  for (std::size_t i = 0; i < mlp.params().size(); ++i)
    out << (i ? " " : "") << mlp.params()[i];
  out << '\n';
}

Mlp read_mlp(std::istream& in, const std::string& src) {
  std::size_t count = 0;
  if (!(in >> count) || count < 2) throw ParseError(src, 0, "bad layer header");
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes)
    if (!(in >> s)) throw ParseError(src, 0, "bad layer size");
  std::mt19937_64 rng(0);
  Mlp mlp(sizes, 1.0, rng);
  for (double& p : mlp.params())
    if (!(in >> p)) throw ParseError(src, 0, "truncated weights");
  return mlp;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const PolicyNet& net) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(17) << "dualmc-policy 1\n";
  write_mlp(out, net.actor());
  write_mlp(out, net.critic());
}

PolicyNet load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "dualmc-policy" || version != 1)
    throw ParseError(path.string(), 1, "not a policy checkpoint");
  Mlp actor = read_mlp(in, path.string());
  Mlp critic = read_mlp(in, path.string());
  return PolicyNet(std::move(actor), std::move(critic));
}

std::set<std::size_t> sample_candidates(const PolicyNet& net, const ObservationState& state,
                                        const ActionMask& mask, std::size_t draws, std::mt19937_64& rng) {
  if (draws == 0) throw InvalidConfig("candidate draws must be >= 1");
  const auto probs = net.action_probs(state, mask);
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < draws; ++i) out.insert(sample_index(probs, rng));
  return out;
}

AdvantageEstimate gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const bool> dones, double gamma, double lambda) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw LengthMismatch("rewards, values and dones must have equal length");
  const std::size_t t_max = rewards.size();
  AdvantageEstimate out{std::vector<double>(t_max), std::vector<double>(t_max)};
  double running = 0.0;
  for (std::size_t t = t_max; t-- > 0;) {
    const double next_value = (dones[t] || t + 1 == t_max) ? 0.0 : values[t + 1];
    const double carry = dones[t] ? 0.0 : running;
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + gamma * lambda * carry;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

PpoLoss ppo_loss(const PolicyNet& net, const PpoBatch& batch, const PpoConfig& config,
                 std::vector<double>* grad) {
  const std::size_t b = batch.items.size();
  if (b == 0) throw EmptyRollout("empty minibatch");
  const auto in = static_cast<Eigen::Index>(net.input_size());
  const auto actions = static_cast<Eigen::Index>(net.action_count());

  RowMatrix x(static_cast<Eigen::Index>(b), in);
  for (std::size_t i = 0; i < b; ++i) {
    const auto f = batch.items[i]->state.features();
    if (static_cast<Eigen::Index>(f.size()) != in) throw LengthMismatch("observation width mismatch");
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(f.data(), in);
  }

  Mlp::Tape actor_tape, critic_tape;
  const RowMatrix logits = net.actor().forward(x, grad ? &actor_tape : nullptr);
  const RowMatrix values = net.critic().forward(x, grad ? &critic_tape : nullptr);

  RowMatrix d_logits = RowMatrix::Zero(static_cast<Eigen::Index>(b), actions);
  RowMatrix d_values = RowMatrix::Zero(static_cast<Eigen::Index>(b), 1);
  const double inv_b = 1.0 / static_cast<double>(b);
  PpoLoss loss;
  std::size_t clipped = 0;

  for (std::size_t i = 0; i < b; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const Transition& tr = *batch.items[i];
    std::vector<double> lrow(static_cast<std::size_t>(actions));
    for (Eigen::Index a = 0; a < actions; ++a) lrow[static_cast<std::size_t>(a)] = logits(row, a);
    const auto p = masked_distribution(lrow, tr.mask);
    if (p[tr.action] <= 0.0) throw DisabledAction("transition action is masked out");

    const double logp = std::log(p[tr.action]);
    const double ratio = std::exp(logp - tr.log_prob);
    const double adv = batch.advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - config.clip_range, 1.0 + config.clip_range);
    const double surr1 = ratio * adv;
    const double surr2 = clipped_ratio * adv;
    loss.policy -= std::min(surr1, surr2) * inv_b;
    if (std::abs(ratio - 1.0) > config.clip_range) ++clipped;

    double entropy = 0.0;
    for (double q : p)
      if (q > 0.0) entropy -= q * std::log(q);
    loss.entropy += entropy * inv_b;

    const double err = values(row, 0) - batch.returns[i];
    loss.value += err * err * inv_b;

    if (grad) {
      // The unclipped branch is active when it attains the minimum.
      const double g_logp = (surr1 <= surr2) ? -adv * ratio * inv_b : 0.0;
      for (Eigen::Index a = 0; a < actions; ++a) {
        const double q = p[static_cast<std::size_t>(a)];
        if (q <= 0.0) continue;
        const double onehot = (static_cast<std::size_t>(a) == tr.action) ? 1.0 : 0.0;
        d_logits(row, a) = g_logp * (onehot - q) +
                           config.entropy_coef * inv_b * q * (std::log(q) + entropy);
      }
      d_values(row, 0) = config.value_coef * 2.0 * err * inv_b;
    }
  }
  loss.clip_fraction = static_cast<double>(clipped) * inv_b;
  loss.total = loss.policy - config.entropy_coef * loss.entropy + config.value_coef * loss.value;

  if (grad) {
    grad->assign(net.param_count(), 0.0);
    const std::size_t na = net.actor().param_count();
    net.actor().backward(actor_tape, d_logits, std::span<double>(grad->data(), na));
    net.critic().backward(critic_tape, d_values,
                          std::span<double>(grad->data() + na, net.critic().param_count()));
  }
  return loss;
}

PpoTrainer::PpoTrainer(PpoConfig config, std::uint64_t seed)
    : config_(config), adam_(config.learning_rate), rng_(seed) {
  if (config_.batch_size == 0) throw InvalidConfig("PPO batch size must be positive");
}

PpoDiagnostics PpoTrainer::update(PolicyNet& net, std::span<const Transition> transitions) {
  if (transitions.empty()) throw EmptyRollout("no transitions to learn from");
  if (!transitions.back().done) throw EmptyRollout("rollout does not end with a complete episode");

  const std::size_t t_max = transitions.size();
  std::vector<double> rewards(t_max), values(t_max);
  std::unique_ptr<bool[]> dones(new bool[t_max]);
  PpoDiagnostics diag;
  diag.transitions = t_max;
  double episode_return = 0.0, return_sum = 0.0;
  for (std::size_t t = 0; t < t_max; ++t) {
    rewards[t] = transitions[t].reward;
    values[t] = transitions[t].value;
    dones[t] = transitions[t].done;
    episode_return += rewards[t];
    if (dones[t]) {
      return_sum += episode_return;
      episode_return = 0.0;
      ++diag.episodes;
    }
  }
  diag.mean_reward = return_sum / static_cast<double>(diag.episodes);
  const auto est = gae(rewards, values, std::span<const bool>(dones.get(), t_max), config_.gamma,
                       config_.gae_lambda);

  std::vector<std::size_t> order(t_max);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  std::vector<double> flat(net.param_count());
  std::size_t minibatches = 0;

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start < t_max; start += config_.batch_size) {
      const std::size_t stop = std::min(t_max, start + config_.batch_size);
      PpoBatch batch;
      for (std::size_t k = start; k < stop; ++k) {
        batch.items.push_back(&transitions[order[k]]);
        batch.advantages.push_back(est.advantages[order[k]]);
        batch.returns.push_back(est.returns[order[k]]);
      }
      if (config_.normalize_advantage && batch.advantages.size() > 1) {
        const double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) /
                            static_cast<double>(batch.advantages.size());
        double var = 0.0;
        for (double a : batch.advantages) var += (a - mean) * (a - mean);
        const double sd = std::sqrt(var / static_cast<double>(batch.advantages.size() - 1));
        for (double& a : batch.advantages) a = (a - mean) / (sd + 1e-8);
      }
      const auto loss = ppo_loss(net, batch, config_, &grad);
      clip_grad_norm(grad, config_.max_grad_norm);

      auto& actor = net.actor().params();
      auto& critic = net.critic().params();
      std::copy(actor.begin(), actor.end(), flat.begin());
      std::copy(critic.begin(), critic.end(), flat.begin() + static_cast<std::ptrdiff_t>(actor.size()));
      adam_.step(flat, grad);
      std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(actor.size()), actor.begin());
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(actor.size()), flat.end(), critic.begin());

      diag.policy_loss += loss.policy;
      diag.value_loss += loss.value;
      diag.entropy += loss.entropy;
      diag.clip_fraction += loss.clip_fraction;
      ++minibatches;
    }
  }
  const double inv = 1.0 / static_cast<double>(minibatches);
  diag.policy_loss *= inv;
  diag.value_loss *= inv;
  diag.entropy *= inv;
  diag.clip_fraction *= inv;
  return diag;
}

}  // namespace dualmc
