#include "mfsim/ibtune.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace mfsim {

namespace {

constexpr double kNormTol = 1e-12;

bool in_range(int v, std::size_t n) { return v >= 0 && static_cast<std::size_t>(v) < n; }

std::size_t x_index(const ToyModelParams& p, const IBTriple& t) {
  return static_cast<std::size_t>(t.m_prev) * p.actions + static_cast<std::size_t>(t.majority);
}

void require_same(const ToyModelParams& a, const ToyModelParams& b, const char* what) {
  if (!a.same_alphabets(b)) throw ArgumentError(std::string("alphabet mismatch between models: ") + what);
}

// softmax of every mean-field row: [X][m].
std::vector<double> meanfield_probs(const ToyModelParams& mf) {
  std::vector<double> out(mf.meanfield_logits.size());
  for (std::size_t x = 0; x < mf.conditions(); ++x) {
    const auto row = tempered_softmax(mf.meanfield_row(x / mf.actions, x % mf.actions), 1.0);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(x * mf.mean_fields));
  }
  return out;
}

std::vector<double> meanfield_logprobs(const ToyModelParams& mf) {
  std::vector<double> out(mf.meanfield_logits.size());
  for (std::size_t x = 0; x < mf.conditions(); ++x) {
    const auto row = log_softmax(mf.meanfield_row(x / mf.actions, x % mf.actions));
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(x * mf.mean_fields));
  }
  return out;
}

// log softmax of every policy row: [s][m][a].
std::vector<double> policy_logprobs(const ToyModelParams& policy) {
  std::vector<double> out(policy.policy_logits.size());
  for (std::size_t s = 0; s < policy.states; ++s) {
    for (std::size_t m = 0; m < policy.mean_fields; ++m) {
      const auto row = log_softmax(policy.policy_row(s, m));
      std::copy(row.begin(), row.end(),
                out.begin() + static_cast<std::ptrdiff_t>(policy.policy_index(s, m, 0)));
    }
  }
  return out;
}

// Triple indices grouped by key, each group in batch order. Both the serial and the parallel
// kernels sum a group in this order, so their results agree bit for bit.
template <class Key>
std::vector<std::vector<std::size_t>> group_by(const IBBatch& batch, std::size_t groups, Key key) {
  std::vector<std::vector<std::size_t>> out(groups);
  for (std::size_t i = 0; i < batch.triples.size(); ++i) out[key(batch.triples[i])].push_back(i);
  return out;
}

void check_batch_models(const ToyModelParams& mf, const ToyModelParams& prior,
                        const ToyModelParams& policy, const IBBatch& batch) {
  require_same(mf, prior, "mean field vs prior");
  require_same(mf, policy, "mean field vs policy");
  batch.validate(mf);
}

}  // namespace

void IBBatch::validate(const ToyModelParams& model) const {
  if (triples.empty()) throw ArgumentError("IB batch is empty");
  if (!(kl_weight > 0.0) || !std::isfinite(kl_weight)) throw ArgumentError("IB batch kl_weight must be positive");
  double total = 0.0;
  for (const auto& t : triples) {
    if (!(t.weight > 0.0) || !std::isfinite(t.weight)) throw ArgumentError("IB batch weights must be positive");
    if (!in_range(t.m_prev, model.mean_fields) || !in_range(t.majority, model.actions) ||
        !in_range(t.state, model.states) || !in_range(t.action, model.actions)) {
      throw ArgumentError("IB triple symbol outside the model alphabets");
    }
    total += t.weight;
  }
  if (std::abs(total - 1.0) > kNormTol) {
    throw ArgumentError("IB batch weights sum to " + std::to_string(total) + ", not 1");
  }
}

std::vector<double> IBBatch::x_distribution(std::size_t mean_fields, std::size_t actions) const {
  std::vector<double> px(mean_fields * actions, 0.0);
  for (const auto& t : triples) {
    if (!in_range(t.m_prev, mean_fields) || !in_range(t.majority, actions)) {
      throw ArgumentError("IB triple symbol outside the alphabets");
    }
    px[static_cast<std::size_t>(t.m_prev) * actions + static_cast<std::size_t>(t.majority)] += t.weight;
  }
  return px;
}

void IBHyper::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("beta must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be positive");
  }
  if (!(init_scale >= 0.0)) throw ArgumentError("init_scale must be non-negative");
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (mean_fields < 1) throw ArgumentError("mean_fields must be >= 1");
}

ToyDataset toy_dataset(const Corpus& corpus, std::size_t batch_size) {
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  ToyDataset data;
  int max_state = -1;
  int max_action = -1;
  for (const auto& event : corpus.events) {
    ToyEvent te;
    const std::size_t steps = step_count(event, batch_size);
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<int> states;
      std::vector<int> actions;
      for (const auto& entry : step_block(event, t, batch_size)) {
        const auto s = toy::parse_state(entry.profile);
        const auto a = toy::parse_action(entry.action.text);
        if (!s || !a) {
          throw ArgumentError("event " + event.event_id + " is not a toy event (step " +
                              std::to_string(t) + ")");
        }
        states.push_back(*s);
        actions.push_back(*a);
        max_state = std::max(max_state, *s);
        max_action = std::max(max_action, *a);
      }
      te.states.push_back(std::move(states));
      te.actions.push_back(std::move(actions));
    }
    data.events.push_back(std::move(te));
  }
  data.states = static_cast<std::size_t>(max_state + 1);
  data.actions = static_cast<std::size_t>(max_action + 1);
  for (auto& te : data.events) {
    for (const auto& acts : te.actions) te.majority.push_back(majority_symbol(acts, data.actions));
  }
  return data;
}

IBBatch build_ib_batch(const ToyDataset& data, const ToyModelParams& mf) {
  if (data.states > mf.states || data.actions > mf.actions) {
    throw ArgumentError("dataset alphabets exceed the model's");
  }
  const std::size_t M = mf.mean_fields;
  const std::size_t A = mf.actions;
  const std::size_t S = mf.states;
  const auto Q = meanfield_probs(mf);
  // Dense accumulation keyed by (m_prev, majority, state, action).
  std::vector<double> table(M * A * S * A, 0.0);
  double total = 0.0;
  double steps = 0.0;
  std::vector<double> rho(M);
  std::vector<double> next(M);
  for (const auto& ev : data.events) {
    std::fill(rho.begin(), rho.end(), 0.0);
    rho[0] = 1.0;
    for (std::size_t t = 1; t < ev.actions.size(); ++t) {
      const auto maj = static_cast<std::size_t>(ev.majority[t - 1]);
      for (std::size_t i = 0; i < ev.actions[t].size(); ++i) {
        const auto s = static_cast<std::size_t>(ev.states[t][i]);
        const auto a = static_cast<std::size_t>(ev.actions[t][i]);
        for (std::size_t m = 0; m < M; ++m) {
          table[((m * A + maj) * S + s) * A + a] += rho[m];
        }
        total += 1.0;
      }
      steps += 1.0;
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t m = 0; m < M; ++m) {
        const double* row = Q.data() + (m * A + maj) * M;
        for (std::size_t n = 0; n < M; ++n) next[n] += rho[m] * row[n];
      }
      std::swap(rho, next);
    }
  }
  if (total == 0.0) throw ArgumentError("dataset has no steps after the first");
  IBBatch batch;
  batch.kl_weight = steps / total;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k] <= 0.0) continue;
    IBTriple tr;
    tr.action = static_cast<int>(k % A);
    tr.state = static_cast<int>((k / A) % S);
    tr.majority = static_cast<int>((k / (A * S)) % A);
    tr.m_prev = static_cast<int>(k / (A * S * A));
    tr.weight = table[k] / total;
    batch.triples.push_back(tr);
  }
  // Renormalize so the sum is 1 up to one rounding of the final division.
  double sum = 0.0;
  for (const auto& tr : batch.triples) sum += tr.weight;
  for (auto& tr : batch.triples) tr.weight /= sum;
  return batch;
}

double policy_nll(const ToyModelParams& policy, std::span<const PolicyDatum> data) {
  if (data.empty()) throw ArgumentError("policy_nll needs data");
  double total = 0.0;
  for (const auto& d : data) {
    const int cond[2] = {d.state, d.mean_field};
    total -= toy_logprob(policy, ToyHead::policy, cond, d.action);
  }
  return total / static_cast<double>(data.size());
}

double policy_nll(const GenerativeBackend& policy, std::span<const PolicyDatum> data) {
  if (data.empty()) throw ArgumentError("policy_nll needs data");
  if (!policy.capabilities().supports_logprob) {
    throw CapabilityError("backend " + policy.name() + " exposes no log-probabilities");
  }
  double total = 0.0;
  for (const auto& d : data) {
    GenerationRequest req;
    req.condition = {d.state, d.mean_field};
    const auto lp = policy.logprob(toy::action_text(d.action), req);
    if (!lp) throw CapabilityError("backend " + policy.name() + " returned no log-probability");
    total -= *lp;
  }
  return total / static_cast<double>(data.size());
}

std::vector<double> marginal_prior(const ToyModelParams& prior, std::span<const double> px) {
  if (px.size() != prior.conditions()) throw ArgumentError("pX size does not match the prior's conditions");
  const auto Q = meanfield_probs(prior);
  std::vector<double> r(prior.mean_fields, 0.0);
  for (std::size_t x = 0; x < px.size(); ++x) {
    for (std::size_t m = 0; m < prior.mean_fields; ++m) r[m] += px[x] * Q[x * prior.mean_fields + m];
  }
  return r;
}

double kl_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("KL needs equal lengths");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

double meanfield_loss(const ToyModelParams& mf, const ToyModelParams& prior,
                      const ToyModelParams& policy, const IBBatch& batch, double beta) {
  check_batch_models(mf, prior, policy, batch);
  const std::size_t M = mf.mean_fields;
  const auto r = marginal_prior(prior, batch.x_distribution(M, mf.actions));
  const auto Q = meanfield_probs(mf);
  const auto LQ = meanfield_logprobs(mf);
  const auto LP = policy_logprobs(policy);
  double loss = 0.0;
  for (const auto& t : batch.triples) {
    const std::size_t x = x_index(mf, t);
    double kl = 0.0;
    double expected = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double q = Q[x * M + m];
      kl += q * (LQ[x * M + m] - std::log(r[m]));
      expected += q * LP[policy.policy_index(static_cast<std::size_t>(t.state), m,
                                             static_cast<std::size_t>(t.action))];
    }
    loss += t.weight * (batch.kl_weight * kl - beta * expected);
  }
  return loss;
}

std::vector<double> grad_meanfield_loss(const ToyModelParams& mf, const ToyModelParams& prior,
                                        const ToyModelParams& policy, const IBBatch& batch,
                                        double beta, Exec exec) {
  check_batch_models(mf, prior, policy, batch);
  const std::size_t M = mf.mean_fields;
  const std::size_t X = mf.conditions();
  const auto r = marginal_prior(prior, batch.x_distribution(M, mf.actions));
  std::vector<double> log_r(M);
  for (std::size_t m = 0; m < M; ++m) log_r[m] = std::log(r[m]);
  const auto Q = meanfield_probs(mf);
  const auto LQ = meanfield_logprobs(mf);
  const auto LP = policy_logprobs(policy);
  const auto groups = group_by(batch, X, [&](const IBTriple& t) { return x_index(mf, t); });

  std::vector<double> grad(mf.meanfield_logits.size(), 0.0);
  // Row X: with W = sum of weights, k = kl_weight and L(m) = sum_w log pi(a*|s,m), the row
  // objective is k W KL(q || r) - beta sum_m q_m L(m); its softmax gradient is
  // q_j (g_j - sum_m q_m g_m) with g_m = k W (ln q_m - ln r_m) - beta L(m).
  auto row = [&](std::size_t x) {
    if (groups[x].empty()) return;
    double W = 0.0;
    std::vector<double> L(M, 0.0);
    for (std::size_t i : groups[x]) {
      const auto& t = batch.triples[i];
      W += t.weight;
      for (std::size_t m = 0; m < M; ++m) {
        L[m] += t.weight * LP[policy.policy_index(static_cast<std::size_t>(t.state), m,
                                                  static_cast<std::size_t>(t.action))];
      }
    }
    std::vector<double> g(M);
    double mean = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      g[m] = batch.kl_weight * W * (LQ[x * M + m] - log_r[m]) - beta * L[m];
      mean += Q[x * M + m] * g[m];
    }
    for (std::size_t m = 0; m < M; ++m) grad[x * M + m] = Q[x * M + m] * (g[m] - mean);
  };
  if (exec == Exec::serial) {
    for (std::size_t x = 0; x < X; ++x) row(x);
  } else {
    const auto n = static_cast<std::ptrdiff_t>(X);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t x = 0; x < n; ++x) row(static_cast<std::size_t>(x));
  }
  return grad;
}

double policy_loss(const ToyModelParams& policy, const ToyModelParams& mf, const IBBatch& batch) {
  require_same(policy, mf, "policy vs mean field");
  batch.validate(mf);
  const std::size_t M = mf.mean_fields;
  const auto Q = meanfield_probs(mf);
  const auto LP = policy_logprobs(policy);
  double loss = 0.0;
  for (const auto& t : batch.triples) {
    const std::size_t x = x_index(mf, t);
    double expected = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      expected += Q[x * M + m] * LP[policy.policy_index(static_cast<std::size_t>(t.state), m,
                                                        static_cast<std::size_t>(t.action))];
    }
    loss -= t.weight * expected;
  }
  return loss;
}

std::vector<double> grad_policy_loss(const ToyModelParams& policy, const ToyModelParams& mf,
                                     const IBBatch& batch, Exec exec) {
  require_same(policy, mf, "policy vs mean field");
  batch.validate(mf);
  const std::size_t M = mf.mean_fields;
  const std::size_t A = policy.actions;
  const auto Q = meanfield_probs(mf);
  std::vector<double> P(policy.policy_logits.size());
  for (std::size_t s = 0; s < policy.states; ++s) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto row = tempered_softmax(policy.policy_row(s, m), 1.0);
      std::copy(row.begin(), row.end(), P.begin() + static_cast<std::ptrdiff_t>(policy.policy_index(s, m, 0)));
    }
  }
  const auto groups = group_by(batch, policy.states,
                               [](const IBTriple& t) { return static_cast<std::size_t>(t.state); });
  std::vector<double> grad(policy.policy_logits.size(), 0.0);
  auto state_rows = [&](std::size_t s) {
    for (std::size_t i : groups[s]) {
      const auto& t = batch.triples[i];
      const std::size_t x = x_index(mf, t);
      for (std::size_t m = 0; m < M; ++m) {
        const double w = t.weight * Q[x * M + m];
        const std::size_t base = policy.policy_index(s, m, 0);
        for (std::size_t a = 0; a < A; ++a) grad[base + a] += w * P[base + a];
        grad[base + static_cast<std::size_t>(t.action)] -= w;
      }
    }
  };
  if (exec == Exec::serial) {
    for (std::size_t s = 0; s < policy.states; ++s) state_rows(s);
  } else {
    const auto n = static_cast<std::ptrdiff_t>(policy.states);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t s = 0; s < n; ++s) state_rows(static_cast<std::size_t>(s));
  }
  return grad;
}

std::string TrainCurves::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,meanfield_loss,policy_loss\n";
  for (std::size_t i = 0; i < policy_loss.size(); ++i) {
    out << i << ',';
    if (i < meanfield_loss.size() && meanfield_loss[i]) out << *meanfield_loss[i];
    out << ',' << policy_loss[i] << '\n';
  }
  return out.str();
}

ToyModelParams initial_params(const ToyDataset& data, const IBHyper& hyper) {
  return ToyModelParams::random(data.states, data.actions, hyper.mean_fields, hyper.seed,
                                hyper.init_scale);
}

namespace {

void copy_row_zero(ToyModelParams& p) {
  for (std::size_t s = 0; s < p.states; ++s) {
    for (std::size_t m = 1; m < p.mean_fields; ++m) {
      for (std::size_t a = 0; a < p.actions; ++a) {
        p.policy_logits[p.policy_index(s, m, a)] = p.policy_logits[p.policy_index(s, 0, a)];
      }
    }
  }
}

void check_finite(double v, const char* what, std::size_t iteration) {
  if (!std::isfinite(v)) throw TrainingError(std::string(what) + " diverged", iteration);
}

// Empirical (state, action) frequencies over steps t >= 1, matching the IB batch's support.
std::vector<double> state_action_table(const ToyDataset& data, std::size_t states, std::size_t actions) {
  std::vector<double> table(states * actions, 0.0);
  double total = 0.0;
  for (const auto& ev : data.events) {
    for (std::size_t t = 1; t < ev.actions.size(); ++t) {
      for (std::size_t i = 0; i < ev.actions[t].size(); ++i) {
        table[static_cast<std::size_t>(ev.states[t][i]) * actions +
              static_cast<std::size_t>(ev.actions[t][i])] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) throw ArgumentError("dataset has no steps after the first");
  for (auto& v : table) v /= total;
  return table;
}

// -sum T[s][a] log pi(a|s, m = 0) and its gradient on the m = 0 rows.
double sft_loss(const ToyModelParams& p, const std::vector<double>& table, std::vector<double>* grad) {
  double loss = 0.0;
  for (std::size_t s = 0; s < p.states; ++s) {
    const auto lp = log_softmax(p.policy_row(s, 0));
    double row_weight = 0.0;
    for (std::size_t a = 0; a < p.actions; ++a) {
      const double w = table[s * p.actions + a];
      loss -= w * lp[a];
      row_weight += w;
    }
    if (grad) {
      for (std::size_t a = 0; a < p.actions; ++a) {
        (*grad)[p.policy_index(s, 0, a)] = row_weight * std::exp(lp[a]) - table[s * p.actions + a];
      }
    }
  }
  return loss;
}

}  // namespace

ToyModelParams oracle_params(const SyntheticGenConfig& gen) {
  gen.validate();
  // Zero probabilities become a very negative but finite logit.
  const auto logit = [](double p) { return std::log(std::max(p, 1e-300)); };
  auto p = ToyModelParams::zeros(gen.state_alphabet, gen.action_alphabet, gen.latent_alphabet);
  for (std::size_t s = 0; s < gen.state_alphabet; ++s) {
    for (std::size_t z = 0; z < gen.latent_alphabet; ++z) {
      for (std::size_t a = 0; a < gen.action_alphabet; ++a) {
        p.policy_logits[p.policy_index(s, z, a)] = logit(gen.emission_prob(s, z, a));
      }
    }
  }
  for (std::size_t z = 0; z < gen.latent_alphabet; ++z) {
    for (std::size_t j = 0; j < gen.action_alphabet; ++j) {
      for (std::size_t n = 0; n < gen.latent_alphabet; ++n) {
        p.meanfield_logits[p.meanfield_index(z, j, n)] = logit(gen.transition_prob(z, j, n));
      }
    }
  }
  p.validate();
  return p;
}

TrainResult train_toy(const Corpus& train, const IBHyper& hyper, TrainMode mode,
                      const ToyModelParams* init) {
  hyper.validate();
  const auto data = toy_dataset(train, hyper.batch_size);
  if (data.events.empty()) throw ArgumentError("training corpus is empty");
  TrainResult result;
  if (init) {
    if (init->states < data.states || init->actions < data.actions) {
      throw ArgumentError("initial parameters are smaller than the corpus alphabets");
    }
    result.params = *init;
  } else {
    result.params = initial_params(data, hyper);
  }
  auto& p = result.params;
  const double lr = hyper.learning_rate;

  if (mode != TrainMode::full_ibtune) {
    // The mean-field head is never read in these modes.
    const auto table = state_action_table(data, p.states, p.actions);
    std::vector<double> grad(p.policy_logits.size(), 0.0);
    const std::size_t iters = mode == TrainMode::no_meanfield ? 0 : hyper.iterations;
    for (std::size_t i = 0;; ++i) {
      const double loss = sft_loss(p, table, &grad);
      check_finite(loss, "policy loss", i);
      result.curves.policy_loss.push_back(loss);
      result.curves.meanfield_loss.push_back(std::nullopt);
      if (i == iters) break;
      for (std::size_t k = 0; k < grad.size(); ++k) p.policy_logits[k] -= lr * grad[k];
    }
    copy_row_zero(p);
    return result;
  }

  p.validate();
  const ToyModelParams prior = p;
  for (std::size_t i = 0;; ++i) {
    const auto batch = build_ib_batch(data, p);
    const double mf_loss = meanfield_loss(p, prior, p, batch, hyper.beta);
    const double pol_loss = policy_loss(p, p, batch);
    check_finite(mf_loss, "mean-field loss", i);
    check_finite(pol_loss, "policy loss", i);
    result.curves.meanfield_loss.push_back(mf_loss);
    result.curves.policy_loss.push_back(pol_loss);
    if (i == hyper.iterations) break;
    const auto g_mf = grad_meanfield_loss(p, prior, p, batch, hyper.beta, hyper.exec);
    for (std::size_t k = 0; k < g_mf.size(); ++k) p.meanfield_logits[k] -= lr * g_mf[k];
    const auto g_pol = grad_policy_loss(p, p, batch, hyper.exec);
    for (std::size_t k = 0; k < g_pol.size(); ++k) p.policy_logits[k] -= lr * g_pol[k];
  }
  return result;
}

void JointTable::validate() const {
  if (rows == 0 || cols == 0 || p.size() != rows * cols) throw ArgumentError("joint table shape mismatch");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("joint table entries must be finite and >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("joint table is not normalized");
}

double mutual_information(const JointTable& joint) {
  joint.validate();
  std::vector<double> px(joint.rows, 0.0);
  std::vector<double> pz(joint.cols, 0.0);
  for (std::size_t i = 0; i < joint.rows; ++i) {
    for (std::size_t j = 0; j < joint.cols; ++j) {
      px[i] += joint.p[i * joint.cols + j];
      pz[j] += joint.p[i * joint.cols + j];
    }
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.rows; ++i) {
    for (std::size_t j = 0; j < joint.cols; ++j) {
      const double v = joint.p[i * joint.cols + j];
      if (v > 0.0) mi += v * std::log(v / (px[i] * pz[j]));
    }
  }
  return std::max(mi, 0.0);
}

BoundCheck kl_bound_check(std::span<const double> mu, std::size_t mean_fields,
                          std::span<const double> r, std::span<const double> px) {
  if (mean_fields == 0 || r.size() != mean_fields || mu.size() != px.size() * mean_fields) {
    throw ArgumentError("kl_bound_check: table shapes disagree");
  }
  double total = 0.0;
  for (double v : px) total += v;
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("pX is not normalized");
  JointTable joint{px.size(), mean_fields, std::vector<double>(mu.size())};
  BoundCheck out;
  for (std::size_t x = 0; x < px.size(); ++x) {
    const auto row = mu.subspan(x * mean_fields, mean_fields);
    for (std::size_t m = 0; m < mean_fields; ++m) joint.p[x * mean_fields + m] = px[x] * row[m];
    if (px[x] > 0.0) out.rhs += px[x] * kl_exact(row, r);
  }
  out.lhs = mutual_information(joint);
  return out;
}

BoundCheck kl_bound_check(const ToyModelParams& mf, std::span<const double> r,
                          std::span<const double> px) {
  if (px.size() != mf.conditions()) throw ArgumentError("pX size does not match the mean-field conditions");
  const auto Q = meanfield_probs(mf);
  return kl_bound_check(Q, mf.mean_fields, r, px);
}

}  // namespace mfsim
