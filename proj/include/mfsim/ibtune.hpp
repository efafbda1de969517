#pragma once

// Toy-scale IB-Tune: exact mean-field and policy objectives with analytic gradients,
// full-batch training, and the mutual-information oracles behind the variational bound.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfsim/backends.hpp"
#include "mfsim/corpus.hpp"
#include "mfsim/kernels.hpp"

namespace mfsim {

struct IBTriple {
  int m_prev = 0;    // X, first half: previous mean-field symbol
  int majority = 0;  // X, second half: majority action of the previous step
  int state = 0;
  int action = 0;    // a*
  double weight = 0.0;
  bool operator==(const IBTriple&) const = default;
};

struct IBBatch {
  std::vector<IBTriple> triples;
  // Multiplier on the KL term. 1 charges the KL once per sample; build_ib_batch sets
  // steps / samples so each step's summary is charged once while every agent's action
  // still contributes its own log-likelihood.
  double kl_weight = 1.0;

  /// Throws ArgumentError when weights are not positive, do not sum to 1 within 1e-12, or a
  /// symbol falls outside the model's alphabets.
  void validate(const ToyModelParams& model) const;
  /// Induced distribution over X = (m_prev, majority), flattened as m_prev * actions + majority.
  std::vector<double> x_distribution(std::size_t mean_fields, std::size_t actions) const;
};

struct IBHyper {
  double beta = 2.0;
  double learning_rate = 20.0;
  std::size_t iterations = 300;
  std::uint64_t seed = 0;
  // Std-dev of the initial logits; nonzero so the m-dependence can break symmetry.
  double init_scale = 0.5;
  std::size_t batch_size = 16;
  std::size_t mean_fields = 8;
  Exec exec = Exec::serial;

  void validate() const;
};

enum class TrainMode { full_ibtune, policy_only_sft, no_meanfield };

template <>
struct EnumNames<TrainMode> {
  static constexpr std::array<std::string_view, 3> names{"full_ibtune", "policy_only_sft",
                                                          "no_meanfield"};
};

/// Symbol sequences of a synthetic corpus, grouped into steps of `batch_size` agents.
struct ToyEvent {
  std::vector<std::vector<int>> states;
  std::vector<std::vector<int>> actions;
  std::vector<int> majority;
};

struct ToyDataset {
  std::vector<ToyEvent> events;
  std::size_t states = 0;
  std::size_t actions = 0;
};

/// Throws ArgumentError when an action or profile carries no toy symbol.
ToyDataset toy_dataset(const Corpus& corpus, std::size_t batch_size);

/// Triples for steps t >= 1, X weighted by the forward distribution of m_{t-1} under `mf`
/// driven by the observed majorities (m_0 = symbol 0). Normalized to total weight 1.
IBBatch build_ib_batch(const ToyDataset& data, const ToyModelParams& mf);

struct PolicyDatum {
  int state = 0;
  int mean_field = 0;
  int action = 0;
};

/// Mean negative log-likelihood.
double policy_nll(const ToyModelParams& policy, std::span<const PolicyDatum> data);
/// Throws CapabilityError when the backend exposes no log-probabilities.
double policy_nll(const GenerativeBackend& policy, std::span<const PolicyDatum> data);

/// The X-marginalized prior row: r(m) = sum_X pX(X) softmax(prior row X)(m).
std::vector<double> marginal_prior(const ToyModelParams& prior, std::span<const double> px);

/// sum_w [ kl_weight * KL(mu(.|X) || r) - beta * E_{m ~ mu(.|X)} log pi(a*|s,m) ], exact over m.
double meanfield_loss(const ToyModelParams& mf, const ToyModelParams& prior,
                      const ToyModelParams& policy, const IBBatch& batch, double beta);
/// Gradient with respect to mf.meanfield_logits.
std::vector<double> grad_meanfield_loss(const ToyModelParams& mf, const ToyModelParams& prior,
                                        const ToyModelParams& policy, const IBBatch& batch,
                                        double beta, Exec exec = Exec::serial);

/// -sum_w E_{m ~ mu(.|X)} log pi(a*|s,m): the expected policy NLL on the batch.
double policy_loss(const ToyModelParams& policy, const ToyModelParams& mf, const IBBatch& batch);
/// Gradient with respect to policy.policy_logits.
std::vector<double> grad_policy_loss(const ToyModelParams& policy, const ToyModelParams& mf,
                                     const IBBatch& batch, Exec exec = Exec::serial);

struct TrainCurves {
  // One entry per iteration plus the final state. Empty mean-field values for modes that
  // never touch the mean-field model.
  std::vector<std::optional<double>> meanfield_loss;
  std::vector<double> policy_loss;

  std::string to_csv() const;
};

struct TrainResult {
  ToyModelParams params;
  TrainCurves curves;
};

/// Starting point used by train_toy for this corpus and hyper-parameters.
ToyModelParams initial_params(const ToyDataset& data, const IBHyper& hyper);

/// The generator's own emission and latent transition as toy logits, with the latent as the
/// mean-field symbol.
ToyModelParams oracle_params(const SyntheticGenConfig& gen);

/// Full-batch gradient descent. `init` overrides initial_params (alphabets must match).
/// Throws TrainingError naming the iteration when a loss turns non-finite.
TrainResult train_toy(const Corpus& train, const IBHyper& hyper, TrainMode mode,
                      const ToyModelParams* init = nullptr);

struct JointTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> p;  // row-major

  /// Throws ArgumentError on negative/non-finite entries or a total off 1 by more than 1e-9.
  void validate() const;
};

double mutual_information(const JointTable& joint);

struct BoundCheck {
  double lhs = 0.0;  // I(m; X)
  double rhs = 0.0;  // E_X KL(mu(.|X) || r)
};

/// mu is row-major [x][m]; r and px are distributions over m and x.
BoundCheck kl_bound_check(std::span<const double> mu, std::size_t mean_fields,
                          std::span<const double> r, std::span<const double> px);
BoundCheck kl_bound_check(const ToyModelParams& mf, std::span<const double> r,
                          std::span<const double> px);

/// KL(p || q) in nats with 0 ln 0 = 0; no smoothing.
double kl_exact(std::span<const double> p, std::span<const double> q);

}  // namespace mfsim
