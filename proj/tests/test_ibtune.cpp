#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mfsim/ibtune.hpp"

using namespace mfsim;

namespace {

// Largest |analytic - central difference| / max(|analytic|, |numeric|, floor) over all
// coordinates. The floor keeps coordinates that are zero up to roundoff from dominating.
constexpr double kFdStep = 1e-5;
constexpr double kRelFloor = 1e-6;

template <class Loss>
double worst_fd_error(std::vector<double>& params, const std::vector<double>& analytic, Loss loss) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + kFdStep;
    const double up = loss();
    params[k] = keep - kFdStep;
    const double down = loss();
    params[k] = keep;
    const double fd = (up - down) / (2.0 * kFdStep);
    const double scale = std::max({std::abs(fd), std::abs(analytic[k]), kRelFloor});
    worst = std::max(worst, std::abs(fd - analytic[k]) / scale);
  }
  return worst;
}

struct Fixture {
  ToyDataset data;
  ToyModelParams mf;
  ToyModelParams prior;
  ToyModelParams policy;
  IBBatch batch;
};

Fixture random_fixture(std::uint64_t seed) {
  const auto syn = mfsim::testing::toy_corpus(4, 8, 16, seed);
  Fixture f;
  f.data = toy_dataset(syn.corpus, 16);
  f.mf = ToyModelParams::random(f.data.states, f.data.actions, 5, seed, 1.0);
  f.prior = ToyModelParams::random(f.data.states, f.data.actions, 5, seed + 100, 1.0);
  f.policy = ToyModelParams::random(f.data.states, f.data.actions, 5, seed + 200, 1.0);
  f.batch = build_ib_batch(f.data, f.mf);
  return f;
}

// Two-row toy with |M| = 2, |A| = 2, one state; the single triple sits at X = (0, 0).
ToyModelParams two_by_two() { return ToyModelParams::zeros(1, 2, 2); }

IBBatch single_triple() {
  IBBatch b;
  b.triples.push_back({0, 0, 0, 0, 1.0});
  return b;
}

std::vector<double> row_softmax(std::span<const double> logits) { return tempered_softmax(logits, 1.0); }

}  // namespace

TEST_CASE("policy_nll examples") {
  const auto uniform = ToyModelParams::zeros(1, 4, 1);
  const std::vector<PolicyDatum> d{{0, 0, 1}, {0, 0, 3}, {0, 0, 0}};
  CHECK(policy_nll(uniform, d) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  auto sharp = ToyModelParams::zeros(1, 2, 1);
  sharp.policy_logits = {std::log(0.9), std::log(0.1)};
  const std::vector<PolicyDatum> zeros{{0, 0, 0}, {0, 0, 0}};
  CHECK(policy_nll(sharp, zeros) == doctest::Approx(0.1054).epsilon(1e-3));

  auto two = ToyModelParams::zeros(1, 4, 2);
  for (std::size_t a = 0; a < 4; ++a) two.policy_logits[two.policy_index(0, 0, a)] = a == 0 ? std::log(0.5) : std::log(0.5 / 3);
  const std::vector<PolicyDatum> mixed{{0, 0, 0}, {0, 1, 2}};
  CHECK(policy_nll(two, mixed) == doctest::Approx((std::log(2.0) + std::log(4.0)) / 2).epsilon(1e-12));
  CHECK(policy_nll(two, mixed) == doctest::Approx(1.0397).epsilon(1e-4));

  CHECK_THROWS_AS(policy_nll(uniform, std::vector<PolicyDatum>{}), ArgumentError);
  CHECK_THROWS_AS(policy_nll(*ScriptedBackend::constant("act:0"), d), CapabilityError);
  ToyBackend backend(std::make_shared<ToyModelParams>(uniform), ToyHead::policy);
  CHECK(policy_nll(backend, d) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("meanfield_loss hand-evaluated example") {
  auto mf = two_by_two();
  mf.meanfield_logits[mf.meanfield_index(0, 0, 0)] = std::log(0.75);
  mf.meanfield_logits[mf.meanfield_index(0, 0, 1)] = std::log(0.25);
  const auto prior = two_by_two();  // r = (0.5, 0.5)
  auto policy = two_by_two();
  policy.policy_logits[policy.policy_index(0, 0, 0)] = -0.2;
  policy.policy_logits[policy.policy_index(0, 0, 1)] = std::log(1.0 - std::exp(-0.2));
  policy.policy_logits[policy.policy_index(0, 1, 0)] = -1.0;
  policy.policy_logits[policy.policy_index(0, 1, 1)] = std::log(1.0 - std::exp(-1.0));
  const auto batch = single_triple();

  const double kl = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(kl == doctest::Approx(0.1308).epsilon(1e-3));
  CHECK(meanfield_loss(mf, prior, policy, batch, 2.0) == doctest::Approx(kl + 0.8).epsilon(1e-12));
  CHECK(meanfield_loss(mf, prior, policy, batch, 2.0) == doctest::Approx(0.9308).epsilon(1e-4));
  CHECK(policy_loss(policy, mf, batch) == doctest::Approx(0.4).epsilon(1e-12));

  // mu = r: the KL term vanishes.
  CHECK(meanfield_loss(prior, prior, policy, batch, 2.0) == doctest::Approx(2.0 * 0.6).epsilon(1e-12));

  CHECK_THROWS_AS(meanfield_loss(mf, ToyModelParams::zeros(1, 2, 3), policy, batch, 2.0), ArgumentError);
}

TEST_CASE("mean-field gradient matches central finite differences") {
  for (std::uint64_t seed : {3u, 11u}) {
    auto f = random_fixture(seed);
    f.batch.kl_weight = 0.37;
    const double beta = 2.0;
    const auto g = grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, beta);
    const double err = worst_fd_error(f.mf.meanfield_logits, g, [&] {
      return meanfield_loss(f.mf, f.prior, f.policy, f.batch, beta);
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("policy gradient matches central finite differences") {
  auto f = random_fixture(3);
  const auto g = grad_policy_loss(f.policy, f.mf, f.batch);
  const double err = worst_fd_error(f.policy.policy_logits, g, [&] { return policy_loss(f.policy, f.mf, f.batch); });
  CHECK(err < 1e-4);
}

TEST_CASE("mean-field gradient vanishes at a constructed stationary point") {
  auto f = random_fixture(5);
  // mu rows all equal the prior's (identical) rows; the policy ignores m.
  auto flat = ToyModelParams::zeros(f.mf.states, f.mf.actions, f.mf.mean_fields);
  const auto policy = [&] {
    auto p = ToyModelParams::random(flat.states, flat.actions, flat.mean_fields, 9, 1.0);
    for (std::size_t s = 0; s < p.states; ++s) {
      for (std::size_t m = 1; m < p.mean_fields; ++m) {
        for (std::size_t a = 0; a < p.actions; ++a) p.policy_logits[p.policy_index(s, m, a)] = p.policy_logits[p.policy_index(s, 0, a)];
      }
    }
    return p;
  }();
  const auto g = grad_meanfield_loss(flat, flat, policy, f.batch, 2.0);
  double worst = 0.0;
  for (double v : g) worst = std::max(worst, std::abs(v));
  CHECK(worst < 1e-8);
}

TEST_CASE("adding a constant to one mean-field row leaves the gradient unchanged") {
  auto f = random_fixture(7);
  const auto before = grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, 2.0);
  for (std::size_t m = 0; m < f.mf.mean_fields; ++m) f.mf.meanfield_logits[f.mf.meanfield_index(1, 2, m)] += 3.5;
  const auto after = grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, 2.0);
  for (std::size_t k = 0; k < before.size(); ++k) CHECK(after[k] == doctest::Approx(before[k]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("serial and parallel gradients agree bit for bit") {
  const auto f = random_fixture(13);
  CHECK(grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, 2.0, Exec::serial) ==
        grad_meanfield_loss(f.mf, f.prior, f.policy, f.batch, 2.0, Exec::parallel));
  CHECK(grad_policy_loss(f.policy, f.mf, f.batch, Exec::serial) ==
        grad_policy_loss(f.policy, f.mf, f.batch, Exec::parallel));
}

TEST_CASE("build_ib_batch weights are a distribution over observed triples") {
  const auto f = random_fixture(2);
  f.batch.validate(f.mf);
  double total = 0.0;
  for (const auto& t : f.batch.triples) total += t.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const auto px = f.batch.x_distribution(f.mf.mean_fields, f.mf.actions);
  CHECK(std::accumulate(px.begin(), px.end(), 0.0) == doctest::Approx(1.0));
  IBBatch bad = f.batch;
  bad.triples[0].state = 99;
  CHECK_THROWS_AS(bad.validate(f.mf), ArgumentError);
}

TEST_CASE("train_toy basics") {
  const auto syn = mfsim::testing::toy_corpus(12, 12, 16, 4);
  IBHyper h;
  h.iterations = 0;
  h.seed = 5;
  const auto init = initial_params(toy_dataset(syn.corpus, h.batch_size), h);
  CHECK(train_toy(syn.corpus, h, TrainMode::full_ibtune).params == init);

  h.iterations = 60;
  const auto a = train_toy(syn.corpus, h, TrainMode::full_ibtune);
  const auto b = train_toy(syn.corpus, h, TrainMode::full_ibtune);
  CHECK(a.params == b.params);
  CHECK(a.curves.to_csv() == b.curves.to_csv());
  REQUIRE(a.curves.policy_loss.size() == 61);
  CHECK(a.curves.policy_loss.back() < a.curves.policy_loss.front());

  // Curves smoothed over 10-iteration windows never go up.
  for (const auto* curve : {&a.curves.policy_loss}) {
    std::vector<double> smooth;
    for (std::size_t i = 0; i + 10 <= curve->size(); i += 10) {
      smooth.push_back(std::accumulate(curve->begin() + static_cast<std::ptrdiff_t>(i),
                                       curve->begin() + static_cast<std::ptrdiff_t>(i + 10), 0.0) / 10.0);
    }
    for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1] + 1e-12);
  }
  std::vector<double> mf_curve;
  for (const auto& v : a.curves.meanfield_loss) mf_curve.push_back(*v);
  for (std::size_t i = 10; i + 10 <= mf_curve.size(); i += 10) {
    const auto avg = [&](std::size_t from) {
      return std::accumulate(mf_curve.begin() + static_cast<std::ptrdiff_t>(from),
                             mf_curve.begin() + static_cast<std::ptrdiff_t>(from + 10), 0.0) / 10.0;
    };
    CHECK(avg(i) <= avg(i - 10) + 1e-12);
  }
}

TEST_CASE("policy-only SFT never reads the mean-field head") {
  const auto syn = mfsim::testing::toy_corpus(6, 10, 16, 8);
  IBHyper h;
  h.iterations = 40;
  auto init = initial_params(toy_dataset(syn.corpus, h.batch_size), h);
  const auto a = train_toy(syn.corpus, h, TrainMode::policy_only_sft, &init);
  for (auto& v : init.meanfield_logits) v = -v + 1.0;
  const auto b = train_toy(syn.corpus, h, TrainMode::policy_only_sft, &init);
  CHECK(a.params.policy_logits == b.params.policy_logits);
  CHECK(a.curves.meanfield_loss.front() == std::nullopt);
  CHECK(a.curves.policy_loss.back() < a.curves.policy_loss.front());

  // no_meanfield keeps the untrained policy, with its m = 0 row everywhere.
  const auto c = train_toy(syn.corpus, h, TrainMode::no_meanfield, &init);
  for (std::size_t s = 0; s < c.params.states; ++s) {
    for (std::size_t a2 = 0; a2 < c.params.actions; ++a2) {
      CHECK(c.params.policy_logits[c.params.policy_index(s, 3, a2)] == init.policy_logits[init.policy_index(s, 0, a2)]);
    }
  }
}

TEST_CASE("beta trades compression for prediction") {
  const auto syn = mfsim::testing::toy_corpus(12, 16, 16, 6);
  IBHyper h;
  h.seed = 2;
  h.beta = 1e-6;
  h.iterations = 1000;  // the KL term alone moves slowly (kl_weight is 1/16 here)
  const auto data = toy_dataset(syn.corpus, h.batch_size);
  const auto init = initial_params(data, h);
  const auto small = train_toy(syn.corpus, h, TrainMode::full_ibtune);
  // Against the X-marginalized prior built from the initial model, as the loss sees it.
  const auto batch = build_ib_batch(data, small.params);
  const auto px = batch.x_distribution(init.mean_fields, init.actions);
  const auto r = marginal_prior(init, px);
  const auto check = kl_bound_check(small.params, r, px);
  CHECK(check.rhs < 1e-3);

  h.iterations = 300;
  h.beta = 0.01;
  const auto low = train_toy(syn.corpus, h, TrainMode::full_ibtune);
  h.beta = 50.0;
  const auto high = train_toy(syn.corpus, h, TrainMode::full_ibtune);
  CHECK(high.curves.policy_loss.back() < low.curves.policy_loss.back());
}

TEST_CASE("mutual information examples") {
  CHECK(mutual_information({2, 2, {0.12, 0.28, 0.18, 0.42}}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(mutual_information({2, 2, {0.5, 0.0, 0.0, 0.5}}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const double expect = 2 * 0.4 * std::log(1.6) + 2 * 0.1 * std::log(0.4);
  CHECK(mutual_information({2, 2, {0.4, 0.1, 0.1, 0.4}}) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.1927).epsilon(1e-3));
  CHECK_THROWS_AS(mutual_information({2, 2, {0.4, 0.1, 0.1, 0.3}}), ArgumentError);
  CHECK_THROWS_AS(mutual_information({2, 2, {0.4, 0.1, 0.1}}), ArgumentError);
}

TEST_CASE("variational bound: tight at the marginal, ln 4 for deterministic rows") {
  // Tight: r is the exact marginal of pX * mu.
  const std::vector<double> mu{0.7, 0.2, 0.1, 0.1, 0.3, 0.6, 0.25, 0.25, 0.5};
  const std::vector<double> px{0.2, 0.5, 0.3};
  std::vector<double> r(3, 0.0);
  for (std::size_t x = 0; x < 3; ++x) {
    for (std::size_t m = 0; m < 3; ++m) r[m] += px[x] * mu[x * 3 + m];
  }
  const auto tight = kl_bound_check(mu, 3, r, px);
  CHECK(tight.lhs == doctest::Approx(tight.rhs).epsilon(1e-12));

  // Deterministic mu over |M| = 4 with a uniform r.
  const std::vector<double> onehot{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  const std::vector<double> px3{0.5, 0.25, 0.25};
  const std::vector<double> uniform(4, 0.25);
  const auto det = kl_bound_check(onehot, 4, uniform, px3);
  CHECK(det.rhs == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  // The image of pX is (0.5, 0.25, 0.25, 0).
  const double entropy = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
  CHECK(det.lhs == doctest::Approx(entropy).epsilon(1e-12));
  CHECK(det.lhs <= det.rhs);
}

TEST_CASE("variational bound holds on 200 random tables") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t X = 1 + rng.below(6);
    const std::size_t M = 1 + rng.below(6);
    const auto draw = [&](std::size_t n) {
      std::vector<double> v(n);
      for (auto& x : v) x = rng.uniform() + 1e-3;
      const double s = std::accumulate(v.begin(), v.end(), 0.0);
      for (auto& x : v) x /= s;
      return v;
    };
    std::vector<double> mu;
    for (std::size_t x = 0; x < X; ++x) {
      const auto row = draw(M);
      mu.insert(mu.end(), row.begin(), row.end());
    }
    const auto b = kl_bound_check(mu, M, draw(M), draw(X));
    CHECK(b.lhs <= b.rhs + 1e-9);
  }
}

TEST_CASE("kl_bound_check over model rows") {
  auto mf = ToyModelParams::random(1, 2, 3, 4, 1.0);
  const std::vector<double> px(mf.conditions(), 1.0 / static_cast<double>(mf.conditions()));
  std::vector<double> r(3, 0.0);
  for (std::size_t x = 0; x < mf.conditions(); ++x) {
    const auto row = row_softmax(mf.meanfield_row(x / mf.actions, x % mf.actions));
    for (std::size_t m = 0; m < 3; ++m) r[m] += px[x] * row[m];
  }
  const auto b = kl_bound_check(mf, r, px);
  CHECK(b.lhs == doctest::Approx(b.rhs).epsilon(1e-12));
  CHECK_THROWS_AS(kl_bound_check(mf, r, std::vector<double>{1.0}), ArgumentError);
}

TEST_CASE("oracle parameters reproduce the generator tables") {
  const auto gen = SyntheticGenConfig::self_exciting(1, 2, 2, 0);
  const auto p = oracle_params(gen);
  for (std::size_t s = 0; s < gen.state_alphabet; ++s) {
    for (std::size_t z = 0; z < gen.latent_alphabet; ++z) {
      const auto row = row_softmax(p.policy_row(s, z));
      for (std::size_t a = 0; a < gen.action_alphabet; ++a) CHECK(row[a] == doctest::Approx(gen.emission_prob(s, z, a)).epsilon(1e-12));
    }
  }
}
